//! Infinite-volume potential kernel of the effective walks, the coupling function
//! `C = -A K*`, and the continuum formulas they converge to.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kasteleyn::InverseKasteleyn;
use crate::lattice::{augment, build_rectangle_domain, AugmentedDomain, Colour, Domain, EdgeKind, LatticePoint};
use crate::linalg::{c, C64, I};
use crate::walks::d_entries;

/// Kasteleyn entry `K(u, v)` of the infinite half-plane graph with its triangle row, or `None`
/// when `u`, `v` are not adjacent. Apex `(j, -1)` sits at `j - 1/2` and is joined to the tops
/// `(j - 1, 0)` and `(j, 0)`.
pub fn half_plane_entry(u: LatticePoint, v: LatticePoint, z: f64) -> Option<C64> {
    let (dx, dy) = (v.x - u.x, v.y - u.y);
    match (u.y, v.y) {
        (-1, -1) => match dx {
            1 => Some(c(1.0)),
            -1 => Some(c(-1.0)),
            _ => None,
        },
        (0, -1) if dx == 0 || dx == 1 => Some(I * z),
        (-1, 0) if dx == 0 || dx == -1 => Some(-I * z),
        (a, b) if a >= 0 && b >= 0 => match (dx, dy) {
            // conj(v - u)
            (1, 0) => Some(c(1.0)),
            (-1, 0) => Some(c(-1.0)),
            (0, 1) => Some(-I),
            (0, -1) => Some(I),
            _ => None,
        },
        _ => None,
    }
}

/// Quadrature on `[-π, π]`: 20-point Gauss–Legendre panels graded geometrically towards the
/// singular frequencies 0 and ±π, uniform of width `1/scale` elsewhere.
pub fn frequency_quadrature(scale: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(NonZeroUsize::new(20).unwrap());
    let mut breaks = vec![0.0];
    let mut h = 1e-9;
    while h < 0.05 {
        breaks.push(h);
        h *= 2.0;
    }
    let width = 1.0 / scale.max(10) as f64;
    let n = ((PI / 2.0 - 0.05) / width).ceil() as usize;
    for i in 0..=n {
        breaks.push(0.05 + (PI / 2.0 - 0.05) * i as f64 / n as f64);
    }
    let mut panels: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).collect();
    let quarter = panels.len();
    for i in 0..quarter {
        let (a, b) = panels[i];
        panels.push((PI - b, PI - a));
    }
    let half = panels.len();
    for i in 0..half {
        let (a, b) = panels[i];
        panels.push((-b, -a));
    }
    let mut nodes = Vec::with_capacity(panels.len() * 20);
    let mut weights = Vec::with_capacity(panels.len() * 20);
    for (a, b) in panels {
        for (x, w) in rule.iter() {
            nodes.push(0.5 * (b - a) * x + 0.5 * (a + b));
            weights.push(0.5 * (b - a) * w);
        }
    }
    (nodes, weights)
}

/// Exact `K⁻¹` of the half-plane graph by Fourier transform in the horizontal direction.
/// For each frequency the transformed operator is tridiagonal in the row index, closed at
/// the top row by the decaying bulk solution.
#[derive(Clone, Debug)]
pub struct HalfPlaneKernel {
    z: f64,
    top_row: i64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// per node, row-major blocks of `rows` entries
    diag: Vec<C64>,
    up: Vec<C64>,
    down: Vec<C64>,
}

fn symbol(theta: f64, z: f64, rows: usize) -> (Vec<C64>, Vec<C64>, Vec<C64>) {
    let s = theta.sin();
    let e = C64::from_polar(1.0, theta);
    let mut a = vec![I * (2.0 * s); rows];
    let mut sup = vec![-I; rows - 1];
    let mut sub = vec![I; rows - 1];
    sub[0] = I * z * (c(1.0) + e);
    sup[0] = -I * z * (e.conj() + c(1.0));
    let lambda = s - s.signum() * (1.0 + s * s).sqrt();
    a[rows - 1] -= I * lambda;
    (a, sup, sub)
}

impl HalfPlaneKernel {
    /// Kernel valid for rows `-1..=top_row`; `scale` is the largest horizontal separation
    /// of interest.
    pub fn new(z: f64, top_row: i64, scale: usize) -> Result<Self> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Validation(format!("z must be positive, got {z}")));
        }
        if top_row < 1 {
            return Err(Error::Validation("top row must be at least 1".into()));
        }
        let rows = (top_row + 2) as usize;
        let (nodes, weights) = frequency_quadrature(scale.max(rows));
        let per_node: Vec<(Vec<C64>, Vec<C64>, Vec<C64>)> = nodes
            .par_iter()
            .map(|&t| {
                let (a, b, cc) = symbol(t, z, rows);
                let mut dl = vec![c(0.0); rows];
                let mut dr = vec![c(0.0); rows];
                dl[0] = a[0];
                for i in 1..rows {
                    dl[i] = a[i] - cc[i - 1] * b[i - 1] / dl[i - 1];
                }
                dr[rows - 1] = a[rows - 1];
                for i in (0..rows - 1).rev() {
                    dr[i] = a[i] - b[i] * cc[i] / dr[i + 1];
                }
                let diag: Vec<C64> = (0..rows).map(|j| c(1.0) / (dl[j] + dr[j] - a[j])).collect();
                // up[i] = Π_{k<i} (-b_k / dl_k), down[i] = Π_{1<=k<=i} (-c_{k-1} / dr_k)
                let mut up = vec![c(1.0); rows];
                let mut down = vec![c(1.0); rows];
                for i in 1..rows {
                    up[i] = up[i - 1] * (-b[i - 1] / dl[i - 1]);
                    down[i] = down[i - 1] * (-cc[i - 1] / dr[i]);
                }
                (diag, up, down)
            })
            .collect();
        let mut diag = Vec::with_capacity(nodes.len() * rows);
        let mut up = Vec::with_capacity(nodes.len() * rows);
        let mut down = Vec::with_capacity(nodes.len() * rows);
        for (d, u, w) in per_node {
            diag.extend(d);
            up.extend(u);
            down.extend(w);
        }
        Ok(Self { z, top_row, nodes, weights, diag, up, down })
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn top_row(&self) -> i64 {
        self.top_row
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn rows(&self) -> usize {
        (self.top_row + 2) as usize
    }

    /// Inverse of the transformed operator at node `n`, rows `i`, `j` (0 = apex row).
    fn symbol_inverse(&self, n: usize, i: usize, j: usize) -> C64 {
        let o = n * self.rows();
        if i == j {
            self.diag[o + j]
        } else if i < j {
            self.diag[o + j] * self.up[o + j] / self.up[o + i]
        } else {
            self.diag[o + j] * self.down[o + i] / self.down[o + j]
        }
    }

    /// `K⁻¹[u, v]`.
    pub fn kinv(&self, u: LatticePoint, v: LatticePoint) -> Result<C64> {
        for p in [u, v] {
            if p.y < -1 || p.y > self.top_row {
                return Err(Error::Validation(format!("row {} outside -1..={}", p.y, self.top_row)));
            }
        }
        let (i, j) = ((u.y + 1) as usize, (v.y + 1) as usize);
        let dx = (u.x - v.x) as f64;
        let mut acc = c(0.0);
        for n in 0..self.nodes.len() {
            acc += self.symbol_inverse(n, i, j) * C64::from_polar(self.weights[n], self.nodes[n] * dx);
        }
        Ok(acc / (2.0 * PI))
    }

    /// Coupling function `C(u, v) = K⁻¹[v, u]`.
    pub fn coupling(&self, u: LatticePoint, v: LatticePoint) -> Result<C64> {
        self.kinv(v, u)
    }

    /// Symbol inverse as a dense matrix, for checks.
    pub fn symbol_inverse_matrix(&self, theta: f64) -> Mat<C64> {
        let rows = self.rows();
        let (a, b, cc) = symbol(theta, self.z, rows);
        let m = Mat::<C64>::from_fn(rows, rows, |i, j| {
            if i == j {
                a[i]
            } else if j == i + 1 {
                b[i]
            } else if i == j + 1 {
                cc[j]
            } else {
                c(0.0)
            }
        });
        crate::linalg::inverse(m.as_ref()).unwrap_or_else(|_| Mat::zeros(rows, rows))
    }
}

/// Where each argument of the coupling function lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VertexType {
    WhiteOdd,
    WhiteEven,
    BlackEven,
    BlackOdd,
}

impl VertexType {
    pub fn of(p: LatticePoint) -> Self {
        match (p.colour(), p.in_even_row()) {
            (Colour::White, false) => Self::WhiteOdd,
            (Colour::White, true) => Self::WhiteEven,
            (Colour::Black, true) => Self::BlackEven,
            (Colour::Black, false) => Self::BlackOdd,
        }
    }

    pub fn row_sign(self) -> i32 {
        match self {
            Self::WhiteOdd | Self::BlackOdd => -1,
            _ => 1,
        }
    }

    pub const ALL: [VertexType; 4] = [Self::WhiteOdd, Self::WhiteEven, Self::BlackEven, Self::BlackOdd];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Derivative {
    Horizontal,
    Vertical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Block {
    Odd,
    Even,
}

/// `factor × (discrete derivative in the second argument) of A_block`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stencil {
    pub derivative: Derivative,
    pub factor: C64,
    pub block: Block,
}

/// Cell of the case-by-case table for `C(v1, v2)`.
pub fn coupling_table(v1: VertexType, v2: VertexType) -> Stencil {
    use VertexType::*;
    let block = match v1 {
        WhiteOdd | BlackOdd => Block::Odd,
        WhiteEven | BlackEven => Block::Even,
    };
    let horizontal = matches!(
        (v1, v2),
        (WhiteOdd | BlackOdd, WhiteOdd | BlackOdd) | (WhiteEven | BlackEven, WhiteEven | BlackEven)
    );
    if horizontal {
        Stencil { derivative: Derivative::Horizontal, factor: c(1.0), block }
    } else {
        Stencil { derivative: Derivative::Vertical, factor: I, block }
    }
}

/// The same cell read off the single algebraic formula in the row signs.
pub fn master_stencil(s1: i32, s2: i32) -> Stencil {
    let (s1f, prod) = (s1 as f64, (s1 * s2) as f64);
    let hx = (1.0 + prod) / 2.0;
    let hy = (1.0 - prod) / 2.0;
    let odd = (1.0 - s1f) / 2.0;
    let block = if odd > 0.5 { Block::Odd } else { Block::Even };
    if hx > 0.5 {
        Stencil { derivative: Derivative::Horizontal, factor: c(hx), block }
    } else {
        Stencil { derivative: Derivative::Vertical, factor: I * hy, block }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClassPair {
    Same,
    Different,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CouplingFunctionValue {
    pub u: LatticePoint,
    pub v: LatticePoint,
    pub value: C64,
    pub class_pair: ClassPair,
    pub row_signs: (i32, i32),
}

fn class_pair(u: LatticePoint, v: LatticePoint) -> ClassPair {
    if u.colour() == v.colour() {
        ClassPair::Same
    } else {
        ClassPair::Different
    }
}

/// `C(u, v) = -Σ_x D⁻¹(u, x) conj(K(v, x))` on a finite augmented graph, from its dense inverse.
pub fn coupling_function(aug: &AugmentedDomain, inv: &InverseKasteleyn, u: usize, v: usize) -> Result<CouplingFunctionValue> {
    if u == v {
        return Err(Error::Validation("coupling function needs distinct vertices".into()));
    }
    let mut value = c(0.0);
    for &(x, _) in aug.neighbours(v) {
        value -= inv.dinv[(u, x)] * inv.k.get(v, x).conj();
    }
    let (pu, pv) = (aug.vertices()[u], aug.vertices()[v]);
    Ok(CouplingFunctionValue {
        u: pu,
        v: pv,
        value,
        class_pair: class_pair(pu, pv),
        row_signs: (pu.row_sign(), pv.row_sign()),
    })
}

/// Same quantity from the half-plane kernel.
pub fn coupling_function_half_plane(kernel: &HalfPlaneKernel, u: LatticePoint, v: LatticePoint) -> Result<CouplingFunctionValue> {
    if u == v {
        return Err(Error::Validation("coupling function needs distinct vertices".into()));
    }
    Ok(CouplingFunctionValue {
        u,
        v,
        value: kernel.coupling(u, v)?,
        class_pair: class_pair(u, v),
        row_signs: (u.row_sign(), v.row_sign()),
    })
}

/// Continuum limit of `C(z, w)` at mesh `delta`.
pub fn scaling_prediction(z: C64, w: C64, same_class: bool, row_signs: (i32, i32), delta: f64) -> Result<C64> {
    if (z - w).norm() == 0.0 {
        return Err(Error::Validation("coincident points".into()));
    }
    if z.im <= 0.0 || w.im <= 0.0 {
        return Err(Error::Validation("points must lie in the upper half-plane".into()));
    }
    let (sz, sw) = (row_signs.0 as f64, row_signs.1 as f64);
    let k = delta / (2.0 * PI);
    Ok(if same_class {
        k * (sz / (z - w.conj()) + sw / (z.conj() - w))
    } else {
        -k * (sz * sw / (z - w) + c(1.0) / (z.conj() - w.conj()))
    })
}

/// Continuum limit of `a(x', y) - a(x, y)` for points in lattice units.
pub fn pk_prediction(x: C64, xp: C64, y: C64, same_class: bool) -> f64 {
    if same_class {
        2.0 / PI * ((xp - x) / (x - y)).re
    } else {
        2.0 / PI * ((xp - x) / (x - y.conj())).re
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialKernelEstimate {
    pub x: LatticePoint,
    pub x_prime: LatticePoint,
    pub y: LatticePoint,
    /// Extrapolated `a(x', y) - a(x, y)`.
    pub value: f64,
    pub box_radius_schedule: Vec<usize>,
    pub per_radius: Vec<f64>,
    pub extrapolation_error: f64,
}

/// Box `Λ_R`: columns `-R..=R`, rows `0..=R` (rounded up to odd sizes), notch at the top
/// right so that the odd walk is killed on the left of the top and the even walk on the right.
pub fn box_domain(radius: usize) -> Result<Domain> {
    let w = 2 * radius + 1;
    let h = radius | 1;
    let d = build_rectangle_domain(w, h)?;
    let shift = radius as i64;
    let pts: Vec<LatticePoint> = d.vertices().iter().map(|p| p.offset(-shift, 0)).collect();
    Domain::from_vertices(&pts)
}

/// Expected visits to `y` of the non-lazy effective walk started anywhere in the box, from a
/// sparse Cholesky solve on the parity block of `D` containing `y`.
pub fn box_green_column(aug: &AugmentedDomain, y: LatticePoint) -> Result<Vec<(LatticePoint, f64)>> {
    let d = d_entries(aug)?;
    let odd = !y.in_even_row();
    let keep: Vec<usize> = (0..aug.len())
        .filter(|&i| {
            let p = aug.vertices()[i];
            if odd {
                !p.in_even_row()
            } else {
                p.in_even_row() && p.y >= 0
            }
        })
        .collect();
    let mut pos = vec![usize::MAX; aug.len()];
    for (k, &i) in keep.iter().enumerate() {
        pos[i] = k;
    }
    let mut trip = Vec::new();
    for (&(i, j), v) in &d {
        if pos[i] != usize::MAX && pos[j] != usize::MAX && pos[j] <= pos[i] {
            trip.push(Triplet::new(pos[i], pos[j], v.re));
        }
    }
    let n = keep.len();
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::Numerical(format!("sparse assembly: {e:?}")))?;
    let chol = m
        .sp_cholesky(Side::Lower)
        .map_err(|_| Error::Numerical("parity block of D is not positive definite".into()))?;
    let yi = aug.index_of(y).ok_or_else(|| Error::Validation(format!("{y:?} not in the box")))?;
    let mut rhs = Mat::<f64>::zeros(n, 1);
    rhs[(pos[yi], 0)] = 1.0;
    let col = chol.solve(&rhs);
    let dyy = d[&(yi, yi)].re;
    Ok(keep
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let p = aug.vertices()[i];
            let sign = if odd || (p.x - y.x).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            (p, sign * col[(k, 0)] * dyy)
        })
        .collect())
}

fn admissible(x: LatticePoint, xp: LatticePoint) -> bool {
    let (dx, dy) = ((xp.x - x.x).abs(), (xp.y - x.y).abs());
    (dx + dy == 2 && (dx == 0 || dy == 0)) || (x.y == 0 && xp.y == 0 && dx == 1)
}

/// `a(x', y) - a(x, y)` from Green differences in boxes of the given radii, extrapolated
/// assuming an error linear in `1/R`.
pub fn potential_kernel_2d(
    x: LatticePoint,
    xp: LatticePoint,
    y: LatticePoint,
    z: f64,
    schedule: &[usize],
) -> Result<PotentialKernelEstimate> {
    if x == xp {
        return Ok(PotentialKernelEstimate {
            x,
            x_prime: xp,
            y,
            value: 0.0,
            box_radius_schedule: schedule.to_vec(),
            per_radius: vec![0.0; schedule.len()],
            extrapolation_error: 0.0,
        });
    }
    if !admissible(x, xp) {
        return Err(Error::Validation(format!("{x:?}, {xp:?} are not an admissible pair")));
    }
    if x.in_even_row() != y.in_even_row() {
        return Err(Error::Validation("x and y must lie in rows of the same parity".into()));
    }
    if schedule.is_empty() {
        return Err(Error::Validation("empty radius schedule".into()));
    }
    let per_radius: Vec<f64> = schedule
        .par_iter()
        .map(|&r| -> Result<f64> {
            let aug = augment(&box_domain(r)?, z, 0)?;
            let col = box_green_column(&aug, y)?;
            let find = |p: LatticePoint| {
                col.iter()
                    .find(|(q, _)| *q == p)
                    .map(|(_, g)| *g)
                    .ok_or_else(|| Error::Validation(format!("{p:?} outside the box of radius {r}")))
            };
            Ok(-(find(xp)? - find(x)?))
        })
        .collect::<Result<_>>()?;
    let last = *per_radius.last().unwrap();
    let (value, err) = if per_radius.len() >= 2 {
        let (r0, r1) = (schedule[schedule.len() - 2] as f64, schedule[schedule.len() - 1] as f64);
        let v0 = per_radius[per_radius.len() - 2];
        // v(R) = v + c/R
        let v = (r1 * last - r0 * v0) / (r1 - r0);
        (v, (v - last).abs())
    } else {
        (last, f64::NAN)
    };
    Ok(PotentialKernelEstimate {
        x,
        x_prime: xp,
        y,
        value,
        box_radius_schedule: schedule.to_vec(),
        per_radius,
        extrapolation_error: err,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PkScalingReport {
    pub delta: f64,
    pub measured: f64,
    pub predicted: f64,
    pub abs_err: f64,
    /// abs_err relative to the previous (coarser) mesh, if any.
    pub ratio: Option<f64>,
}

/// Compares box potential-kernel differences with the continuum formula at each mesh size.
/// `x`, `y` are macroscopic points; `direction` is the unit step `e1` or `e2` for `x' = x + 2δe`.
pub fn pk_scaling_check(
    x: C64,
    y: C64,
    direction: (i64, i64),
    deltas: &[f64],
    rho: f64,
    z: f64,
    radius_factor: f64,
) -> Result<Vec<PkScalingReport>> {
    if x.im.min(y.im) < rho {
        return Err(Error::Validation(format!("points must be at height at least {rho}")));
    }
    let mut out: Vec<PkScalingReport> = Vec::new();
    for &delta in deltas {
        let lx = LatticePoint::new((x.re / delta).round() as i64, (x.im / delta).round() as i64);
        let ly = LatticePoint::new((y.re / delta).round() as i64, (y.im / delta).round() as i64);
        let lxp = lx.offset(2 * direction.0, 2 * direction.1);
        let r = ((radius_factor / delta).round() as usize).max(8);
        let est = potential_kernel_2d(lx, lxp, ly, z, &[r, 2 * r])?;
        let to_c = |p: LatticePoint| C64::new(p.x as f64, p.y as f64);
        let predicted = pk_prediction(to_c(lx), to_c(lxp), to_c(ly), lx.colour() == ly.colour());
        let abs_err = (est.value - predicted).abs();
        let ratio = out.last().map(|prev| abs_err / prev.abs_err);
        out.push(PkScalingReport { delta, measured: est.value, predicted, abs_err, ratio });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct IsoradialReport {
    pub z: f64,
    pub z_squared: f64,
    pub horizontal_one: f64,
    pub other: f64,
    pub p: f64,
    pub row_sum: f64,
}

/// Even-walk transition weights at the critical isoradial weight `z² = tan(π/8)`.
pub fn isoradial_sanity() -> Result<IsoradialReport> {
    let z = (PI / 8.0).tan().sqrt();
    let aug = augment(&build_rectangle_domain(9, 5)?, z, 0)?;
    let k = crate::walks::even_walk_kernel(&aug)?;
    let i = k.index_of(LatticePoint::new(4, 0)).ok_or_else(|| Error::Numerical("missing state".into()))?;
    let j = k.index_of(LatticePoint::new(5, 0)).unwrap();
    let l = k.index_of(LatticePoint::new(6, 0)).unwrap();
    Ok(IsoradialReport {
        z,
        z_squared: z * z,
        horizontal_one: k.probability(i, j),
        other: k.probability(i, l),
        p: crate::walks::aux_params(z)?.p,
        row_sum: 1.0 - k.cemetery_mass(i),
    })
}

/// All lattice edges of the half-plane incident to `v` with `K(v, w)`.
pub fn half_plane_neighbours(v: LatticePoint, z: f64) -> Vec<(LatticePoint, C64)> {
    let mut out = Vec::new();
    for dy in -1..=1i64 {
        for dx in -1..=1i64 {
            let w = v.offset(dx, dy);
            if w.y >= -1 {
                if let Some(k) = half_plane_entry(v, w, z) {
                    out.push((w, k));
                }
            }
        }
    }
    out
}

/// Kind of a half-plane edge, for callers that separate lattice dimers from boundary legs.
pub fn half_plane_edge_kind(u: LatticePoint, v: LatticePoint) -> Option<EdgeKind> {
    match (u.y, v.y) {
        (-1, -1) => Some(EdgeKind::ApexRow),
        (-1, _) | (_, -1) => Some(EdgeKind::Leg),
        _ => Some(EdgeKind::Lattice),
    }
}
