//! The auxiliary walk on the apex row, effective jump laws along the first odd row, and the
//! odd/even bulk walks whose Green's functions realize `D⁻¹ = (K*K)⁻¹`.

use std::collections::{BTreeMap, VecDeque};

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kasteleyn::kasteleyn_triplets;
use crate::lattice::{augment_with_mode, AugmentedDomain, CornerMode, Domain, LatticePoint};
use crate::linalg::{c, real_inverse, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuxWalkParams {
    pub z: f64,
    /// Probability of a ±2 step; ±1 steps have probability 1/2 - p.
    pub p: f64,
    pub gamma: f64,
    pub b: f64,
    pub sigma2: f64,
}

pub fn aux_params(z: f64) -> Result<AuxWalkParams> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Validation(format!("z must be positive, got {z}")));
    }
    let p = 1.0 / (2.0 + 2.0 * z * z);
    let s = 0.5 + 1.0 / (4.0 * p);
    let gamma = (s * s - 1.0).sqrt() - s;
    let b = 4.0 * p / ((gamma - 1.0) * (6.0 * p + 1.0) * (2.0 * p * gamma + 1.0));
    Ok(AuxWalkParams { z, p, gamma, b, sigma2: 1.0 + 6.0 * p })
}

impl AuxWalkParams {
    /// `1 - [(1/2 - p)(γ + 1/γ) + p(γ² + 1/γ²)]`
    pub fn gamma_residual(&self) -> f64 {
        let (p, g) = (self.p, self.gamma);
        1.0 - ((0.5 - p) * (g + 1.0 / g) + p * (g * g + 1.0 / (g * g)))
    }

    /// Residual of `p q² + (1/2 - p)(q - 1) = 0` at `q = γ + 1`.
    pub fn shifted_root_residual(&self) -> f64 {
        let q = self.gamma + 1.0;
        self.p * q * q + (0.5 - self.p) * (q - 1.0)
    }

    /// α₁ from the one-step recursion.
    pub fn alpha1_recursion(&self) -> f64 {
        1.0 / ((1.0 + 2.0 * self.p * self.gamma) * (1.0 - self.gamma))
    }

    /// Smallest `k` with `|γ|^k < 1e-14`.
    pub fn tail_cutoff(&self) -> usize {
        (1e-14f64.ln() / self.gamma.abs().ln()).ceil() as usize
    }
}

/// Potential kernel α_k of the auxiliary walk, normalized by α₀ = 0.
pub fn potential_kernel_1d(k: i64, params: &AuxWalkParams) -> f64 {
    let k = k.unsigned_abs() as i32;
    k as f64 / params.sigma2 - params.b + params.b * params.gamma.powi(k)
}

/// `q_k` for `k = 0..=k_max`.
///
/// For `k >= 1` the second difference of α is evaluated in the closed form
/// `-b γ^{k-1} (1 - γ)²`; the linear parts cancel exactly and subtracting them in floating point
/// would leave O(1e-14) noise on the geometric tail.
pub fn effective_jump_weights(z: f64, k_max: usize) -> Result<Vec<f64>> {
    let prm = aux_params(z)?;
    let scale = 0.5 - prm.p;
    let q0 = scale * 2.0 * potential_kernel_1d(1, &prm);
    let lead = -scale * prm.b * (1.0 - prm.gamma).powi(2);
    let g = prm.gamma.abs();
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(q0);
    let mut pow = 1.0;
    for _ in 1..=k_max {
        out.push(lead * pow);
        pow *= g;
    }
    Ok(out)
}

/// `q_0 + 2 Σ_{k=1}^{k_max} q_k`
pub fn jump_mass(q: &[f64]) -> f64 {
    q[0] + 2.0 * q[1..].iter().sum::<f64>()
}

/// Sparse `D = K*K` accumulated from the Kasteleyn triplets.
pub fn d_entries(aug: &AugmentedDomain) -> Result<BTreeMap<(usize, usize), C64>> {
    let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); aug.len()];
    for (i, j, v) in kasteleyn_triplets(aug)? {
        rows[i].push((j, v));
    }
    let mut d = BTreeMap::new();
    for row in &rows {
        // D(u,v) = Σ_w conj(K(w,u)) K(w,v)
        for &(u, ku) in row {
            for &(v, kv) in row {
                *d.entry((u, v)).or_insert(c(0.0)) += ku.conj() * kv;
            }
        }
    }
    Ok(d)
}

/// Dense real block of `D` on the given index lists; fails if an entry is not real.
fn real_block(d: &BTreeMap<(usize, usize), C64>, rows: &[usize], cols: &[usize]) -> Result<Mat<f64>> {
    let col_pos: BTreeMap<usize, usize> = cols.iter().enumerate().map(|(j, &v)| (v, j)).collect();
    let mut m = Mat::<f64>::zeros(rows.len(), cols.len());
    for (i, &r) in rows.iter().enumerate() {
        for ((_, cc), val) in d.range((r, 0)..(r + 1, 0)) {
            if let Some(&j) = col_pos.get(cc) {
                if val.im.abs() > 1e-12 {
                    return Err(Error::Numerical(format!("D({r},{cc}) is not real: {val}")));
                }
                m[(i, j)] = val.re;
            }
        }
    }
    Ok(m)
}

/// Index sets of the augmented graph by row type.
#[derive(Clone, Debug)]
pub struct RowSets {
    /// y = -1
    pub apex: Vec<usize>,
    /// odd rows y >= 1
    pub odd: Vec<usize>,
    /// y = 1
    pub first_odd: Vec<usize>,
    /// even rows y >= 0
    pub even: Vec<usize>,
}

pub fn row_sets(aug: &AugmentedDomain) -> RowSets {
    let v = aug.vertices();
    let pick = |f: &dyn Fn(LatticePoint) -> bool| (0..v.len()).filter(|&i| f(v[i])).collect::<Vec<_>>();
    RowSets {
        apex: pick(&|p| p.y == -1),
        odd: pick(&|p| p.y >= 1 && !p.in_even_row()),
        first_odd: pick(&|p| p.y == 1),
        even: pick(&|p| p.y >= 0 && p.in_even_row()),
    }
}

/// Green's function `g^N` of the walk on the apex row with steps `|A(x,y)|/A(x,x)`.
#[derive(Clone, Debug)]
pub struct BoundaryRowGreen {
    pub apex: Vec<LatticePoint>,
    /// `D` restricted to the apex row.
    pub a: Mat<f64>,
    /// `g[(i, j)]` = expected visits to apex `j` from apex `i`.
    pub g: Mat<f64>,
}

pub fn boundary_row_green(aug: &AugmentedDomain) -> Result<BoundaryRowGreen> {
    let d = d_entries(aug)?;
    let rs = row_sets(aug);
    let a = real_block(&d, &rs.apex, &rs.apex)?;
    let n = rs.apex.len();
    let lap = Mat::<f64>::from_fn(n, n, |i, j| if i == j { 1.0 } else { -a[(i, j)].abs() / a[(i, i)] });
    let g = real_inverse(lap.as_ref())?;
    Ok(BoundaryRowGreen { apex: rs.apex.iter().map(|&i| aug.vertices()[i]).collect(), a, g })
}

impl BoundaryRowGreen {
    /// `A⁻¹(u,v)` rebuilt as `(-1)^{Re(u-v)} g(u,v) / A(v,v)`.
    pub fn signed_inverse(&self) -> Mat<f64> {
        let n = self.apex.len();
        Mat::<f64>::from_fn(n, n, |i, j| {
            let s = if (self.apex[i].x - self.apex[j].x).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            s * self.g[(i, j)] / self.a[(j, j)]
        })
    }

    fn pos(&self, x: i64) -> Option<usize> {
        self.apex.iter().position(|p| p.x == x)
    }

    /// Jump weight between first-odd-row vertices at columns `u` and `v` through the apices
    /// at distance two below each of them.
    pub fn jump_weight(&self, z: f64, u: i64, v: i64) -> Option<f64> {
        let (um, up) = (self.pos(u)?, self.pos(u + 1)?);
        let (vm, vp) = (self.pos(v)?, self.pos(v + 1)?);
        let g = |a: usize, b: usize| self.g[(a, b)] / self.a[(b, b)];
        let sign = if (v - u).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        Some(z * z * sign * ((g(up, vp) - g(up, vm)) - (g(um, vp) - g(um, vm))))
    }
}

/// Schur complement of the apex block in the odd principal block of `D`.
#[derive(Clone, Debug)]
pub struct OddSchur {
    pub states: Vec<LatticePoint>,
    /// `C`: D restricted to odd rows y >= 1.
    pub c: Mat<f64>,
    /// `BᵀA⁻¹B` on the same states (nonzero only on the first odd row).
    pub q: Mat<f64>,
    /// `D/A = C - BᵀA⁻¹B`
    pub schur: Mat<f64>,
    /// max |(D/A)⁻¹ - (D_odd)⁻¹ restricted|
    pub residual: f64,
    /// `(D/A)⁻¹`
    pub schur_inverse: Mat<f64>,
}

/// `m - bᵀ a⁻¹ b` for dense blocks.
pub fn schur_complement(a: &Mat<f64>, b: &Mat<f64>, m: &Mat<f64>) -> Result<Mat<f64>> {
    let ainv = real_inverse(a.as_ref()).map_err(|_| Error::Numerical("apex block is singular".into()))?;
    let corr = b.transpose() * (&ainv * b);
    Ok(m - &corr)
}

pub fn odd_schur(aug: &AugmentedDomain) -> Result<OddSchur> {
    let d = d_entries(aug)?;
    let rs = row_sets(aug);
    let a = real_block(&d, &rs.apex, &rs.apex)?;
    let b = real_block(&d, &rs.apex, &rs.odd)?;
    let cm = real_block(&d, &rs.odd, &rs.odd)?;
    let ainv = real_inverse(a.as_ref())?;
    let q = b.transpose() * (&ainv * &b);
    let schur = &cm - &q;
    let schur_inverse = real_inverse(schur.as_ref())?;
    let mut all = rs.apex.clone();
    all.extend(&rs.odd);
    let full = real_block(&d, &all, &all)?;
    let full_inv = real_inverse(full.as_ref())?;
    let na = rs.apex.len();
    let mut residual: f64 = 0.0;
    for i in 0..rs.odd.len() {
        for j in 0..rs.odd.len() {
            residual = residual.max((schur_inverse[(i, j)] - full_inv[(na + i, na + j)]).abs());
        }
    }
    Ok(OddSchur {
        states: rs.odd.iter().map(|&i| aug.vertices()[i]).collect(),
        c: cm,
        q,
        schur,
        residual,
        schur_inverse,
    })
}

/// Substochastic transition law with a cemetery absorbing the row deficit.
#[derive(Clone, Debug, Serialize)]
pub struct WalkKernel {
    pub states: Vec<LatticePoint>,
    pub transitions: Vec<Vec<(usize, f64)>>,
    /// `D(v,v)` for each state.
    pub normalizer: Vec<f64>,
}

impl WalkKernel {
    pub fn cemetery_mass(&self, i: usize) -> f64 {
        1.0 - self.transitions[i].iter().map(|(_, p)| p).sum::<f64>()
    }

    pub fn index_of(&self, p: LatticePoint) -> Option<usize> {
        self.states.iter().position(|s| *s == p)
    }

    pub fn probability(&self, from: usize, to: usize) -> f64 {
        self.transitions[from].iter().filter(|(j, _)| *j == to).map(|(_, p)| p).sum()
    }

    fn check(&self) -> Result<()> {
        for (i, row) in self.transitions.iter().enumerate() {
            if let Some((j, p)) = row.iter().find(|(_, p)| *p < -1e-13) {
                return Err(Error::Numerical(format!(
                    "negative transition {:?} -> {:?}: {p:e}",
                    self.states[i], self.states[*j]
                )));
            }
            if self.cemetery_mass(i) < -1e-12 {
                return Err(Error::Numerical(format!("row {:?} sums above 1", self.states[i])));
            }
        }
        if !(0..self.states.len()).any(|i| self.cemetery_mass(i) > 1e-12) {
            return Err(Error::Numerical("kernel has no absorption".into()));
        }
        Ok(())
    }
}

/// `R_N = I - (D/A)/diag(C)` on the odd rows `y >= 1`.
pub fn odd_walk_kernel(aug: &AugmentedDomain) -> Result<WalkKernel> {
    let s = odd_schur(aug)?;
    kernel_from_laplacian(&s.states, &s.schur, &s.c, aug.n_side())
}

fn kernel_from_laplacian(states: &[LatticePoint], lap: &Mat<f64>, diag: &Mat<f64>, n: usize) -> Result<WalkKernel> {
    let m = states.len();
    let mut transitions = Vec::with_capacity(m);
    let mut normalizer = Vec::with_capacity(m);
    for i in 0..m {
        let cii = diag[(i, i)];
        let mut row = Vec::new();
        for j in 0..m {
            let r = if i == j { 1.0 - lap[(i, i)] / cii } else { -lap[(i, j)] / cii };
            if r.abs() > 1e-15 {
                if r < -1e-13 {
                    return Err(Error::NeedLargerN {
                        n,
                        detail: format!("R({:?},{:?}) = {r:e}", states[i], states[j]),
                    });
                }
                row.push((j, r.max(0.0)));
            }
        }
        transitions.push(row);
        normalizer.push(cii);
    }
    let k = WalkKernel { states: states.to_vec(), transitions, normalizer };
    for i in 0..m {
        if k.cemetery_mass(i) < -1e-12 {
            return Err(Error::NeedLargerN { n, detail: format!("row {:?} sums above 1", states[i]) });
        }
    }
    k.check()?;
    Ok(k)
}

/// Even walk `|D(x,y)|/D(x,x)` on even rows `y >= 0` of the augmented graph.
pub fn even_walk_kernel(aug: &AugmentedDomain) -> Result<WalkKernel> {
    let d = d_entries(aug)?;
    let rs = row_sets(aug);
    let block = real_block(&d, &rs.even, &rs.even)?;
    let states: Vec<LatticePoint> = rs.even.iter().map(|&i| aug.vertices()[i]).collect();
    // S⁻¹DS with S = (-1)^x must have nonpositive off-diagonal entries
    for i in 0..states.len() {
        for j in 0..states.len() {
            if i != j && block[(i, j)] != 0.0 {
                let s = if (states[i].x - states[j].x).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                if s * block[(i, j)] > 1e-12 {
                    return Err(Error::Numerical(format!(
                        "sign pattern of D fails at {:?},{:?}",
                        states[i], states[j]
                    )));
                }
            }
        }
    }
    let lap = Mat::<f64>::from_fn(states.len(), states.len(), |i, j| {
        if i == j {
            block[(i, i)]
        } else {
            -block[(i, j)].abs()
        }
    });
    kernel_from_laplacian(&states, &lap, &block, aug.n_side())
}

fn absorption_reachable(kernel: &WalkKernel, from: usize) -> bool {
    let mut seen = vec![false; kernel.states.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(i) = queue.pop_front() {
        if kernel.cemetery_mass(i) > 1e-14 {
            return true;
        }
        for &(j, p) in &kernel.transitions[i] {
            if p > 0.0 && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    false
}

/// Normalized Green's function column `G(·, v) = E_·[visits to v] / D(v,v)` by a sparse solve.
pub fn green_column(kernel: &WalkKernel, v: usize) -> Result<Vec<f64>> {
    let n = kernel.states.len();
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push(Triplet::new(i, i, 1.0));
        for &(j, p) in &kernel.transitions[i] {
            trip.push(Triplet::new(i, j, -p));
        }
    }
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::Numerical(format!("sparse assembly: {e:?}")))?;
    let lu = m.sp_lu().map_err(|_| Error::Divergence(v))?;
    let mut rhs = Mat::<f64>::zeros(n, 1);
    rhs[(v, 0)] = 1.0;
    let x = lu.solve(&rhs);
    Ok((0..n).map(|i| x[(i, 0)] / kernel.normalizer[v]).collect())
}

pub fn green(kernel: &WalkKernel, u: usize, v: usize) -> Result<f64> {
    if !absorption_reachable(kernel, u) {
        return Err(Error::Divergence(u));
    }
    Ok(green_column(kernel, v)?[u])
}

/// All-pairs normalized Green's function by dense inversion.
pub fn green_matrix(kernel: &WalkKernel) -> Result<Mat<f64>> {
    let n = kernel.states.len();
    for u in 0..n {
        if !absorption_reachable(kernel, u) {
            return Err(Error::Divergence(u));
        }
    }
    let mut lap = Mat::<f64>::identity(n, n);
    for i in 0..n {
        for &(j, p) in &kernel.transitions[i] {
            lap[(i, j)] -= p;
        }
    }
    let inv = real_inverse(lap.as_ref())?;
    Ok(Mat::<f64>::from_fn(n, n, |i, j| inv[(i, j)] / kernel.normalizer[j]))
}

/// Residuals of the random-walk representation of `D⁻¹` on the base domain.
#[derive(Clone, Debug, Serialize)]
pub struct RwReport {
    pub n_side: usize,
    /// max over base pairs in different row parity of |D⁻¹(u,v)|
    pub mixed_max: f64,
    /// max over odd base pairs of |D⁻¹(u,v) - G_odd(u,v)|
    pub odd_max: f64,
    /// max over even base pairs of |D⁻¹(u,v) - (-1)^{Re(u-v)} G_even(u,v)|
    pub even_max: f64,
    /// same comparisons with the inverses of the principal parity blocks of D
    pub odd_block_max: f64,
    pub even_block_max: f64,
}

impl RwReport {
    pub fn max_residual(&self) -> f64 {
        self.mixed_max.max(self.odd_max).max(self.even_max)
    }
}

pub fn verify_rw_representation(aug: &AugmentedDomain) -> Result<RwReport> {
    let d = d_entries(aug)?;
    let n = aug.len();
    let mut dm = crate::linalg::CMat::zeros(n, n);
    for (&(i, j), v) in &d {
        dm[(i, j)] = *v;
    }
    let dinv = crate::linalg::inverse(dm.as_ref())?;
    let rs = row_sets(aug);
    let base = aug.base();
    let in_base = |i: usize| base.contains(aug.vertices()[i]);

    let odd_k = odd_walk_kernel(aug)?;
    let g_odd = green_matrix(&odd_k)?;
    let even_k = even_walk_kernel(aug)?;
    let g_even = green_matrix(&even_k)?;

    let odd_block = real_block(&d, &rs.odd, &rs.odd)?;
    let _ = odd_block;
    let mut all_odd = rs.apex.clone();
    all_odd.extend(&rs.odd);
    let odd_full = real_inverse(real_block(&d, &all_odd, &all_odd)?.as_ref())?;
    let even_full = real_inverse(real_block(&d, &rs.even, &rs.even)?.as_ref())?;
    let na = rs.apex.len();

    let mut rep = RwReport {
        n_side: aug.n_side(),
        mixed_max: 0.0,
        odd_max: 0.0,
        even_max: 0.0,
        odd_block_max: 0.0,
        even_block_max: 0.0,
    };
    let upd = |m: &mut f64, v: f64| *m = m.max(v);
    for (a, &u) in rs.odd.iter().enumerate() {
        if !in_base(u) {
            continue;
        }
        for (b, &v) in rs.odd.iter().enumerate() {
            if !in_base(v) {
                continue;
            }
            upd(&mut rep.odd_max, (dinv[(u, v)] - c(g_odd[(a, b)])).norm());
            upd(&mut rep.odd_block_max, (odd_full[(na + a, na + b)] - g_odd[(a, b)]).abs());
        }
        for &v in &rs.even {
            if in_base(v) {
                upd(&mut rep.mixed_max, dinv[(u, v)].norm().max(dinv[(v, u)].norm()));
            }
        }
    }
    for (a, &u) in rs.even.iter().enumerate() {
        if !in_base(u) {
            continue;
        }
        for (b, &v) in rs.even.iter().enumerate() {
            if !in_base(v) {
                continue;
            }
            let s = if (aug.vertices()[u].x - aug.vertices()[v].x).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let table = s * g_even[(a, b)];
            upd(&mut rep.even_max, (dinv[(u, v)] - c(table)).norm());
            upd(&mut rep.even_block_max, (even_full[(a, b)] - table).abs());
        }
    }
    Ok(rep)
}

/// `q^N` on the first odd row as `BᵀA⁻¹B`, keyed by column pairs.
pub fn finite_jump_table(aug: &AugmentedDomain) -> Result<BTreeMap<(i64, i64), f64>> {
    let s = odd_schur(aug)?;
    let mut out = BTreeMap::new();
    for (i, u) in s.states.iter().enumerate() {
        if u.y != 1 {
            continue;
        }
        for (j, v) in s.states.iter().enumerate() {
            if v.y == 1 {
                out.insert((u.x, v.x), s.q[(i, j)]);
            }
        }
    }
    Ok(out)
}

/// `q^N_{u,v}` for first-odd-row columns `u`, `v`, from the apex-row Green's function.
pub fn finite_jump_weights(aug: &AugmentedDomain, u: i64, v: i64) -> Result<f64> {
    let base = aug.base();
    for x in [u, v] {
        if !base.contains(LatticePoint::new(x, 1)) {
            return Err(Error::Validation(format!("({x},1) is not in the first odd row")));
        }
    }
    let g = boundary_row_green(aug)?;
    g.jump_weight(aug.z(), u, v)
        .ok_or_else(|| Error::Validation("apex neighbours missing".into()))
}

/// Smallest `N`, starting from `4|V_0(G)|` and doubling, at which every `q^N` entry is
/// positive and every first-odd-row sum is below one.
pub fn adaptive_threshold(domain: &Domain, z: f64, cap: usize) -> Result<usize> {
    let mut n = 4 * domain.free_boundary().len();
    loop {
        let aug = augment_with_mode(domain, z, n, CornerMode::FiniteN)?;
        let table = finite_jump_table(&aug)?;
        let positive = table.values().all(|&q| q > 0.0);
        let mut sums: BTreeMap<i64, f64> = BTreeMap::new();
        for (&(u, _), &q) in &table {
            *sums.entry(u).or_default() += q;
        }
        if positive && sums.values().all(|&s| s < 1.0) {
            return Ok(n);
        }
        if n >= cap {
            return Err(Error::NeedLargerN { n, detail: "positivity not reached below the cap".into() });
        }
        n *= 2;
    }
}

/// `max_{u,v} |q^N_{u,v} - q^∞_{|u-v|}|` over the first odd row, finite-N corners.
pub fn jump_convergence(domain: &Domain, z: f64, n_side: usize) -> Result<f64> {
    let aug = augment_with_mode(domain, z, n_side, CornerMode::FiniteN)?;
    let table = finite_jump_table(&aug)?;
    let span = table.keys().map(|(u, v)| (u - v).unsigned_abs()).max().unwrap_or(0) as usize;
    let q = effective_jump_weights(z, span + 1)?;
    Ok(table
        .iter()
        .map(|(&(u, v), &qn)| (qn - q[(u - v).unsigned_abs() as usize]).abs())
        .fold(0.0, f64::max))
}

/// `max |(g(u,v) - g(u',v)) + (α(v-u) - α(v-u'))|` over apex columns in `[-r, r]` around the
/// middle of the row, for the apex-row Green's function at side length `n_side`.
pub fn green_difference_convergence(domain: &Domain, z: f64, n_side: usize, r: i64) -> Result<f64> {
    let aug = augment_with_mode(domain, z, n_side, CornerMode::FiniteN)?;
    let g = boundary_row_green(&aug)?;
    let prm = aux_params(z)?;
    let mid = (g.apex[0].x + g.apex[g.apex.len() - 1].x) / 2;
    let pos = |x: i64| g.apex.iter().position(|p| p.x == x).unwrap();
    let mut worst: f64 = 0.0;
    for u in -r..=r {
        for up in -r..=r {
            for v in -r..=r {
                let (iu, iup, iv) = (pos(mid + u), pos(mid + up), pos(mid + v));
                let lhs = g.g[(iu, iv)] - g.g[(iup, iv)];
                let rhs = potential_kernel_1d(v - u, &prm) - potential_kernel_1d(v - up, &prm);
                worst = worst.max((lhs + rhs).abs());
            }
        }
    }
    Ok(worst)
}
