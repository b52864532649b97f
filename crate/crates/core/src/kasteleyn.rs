//! Kasteleyn orientation, the gauge-changed Kasteleyn matrix, Pfaffians and dimer correlations.
//!
//! Coupling convention: `C(u, v)` is the `(v, u)` entry of the matrix inverse of `K`, so that a
//! single edge has probability `K(u, v) C(u, v)`.

use std::io::Write;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::lattice::{AugmentedDomain, EdgeKind, LatticePoint};
use crate::linalg::{adjoint, c, inverse, max_abs_diff, CMat, C64, I};

/// Above this many vertices inverses are computed column by column from a sparse LU.
pub const DENSE_LIMIT: usize = 2000;

/// Edge `e` is oriented from `tail[e]` to `head[e]`.
#[derive(Clone, Debug)]
pub struct Orientation {
    pub tail: Vec<usize>,
    pub head: Vec<usize>,
}

/// Complex antisymmetric matrix indexed by an explicit vertex order.
#[derive(Clone, Debug)]
pub struct SkewMatrix {
    order: Vec<LatticePoint>,
    entries: CMat,
}

impl SkewMatrix {
    pub fn new(order: Vec<LatticePoint>, entries: CMat) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n || order.len() != n {
            return Err(Error::Validation("skew matrix shape does not match its order".into()));
        }
        for i in 0..n {
            if entries[(i, i)] != c(0.0) {
                return Err(Error::Validation(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if entries[(i, j)] != -entries[(j, i)] {
                    return Err(Error::Validation(format!("entries ({i},{j}) and ({j},{i}) are not opposite")));
                }
            }
        }
        Ok(Self { order, entries })
    }

    pub fn order(&self) -> &[LatticePoint] {
        &self.order
    }

    pub fn entries(&self) -> MatRef<'_, C64> {
        self.entries.as_ref()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }
}

fn points(aug: &AugmentedDomain, e: usize) -> (LatticePoint, LatticePoint) {
    let edge = aug.edges()[e];
    (aug.vertices()[edge.u], aug.vertices()[edge.v])
}

/// Vertical edges and legs point down; horizontal edges point right in odd rows (including the
/// apex row) and left in even rows.
pub fn orient(aug: &AugmentedDomain) -> Result<Orientation> {
    let mut tail = Vec::with_capacity(aug.edges().len());
    let mut head = Vec::with_capacity(aug.edges().len());
    for (e, edge) in aug.edges().iter().enumerate() {
        let (a, b) = points(aug, e);
        let (t, h) = if a.y != b.y {
            if a.y > b.y {
                (edge.u, edge.v)
            } else {
                (edge.v, edge.u)
            }
        } else {
            let (l, r) = if a.x < b.x { (edge.u, edge.v) } else { (edge.v, edge.u) };
            if a.in_even_row() {
                (r, l)
            } else {
                (l, r)
            }
        };
        tail.push(t);
        head.push(h);
    }
    let orientation = Orientation { tail, head };
    check_faces(aug, &orientation)?;
    Ok(orientation)
}

/// Bounded faces as counterclockwise vertex cycles: unit squares and the triangles of the apex row.
pub fn bounded_faces(aug: &AugmentedDomain) -> Vec<Vec<usize>> {
    let idx = |p: LatticePoint| aug.index_of(p);
    let mut faces = Vec::new();
    for p in aug.vertices() {
        if p.y >= 0 {
            let cyc = [*p, p.offset(1, 0), p.offset(1, 1), p.offset(0, 1)];
            if let Some(f) = cyc.iter().map(|q| idx(*q)).collect::<Option<Vec<_>>>() {
                faces.push(f);
            }
        } else {
            // apex j and j+1 with top j between them (pointing down), then top j, j+1 over apex j+1
            let down = [*p, p.offset(1, 0), LatticePoint::new(p.x, 0)];
            if let Some(f) = down.iter().map(|q| idx(*q)).collect::<Option<Vec<_>>>() {
                faces.push(f);
            }
            let up = [*p, LatticePoint::new(p.x, 0), LatticePoint::new(p.x - 1, 0)];
            if let Some(f) = up.iter().map(|q| idx(*q)).collect::<Option<Vec<_>>>() {
                faces.push(f);
            }
        }
    }
    faces
}

/// Each bounded face must have an odd number of edges oriented clockwise.
pub fn check_faces(aug: &AugmentedDomain, o: &Orientation) -> Result<()> {
    for face in bounded_faces(aug) {
        let mut clockwise = 0;
        for i in 0..face.len() {
            let (a, b) = (face[i], face[(i + 1) % face.len()]);
            let e = aug
                .edge_between(a, b)
                .ok_or_else(|| Error::Numerical(format!("face edge {:?}-{:?} missing", aug.vertices()[a], aug.vertices()[b])))?;
            if o.tail[e] == b {
                clockwise += 1;
            }
        }
        if clockwise % 2 == 0 {
            let pts: Vec<LatticePoint> = face.iter().map(|&v| aug.vertices()[v]).collect();
            return Err(Error::Numerical(format!("Kasteleyn face condition fails on face {pts:?}")));
        }
    }
    Ok(())
}

fn gauge(p: LatticePoint) -> u32 {
    u32::from(p.in_even_row())
}

fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => c(1.0),
        1 => I,
        2 => c(-1.0),
        _ => -I,
    }
}

/// Entry `K(tail, head)` for edge `e`; `K(head, tail)` is its negative.
fn oriented_entry(aug: &AugmentedDomain, o: &Orientation, e: usize) -> C64 {
    let (t, h) = (aug.vertices()[o.tail[e]], aug.vertices()[o.head[e]]);
    i_pow(gauge(t) + gauge(h)) * aug.edges()[e].weight
}

/// Triplets `(row, col, value)` of `K`, both triangles.
pub fn kasteleyn_triplets(aug: &AugmentedDomain) -> Result<Vec<(usize, usize, C64)>> {
    let o = orient(aug)?;
    let mut out = Vec::with_capacity(2 * aug.edges().len());
    for e in 0..aug.edges().len() {
        let val = oriented_entry(aug, &o, e);
        out.push((o.tail[e], o.head[e], val));
        out.push((o.head[e], o.tail[e], -val));
    }
    Ok(out)
}

pub fn kasteleyn_matrix(aug: &AugmentedDomain) -> Result<SkewMatrix> {
    let n = aug.len();
    let mut m = CMat::zeros(n, n);
    for (i, j, v) in kasteleyn_triplets(aug)? {
        m[(i, j)] += v;
    }
    SkewMatrix::new(aug.vertices().to_vec(), m)
}

/// Pfaffian by skew-symmetric elimination with partial pivoting.
pub fn pfaffian(m: MatRef<'_, C64>) -> Result<C64> {
    let n = m.nrows();
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    if n == 0 {
        return Ok(c(1.0));
    }
    let mut a: Vec<C64> = (0..n * n).map(|k| m[(k / n, k % n)]).collect();
    let at = |a: &Vec<C64>, i: usize, j: usize| a[i * n + j];
    let mut pf = c(1.0);
    let mut k = 0;
    while k + 1 < n {
        let mut p = k + 1;
        let mut best = at(&a, k + 1, k).norm();
        for i in k + 2..n {
            let v = at(&a, i, k).norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if p != k + 1 {
            for j in 0..n {
                a.swap((k + 1) * n + j, p * n + j);
            }
            for i in 0..n {
                a.swap(i * n + k + 1, i * n + p);
            }
            pf = -pf;
        }
        let piv = at(&a, k, k + 1);
        if piv == c(0.0) {
            return Ok(c(0.0));
        }
        pf *= piv;
        if k + 2 < n {
            let rk: Vec<C64> = (k + 2..n).map(|j| at(&a, k, j)).collect();
            let rk1: Vec<C64> = (k + 2..n).map(|j| at(&a, k + 1, j)).collect();
            let inv = c(1.0) / piv;
            for (ii, i) in (k + 2..n).enumerate() {
                let (x, y) = (rk[ii] * inv, rk1[ii] * inv);
                let row = &mut a[i * n..(i + 1) * n];
                for (jj, j) in (k + 2..n).enumerate() {
                    row[j] -= x * rk1[jj] - y * rk[jj];
                }
            }
        }
        k += 2;
    }
    Ok(pf)
}

/// Weighted count of monomer-dimer covers, `|Pf K|`, with the phase of `Pf K` alongside.
pub fn partition_function(aug: &AugmentedDomain) -> Result<(f64, C64)> {
    let k = kasteleyn_matrix(aug)?;
    let pf = pfaffian(k.entries())?;
    let z = pf.norm();
    let phase = if z > 0.0 { pf / z } else { c(1.0) };
    Ok((z, phase))
}

/// `K*K`.
pub fn d_matrix(k: MatRef<'_, C64>) -> CMat {
    adjoint(k) * k
}

/// Dense inverse of `K` together with the cross-check against `D⁻¹K*`.
#[derive(Clone, Debug)]
pub struct InverseKasteleyn {
    pub k: SkewMatrix,
    pub kinv: CMat,
    pub d: CMat,
    pub dinv: CMat,
    /// max |K⁻¹ - D⁻¹K*|
    pub cross_check: f64,
    /// max |K K⁻¹ - I|
    pub residual: f64,
}

impl InverseKasteleyn {
    /// `C(u, v)`: the `(v, u)` entry of `K⁻¹`.
    pub fn coupling(&self, u: usize, v: usize) -> C64 {
        self.kinv[(v, u)]
    }

    pub fn edge_probability(&self, u: usize, v: usize) -> f64 {
        (self.k.get(u, v) * self.coupling(u, v)).re
    }
}

pub fn inverse_kasteleyn(aug: &AugmentedDomain) -> Result<InverseKasteleyn> {
    if aug.len() > DENSE_LIMIT {
        return Err(Error::Validation(format!(
            "{} vertices exceed the dense limit {DENSE_LIMIT}; use SparseKasteleyn",
            aug.len()
        )));
    }
    let k = kasteleyn_matrix(aug)?;
    let kinv = inverse(k.entries())?;
    let d = d_matrix(k.entries());
    let llt = d.llt(Side::Lower).map_err(|_| Error::NoDimerCover)?;
    let dinv = llt.inverse();
    let second = &dinv * adjoint(k.entries());
    let cross_check = max_abs_diff(kinv.as_ref(), second.as_ref());
    let prod = k.entries() * &kinv;
    let residual = max_abs_diff(prod.as_ref(), CMat::identity(aug.len(), aug.len()).as_ref());
    if residual > 1e-10 || cross_check > 1e-8 {
        return Err(Error::Numerical(format!("inverse residual {residual:e}, cross-check {cross_check:e}")));
    }
    Ok(InverseKasteleyn { k, kinv, d, dinv, cross_check, residual })
}

/// Sparse LU of `K` for graphs too large to invert densely.
pub struct SparseKasteleyn {
    lu: faer::sparse::linalg::solvers::Lu<usize, C64>,
    n: usize,
}

impl SparseKasteleyn {
    pub fn new(aug: &AugmentedDomain) -> Result<Self> {
        Self::from_triplets(aug.len(), &kasteleyn_triplets(aug)?)
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, C64)]) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, C64>> = triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let m = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::Numerical(format!("sparse assembly: {e:?}")))?;
        let lu = m.sp_lu().map_err(|_| Error::NoDimerCover)?;
        Ok(Self { lu, n })
    }

    /// Column `v` of `K⁻¹`.
    pub fn column(&self, v: usize) -> Vec<C64> {
        let mut rhs = Mat::<C64>::zeros(self.n, 1);
        rhs[(v, 0)] = c(1.0);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// Probability that every listed edge is in the cover; each edge given as (white, black)
/// vertex indices.
pub fn joint_dimer_probability(inv: &InverseKasteleyn, edges: &[(usize, usize)]) -> Result<f64> {
    let verts = edge_vertices(edges)?;
    let sub = coupling_submatrix(inv, &verts);
    let a_e: C64 = edges.iter().map(|&(w, b)| inv.k.get(w, b)).product();
    let val = a_e * pfaffian(sub.as_ref())?;
    if val.im.abs() > 1e-9 {
        return Err(Error::Numerical(format!("joint probability has imaginary part {:e}", val.im)));
    }
    Ok(val.re)
}

fn edge_vertices(edges: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut verts = Vec::with_capacity(2 * edges.len());
    for &(w, b) in edges {
        verts.push(w);
        verts.push(b);
    }
    let mut sorted = verts.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::Validation("edges share a vertex".into()));
    }
    Ok(verts)
}

fn coupling_submatrix(inv: &InverseKasteleyn, verts: &[usize]) -> CMat {
    CMat::from_fn(verts.len(), verts.len(), |i, j| if i == j { c(0.0) } else { inv.coupling(verts[i], verts[j]) })
}

/// Sign of the permutation listing the matched pairs in order.
pub fn matching_sign(pairs: &[(usize, usize)]) -> f64 {
    let seq: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let mut inversions = 0;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Perfect matchings of `0..2k` avoiding the pairs `(2i, 2i+1)`.
pub fn restricted_matchings(k: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(free: &mut Vec<usize>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let a = free.remove(0);
        for idx in 0..free.len() {
            let b = free[idx];
            if a / 2 == b / 2 {
                continue;
            }
            free.remove(idx);
            cur.push((a, b));
            rec(free, cur, out);
            cur.pop();
            free.insert(idx, b);
        }
        free.insert(0, a);
    }
    let mut out = Vec::new();
    rec(&mut (0..2 * k).collect(), &mut Vec::new(), &mut out);
    out
}

/// `E[Π (1{e_i ∈ M} - P(e_i ∈ M))]` as a signed sum over matchings that never pair an
/// edge's own endpoints.
pub fn truncated_correlation(inv: &InverseKasteleyn, edges: &[(usize, usize)]) -> Result<f64> {
    let verts = edge_vertices(edges)?;
    let sub = coupling_submatrix(inv, &verts);
    let a_e: C64 = edges.iter().map(|&(w, b)| inv.k.get(w, b)).product();
    let mut sum = c(0.0);
    for m in restricted_matchings(edges.len()) {
        let term: C64 = m.iter().map(|&(a, b)| sub[(a, b)]).product();
        sum += term * matching_sign(&m);
    }
    let val = a_e * sum;
    if val.im.abs() > 1e-9 {
        return Err(Error::Numerical(format!("truncated correlation has imaginary part {:e}", val.im)));
    }
    Ok(val.re)
}

/// Same quantity by inclusion-exclusion over joint probabilities.
pub fn truncated_correlation_by_inclusion(inv: &InverseKasteleyn, edges: &[(usize, usize)]) -> Result<f64> {
    let k = edges.len();
    let single: Vec<f64> = edges.iter().map(|&(w, b)| inv.edge_probability(w, b)).collect();
    let mut total = 0.0;
    for mask in 0u32..(1 << k) {
        let chosen: Vec<(usize, usize)> = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| edges[i]).collect();
        let joint = if chosen.is_empty() { 1.0 } else { joint_dimer_probability(inv, &chosen)? };
        let rest: f64 = (0..k).filter(|i| mask >> i & 1 == 0).map(|i| -single[i]).product();
        total += joint * rest;
    }
    Ok(total)
}

/// Σ over k-cycles σ of Π 1/(x_i - x_σ(i)); vanishes for even k > 2.
pub fn cyclic_cancellation(points: &[C64]) -> Result<C64> {
    let k = points.len();
    if k < 2 {
        return Err(Error::Validation("need at least two points".into()));
    }
    for i in 0..k {
        for j in 0..i {
            if points[i] == points[j] {
                return Err(Error::Validation(format!("points {j} and {i} coincide")));
            }
        }
    }
    // cycles (0 a1 a2 ... a_{k-1}) over permutations of 1..k
    let mut rest: Vec<usize> = (1..k).collect();
    let mut total = c(0.0);
    fn permute(rest: &mut Vec<usize>, l: usize, points: &[C64], total: &mut C64) {
        if l == rest.len() {
            let mut prod = c(1.0);
            let mut prev = 0;
            for &r in rest.iter() {
                prod /= points[prev] - points[r];
                prev = r;
            }
            prod /= points[prev] - points[0];
            *total += prod;
            return;
        }
        for i in l..rest.len() {
            rest.swap(l, i);
            permute(rest, l + 1, points, total);
            rest.swap(l, i);
        }
    }
    permute(&mut rest, 0, points, &mut total);
    Ok(total)
}

/// Writes nonzero entries with header `row_x,row_y,col_x,col_y,re,im`. Apex vertices are written
/// with their integer column index.
pub fn write_matrix_csv<W: Write>(out: W, order: &[LatticePoint], m: MatRef<'_, C64>, threshold: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row_x", "row_y", "col_x", "col_y", "re", "im"])?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v.norm() > threshold {
                w.write_record(&[
                    order[i].x.to_string(),
                    order[i].y.to_string(),
                    order[j].x.to_string(),
                    order[j].y.to_string(),
                    format!("{:.17e}", v.re),
                    format!("{:.17e}", v.im),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Edges of the graph grouped by kind, handy for probability tables.
pub fn edges_of_kind(aug: &AugmentedDomain, kind: EdgeKind) -> Vec<usize> {
    (0..aug.edges().len()).filter(|&e| aug.edges()[e].kind == kind).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{augment, build_rectangle_domain, enumerate_perfect_matchings};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_skew(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        m
    }

    #[test]
    fn small_pfaffians() {
        let a = C64::new(0.3, -2.0);
        let m = CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => a,
            (1, 0) => -a,
            _ => c(0.0),
        });
        assert!((pfaffian(m.as_ref()).unwrap() - a).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_skew(4, &mut rng);
        let want = m[(0, 1)] * m[(2, 3)] - m[(0, 2)] * m[(1, 3)] + m[(0, 3)] * m[(1, 2)];
        assert!((pfaffian(m.as_ref()).unwrap() - want).norm() < 1e-14);
        assert!(matches!(pfaffian(CMat::zeros(3, 3).as_ref()), Err(Error::OddDimension(3))));
        assert_eq!(pfaffian(CMat::zeros(4, 4).as_ref()).unwrap(), c(0.0));
    }

    #[test]
    fn pfaffian_squared_is_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in (2..=40).step_by(2) {
            let m = random_skew(n, &mut rng);
            let pf = pfaffian(m.as_ref()).unwrap();
            let det = m.determinant();
            assert!((pf * pf - det).norm() <= 1e-9 * det.norm(), "n={n}");
        }
    }

    #[test]
    fn interior_boundary_weights() {
        let d = build_rectangle_domain(7, 5).unwrap();
        let z = 0.8;
        let aug = augment(&d, z, 0).unwrap();
        let k = kasteleyn_matrix(&aug).unwrap();
        let x = aug.index_of(LatticePoint::new(3, 0)).unwrap();
        let at = |p: LatticePoint| k.get(x, aug.index_of(p).unwrap());
        // counterclockwise from vertical: up, left, lower-left leg, lower-right leg, right
        let want = [-I, c(-1.0), I * z, I * z, c(1.0)];
        let got = [
            at(LatticePoint::new(3, 1)),
            at(LatticePoint::new(2, 0)),
            at(LatticePoint::new(3, -1)),
            at(LatticePoint::new(4, -1)),
            at(LatticePoint::new(4, 0)),
        ];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).norm() < 1e-15, "{got:?}");
        }
    }

    #[test]
    fn lattice_entries_are_conjugate_displacements() {
        let d = build_rectangle_domain(5, 5).unwrap();
        let aug = augment(&d, 1.0, 0).unwrap();
        let k = kasteleyn_matrix(&aug).unwrap();
        for e in aug.edges().iter().filter(|e| e.kind != EdgeKind::Leg) {
            let (a, b) = (aug.vertices()[e.u], aug.vertices()[e.v]);
            let disp = C64::new((b.x - a.x) as f64, (b.y - a.y) as f64);
            assert_eq!(k.get(e.u, e.v), disp.conj());
        }
    }

    #[test]
    fn faces_pass() {
        for (w, h) in [(3, 3), (5, 5), (7, 3), (9, 7)] {
            let d = build_rectangle_domain(w, h).unwrap();
            for n in [0, 1, 4] {
                let aug = crate::lattice::augment_with_mode(&d, 1.0, n, crate::lattice::CornerMode::FiniteN).unwrap();
                let o = orient(&aug).unwrap();
                let faces = bounded_faces(&aug);
                let squares = faces.iter().filter(|f| f.len() == 4).count();
                let triangles = faces.len() - squares;
                // triangle row has k + 4n triangles
                assert_eq!(triangles, aug.k() + 4 * n);
                check_faces(&aug, &o).unwrap();
            }
        }
    }

    #[test]
    fn flipped_edge_breaks_face_condition() {
        let d = build_rectangle_domain(3, 3).unwrap();
        let aug = augment(&d, 1.0, 0).unwrap();
        let mut o = orient(&aug).unwrap();
        std::mem::swap(&mut o.tail[0], &mut o.head[0]);
        assert!(check_faces(&aug, &o).is_err());
    }

    #[test]
    fn partition_function_matches_enumeration() {
        for (w, h) in [(3, 3), (5, 3), (3, 5)] {
            for z in [0.7, 1.3] {
                let aug = augment(&build_rectangle_domain(w, h).unwrap(), z, 0).unwrap();
                let edges: Vec<(usize, usize)> = aug.edges().iter().map(|e| (e.u, e.v)).collect();
                let total: f64 = enumerate_perfect_matchings(aug.len(), &edges)
                    .iter()
                    .map(|m| m.iter().map(|&e| aug.edges()[e].weight).product::<f64>())
                    .sum();
                let (zf, _) = partition_function(&aug).unwrap();
                assert!((zf - total).abs() < 1e-9 * total, "{w}x{h} z={z}: {zf} vs {total}");
            }
        }
    }

    #[test]
    fn small_z_recovers_dimer_count() {
        let g = build_rectangle_domain(3, 3).unwrap();
        let aug = crate::lattice::augment_with_mode(&g, 1e-9, 0, crate::lattice::CornerMode::FiniteN).unwrap();
        let count = enumerate_perfect_matchings(g.len(), g.edges()).len() as f64;
        let (zf, _) = partition_function(&aug).unwrap();
        assert!((zf - count).abs() < 1e-6, "{zf} vs {count}");
    }

    #[test]
    fn inverse_two_ways() {
        let aug = augment(&build_rectangle_domain(5, 5).unwrap(), 1.0, 3).unwrap();
        let inv = inverse_kasteleyn(&aug).unwrap();
        assert!(inv.residual < 1e-10);
        assert!(inv.cross_check < 1e-10);
        for e in aug.edges() {
            let p = inv.edge_probability(e.u, e.v);
            assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn sparse_columns_agree_with_dense() {
        let aug = augment(&build_rectangle_domain(5, 3).unwrap(), 0.9, 0).unwrap();
        let inv = inverse_kasteleyn(&aug).unwrap();
        let sp = SparseKasteleyn::new(&aug).unwrap();
        for v in [0, 3, aug.len() - 1] {
            let col = sp.column(v);
            for (i, x) in col.iter().enumerate() {
                assert!((x - inv.kinv[(i, v)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn correlation_identities() {
        let aug = augment(&build_rectangle_domain(5, 3).unwrap(), 1.1, 0).unwrap();
        let inv = inverse_kasteleyn(&aug).unwrap();
        let e = |a: (i64, i64), b: (i64, i64)| {
            (aug.index_of(LatticePoint::new(a.0, a.1)).unwrap(), aug.index_of(LatticePoint::new(b.0, b.1)).unwrap())
        };
        let es = [e((1, 0), (1, 1)), e((3, 1), (4, 1)), e((0, 2), (1, 2))];
        assert_eq!(truncated_correlation(&inv, &es[..1]).unwrap(), 0.0);
        let p1 = joint_dimer_probability(&inv, &es[..1]).unwrap();
        assert!((p1 - inv.edge_probability(es[0].0, es[0].1)).abs() < 1e-14);
        for k in 1..=3 {
            let a = truncated_correlation(&inv, &es[..k]).unwrap();
            let b = truncated_correlation_by_inclusion(&inv, &es[..k]).unwrap();
            assert!((a - b).abs() < 1e-12, "k={k}: {a} vs {b}");
        }
        assert!(joint_dimer_probability(&inv, &[es[0], (es[0].1, es[1].0)]).is_err());
    }

    #[test]
    fn cyclic_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in [4usize, 6] {
            let pts: Vec<C64> = (0..k).map(|_| C64::new(rng.random(), rng.random())).collect();
            let s = cyclic_cancellation(&pts).unwrap();
            let scale: f64 = pts
                .iter()
                .enumerate()
                .flat_map(|(i, a)| pts[i + 1..].iter().map(move |b| 1.0 / (a - b).norm()))
                .fold(0.0, f64::max)
                .powi(k as i32);
            assert!(s.norm() < 1e-12 * scale, "k={k}: {s}");
        }
        // two points give -1/(a-b)^2
        let s2 = cyclic_cancellation(&[c(0.0), c(2.0)]).unwrap();
        assert!((s2 + c(0.25)).norm() < 1e-15);
        assert!(cyclic_cancellation(&[c(0.0), c(0.0), c(1.0), c(2.0)]).is_err());
    }

    #[test]
    fn restricted_matching_counts() {
        // number of perfect matchings of K_{2k} avoiding k fixed disjoint pairs
        assert_eq!(restricted_matchings(1).len(), 0);
        assert_eq!(restricted_matchings(2).len(), 2);
        assert_eq!(restricted_matchings(3).len(), 8);
    }

    #[test]
    fn csv_dump_header() {
        let aug = augment(&build_rectangle_domain(3, 3).unwrap(), 1.0, 0).unwrap();
        let k = kasteleyn_matrix(&aug).unwrap();
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, k.order(), k.entries(), 0.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("row_x,row_y,col_x,col_y,re,im\n"));
        assert_eq!(text.lines().count(), 1 + 2 * aug.edges().len());
    }
}
