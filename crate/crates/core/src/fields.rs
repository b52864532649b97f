//! Height function, its exact moments from truncated edge correlations, and the Neumann
//! Gaussian free field predictions.

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kasteleyn::{matching_sign, restricted_matchings, InverseKasteleyn};
use crate::lattice::{AugmentedDomain, Colour, EdgeKind, LatticePoint, MdCover};
use crate::linalg::{c, C64};
use crate::potential::{half_plane_entry, HalfPlaneKernel};

/// A bounded face, named by its lower-left corner.
pub type Face = LatticePoint;

/// Primal edge crossed by a dual step, as (tail, head) so that the dual step turns left onto it.
pub type Crossing = (LatticePoint, LatticePoint);

/// `+1` when the crossed edge is traversed from its white end.
pub fn crossing_sign(tail: LatticePoint) -> f64 {
    if tail.colour() == Colour::White {
        1.0
    } else {
        -1.0
    }
}

fn vertical_step(x: i64, y: i64, d: i64) -> Crossing {
    if d > 0 {
        (LatticePoint::new(x, y + 1), LatticePoint::new(x + 1, y + 1))
    } else {
        (LatticePoint::new(x + 1, y), LatticePoint::new(x, y))
    }
}

fn horizontal_step(x: i64, y: i64, d: i64) -> Crossing {
    if d > 0 {
        (LatticePoint::new(x + 1, y + 1), LatticePoint::new(x + 1, y))
    } else {
        (LatticePoint::new(x, y), LatticePoint::new(x, y + 1))
    }
}

/// L-shaped dual path from `from` to `to`: vertical leg first, then horizontal.
pub fn dual_path(from: Face, to: Face) -> Vec<Crossing> {
    let (mut x, mut y) = (from.x, from.y);
    let mut out = Vec::new();
    while y != to.y {
        let d = (to.y - y).signum();
        out.push(vertical_step(x, y, d));
        y += d;
    }
    while x != to.x {
        let d = (to.x - x).signum();
        out.push(horizontal_step(x, y, d));
        x += d;
    }
    out
}

/// L-shaped dual path with the horizontal leg first.
pub fn dual_path_horizontal_first(from: Face, to: Face) -> Vec<Crossing> {
    let (mut x, mut y) = (from.x, from.y);
    let mut out = Vec::new();
    while x != to.x {
        let d = (to.x - x).signum();
        out.push(horizontal_step(x, y, d));
        x += d;
    }
    while y != to.y {
        let d = (to.y - y).signum();
        out.push(vertical_step(x, y, d));
        y += d;
    }
    out
}

/// `ω₀`: edge probabilities on the lattice edges of the upper graph, white to black positive.
#[derive(Clone, Debug)]
pub struct ReferenceFlow {
    flow: HashMap<(LatticePoint, LatticePoint), f64>,
    monomer: HashMap<LatticePoint, f64>,
}

impl ReferenceFlow {
    /// `ω₀(u, v)`, zero for non-edges.
    pub fn get(&self, u: LatticePoint, v: LatticePoint) -> f64 {
        self.flow.get(&(u, v)).copied().unwrap_or(0.0)
    }

    /// Net expected flow out of `v`.
    pub fn outflow(&self, v: LatticePoint) -> f64 {
        [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().map(|&(dx, dy)| self.get(v, v.offset(dx, dy))).sum()
    }

    pub fn monomer_probability(&self, v: LatticePoint) -> f64 {
        self.monomer.get(&v).copied().unwrap_or(0.0)
    }
}

pub fn reference_flow(aug: &AugmentedDomain, inv: &InverseKasteleyn) -> ReferenceFlow {
    let mut flow = HashMap::new();
    let mut monomer: HashMap<LatticePoint, f64> = HashMap::new();
    for e in aug.edges() {
        let (a, b) = (aug.vertices()[e.u], aug.vertices()[e.v]);
        let prob = inv.edge_probability(e.u, e.v);
        match e.kind {
            EdgeKind::Lattice => {
                let (w, bl) = if a.colour() == Colour::White { (a, b) } else { (b, a) };
                flow.insert((w, bl), prob);
                flow.insert((bl, w), -prob);
            }
            EdgeKind::Leg => {
                let top = if a.y == 0 { a } else { b };
                *monomer.entry(top).or_default() += prob;
            }
            EdgeKind::ApexRow => {}
        }
    }
    ReferenceFlow { flow, monomer }
}

fn face_corners(f: Face) -> [LatticePoint; 4] {
    [f, f.offset(1, 0), f.offset(0, 1), f.offset(1, 1)]
}

fn check_face(aug: &AugmentedDomain, f: Face) -> Result<()> {
    if f.y < 0 || face_corners(f).iter().any(|p| aug.index_of(*p).is_none()) {
        return Err(Error::Validation(format!("({},{}) is not a bounded face", f.x, f.y)));
    }
    Ok(())
}

/// `h(a) - h(b)` for `cover`, summing `(ω_M - ω₀)` along a dual path from `b` to `a`.
pub fn height_difference(aug: &AugmentedDomain, flow: &ReferenceFlow, cover: &MdCover, a: Face, b: Face) -> Result<f64> {
    height_along(aug, flow, cover, &dual_path(b, a))
}

/// Height increment along an explicit dual path.
pub fn height_along(aug: &AugmentedDomain, flow: &ReferenceFlow, cover: &MdCover, path: &[Crossing]) -> Result<f64> {
    let dimers: HashSet<(LatticePoint, LatticePoint)> = cover.dimers.iter().copied().collect();
    let mut total = 0.0;
    for &(u, v) in path {
        if aug.index_of(u).is_none() || aug.index_of(v).is_none() || u.y < 0 || v.y < 0 {
            return Err(Error::Validation(format!("dual path leaves the domain at {u:?}-{v:?}")));
        }
        let key = if u < v { (u, v) } else { (v, u) };
        let occupied = if dimers.contains(&key) { 1.0 } else { 0.0 };
        let (w, bl) = if u.colour() == Colour::White { (u, v) } else { (v, u) };
        total += crossing_sign(u) * (occupied - flow.get(w, bl));
    }
    Ok(total)
}

/// Height on every bounded face relative to `base`, by breadth-first search over faces.
pub fn height_field(aug: &AugmentedDomain, flow: &ReferenceFlow, cover: &MdCover, base: Face) -> Result<HashMap<Face, f64>> {
    check_face(aug, base)?;
    let mut h = HashMap::from([(base, 0.0)]);
    let mut queue = VecDeque::from([base]);
    while let Some(f) = queue.pop_front() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let g = f.offset(dx, dy);
            if h.contains_key(&g) || check_face(aug, g).is_err() {
                continue;
            }
            let inc = height_along(aug, flow, cover, &dual_path(f, g))?;
            h.insert(g, h[&f] + inc);
            queue.push_back(g);
        }
    }
    Ok(h)
}

/// Kasteleyn entries and coupling function on lattice points.
pub trait CouplingSource: Sync {
    fn kasteleyn(&self, u: LatticePoint, v: LatticePoint) -> Result<C64>;
    fn coupling(&self, u: LatticePoint, v: LatticePoint) -> Result<C64>;
    /// Pairs with equal keys have equal coupling values.
    fn key(&self, u: LatticePoint, v: LatticePoint) -> (i64, i64, i64, i64) {
        (u.x, u.y, v.x, v.y)
    }
}

/// Dense finite-volume source.
pub struct FiniteSource<'a> {
    pub aug: &'a AugmentedDomain,
    pub inv: &'a InverseKasteleyn,
}

impl FiniteSource<'_> {
    fn idx(&self, p: LatticePoint) -> Result<usize> {
        self.aug
            .index_of(p)
            .ok_or_else(|| Error::Validation(format!("({},{}) is outside the truncation box", p.x, p.y)))
    }
}

impl CouplingSource for FiniteSource<'_> {
    fn kasteleyn(&self, u: LatticePoint, v: LatticePoint) -> Result<C64> {
        Ok(self.inv.k.get(self.idx(u)?, self.idx(v)?))
    }

    fn coupling(&self, u: LatticePoint, v: LatticePoint) -> Result<C64> {
        Ok(self.inv.coupling(self.idx(u)?, self.idx(v)?))
    }
}

impl CouplingSource for HalfPlaneKernel {
    fn kasteleyn(&self, u: LatticePoint, v: LatticePoint) -> Result<C64> {
        half_plane_entry(u, v, self.z()).ok_or_else(|| Error::Validation(format!("{u:?}, {v:?} are not adjacent")))
    }

    fn coupling(&self, u: LatticePoint, v: LatticePoint) -> Result<C64> {
        HalfPlaneKernel::coupling(self, u, v)
    }

    fn key(&self, u: LatticePoint, v: LatticePoint) -> (i64, i64, i64, i64) {
        (0, u.y, v.x - u.x, v.y)
    }
}

/// `E[Π (1{e_i} - P(e_i))]` for edges given as point pairs, with couplings looked up in
/// `table` (entries for every ordered cross-edge pair).
fn truncated_from_table(
    edges: &[Crossing],
    kprod: C64,
    table: &HashMap<(LatticePoint, LatticePoint), C64>,
    matchings: &[(Vec<(usize, usize)>, f64)],
) -> C64 {
    let verts: Vec<LatticePoint> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    let mut sum = c(0.0);
    for (m, sign) in matchings {
        let mut term = c(*sign);
        for &(a, b) in m {
            term *= if verts[a] == verts[b] { c(0.0) } else { table[&(verts[a], verts[b])] };
        }
        sum += term;
    }
    kprod * sum
}

/// Truncated correlation of edges (point pairs) under any coupling source.
pub fn truncated_correlation_points(source: &dyn CouplingSource, edges: &[Crossing]) -> Result<f64> {
    let mut table = HashMap::new();
    let verts: Vec<LatticePoint> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    for i in 0..verts.len() {
        for j in 0..verts.len() {
            if i / 2 != j / 2 && verts[i] != verts[j] {
                table.insert((verts[i], verts[j]), source.coupling(verts[i], verts[j])?);
            }
        }
    }
    let mut kprod = c(1.0);
    for &(u, v) in edges {
        kprod *= source.kasteleyn(u, v)?;
    }
    let matchings: Vec<_> = restricted_matchings(edges.len()).into_iter().map(|m| {
        let s = matching_sign(&m);
        (m, s)
    }).collect();
    Ok(truncated_from_table(edges, kprod, &table, &matchings).re)
}

/// Moment `E[Π_i (h(a_i) - h(b_i))]` as a sum of truncated correlations over tuples of edges on
/// pairwise disjoint dual paths from `b_i` to `a_i`.
pub fn exact_height_moment(source: &dyn CouplingSource, pairs: &[(Face, Face)]) -> Result<f64> {
    let k = pairs.len();
    if k == 0 {
        return Ok(1.0);
    }
    let paths: Vec<Vec<Crossing>> = pairs.iter().map(|&(a, b)| dual_path(b, a)).collect();
    let mut seen = HashSet::new();
    for path in &paths {
        for &(u, v) in path {
            let key = if u < v { (u, v) } else { (v, u) };
            if !seen.insert(key) {
                return Err(Error::Validation(format!("dual paths share the edge {u:?}-{v:?}")));
            }
        }
    }
    if k == 1 {
        // centred: no matching avoids the only pair
        return Ok(0.0);
    }
    // couplings needed between vertices of different paths
    let mut wanted: HashMap<(i64, i64, i64, i64), (LatticePoint, LatticePoint)> = HashMap::new();
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            for &(u, v) in &paths[i] {
                for &(x, y) in &paths[j] {
                    for p in [u, v] {
                        for q in [x, y] {
                            if p != q {
                                wanted.entry(source.key(p, q)).or_insert((p, q));
                            }
                        }
                    }
                }
            }
        }
    }
    let wanted: Vec<_> = wanted.into_iter().collect();
    let values: Vec<C64> = wanted.par_iter().map(|(_, (p, q))| source.coupling(*p, *q)).collect::<Result<_>>()?;
    let by_key: HashMap<(i64, i64, i64, i64), C64> = wanted.iter().map(|(key, _)| *key).zip(values).collect();
    let mut table = HashMap::new();
    let mut kent = HashMap::new();
    for (i, path) in paths.iter().enumerate() {
        for &(u, v) in path {
            kent.insert((u, v), source.kasteleyn(u, v)?);
            for (j, other) in paths.iter().enumerate() {
                if i == j {
                    continue;
                }
                for &(x, y) in other {
                    for p in [u, v] {
                        for q in [x, y] {
                            if p != q {
                                table.insert((p, q), by_key[&source.key(p, q)]);
                            }
                        }
                    }
                }
            }
        }
    }
    let matchings: Vec<_> = restricted_matchings(k)
        .into_iter()
        .map(|m| {
            let s = matching_sign(&m);
            (m, s)
        })
        .collect();
    let partial: Vec<f64> = paths[0]
        .par_iter()
        .map(|&e0| {
            let mut acc = 0.0;
            let mut idx = vec![0usize; k - 1];
            loop {
                let mut edges = vec![e0];
                edges.extend((1..k).map(|i| paths[i][idx[i - 1]]));
                let sign: f64 = edges.iter().map(|e| crossing_sign(e.0)).product();
                let kprod: C64 = edges.iter().map(|e| kent[e]).product();
                acc += sign * truncated_from_table(&edges, kprod, &table, &matchings).re;
                // odometer over the remaining paths
                let mut d = 0;
                loop {
                    if d == k - 1 {
                        return acc;
                    }
                    idx[d] += 1;
                    if idx[d] < paths[d + 1].len() {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
            }
        })
        .collect();
    Ok(partial.iter().sum())
}

/// Covariance of `h(a1) - h(b1)` and `h(a2) - h(b2)` for the Neumann field with the height
/// normalization.
pub fn gff_covariance(a1: C64, b1: C64, a2: C64, b2: C64) -> Result<f64> {
    let pts = [a1, b1, a2, b2];
    for (i, p) in pts.iter().enumerate() {
        if p.im <= 0.0 {
            return Err(Error::Validation("points must lie in the upper half-plane".into()));
        }
        for q in &pts[i + 1..] {
            if (p - q).norm() == 0.0 {
                return Err(Error::Validation("coincident points".into()));
            }
        }
    }
    let ln = |z: C64| z.norm().ln();
    let num = ln(a1 - a2) + ln(b1 - b2) + ln(a1.conj() - a2) + ln(b1.conj() - b2);
    let den = ln(a1 - b2) + ln(b1 - a2) + ln(a1.conj() - b2) + ln(b1.conj() - a2);
    Ok(-(num - den) / (2.0 * PI * PI))
}

/// Wick sum over perfect matchings of the pairs of pairwise covariances.
pub fn gff_prediction(pairs: &[(C64, C64)]) -> Result<f64> {
    let k = pairs.len();
    if k % 2 == 1 {
        return Ok(0.0);
    }
    fn rec(pairs: &[(C64, C64)], free: &mut Vec<usize>) -> Result<f64> {
        if free.is_empty() {
            return Ok(1.0);
        }
        let a = free.remove(0);
        let mut total = 0.0;
        for idx in 0..free.len() {
            let b = free.remove(idx);
            let cov = gff_covariance(pairs[a].0, pairs[a].1, pairs[b].0, pairs[b].1)?;
            total += cov * rec(pairs, free)?;
            free.insert(idx, b);
        }
        free.insert(0, a);
        Ok(total)
    }
    rec(pairs, &mut (0..k).collect())
}

/// Lattice face containing the macroscopic point `p` at mesh `delta`, and the face centre.
pub fn face_at(p: C64, delta: f64) -> (Face, C64) {
    let f = LatticePoint::new((p.re / delta).round() as i64, (p.im / delta).round() as i64);
    (f, C64::new((f.x as f64 + 0.5) * delta, (f.y as f64 + 0.5) * delta))
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentComparison {
    pub delta: f64,
    pub z: f64,
    pub measured: f64,
    pub predicted: f64,
    pub rel_err: f64,
}

/// Exact second moment on the half-plane at mesh `delta` for macroscopic pairs.
pub fn second_moment_vs_gff(z: f64, delta: f64, pairs: [(C64, C64); 2]) -> Result<MomentComparison> {
    moment_vs_gff(z, delta, &pairs)
}

/// Exact mixed moment `E[Π (h(a_i) - h(b_i))]` on the half-plane at mesh `delta` against the
/// Wick prediction at the face centres.
pub fn moment_vs_gff(z: f64, delta: f64, pairs: &[(C64, C64)]) -> Result<MomentComparison> {
    if pairs.is_empty() {
        return Err(Error::Validation("no pairs given".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Validation(format!("mesh must lie in (0,1), got {delta}")));
    }
    let faces: Vec<(Face, C64, Face, C64)> = pairs
        .iter()
        .map(|&(a, b)| {
            let (fa, ca) = face_at(a, delta);
            let (fb, cb) = face_at(b, delta);
            (fa, ca, fb, cb)
        })
        .collect();
    if let Some(f) = faces.iter().find(|f| f.0.y < 0 || f.2.y < 0) {
        return Err(Error::Validation(format!("face {:?} lies below the real line", if f.0.y < 0 { f.0 } else { f.2 })));
    }
    let top = faces.iter().flat_map(|f| [f.0.y, f.2.y]).max().unwrap() + 3;
    let span = faces
        .iter()
        .flat_map(|f| [f.0.x, f.2.x])
        .fold((i64::MAX, i64::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let kernel = HalfPlaneKernel::new(z, top, (span.1 - span.0 + 3) as usize)?;
    let lattice_pairs: Vec<(Face, Face)> = faces.iter().map(|f| (f.0, f.2)).collect();
    let centres: Vec<(C64, C64)> = faces.iter().map(|f| (f.1, f.3)).collect();
    let measured = exact_height_moment(&kernel, &lattice_pairs)?;
    let predicted = gff_prediction(&centres)?;
    let rel_err = if predicted == 0.0 { measured.abs() } else { ((measured - predicted) / predicted).abs() };
    Ok(MomentComparison { delta, z, measured, predicted, rel_err })
}

#[derive(Clone, Debug, Serialize)]
pub struct TestFunctionStats {
    pub mean: f64,
    pub variance: f64,
    pub predicted_variance: f64,
}

/// Mean over faces of `ln|x - y|` for `x`, `y` uniform in the same unit square.
const SQUARE_LOG_MEAN: f64 = -0.805_087_209_548_4;

/// Pairs sampled height fields with a face density `f` (mean zero) and compares the variance of
/// `(h, f)` with `(1/2π²) Σ f(a) f(b) G(a, b)` for the Neumann Green function at mesh `delta`.
pub fn pair_with_test_function(samples: &[HashMap<Face, f64>], f: &[(Face, f64)], delta: f64) -> Result<TestFunctionStats> {
    let total: f64 = f.iter().map(|(_, w)| w).sum();
    if total.abs() > 1e-12 {
        return Err(Error::Validation(format!("test function has mass {total:e}, expected 0")));
    }
    if f.iter().all(|(_, w)| *w == 0.0) {
        return Ok(TestFunctionStats { mean: 0.0, variance: 0.0, predicted_variance: 0.0 });
    }
    let mut values = Vec::with_capacity(samples.len());
    for s in samples {
        let mut acc = 0.0;
        for (face, w) in f {
            acc += w * s.get(face).ok_or_else(|| Error::Validation(format!("face {face:?} missing from sample")))?;
        }
        values.push(acc);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let centre = |p: Face| C64::new((p.x as f64 + 0.5) * delta, (p.y as f64 + 0.5) * delta);
    let mut pred = 0.0;
    for (a, wa) in f {
        for (b, wb) in f {
            let (x, y) = (centre(*a), centre(*b));
            let direct = if a == b { -(SQUARE_LOG_MEAN + delta.ln()) } else { -(x - y).norm().ln() };
            let green = direct - (x - y.conj()).norm().ln();
            pred += wa * wb * green;
        }
    }
    Ok(TestFunctionStats { mean, variance, predicted_variance: pred / (2.0 * PI * PI) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kasteleyn::{inverse_kasteleyn, truncated_correlation};
    use crate::lattice::{augment, build_rectangle_domain, cover_to_md, enumerate_perfect_matchings, DimerCover};

    fn p(x: i64, y: i64) -> LatticePoint {
        LatticePoint::new(x, y)
    }

    fn all_covers(aug: &AugmentedDomain) -> Vec<(MdCover, f64)> {
        let edges: Vec<(usize, usize)> = aug.edges().iter().map(|e| (e.u, e.v)).collect();
        enumerate_perfect_matchings(aug.len(), &edges)
            .into_iter()
            .map(|m| {
                let dc = DimerCover { edges: m };
                let w = dc.weight(aug);
                (cover_to_md(aug, &dc).unwrap(), w)
            })
            .collect()
    }

    #[test]
    fn paths_have_expected_shape() {
        assert!(dual_path(p(1, 1), p(1, 1)).is_empty());
        let path = dual_path(p(0, 0), p(2, 1));
        assert_eq!(path, vec![(p(0, 1), p(1, 1)), (p(1, 2), p(1, 1)), (p(2, 2), p(2, 1))]);
    }

    #[test]
    fn flow_balances() {
        let aug = augment(&build_rectangle_domain(5, 5).unwrap(), 1.0, 0).unwrap();
        let inv = inverse_kasteleyn(&aug).unwrap();
        let flow = reference_flow(&aug, &inv);
        // bulk vertex: white sends 1, black receives 1
        assert!((flow.outflow(p(2, 2)).abs() - 1.0).abs() < 1e-12);
        for x in 0..5 {
            let v = p(x, 0);
            let expected = 1.0 - flow.monomer_probability(v);
            assert!((flow.outflow(v).abs() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn monomer_probability_by_enumeration() {
        let aug = augment(&build_rectangle_domain(3, 3).unwrap(), 0.7, 0).unwrap();
        let inv = inverse_kasteleyn(&aug).unwrap();
        let flow = reference_flow(&aug, &inv);
        let covers = all_covers(&aug);
        let total: f64 = covers.iter().map(|(_, w)| w).sum();
        for x in 0..3 {
            let v = p(x, 0);
            let pm: f64 = covers.iter().filter(|(m, _)| m.monomers.contains(&v)).map(|(_, w)| w).sum::<f64>() / total;
            assert!((flow.monomer_probability(v) - pm).abs() < 1e-10);
        }
    }

    #[test]
    fn heights_are_path_independent_and_centred() {
        let aug = augment(&build_rectangle_domain(5, 5).unwrap(), 1.2, 0).unwrap();
        let inv = inverse_kasteleyn(&aug).unwrap();
        let flow = reference_flow(&aug, &inv);
        let covers = all_covers(&aug);
        let total: f64 = covers.iter().map(|(_, w)| w).sum();
        let (a, b) = (p(0, 0), p(3, 2));
        let mut mean = 0.0;
        for (m, w) in &covers {
            let one = height_along(&aug, &flow, m, &dual_path(b, a)).unwrap();
            let two = height_along(&aug, &flow, m, &dual_path_horizontal_first(b, a)).unwrap();
            assert!((one - two).abs() < 1e-12);
            assert_eq!(height_difference(&aug, &flow, m, a, a).unwrap(), 0.0);
            mean += w * one / total;
        }
        assert!(mean.abs() < 1e-12);
        assert!(height_difference(&aug, &flow, &covers[0].0, p(4, 4), a).is_err());
    }

    #[test]
    fn exact_second_moment_matches_enumeration() {
        let aug = augment(&build_rectangle_domain(7, 5).unwrap(), 0.9, 0).unwrap();
        let inv = inverse_kasteleyn(&aug).unwrap();
        let src = FiniteSource { aug: &aug, inv: &inv };
        let pairs = [(p(0, 2), p(0, 0)), (p(4, 2), p(4, 0))];
        let exact = exact_height_moment(&src, &pairs).unwrap();
        // brute force through truncated correlations of the dense inverse
        let paths: Vec<Vec<Crossing>> = pairs.iter().map(|&(a, b)| dual_path(b, a)).collect();
        let mut brute = 0.0;
        for e in &paths[0] {
            for f in &paths[1] {
                let idx = |q: LatticePoint| aug.index_of(q).unwrap();
                let t = truncated_correlation(&inv, &[(idx(e.0), idx(e.1)), (idx(f.0), idx(f.1))]).unwrap();
                brute += crossing_sign(e.0) * crossing_sign(f.0) * t;
            }
        }
        assert!((exact - brute).abs() < 1e-12);
        assert_eq!(exact_height_moment(&src, &pairs[..1]).unwrap(), 0.0);
        // exchange symmetry and orientation sign
        let swapped = exact_height_moment(&src, &[pairs[1], pairs[0]]).unwrap();
        assert!((swapped - exact).abs() < 1e-12);
        let flipped = exact_height_moment(&src, &[(pairs[0].1, pairs[0].0), pairs[1]]).unwrap();
        assert!((flipped + exact).abs() < 1e-12);
        assert!(exact_height_moment(&src, &[pairs[0], pairs[0]]).is_err());
    }

    #[test]
    fn gff_structure() {
        let (a, b) = (C64::new(0.0, 1.0), C64::new(0.0, 2.0));
        let (x, y) = (C64::new(1.0, 1.0), C64::new(1.0, 2.0));
        assert_eq!(gff_prediction(&[(a, b)]).unwrap(), 0.0);
        let g = |u: C64, v: C64| -(u - v).norm().ln() - (u - v.conj()).norm().ln();
        let direct = (g(a, x) - g(a, y) - g(b, x) + g(b, y)) / (2.0 * PI * PI);
        assert!((gff_prediction(&[(a, b), (x, y)]).unwrap() - direct).abs() < 1e-14);
        let (u, v) = (C64::new(3.0, 1.0), C64::new(3.0, 1.5));
        let four = gff_prediction(&[(a, b), (x, y), (u, v), (a + 5.0, b + 5.0)]).unwrap();
        let cv = |i: (C64, C64), j: (C64, C64)| gff_covariance(i.0, i.1, j.0, j.1).unwrap();
        let ps = [(a, b), (x, y), (u, v), (a + 5.0, b + 5.0)];
        let wick = cv(ps[0], ps[1]) * cv(ps[2], ps[3]) + cv(ps[0], ps[2]) * cv(ps[1], ps[3]) + cv(ps[0], ps[3]) * cv(ps[1], ps[2]);
        assert!((four - wick).abs() < 1e-15);
        assert!(gff_prediction(&[(a, a), (x, y)]).is_err());
    }

    #[test]
    fn half_plane_second_moment_is_close_to_gff_at_coarse_mesh() {
        let r = second_moment_vs_gff(1.0, 1.0 / 8.0, [
            (C64::new(-1.0, 1.0), C64::new(-1.0, 2.0)),
            (C64::new(1.0, 1.0), C64::new(1.0, 2.0)),
        ])
        .unwrap();
        assert!(r.rel_err < 0.2, "{r:?}");
    }

    #[test]
    fn test_function_pairing() {
        let zero: Vec<(Face, f64)> = vec![(p(0, 0), 0.0)];
        assert_eq!(pair_with_test_function(&[], &zero, 0.1).unwrap().variance, 0.0);
        assert!(pair_with_test_function(&[], &[(p(0, 0), 1.0)], 0.1).is_err());
        let f = vec![(p(0, 1), 1.0), (p(2, 1), -1.0)];
        let samples = vec![HashMap::from([(p(0, 1), 1.0), (p(2, 1), 0.0)]), HashMap::from([(p(0, 1), 0.0), (p(2, 1), 1.0)])];
        let s = pair_with_test_function(&samples, &f, 0.1).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.variance, 2.0);
        assert!(s.predicted_variance > 0.0);
    }
}
