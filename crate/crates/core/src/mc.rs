//! Enumeration oracle, exact and Metropolis samplers, and the walk / coupling / coloured-walk
//! Monte Carlo experiments.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::kasteleyn::kasteleyn_matrix;
use crate::lattice::{
    complete_triangle_row, cover_to_md, md_to_cover, AugmentedDomain, Colour, DimerCover, EdgeKind, LatticePoint,
    MdCover,
};
use crate::linalg::{inverse, linear_fit, C64};
use crate::walks::{aux_params, effective_jump_weights, WalkKernel};

pub const ENUMERATION_CAP: usize = 24;

/// Seed plus stream id; each pair gives an independent, reproducible ChaCha8 stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }
}

// ---------------------------------------------------------------------------------------------
// Enumeration

fn triangle_row_ok(aug: &AugmentedDomain, monomer_x: &BTreeSet<i64>) -> bool {
    let (t0, t1) = aug.top_range();
    let removed: BTreeSet<i64> = (t0..=t1).filter(|x| !monomer_x.contains(x)).collect();
    complete_triangle_row(aug.apex_range(), aug.top_range(), &removed).is_ok()
}

/// Every monomer-dimer cover of the upper part of `aug` with its weight.
pub fn enumerate_covers(aug: &AugmentedDomain) -> Result<Vec<(MdCover, f64)>> {
    let upper: Vec<usize> = aug.upper_vertices().collect();
    if upper.len() > ENUMERATION_CAP {
        return Err(Error::SizeCap { size: upper.len(), cap: ENUMERATION_CAP });
    }
    let mut covered = vec![false; aug.len()];
    let mut dimers = Vec::new();
    let mut monomers = Vec::new();
    let mut out = Vec::new();
    enumerate_rec(aug, &upper, &mut covered, &mut dimers, &mut monomers, &mut out);
    Ok(out)
}

fn enumerate_rec(
    aug: &AugmentedDomain,
    upper: &[usize],
    covered: &mut Vec<bool>,
    dimers: &mut Vec<(LatticePoint, LatticePoint)>,
    monomers: &mut Vec<LatticePoint>,
    out: &mut Vec<(MdCover, f64)>,
) {
    let Some(&v) = upper.iter().find(|&&v| !covered[v]) else {
        let xs: BTreeSet<i64> = monomers.iter().map(|m| m.x).collect();
        if triangle_row_ok(aug, &xs) {
            let cover = MdCover::new(dimers.clone(), monomers.clone());
            let w = cover.weight(aug);
            out.push((cover, w));
        }
        return;
    };
    let p = aug.vertices()[v];
    covered[v] = true;
    if p.y == 0 {
        monomers.push(p);
        enumerate_rec(aug, upper, covered, dimers, monomers, out);
        monomers.pop();
    }
    for &(w, e) in aug.neighbours(v) {
        if covered[w] || aug.edges()[e].kind != EdgeKind::Lattice {
            continue;
        }
        covered[w] = true;
        dimers.push((p, aug.vertices()[w]));
        enumerate_rec(aug, upper, covered, dimers, monomers, out);
        dimers.pop();
        covered[w] = false;
    }
    covered[v] = false;
}

pub fn enumerated_partition_function(covers: &[(MdCover, f64)]) -> f64 {
    covers.iter().map(|(_, w)| w).sum()
}

// ---------------------------------------------------------------------------------------------
// Exact sequential sampler

/// Sequential sampler: the first free vertex in index order picks a partner with the
/// conditional law `K(v,w) K_R⁻¹(w,v)`, then the pair is removed by a rank-2 update of the
/// inverse of the remaining principal submatrix.
pub struct ExactSampler<'a> {
    aug: &'a AugmentedDomain,
    n: usize,
    k: Vec<C64>,
    kinv: Vec<C64>,
}

impl<'a> ExactSampler<'a> {
    pub fn new(aug: &'a AugmentedDomain) -> Result<Self> {
        let km = kasteleyn_matrix(aug)?;
        let inv = inverse(km.entries())?;
        let n = aug.len();
        let mut k = vec![C64::new(0.0, 0.0); n * n];
        let mut kinv = k.clone();
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = km.get(i, j);
                kinv[i * n + j] = inv[(i, j)];
            }
        }
        Ok(Self { aug, n, k, kinv })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DimerCover> {
        let n = self.n;
        let mut inv = self.kinv.clone();
        let mut alive = vec![true; n];
        let mut edges = Vec::with_capacity(n / 2);
        let mut cands: Vec<(usize, usize, f64)> = Vec::new();
        for v in 0..n {
            if !alive[v] {
                continue;
            }
            cands.clear();
            let mut total = 0.0;
            for &(w, e) in self.aug.neighbours(v) {
                if !alive[w] {
                    continue;
                }
                let p = (self.k[v * n + w] * inv[w * n + v]).re;
                if !(-1e-9..=1.0 + 1e-9).contains(&p) {
                    return Err(Error::Numerical(format!(
                        "conditional probability {p:e} for edge {:?}-{:?}",
                        self.aug.vertices()[v],
                        self.aug.vertices()[w]
                    )));
                }
                total += p.max(0.0);
                cands.push((w, e, p.max(0.0)));
            }
            if (total - 1.0).abs() > 1e-7 {
                return Err(Error::Numerical(format!(
                    "conditionals at {:?} sum to {total}",
                    self.aug.vertices()[v]
                )));
            }
            let mut u = rng.random::<f64>() * total;
            let mut pick = cands.len() - 1;
            for (i, c) in cands.iter().enumerate() {
                if u < c.2 {
                    pick = i;
                    break;
                }
                u -= c.2;
            }
            let (w, e, _) = cands[pick];
            edges.push(e);
            alive[v] = false;
            alive[w] = false;
            remove_pair(&mut inv, n, &alive, v, w)?;
        }
        edges.sort_unstable();
        Ok(DimerCover { edges })
    }

    pub fn sample_md<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MdCover> {
        cover_to_md(self.aug, &self.sample(rng)?)
    }
}

/// Inverse of the principal submatrix without `a, b`: `N_RR - N_RS N_SS⁻¹ N_SR`.
fn remove_pair(inv: &mut [C64], n: usize, alive: &[bool], a: usize, b: usize) -> Result<()> {
    let (p, q, r, s) = (inv[a * n + a], inv[a * n + b], inv[b * n + a], inv[b * n + b]);
    let det = p * s - q * r;
    if det.norm() < 1e-300 {
        return Err(Error::Numerical("singular pair block in sequential sampler".into()));
    }
    let m = [s / det, -q / det, -r / det, p / det];
    let rest: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    let left: Vec<(C64, C64)> = rest
        .iter()
        .map(|&i| {
            let (ia, ib) = (inv[i * n + a], inv[i * n + b]);
            (ia * m[0] + ib * m[2], ia * m[1] + ib * m[3])
        })
        .collect();
    let right: Vec<(C64, C64)> = rest.iter().map(|&j| (inv[a * n + j], inv[b * n + j])).collect();
    for (li, &i) in rest.iter().enumerate() {
        let (x, y) = left[li];
        let row = &mut inv[i * n..(i + 1) * n];
        for (rj, &j) in rest.iter().enumerate() {
            let (ra, rb) = right[rj];
            row[j] -= x * ra + y * rb;
        }
    }
    Ok(())
}

pub fn sample_exact<R: Rng + ?Sized>(aug: &AugmentedDomain, rng: &mut R) -> Result<MdCover> {
    ExactSampler::new(aug)?.sample_md(rng)
}

/// `samples` exact draws split over `chunks` streams (stream id = chunk index).
pub fn sample_exact_batch(aug: &AugmentedDomain, samples: usize, seed: u64, chunks: usize) -> Result<Vec<MdCover>> {
    let sampler = ExactSampler::new(aug)?;
    let chunks = chunks.max(1);
    let per = samples.div_ceil(chunks);
    let parts: Vec<Result<Vec<MdCover>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngStream::new(seed, c as u64).rng();
            let count = per.min(samples.saturating_sub(c * per));
            (0..count).map(|_| sampler.sample_md(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(samples);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------------------------
// Metropolis chain

const MONO: usize = usize::MAX;
const FREE: usize = usize::MAX - 1;

#[derive(Clone, Copy, Debug)]
enum Slot {
    /// lower-left, lower-right, upper-left, upper-right
    Face([usize; 4]),
    /// consecutive tops
    Pair(usize, usize),
    /// three consecutive tops
    Hop(usize, usize, usize),
}

/// Reversible Metropolis chain on boundary monomer-dimer covers. A slot is drawn uniformly from
/// a fixed list; the move it encodes is an involution, so proposals are symmetric.
pub struct McmcChain<'a> {
    aug: &'a AugmentedDomain,
    partner: Vec<usize>,
    slots: Vec<Slot>,
    accepted: u64,
    proposed: u64,
}

impl<'a> McmcChain<'a> {
    pub fn new(aug: &'a AugmentedDomain) -> Result<Self> {
        let mut partner = vec![FREE; aug.len()];
        let base = aug.base();
        for &(a, b) in base.perfect_matching() {
            let ia = aug.index_of(base.vertices()[a]).expect("base vertex in augmented graph");
            let ib = aug.index_of(base.vertices()[b]).expect("base vertex in augmented graph");
            partner[ia] = ib;
            partner[ib] = ia;
        }
        for v in aug.upper_vertices() {
            if partner[v] == FREE {
                partner[v] = MONO;
            }
        }
        let mut chain = Self { aug, partner, slots: build_slots(aug), accepted: 0, proposed: 0 };
        if !chain.valid_monomers() {
            // Fall back to the first enumerated cover when the base matching does not complete.
            let covers = enumerate_covers(aug)?;
            let first = covers
                .into_iter()
                .find(|(_, w)| *w > 0.0)
                .ok_or_else(|| Error::NoCover("no boundary cover completes the triangle row".into()))?;
            chain = Self::from_cover(aug, &first.0)?;
        }
        Ok(chain)
    }

    pub fn from_cover(aug: &'a AugmentedDomain, cover: &MdCover) -> Result<Self> {
        md_to_cover(aug, cover)?;
        let mut partner = vec![FREE; aug.len()];
        for &(a, b) in &cover.dimers {
            let (ia, ib) = (aug.index_of(a).unwrap(), aug.index_of(b).unwrap());
            partner[ia] = ib;
            partner[ib] = ia;
        }
        for m in &cover.monomers {
            partner[aug.index_of(*m).unwrap()] = MONO;
        }
        Ok(Self { aug, partner, slots: build_slots(aug), accepted: 0, proposed: 0 })
    }

    pub fn cover(&self) -> MdCover {
        let mut dimers = Vec::new();
        let mut monomers = Vec::new();
        for v in self.aug.upper_vertices() {
            let p = self.partner[v];
            if p == MONO {
                monomers.push(self.aug.vertices()[v]);
            } else if p > v {
                dimers.push((self.aug.vertices()[v], self.aug.vertices()[p]));
            }
        }
        MdCover::new(dimers, monomers)
    }

    pub fn monomer_count(&self) -> usize {
        self.aug.upper_vertices().filter(|&v| self.partner[v] == MONO).count()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    fn valid_monomers(&self) -> bool {
        let xs: BTreeSet<i64> = self
            .aug
            .upper_vertices()
            .filter(|&v| self.partner[v] == MONO)
            .map(|v| self.aug.vertices()[v].x)
            .collect();
        triangle_row_ok(self.aug, &xs)
    }

    fn weight_of(&self, v: usize) -> f64 {
        self.aug.monomer_weight(self.aug.vertices()[v].x)
    }

    fn link(&mut self, a: usize, b: usize) {
        self.partner[a] = b;
        self.partner[b] = a;
    }

    /// Applies the move of `slot` if it is applicable and returns `(ratio, undo)`.
    fn apply(&mut self, slot: Slot) -> Option<(f64, Vec<(usize, usize)>)> {
        let snapshot = |s: &Self, vs: &[usize]| vs.iter().map(|&v| (v, s.partner[v])).collect::<Vec<_>>();
        match slot {
            Slot::Face([ll, lr, ul, ur]) => {
                let undo = snapshot(self, &[ll, lr, ul, ur]);
                if self.partner[ll] == lr && self.partner[ul] == ur {
                    self.link(ll, ul);
                    self.link(lr, ur);
                } else if self.partner[ll] == ul && self.partner[lr] == ur {
                    self.link(ll, lr);
                    self.link(ul, ur);
                } else {
                    return None;
                }
                Some((1.0, undo))
            }
            Slot::Pair(a, b) => {
                let undo = snapshot(self, &[a, b]);
                let w = self.weight_of(a) * self.weight_of(b);
                if self.partner[a] == b {
                    self.partner[a] = MONO;
                    self.partner[b] = MONO;
                    Some((w, undo))
                } else if self.partner[a] == MONO && self.partner[b] == MONO {
                    self.link(a, b);
                    Some((1.0 / w, undo))
                } else {
                    None
                }
            }
            Slot::Hop(a, b, c) => {
                let undo = snapshot(self, &[a, b, c]);
                if self.partner[a] == MONO && self.partner[b] == c {
                    self.link(a, b);
                    self.partner[c] = MONO;
                    Some((self.weight_of(c) / self.weight_of(a), undo))
                } else if self.partner[a] == b && self.partner[c] == MONO {
                    self.link(b, c);
                    self.partner[a] = MONO;
                    Some((self.weight_of(a) / self.weight_of(c), undo))
                } else {
                    None
                }
            }
        }
    }

    fn restore(&mut self, undo: &[(usize, usize)]) {
        for &(v, p) in undo {
            self.partner[v] = p;
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let slot = self.slots[rng.random_range(0..self.slots.len())];
        let u: f64 = rng.random();
        self.proposed += 1;
        let Some((ratio, undo)) = self.apply(slot) else { return };
        let monomers_changed = !matches!(slot, Slot::Face(_));
        if (monomers_changed && !self.valid_monomers()) || u >= ratio {
            self.restore(&undo);
        } else {
            self.accepted += 1;
        }
    }

    /// Every cover reachable from the current one through applicable moves.
    pub fn reachable(&self) -> HashSet<MdCover> {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(self.cover());
        queue.push_back(self.partner.clone());
        let mut work = Self { aug: self.aug, partner: self.partner.clone(), slots: self.slots.clone(), accepted: 0, proposed: 0 };
        while let Some(state) = queue.pop_front() {
            for &slot in &self.slots {
                work.partner.clone_from(&state);
                let Some((ratio, _)) = work.apply(slot) else { continue };
                if ratio <= 0.0 || (!matches!(slot, Slot::Face(_)) && !work.valid_monomers()) {
                    continue;
                }
                if seen.insert(work.cover()) {
                    queue.push_back(work.partner.clone());
                }
            }
        }
        seen
    }
}

fn build_slots(aug: &AugmentedDomain) -> Vec<Slot> {
    let idx = |x: i64, y: i64| aug.index_of(LatticePoint::new(x, y)).filter(|_| y >= 0);
    let mut slots = Vec::new();
    for v in aug.upper_vertices() {
        let p = aug.vertices()[v];
        if let (Some(lr), Some(ul), Some(ur)) = (idx(p.x + 1, p.y), idx(p.x, p.y + 1), idx(p.x + 1, p.y + 1)) {
            slots.push(Slot::Face([v, lr, ul, ur]));
        }
    }
    let (t0, t1) = aug.top_range();
    for x in t0..t1 {
        if let (Some(a), Some(b)) = (idx(x, 0), idx(x + 1, 0)) {
            slots.push(Slot::Pair(a, b));
            if x + 2 <= t1 {
                if let Some(c) = idx(x + 2, 0) {
                    slots.push(Slot::Hop(a, b, c));
                }
            }
        }
    }
    slots
}

/// Samples from a chain after `burn_in` steps, one every `thin` steps.
pub fn mcmc_sampler<R: Rng + ?Sized>(
    aug: &AugmentedDomain,
    samples: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut R,
) -> Result<Vec<MdCover>> {
    let mut chain = McmcChain::new(aug)?;
    for _ in 0..burn_in {
        chain.step(rng);
    }
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        for _ in 0..thin.max(1) {
            chain.step(rng);
        }
        out.push(chain.cover());
    }
    Ok(out)
}

/// Independent chains over streams `0..chains`, concatenated in stream order.
pub fn mcmc_batch(
    aug: &AugmentedDomain,
    chains: usize,
    samples_per_chain: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<Vec<MdCover>> {
    let parts: Vec<Result<Vec<MdCover>>> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngStream::new(seed, c as u64).rng();
            mcmc_sampler(aug, samples_per_chain, burn_in, thin, &mut rng)
        })
        .collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Sample autocorrelation of a scalar series at `lag`.
pub fn autocorrelation(series: &[f64], lag: usize) -> f64 {
    let n = series.len();
    if lag >= n {
        return 0.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = (0..n - lag).map(|i| (series[i] - mean) * (series[i + lag] - mean)).sum();
    cov / var
}

// ---------------------------------------------------------------------------------------------
// Goodness of fit

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Samples that fell outside the support of the law.
    pub outside: u64,
}

/// Pearson test of samples against a discrete law; bins with expected count below 5 are pooled.
pub fn chi_square_test(samples: &[MdCover], law: &[(MdCover, f64)]) -> Result<ChiSquareResult> {
    let total: f64 = law.iter().map(|(_, w)| w).sum();
    let n = samples.len() as f64;
    let mut counts: HashMap<&MdCover, u64> = HashMap::new();
    for s in samples {
        *counts.entry(s).or_default() += 1;
    }
    let support: HashSet<&MdCover> = law.iter().map(|(c, _)| c).collect();
    let outside: u64 = counts.iter().filter(|(c, _)| !support.contains(*c)).map(|(_, k)| *k).sum();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut pool_e, mut pool_o) = (0.0, 0.0);
    for (c, w) in law {
        let e = n * w / total;
        let o = counts.get(c).copied().unwrap_or(0) as f64;
        if e < 5.0 {
            pool_e += e;
            pool_o += o;
        } else {
            bins.push((e, o));
        }
    }
    if pool_e > 0.0 {
        bins.push((pool_e, pool_o));
    }
    if bins.len() < 2 {
        return Err(Error::Validation("chi-square needs at least two bins".into()));
    }
    let statistic: f64 = bins.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(ChiSquareResult { statistic, dof, p_value: dist.sf(statistic), outside })
}

/// Wilson score interval at the given normal quantile.
pub fn wilson_interval(successes: u64, trials: u64, zq: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + zq * zq / n;
    let centre = (p + zq * zq / (2.0 * n)) / denom;
    let half = zq * (p * (1.0 - p) / n + zq * zq / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

// ---------------------------------------------------------------------------------------------
// Effective walk on the symmetrized graph

/// Symmetric boundary jump law `q_|k|` on `[-K, K]`, truncated where `|γ|^K < 1e-14` and
/// renormalized.
pub struct BoundaryJumps {
    offsets: Vec<i64>,
    alias: WeightedAliasIndex<f64>,
    /// Mass removed by truncation.
    pub truncation: f64,
}

impl BoundaryJumps {
    pub fn new(z: f64) -> Result<Self> {
        let kmax = aux_params(z)?.tail_cutoff().max(2);
        let q = effective_jump_weights(z, kmax)?;
        let offsets: Vec<i64> = (-(kmax as i64)..=kmax as i64).collect();
        let weights: Vec<f64> = offsets.iter().map(|k| q[k.unsigned_abs() as usize].max(0.0)).collect();
        let mass: f64 = weights.iter().sum();
        let alias = WeightedAliasIndex::new(weights).map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(Self { offsets, alias, truncation: (1.0 - mass).abs() })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.offsets[self.alias.sample(rng)]
    }

    pub fn max_offset(&self) -> i64 {
        *self.offsets.last().unwrap()
    }
}

/// The lazy (or non-lazy) walk on `Γ = Z × 2Z`; row `v = 0` is the real line and `v < 0` the
/// mirror half-plane.
pub struct GammaWalk {
    jumps: BoundaryJumps,
    pub lazy: bool,
}

impl GammaWalk {
    pub fn new(z: f64, lazy: bool) -> Result<Self> {
        Ok(Self { jumps: BoundaryJumps::new(z)?, lazy })
    }

    /// Horizontal displacement: ±2 off the line, `J(k) = (1_{|k|=2} + q_|k|)/3` on it.
    pub fn horizontal<R: Rng + ?Sized>(&self, v: i64, rng: &mut R) -> i64 {
        if v == 0 && rng.random::<f64>() < 1.0 / 3.0 {
            self.jumps.sample(rng)
        } else if rng.random_bool(0.5) {
            2
        } else {
            -2
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, p: LatticePoint, rng: &mut R) -> LatticePoint {
        if self.lazy && rng.random_bool(0.5) {
            return p;
        }
        if rng.random_bool(0.5) {
            p.offset(self.horizontal(p.y, rng), 0)
        } else {
            p.offset(0, if rng.random_bool(0.5) { 2 } else { -2 })
        }
    }
}

pub fn simulate_effective_walk<R: Rng + ?Sized>(
    z: f64,
    start: LatticePoint,
    steps: usize,
    lazy: bool,
    rng: &mut R,
) -> Result<Vec<LatticePoint>> {
    if start.y.rem_euclid(2) != 0 {
        return Err(Error::Validation(format!("start row {} is not on the graph", start.y)));
    }
    let walk = GammaWalk::new(z, lazy)?;
    let mut path = Vec::with_capacity(steps + 1);
    let mut p = start;
    path.push(p);
    for _ in 0..steps {
        p = walk.step(p, rng);
        path.push(p);
    }
    Ok(path)
}

/// Mean visit counts (and standard errors) to every state for walks of a substochastic kernel
/// started at `start` and run until absorption.
pub fn kernel_occupation(kernel: &WalkKernel, start: usize, walks: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let n = kernel.states.len();
    let tables: Vec<(Vec<Option<usize>>, WeightedAliasIndex<f64>)> = (0..n)
        .map(|i| {
            let mut targets: Vec<Option<usize>> = kernel.transitions[i].iter().map(|(j, _)| Some(*j)).collect();
            let mut w: Vec<f64> = kernel.transitions[i].iter().map(|(_, p)| *p).collect();
            targets.push(None);
            w.push(kernel.cemetery_mass(i).max(0.0));
            WeightedAliasIndex::new(w).map(|a| (targets, a)).map_err(|e| Error::Numerical(e.to_string()))
        })
        .collect::<Result<_>>()?;
    let chunks = 32usize;
    let per = walks.div_ceil(chunks);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngStream::new(seed, c as u64).rng();
            let mut sum = vec![0.0; n];
            let mut sq = vec![0.0; n];
            let mut visits = vec![0u64; n];
            let count = per.min(walks.saturating_sub(c * per));
            for _ in 0..count {
                visits.iter_mut().for_each(|v| *v = 0);
                let mut s = Some(start);
                while let Some(i) = s {
                    visits[i] += 1;
                    let (targets, alias) = &tables[i];
                    s = targets[alias.sample(&mut rng)];
                }
                for j in 0..n {
                    let v = visits[j] as f64;
                    sum[j] += v;
                    sq[j] += v * v;
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for (s, q) in partial {
        for j in 0..n {
            sum[j] += s[j];
            sq[j] += q[j];
        }
    }
    let m = walks as f64;
    Ok((0..n)
        .map(|j| {
            let mean = sum[j] / m;
            let var = (sq[j] / m - mean * mean).max(0.0);
            (mean, (var / m).sqrt())
        })
        .collect())
}

// ---------------------------------------------------------------------------------------------
// Coloured walk

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ColouredWalkState {
    pub position: LatticePoint,
    pub colour: Colour,
    pub flip_probability: f64,
}

impl ColouredWalkState {
    /// Simple-walk step in the closed upper half-plane, reflected at the real line; the colour
    /// may flip only when the new position is on the line.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let (dx, dy) = [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.random_range(0..4)];
        let mut p = self.position.offset(dx, dy);
        if p.y < 0 {
            p.y = -p.y;
        }
        self.position = p;
        if p.y == 0 {
            if rng.random::<f64>() < self.flip_probability {
                self.colour = match self.colour {
                    Colour::Black => Colour::White,
                    Colour::White => Colour::Black,
                };
            }
            true
        } else {
            false
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VisitBin {
    pub visits: usize,
    pub trials: u64,
    pub black: u64,
    /// `|P(black) - 1/2|`
    pub bias: f64,
    pub std_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ColouredReport {
    pub flip_probability: f64,
    pub lambda: f64,
    pub bins: Vec<VisitBin>,
    /// exp of the fitted slope of `ln bias` against visit count.
    pub fitted_base: f64,
    pub fitted_bins: usize,
}

/// Walks start on the real line with colour black (the start counts as a visit) and stop at
/// the target line `y = target_line_distance`. Colour statistics are binned by visit count.
pub fn coloured_walk_experiment(
    p: f64,
    start: LatticePoint,
    target_line_distance: i64,
    trials: usize,
    seed: u64,
) -> Result<ColouredReport> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Validation(format!("flip probability must lie in (0,1), got {p}")));
    }
    if start.y < 0 || start.y >= target_line_distance {
        return Err(Error::Validation("start must lie between the real line and the target".into()));
    }
    let chunks = 64usize;
    let per = trials.div_ceil(chunks);
    let parts: Vec<HashMap<usize, (u64, u64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngStream::new(seed, c as u64).rng();
            let mut tally: HashMap<usize, (u64, u64)> = HashMap::new();
            let count = per.min(trials.saturating_sub(c * per));
            for _ in 0..count {
                let mut st = ColouredWalkState { position: start, colour: Colour::Black, flip_probability: p };
                let mut visits = 0usize;
                if start.y == 0 {
                    visits += 1;
                    if rng.random::<f64>() < p {
                        st.colour = Colour::White;
                    }
                }
                while st.position.y < target_line_distance {
                    if st.step(&mut rng) {
                        visits += 1;
                    }
                }
                let e = tally.entry(visits).or_default();
                e.0 += 1;
                if st.colour == Colour::Black {
                    e.1 += 1;
                }
            }
            tally
        })
        .collect();
    let mut merged: HashMap<usize, (u64, u64)> = HashMap::new();
    for part in parts {
        for (k, (t, b)) in part {
            let e = merged.entry(k).or_default();
            e.0 += t;
            e.1 += b;
        }
    }
    let mut keys: Vec<usize> = merged.keys().copied().collect();
    keys.sort_unstable();
    let bins: Vec<VisitBin> = keys
        .into_iter()
        .map(|k| {
            let (t, b) = merged[&k];
            let frac = b as f64 / t as f64;
            VisitBin {
                visits: k,
                trials: t,
                black: b,
                bias: (frac - 0.5).abs(),
                std_err: (0.25 / t as f64).sqrt(),
            }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = bins
        .iter()
        .filter(|b| b.visits >= 1 && b.trials >= 1000 && b.bias > 4.0 * b.std_err)
        .map(|b| (b.visits as f64, b.bias.ln()))
        .unzip();
    let fitted_base = if xs.len() >= 2 { linear_fit(&xs, &ys).0.exp() } else { f64::NAN };
    Ok(ColouredReport { flip_probability: p, lambda: 1.0 - 2.0 * p, fitted_bins: xs.len(), bins, fitted_base })
}

/// Class-flip probability of a boundary jump: a quarter of the odd-offset jump mass.
pub fn colour_flip_probability(z: f64) -> Result<f64> {
    let kmax = aux_params(z)?.tail_cutoff().max(2);
    let q = effective_jump_weights(z, kmax)?;
    Ok(0.25 * 2.0 * q.iter().skip(1).step_by(2).sum::<f64>())
}

// ---------------------------------------------------------------------------------------------
// Coupling

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CouplingStage {
    VerticalMatch,
    HorizontalClass,
    BurnIn,
    Mirror,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CouplingTrial {
    /// Coupling time, `None` if not coupled by the horizon.
    pub time: Option<usize>,
    /// Steps after stage 1 at which the vertical coordinates differed.
    pub vertical_breaks: usize,
    /// Steps after coupling at which the walkers differed.
    pub post_coupling_breaks: usize,
    /// Stage 4 ended on the real line before coupling.
    pub mirror_failed: bool,
}

fn sign<R: Rng + ?Sized>(rng: &mut R) -> i64 {
    if rng.random_bool(0.5) {
        2
    } else {
        -2
    }
}

/// One coupled trajectory of two lazy walks on Γ up to `horizon` steps. Each step flips the
/// coordinate coin (horizontal or vertical) and the lazy coin; the four stages use them as
/// independent / one-moves / parallel / mirrored moves as described in the module ledger.
pub fn coupled_trajectory<R: Rng + ?Sized>(
    walk: &GammaWalk,
    x: LatticePoint,
    xp: LatticePoint,
    horizon: usize,
    burn_in_height: f64,
    rng: &mut R,
) -> CouplingTrial {
    let (mut a, mut b) = (x, xp);
    let mut stage = if a.y != b.y { CouplingStage::VerticalMatch } else { CouplingStage::HorizontalClass };
    let mut trial = CouplingTrial { time: None, vertical_breaks: 0, post_coupling_breaks: 0, mirror_failed: false };
    if a == b {
        trial.time = Some(0);
    }
    let mut t = 0;
    while t < horizon {
        if trial.time.is_some() {
            // Identical moves; spot-check a bounded window.
            for _ in 0..64.min(horizon - t) {
                let na = walk.step(a, rng);
                let shift = (na.x - a.x, na.y - a.y);
                a = na;
                b = b.offset(shift.0, shift.1);
                if a != b {
                    trial.post_coupling_breaks += 1;
                }
            }
            break;
        }
        t += 1;
        let horizontal = rng.random_bool(0.5);
        let lazy = rng.random_bool(0.5);
        if stage == CouplingStage::HorizontalClass && (a.x - b.x).rem_euclid(4) == 0 {
            stage = CouplingStage::BurnIn;
        }
        if stage == CouplingStage::BurnIn && (a.y.abs() as f64) >= burn_in_height {
            stage = CouplingStage::Mirror;
        }
        match stage {
            CouplingStage::VerticalMatch => {
                if horizontal {
                    if rng.random_bool(0.5) {
                        a.x += walk.horizontal(a.y, rng);
                    }
                    if rng.random_bool(0.5) {
                        b.x += walk.horizontal(b.y, rng);
                    }
                } else if (a.y - b.y).rem_euclid(4) == 2 {
                    if lazy {
                        a.y += sign(rng);
                    } else {
                        b.y += sign(rng);
                    }
                } else if lazy {
                    let d = sign(rng);
                    a.y += d;
                    b.y -= d;
                }
                if a.y == b.y {
                    stage = CouplingStage::HorizontalClass;
                }
            }
            CouplingStage::HorizontalClass => {
                if !horizontal {
                    if lazy {
                        let d = sign(rng);
                        a.y += d;
                        b.y += d;
                    }
                } else if (a.x - b.x).rem_euclid(2) == 1 && a.y != 0 {
                    if lazy {
                        let d = sign(rng);
                        a.x += d;
                        b.x += d;
                    }
                } else if lazy {
                    a.x += walk.horizontal(a.y, rng);
                } else {
                    b.x += walk.horizontal(b.y, rng);
                }
            }
            CouplingStage::BurnIn => {
                if lazy {
                    if horizontal {
                        let d = walk.horizontal(a.y, rng);
                        a.x += d;
                        b.x += d;
                    } else {
                        let d = sign(rng);
                        a.y += d;
                        b.y += d;
                    }
                }
            }
            CouplingStage::Mirror => {
                if lazy {
                    if horizontal {
                        let d = sign(rng);
                        a.x += d;
                        b.x -= d;
                    } else {
                        let d = sign(rng);
                        a.y += d;
                        b.y += d;
                    }
                }
                if a != b && a.y == 0 {
                    trial.mirror_failed = true;
                    break;
                }
            }
        }
        if stage != CouplingStage::VerticalMatch && a.y != b.y {
            trial.vertical_breaks += 1;
        }
        if a == b {
            trial.time = Some(t);
        }
    }
    trial
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingReport {
    pub horizon: usize,
    pub burn_in_height: f64,
    pub trials: u64,
    pub failures: u64,
    pub failure_probability: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub vertical_breaks: usize,
    pub post_coupling_breaks: usize,
}

/// Empirical `P(T > t)` for walkers started at `x`, `x′`; burn-in height `√t / (ln t)^b`.
pub fn coupling_experiment(
    z: f64,
    x: LatticePoint,
    xp: LatticePoint,
    t: usize,
    trials: usize,
    b: f64,
    seed: u64,
) -> Result<CouplingReport> {
    if x.y.rem_euclid(2) != 0 || xp.y.rem_euclid(2) != 0 {
        return Err(Error::Validation("start points must lie on Γ (even rows)".into()));
    }
    if (x.x - xp.x).rem_euclid(2) != 0 {
        return Err(Error::Validation("start points must be in the same class".into()));
    }
    if t < 2 {
        return Err(Error::Validation("horizon must be at least 2".into()));
    }
    let walk = GammaWalk::new(z, true)?;
    let tf = t as f64;
    let height = tf.sqrt() / tf.ln().powf(b);
    let out: Vec<CouplingTrial> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, ((t as u64) << 32) | i as u64).rng();
            coupled_trajectory(&walk, x, xp, t, height, &mut rng)
        })
        .collect();
    let failures = out.iter().filter(|r| r.time.is_none()).count() as u64;
    let (lo, hi) = wilson_interval(failures, trials as u64, 1.959_963_984_540_054);
    Ok(CouplingReport {
        horizon: t,
        burn_in_height: height,
        trials: trials as u64,
        failures,
        failure_probability: failures as f64 / trials as f64,
        wilson_low: lo,
        wilson_high: hi,
        vertical_breaks: out.iter().map(|r| r.vertical_breaks).sum(),
        post_coupling_breaks: out.iter().map(|r| r.post_coupling_breaks).sum(),
    })
}

/// Least-squares slope of `ln P(T > t)` against `ln t`.
pub fn coupling_slope(reports: &[CouplingReport]) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = reports
        .iter()
        .filter(|r| r.failures > 0)
        .map(|r| ((r.horizon as f64).ln(), r.failure_probability.ln()))
        .unzip();
    if xs.len() < 2 {
        return f64::NAN;
    }
    linear_fit(&xs, &ys).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kasteleyn::{inverse_kasteleyn, partition_function};
    use crate::lattice::{augment, augment_with_mode, build_rectangle_domain, CornerMode, Domain};
    use crate::walks::odd_walk_kernel;

    fn grid_domain(w: i64, h: i64) -> Domain {
        let pts: Vec<LatticePoint> = (0..h).flat_map(|y| (0..w).map(move |x| LatticePoint::new(x, y))).collect();
        Domain::from_vertices(&pts).unwrap()
    }

    fn grid(w: i64, h: i64, z: f64) -> AugmentedDomain {
        augment(&grid_domain(w, h), z, 0).unwrap()
    }

    fn rect(w: usize, h: usize, z: f64) -> AugmentedDomain {
        augment(&build_rectangle_domain(w, h).unwrap(), z, 0).unwrap()
    }

    #[test]
    fn streams_reproduce() {
        let a: Vec<u64> = (0..5).map(|_| 0).scan(RngStream::new(7, 3).rng(), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..5).map(|_| 0).scan(RngStream::new(7, 3).rng(), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..5).map(|_| 0).scan(RngStream::new(7, 4).rng(), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn two_by_three_has_three_pure_dimer_covers() {
        for (w, h) in [(2, 3), (4, 3)] {
            let aug = grid(w, h, 1.0);
            let covers = enumerate_covers(&aug).unwrap();
            let expect = if w == 2 { 3 } else { 11 };
            assert_eq!(covers.iter().filter(|(c, _)| c.monomers.is_empty()).count(), expect, "{w}x{h}");
        }
    }

    #[test]
    fn enumeration_matches_pfaffian() {
        for (w, h, z) in [(2, 3, 1.0), (2, 2, 0.7), (4, 2, 2.0), (4, 3, 0.3), (2, 5, 1.3)] {
            let aug = grid(w, h, z);
            let covers = enumerate_covers(&aug).unwrap();
            let (pf, _) = partition_function(&aug).unwrap();
            let zt = enumerated_partition_function(&covers);
            assert!((pf - zt).abs() <= 1e-9 * zt, "{w}x{h} z={z}: {pf} vs {zt}");
            for (c, _) in &covers {
                c.validate(&aug).unwrap();
            }
        }
    }

    #[test]
    fn two_vertex_boundary_law() {
        // Two tops joined by one edge: one dimer or two monomers.
        let z = 0.8;
        let d = Domain::from_vertices(&[LatticePoint::new(0, 0), LatticePoint::new(1, 0)]);
        if let Ok(d) = d {
            let aug = augment_with_mode(&d, z, 0, CornerMode::FiniteN).unwrap();
            let zt = enumerated_partition_function(&enumerate_covers(&aug).unwrap());
            assert!((zt - (1.0 + z * z)).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_enforced() {
        let aug = rect(7, 5, 1.0);
        assert!(matches!(enumerate_covers(&aug), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn exact_sampler_matches_enumeration() {
        let aug = rect(3, 3, 1.0);
        let law = enumerate_covers(&aug).unwrap();
        let samples = sample_exact_batch(&aug, 20_000, 11, 8).unwrap();
        let chi = chi_square_test(&samples, &law).unwrap();
        assert_eq!(chi.outside, 0);
        assert!(chi.p_value > 1e-3, "{chi:?}");
    }

    #[test]
    fn exact_sampler_is_reproducible() {
        let aug = rect(3, 3, 1.0);
        let a = sample_exact_batch(&aug, 50, 5, 4).unwrap();
        let b = sample_exact_batch(&aug, 50, 5, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_z_gives_no_monomers() {
        let aug = rect(3, 3, 1e-7);
        let mut rng = RngStream::new(1, 0).rng();
        let s = ExactSampler::new(&aug).unwrap();
        for _ in 0..200 {
            assert!(s.sample_md(&mut rng).unwrap().monomers.is_empty());
        }
    }

    #[test]
    fn exact_edge_frequencies() {
        let aug = grid(4, 3, 1.0);
        let inv = inverse_kasteleyn(&aug).unwrap();
        let n = 20_000;
        let samples = sample_exact_batch(&aug, n, 3, 8).unwrap();
        for e in aug.edges().iter().filter(|e| e.kind == EdgeKind::Lattice) {
            let (a, b) = (aug.vertices()[e.u], aug.vertices()[e.v]);
            let key = if a < b { (a, b) } else { (b, a) };
            let hits = samples.iter().filter(|s| s.dimers.binary_search(&key).is_ok()).count() as f64;
            let p = inv.edge_probability(e.u, e.v);
            let sd = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
            assert!((hits / n as f64 - p).abs() < 4.0 * sd + 1e-12, "{key:?}: {} vs {p}", hits / n as f64);
        }
    }

    #[test]
    fn chain_is_irreducible_on_small_domains() {
        for (w, h, n) in [(2, 3, 0), (2, 2, 0), (4, 2, 0), (2, 2, 1), (2, 3, 1), (4, 3, 0), (2, 4, 2)] {
            let d = grid_domain(w, h);
            let aug = augment(&d, 1.0, n).unwrap();
            let chain = McmcChain::new(&aug).unwrap();
            let reach = chain.reachable();
            let all: HashSet<MdCover> = enumerate_covers(&aug).unwrap().into_iter().map(|(c, _)| c).collect();
            assert_eq!(reach, all, "{w}x{h} N={n}");
        }
    }

    #[test]
    fn chain_matches_enumeration() {
        let aug = grid(2, 2, 1.5);
        let law = enumerate_covers(&aug).unwrap();
        let mut rng = RngStream::new(2, 0).rng();
        let samples = mcmc_sampler(&aug, 20_000, 1000, 20, &mut rng).unwrap();
        let chi = chi_square_test(&samples, &law).unwrap();
        assert!(chi.p_value > 1e-3, "{chi:?}");
    }

    #[test]
    fn pair_creation_ratio_scales_with_square_weight() {
        let aug = grid(2, 2, 0.5);
        let mut chain = McmcChain::new(&aug).unwrap();
        let a = aug.index_of(LatticePoint::new(0, 0)).unwrap();
        let b = aug.index_of(LatticePoint::new(1, 0)).unwrap();
        chain.link(a, b);
        let (r, undo) = chain.apply(Slot::Pair(a, b)).unwrap();
        assert!((r - aug.monomer_weight(0) * aug.monomer_weight(1)).abs() < 1e-15);
        chain.restore(&undo);
        assert_eq!(chain.partner[a], b);
    }

    #[test]
    fn boundary_jump_histogram() {
        let z = 1.0;
        let jumps = BoundaryJumps::new(z).unwrap();
        assert!(jumps.truncation < 1e-12);
        let q = effective_jump_weights(z, 6).unwrap();
        let mut rng = RngStream::new(4, 0).rng();
        let n = 200_000;
        let mut hist = HashMap::<i64, u64>::new();
        for _ in 0..n {
            *hist.entry(jumps.sample(&mut rng)).or_default() += 1;
        }
        for k in -4i64..=4 {
            let p = q[k.unsigned_abs() as usize];
            let f = hist.get(&k).copied().unwrap_or(0) as f64 / n as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "k={k}: {f} vs {p}");
        }
    }

    #[test]
    fn class_changes_only_on_the_line() {
        let mut rng = RngStream::new(9, 0).rng();
        let path = simulate_effective_walk(1.0, LatticePoint::new(0, 0), 20_000, true, &mut rng).unwrap();
        for w in path.windows(2) {
            if (w[1].x - w[0].x).rem_euclid(2) == 1 {
                assert_eq!(w[0].y, 0);
            }
            assert_eq!(w[1].y.rem_euclid(2), 0);
        }
    }

    #[test]
    fn occupation_matches_green() {
        let d = build_rectangle_domain(3, 3).unwrap();
        let aug = augment(&d, 1.0, 2).unwrap();
        let kernel = odd_walk_kernel(&aug).unwrap();
        let start = 0;
        let occ = kernel_occupation(&kernel, start, 40_000, 8).unwrap();
        for v in 0..kernel.states.len() {
            let g = crate::walks::green(&kernel, start, v).unwrap() * kernel.normalizer[v];
            let (m, se) = occ[v];
            assert!((m - g).abs() <= 4.0 * se + 1e-12, "state {v}: {m} ± {se} vs {g}");
        }
    }

    #[test]
    fn coloured_half_flip_is_symmetric() {
        let r = coloured_walk_experiment(0.5, LatticePoint::new(0, 0), 3, 20_000, 1).unwrap();
        for b in r.bins.iter().filter(|b| b.trials > 2000) {
            assert!(b.bias < 4.0 * b.std_err, "{b:?}");
        }
    }

    #[test]
    fn coloured_decay_base() {
        let p = 0.15;
        let r = coloured_walk_experiment(p, LatticePoint::new(0, 0), 4, 100_000, 2).unwrap();
        assert!((r.fitted_base - (1.0 - 2.0 * p)).abs() < 0.05, "{r:?}");
    }

    #[test]
    fn flip_probability_at_unit_z() {
        let p = colour_flip_probability(1.0).unwrap();
        assert!(p > 0.0 && p < 0.25, "{p}");
    }

    #[test]
    fn coupling_invariants() {
        let r = coupling_experiment(1.0, LatticePoint::new(0, 0), LatticePoint::new(2, 0), 512, 2000, 0.5, 3).unwrap();
        assert_eq!(r.vertical_breaks, 0);
        assert_eq!(r.post_coupling_breaks, 0);
        assert!(r.failure_probability > 0.0 && r.failure_probability < 1.0);
        assert!(r.wilson_low <= r.failure_probability && r.failure_probability <= r.wilson_high);
    }

    #[test]
    fn stage_one_matches_vertical() {
        let walk = GammaWalk::new(1.0, true).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        for _ in 0..200 {
            let tr = coupled_trajectory(&walk, LatticePoint::new(0, 2), LatticePoint::new(2, 8), 4000, 5.0, &mut rng);
            assert_eq!(tr.vertical_breaks, 0);
            assert_eq!(tr.post_coupling_breaks, 0);
        }
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && hi > 0.3 && lo > 0.2 && hi < 0.41);
    }
}
