//! Half-plane domains, their augmented graphs and the dimer / monomer-dimer bijection.
//!
//! Vertices are ordered lexicographically by row then column. Every matrix in the crate
//! uses this order, and Pfaffian signs depend on it.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::path::Path;

use petgraph::algo::maximum_matching;
use petgraph::graph::UnGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
}

impl LatticePoint {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn colour(self) -> Colour {
        if (self.x + self.y).rem_euclid(2) == 0 {
            Colour::Black
        } else {
            Colour::White
        }
    }

    /// `(-1)^y`
    pub fn row_sign(self) -> i32 {
        if self.y.rem_euclid(2) == 0 {
            1
        } else {
            -1
        }
    }

    pub fn in_even_row(self) -> bool {
        self.y.rem_euclid(2) == 0
    }

    pub fn offset(self, dx: i64, dy: i64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

impl Ord for LatticePoint {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for LatticePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Colour {
    Black,
    White,
}

/// A finite simply connected subgraph of the square lattice in the closed upper half-plane,
/// whose intersection with the real line is an interval of vertices.
#[derive(Clone, Debug)]
pub struct Domain {
    vertices: Vec<LatticePoint>,
    index: HashMap<LatticePoint, usize>,
    edges: Vec<(usize, usize)>,
    free_boundary: Vec<LatticePoint>,
    monomer_corners: (LatticePoint, LatticePoint),
    dimer_corners: Vec<LatticePoint>,
    perfect_matching: Vec<(usize, usize)>,
}

impl Domain {
    /// Validates and builds a domain from an arbitrary vertex list.
    pub fn from_vertices(points: &[LatticePoint]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("domain has no vertices".into()));
        }
        let below: Vec<LatticePoint> = points.iter().copied().filter(|p| p.y < 0).collect();
        if !below.is_empty() {
            return Err(Error::Domain { message: "vertices below the real line".into(), vertices: below });
        }
        let mut seen = HashSet::new();
        let dup: Vec<LatticePoint> = points.iter().copied().filter(|p| !seen.insert(*p)).collect();
        if !dup.is_empty() {
            return Err(Error::Domain { message: "duplicate vertices".into(), vertices: dup });
        }
        let mut vertices = points.to_vec();
        vertices.sort();
        let index: HashMap<LatticePoint, usize> = vertices.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut edges = Vec::new();
        for (i, p) in vertices.iter().enumerate() {
            for q in [p.offset(1, 0), p.offset(0, 1)] {
                if let Some(&j) = index.get(&q) {
                    edges.push((i, j));
                }
            }
        }

        let free_boundary: Vec<LatticePoint> = vertices.iter().copied().filter(|p| p.y == 0).collect();
        if free_boundary.is_empty() {
            return Err(Error::Domain { message: "no vertex on the real line".into(), vertices: vec![] });
        }
        let gaps: Vec<LatticePoint> = free_boundary
            .windows(2)
            .filter(|w| w[1].x != w[0].x + 1)
            .map(|w| w[1])
            .collect();
        if !gaps.is_empty() {
            return Err(Error::Domain {
                message: "free boundary is not an interval of the real line".into(),
                vertices: gaps,
            });
        }

        let mut adj = vec![Vec::new(); vertices.len()];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut reached = vec![false; vertices.len()];
        let mut queue = VecDeque::from([0usize]);
        reached[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !reached[w] {
                    reached[w] = true;
                    queue.push_back(w);
                }
            }
        }
        let stray: Vec<LatticePoint> = (0..vertices.len()).filter(|&i| !reached[i]).map(|i| vertices[i]).collect();
        if !stray.is_empty() {
            return Err(Error::Domain { message: "graph is disconnected".into(), vertices: stray });
        }

        // Euler: a connected plane graph whose bounded faces are exactly its unit squares
        // satisfies E - V + 1 = #squares; a surplus means a hole.
        let squares = vertices
            .iter()
            .filter(|p| [p.offset(1, 0), p.offset(0, 1), p.offset(1, 1)].iter().all(|q| index.contains_key(q)))
            .count();
        let cycles = edges.len() + 1 - vertices.len();
        if cycles != squares {
            return Err(Error::Domain {
                message: format!("domain is not simply connected ({} independent cycles, {} unit faces)", cycles, squares),
                vertices: vec![],
            });
        }

        let blacks = vertices.iter().filter(|p| p.colour() == Colour::Black).count();
        let whites = vertices.len() - blacks;
        if blacks != whites {
            return Err(Error::Domain {
                message: format!("unbalanced colours: {blacks} black, {whites} white"),
                vertices: vec![],
            });
        }

        let mut graph = UnGraph::<(), ()>::with_capacity(vertices.len(), edges.len());
        let nodes: Vec<_> = (0..vertices.len()).map(|_| graph.add_node(())).collect();
        for &(a, b) in &edges {
            graph.add_edge(nodes[a], nodes[b], ());
        }
        let matching = maximum_matching(&graph);
        if !matching.is_perfect() {
            let unmatched: Vec<LatticePoint> =
                (0..vertices.len()).filter(|&i| !matching.contains_node(nodes[i])).map(|i| vertices[i]).collect();
            return Err(Error::Domain { message: "graph has no perfect matching".into(), vertices: unmatched });
        }
        let perfect_matching: Vec<(usize, usize)> = matching.edges().map(|(a, b)| (a.index(), b.index())).collect();

        let monomer_corners = (free_boundary[0], *free_boundary.last().unwrap());
        let on_outer_face = |p: &LatticePoint| {
            [(0, 0), (-1, 0), (0, -1), (-1, -1)].iter().any(|&(dx, dy)| {
                let c = p.offset(dx, dy);
                ![c, c.offset(1, 0), c.offset(0, 1), c.offset(1, 1)].iter().all(|q| index.contains_key(q))
            })
        };
        let dimer_corners: Vec<LatticePoint> = vertices
            .iter()
            .enumerate()
            .filter(|(i, p)| {
                **p != monomer_corners.0
                    && **p != monomer_corners.1
                    && matches!(adj[*i].len(), 2 | 4)
                    && on_outer_face(p)
            })
            .map(|(_, p)| *p)
            .collect();
        for colour in [Colour::Black, Colour::White] {
            if !dimer_corners.iter().any(|p| p.colour() == colour) {
                return Err(Error::Domain {
                    message: format!("no {colour:?} dimer-corner; the domain is not repaired"),
                    vertices: dimer_corners.clone(),
                });
            }
        }

        Ok(Self { vertices, index, edges, free_boundary, monomer_corners, dimer_corners, perfect_matching })
    }

    pub fn vertices(&self) -> &[LatticePoint] {
        &self.vertices
    }

    /// One perfect matching, as vertex index pairs.
    pub fn perfect_matching(&self) -> &[(usize, usize)] {
        &self.perfect_matching
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn index_of(&self, p: LatticePoint) -> Option<usize> {
        self.index.get(&p).copied()
    }

    pub fn contains(&self, p: LatticePoint) -> bool {
        self.index.contains_key(&p)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn free_boundary(&self) -> &[LatticePoint] {
        &self.free_boundary
    }

    pub fn monomer_corners(&self) -> (LatticePoint, LatticePoint) {
        self.monomer_corners
    }

    pub fn dimer_corners(&self) -> &[LatticePoint] {
        &self.dimer_corners
    }
}

/// Number of rightmost top-row vertices removed from a `width × height` rectangle.
///
/// Of the two halves ⌊W/2⌋ and ⌈W/2⌉ the odd one is taken; it is the only choice that
/// leaves the colours balanced.
pub fn rectangle_notch(width: usize) -> usize {
    let lo = width / 2;
    if lo % 2 == 1 {
        lo
    } else {
        lo + 1
    }
}

pub fn build_rectangle_domain(width: usize, height: usize) -> Result<Domain> {
    if width % 2 == 0 || height % 2 == 0 {
        return Err(Error::Validation(format!("rectangle sides must be odd, got {width}x{height}")));
    }
    if width < 3 || height < 3 {
        return Err(Error::Validation(format!("rectangle sides must be at least 3, got {width}x{height}")));
    }
    let cut = rectangle_notch(width);
    let mut points = Vec::with_capacity(width * height);
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            if y == height as i64 - 1 && x >= (width - cut) as i64 {
                continue;
            }
            points.push(LatticePoint::new(x, y));
        }
    }
    Domain::from_vertices(&points)
}

/// Domain file contents.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Rectangle { width: usize, height: usize },
    Explicit { vertices: Vec<[i64; 2]> },
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        match self {
            DomainSpec::Rectangle { width, height } => build_rectangle_domain(*width, *height),
            DomainSpec::Explicit { vertices } => {
                let pts: Vec<LatticePoint> = vertices.iter().map(|v| LatticePoint::new(v[0], v[1])).collect();
                Domain::from_vertices(&pts)
            }
        }
    }

    /// Accepts either JSON or the shorthand `rect:WxH`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(dims) = t.strip_prefix("rect:") {
            let (w, h) = dims
                .split_once(['x', 'X'])
                .ok_or_else(|| Error::Validation(format!("expected rect:WxH, got {t:?}")))?;
            let parse = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| Error::Validation(format!("bad rectangle side {s:?}")))
            };
            return Ok(DomainSpec::Rectangle { width: parse(w)?, height: parse(h)? });
        }
        Ok(serde_json::from_str(t)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

pub fn corner_weight(z: f64) -> f64 {
    z / 2.0 + (1.0 + z * z / 4.0).sqrt()
}

/// Monomer-dimer partition function of a path with `n` vertices, monomer weight `z`, edge weight 1.
pub fn segment_partition_function(n: usize, z: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, z);
    if n == 0 {
        return 1.0;
    }
    for _ in 1..n {
        let next = z * cur + prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CornerMode {
    /// Corner monomers carry z′ directly.
    ExplicitZPrime,
    /// Corners carry z; side segments emulate z′ as N grows.
    FiniteN,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Lattice,
    /// Horizontal edge of the apex row y = -1.
    ApexRow,
    /// Non-horizontal side of a triangle, from a top vertex at y = 0 to an apex.
    Leg,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    pub kind: EdgeKind,
}

/// A domain with its row of triangles below the free boundary and `n_side` extra triangle
/// pairs on each side. Apex `(j, -1)` sits at real position `j - 1/2`; top vertex `(a, 0)` is
/// joined to apices `a` and `a + 1` when present.
#[derive(Clone, Debug)]
pub struct AugmentedDomain {
    base: Domain,
    z: f64,
    n_side: usize,
    mode: CornerMode,
    k: usize,
    vertices: Vec<LatticePoint>,
    index: HashMap<LatticePoint, usize>,
    edges: Vec<WeightedEdge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    apex_range: (i64, i64),
    top_range: (i64, i64),
}

/// Triangle count k for a free boundary of `n` vertices: the candidate among 2n-1, 2n-2 with
/// k - ⌊k/2⌋ + 1 even, so the number of monomers is even.
pub fn triangle_count(n: usize) -> usize {
    assert!(n >= 1);
    if n == 1 {
        return 1;
    }
    [2 * n - 1, 2 * n - 2]
        .into_iter()
        .find(|&k| (k - k / 2 + 1) % 2 == 0)
        .expect("one of two consecutive integers has the required parity")
}

pub fn augment(domain: &Domain, z: f64, n_side: usize) -> Result<AugmentedDomain> {
    augment_with_mode(domain, z, n_side, CornerMode::ExplicitZPrime)
}

pub fn augment_with_mode(domain: &Domain, z: f64, n_side: usize, mode: CornerMode) -> Result<AugmentedDomain> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Validation(format!("monomer weight must be positive and finite, got {z}")));
    }
    let bnd = domain.free_boundary();
    let n = bnd.len();
    let (x0, x1) = (bnd[0].x, bnd[n - 1].x);
    let k = triangle_count(n);
    let ns = n_side as i64;
    let lo = if k % 2 == 1 { x0 - ns } else { x0 + 1 - ns };
    let hi = x1 + 1 + ns;
    let tops = (x0 - ns, x1 + ns);

    let mut set: BTreeSet<LatticePoint> = domain.vertices().iter().copied().collect();
    for a in tops.0..=tops.1 {
        set.insert(LatticePoint::new(a, 0));
    }
    for j in lo..=hi {
        set.insert(LatticePoint::new(j, -1));
    }
    let vertices: Vec<LatticePoint> = set.into_iter().collect();
    let index: HashMap<LatticePoint, usize> = vertices.iter().enumerate().map(|(i, p)| (*p, i)).collect();

    let zp = corner_weight(z);
    let mut edges = Vec::new();
    for (i, p) in vertices.iter().enumerate() {
        let right = p.offset(1, 0);
        if let Some(&j) = index.get(&right) {
            let kind = if p.y < 0 { EdgeKind::ApexRow } else { EdgeKind::Lattice };
            edges.push(WeightedEdge { u: i, v: j, weight: 1.0, kind });
        }
        if p.y >= 0 {
            if let Some(&j) = index.get(&p.offset(0, 1)) {
                edges.push(WeightedEdge { u: i, v: j, weight: 1.0, kind: EdgeKind::Lattice });
            }
        }
        if p.y == 0 {
            let corner = p.x == tops.0 || p.x == tops.1;
            let w = if corner && mode == CornerMode::ExplicitZPrime { zp } else { z };
            for j in [p.x, p.x + 1] {
                if (lo..=hi).contains(&j) {
                    let a = index[&LatticePoint::new(j, -1)];
                    edges.push(WeightedEdge { u: i, v: a, weight: w, kind: EdgeKind::Leg });
                }
            }
        }
    }
    let mut adjacency = vec![Vec::new(); vertices.len()];
    for (e, edge) in edges.iter().enumerate() {
        adjacency[edge.u].push((edge.v, e));
        adjacency[edge.v].push((edge.u, e));
    }
    Ok(AugmentedDomain {
        base: domain.clone(),
        z,
        n_side,
        mode,
        k,
        vertices,
        index,
        edges,
        adjacency,
        apex_range: (lo, hi),
        top_range: tops,
    })
}

impl AugmentedDomain {
    pub fn base(&self) -> &Domain {
        &self.base
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    pub fn mode(&self) -> CornerMode {
        self.mode
    }

    /// Triangle count of the row under the base free boundary.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vertices(&self) -> &[LatticePoint] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn index_of(&self, p: LatticePoint) -> Option<usize> {
        self.index.get(&p).copied()
    }

    pub fn edges(&self) -> &[WeightedEdge] {
        &self.edges
    }

    /// (neighbour, edge id) pairs.
    pub fn neighbours(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adjacency[u].iter().find(|(w, _)| *w == v).map(|(_, e)| *e)
    }

    pub fn apex_range(&self) -> (i64, i64) {
        self.apex_range
    }

    pub fn top_range(&self) -> (i64, i64) {
        self.top_range
    }

    /// Real part of the embedded position: apex `(j,-1)` sits at `j - 1/2`.
    pub fn position(&self, v: usize) -> (f64, f64) {
        let p = self.vertices[v];
        if p.y < 0 {
            (p.x as f64 - 0.5, -1.0)
        } else {
            (p.x as f64, p.y as f64)
        }
    }

    /// Vertices with y >= 0: the base domain plus the side segments.
    pub fn upper_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertices.len()).filter(move |&i| self.vertices[i].y >= 0)
    }

    /// Weight of a monomer at top vertex `(x, 0)`, equal to its leg weight.
    pub fn monomer_weight(&self, x: i64) -> f64 {
        let corner = x == self.top_range.0 || x == self.top_range.1;
        if corner && self.mode == CornerMode::ExplicitZPrime {
            corner_weight(self.z)
        } else {
            self.z
        }
    }
}

/// Boundary monomer-dimer configuration.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MdCover {
    /// Each pair stored with the smaller point first; list sorted.
    pub dimers: Vec<(LatticePoint, LatticePoint)>,
    /// Sorted.
    pub monomers: Vec<LatticePoint>,
}

impl MdCover {
    pub fn new(mut dimers: Vec<(LatticePoint, LatticePoint)>, mut monomers: Vec<LatticePoint>) -> Self {
        for d in dimers.iter_mut() {
            if d.1 < d.0 {
                *d = (d.1, d.0);
            }
        }
        dimers.sort();
        monomers.sort();
        Self { dimers, monomers }
    }

    /// Checks the cover against the part of `aug` at y >= 0.
    pub fn validate(&self, aug: &AugmentedDomain) -> Result<()> {
        let mut count: HashMap<LatticePoint, usize> = HashMap::new();
        let mut bad = Vec::new();
        for &(a, b) in &self.dimers {
            let ok = match (aug.index_of(a), aug.index_of(b)) {
                (Some(i), Some(j)) => a.y >= 0 && b.y >= 0 && aug.edge_between(i, j).is_some(),
                _ => false,
            };
            if !ok {
                bad.push(a);
                bad.push(b);
            }
            *count.entry(a).or_default() += 1;
            *count.entry(b).or_default() += 1;
        }
        for &m in &self.monomers {
            if m.y != 0 || aug.index_of(m).is_none() {
                bad.push(m);
            }
            *count.entry(m).or_default() += 1;
        }
        for i in aug.upper_vertices() {
            let p = aug.vertices()[i];
            if count.get(&p).copied().unwrap_or(0) != 1 {
                bad.push(p);
            }
        }
        for (p, c) in &count {
            if *c > 1 {
                bad.push(*p);
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            bad.sort();
            bad.dedup();
            Err(Error::InvalidCover { message: "vertices not covered exactly once".into(), vertices: bad })
        }
    }

    pub fn weight(&self, aug: &AugmentedDomain) -> f64 {
        self.monomers.iter().map(|m| aug.monomer_weight(m.x)).product()
    }
}

/// A perfect matching of an augmented graph, as sorted edge ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DimerCover {
    pub edges: Vec<usize>,
}

impl DimerCover {
    pub fn validate(&self, aug: &AugmentedDomain) -> Result<()> {
        let mut count = vec![0usize; aug.len()];
        for &e in &self.edges {
            let edge = aug
                .edges()
                .get(e)
                .ok_or_else(|| Error::Validation(format!("edge id {e} out of range")))?;
            count[edge.u] += 1;
            count[edge.v] += 1;
        }
        let bad: Vec<LatticePoint> =
            (0..aug.len()).filter(|&i| count[i] != 1).map(|i| aug.vertices()[i]).collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidCover { message: "not a perfect matching".into(), vertices: bad })
        }
    }

    pub fn weight(&self, aug: &AugmentedDomain) -> f64 {
        self.edges.iter().map(|&e| aug.edges()[e].weight).product()
    }
}

/// The unique perfect matching of the triangle row minus the tops listed in `removed`.
///
/// Vertices are scanned left to right along the strip (apex, top, apex, top, ...). The leftmost
/// unmatched vertex has at most one admissible partner, so the cover is forced.
/// Returns pairs of points.
pub fn complete_triangle_row(
    apex_range: (i64, i64),
    top_range: (i64, i64),
    removed: &BTreeSet<i64>,
) -> Result<Vec<(LatticePoint, LatticePoint)>> {
    let (lo, hi) = apex_range;
    let n_tops = (top_range.1 - top_range.0 + 1) as usize;
    let n_apex = (hi - lo + 1) as usize;
    if removed.iter().any(|x| *x < top_range.0 || *x > top_range.1) {
        return Err(Error::Validation("removed vertex is not on the top row".into()));
    }
    if (n_tops - removed.len() + n_apex) % 2 != 0 {
        return Err(Error::NoCover(format!(
            "parity: {} remaining tops and {} apices",
            n_tops - removed.len(),
            n_apex
        )));
    }
    let present = |a: i64| a >= top_range.0 && a <= top_range.1 && !removed.contains(&a);
    // Strip order by real position: top a at a, apex j at j - 1/2.
    let mut strip: Vec<LatticePoint> = (lo..=hi).map(|j| LatticePoint::new(j, -1)).collect();
    strip.extend((top_range.0..=top_range.1).filter(|&a| present(a)).map(|a| LatticePoint::new(a, 0)));
    strip.sort_by_key(|q| 2 * q.x + if q.y < 0 { -1 } else { 0 });
    let mut matched = vec![false; strip.len()];
    let mut out = Vec::new();
    for i in 0..strip.len() {
        if matched[i] {
            continue;
        }
        let v = strip[i];
        let partner = if v.y == 0 {
            LatticePoint::new(v.x + 1, -1)
        } else if present(v.x) {
            LatticePoint::new(v.x, 0)
        } else {
            LatticePoint::new(v.x + 1, -1)
        };
        match strip.iter().position(|q| *q == partner) {
            Some(j) if !matched[j] => {
                matched[i] = true;
                matched[j] = true;
                out.push((v, partner));
            }
            _ => return Err(Error::NoCover(format!("vertex ({},{}) is left unmatched", v.x, v.y))),
        }
    }
    Ok(out)
}

/// Maps a perfect matching of the augmented graph to the monomer-dimer cover of its upper part.
pub fn cover_to_md(aug: &AugmentedDomain, cover: &DimerCover) -> Result<MdCover> {
    cover.validate(aug)?;
    let mut dimers = Vec::new();
    let mut monomers = Vec::new();
    for &e in &cover.edges {
        let edge = aug.edges()[e];
        let (a, b) = (aug.vertices()[edge.u], aug.vertices()[edge.v]);
        match edge.kind {
            EdgeKind::Lattice => dimers.push((a, b)),
            EdgeKind::Leg => monomers.push(if a.y == 0 { a } else { b }),
            EdgeKind::ApexRow => {}
        }
    }
    Ok(MdCover::new(dimers, monomers))
}

/// Inverse of [`cover_to_md`]: completes the triangle row under the covered tops.
pub fn md_to_cover(aug: &AugmentedDomain, md: &MdCover) -> Result<DimerCover> {
    md.validate(aug)?;
    let mut edges = Vec::new();
    let mut removed = BTreeSet::new();
    let (t0, t1) = aug.top_range();
    let monomer_set: HashSet<i64> = md.monomers.iter().map(|m| m.x).collect();
    for x in t0..=t1 {
        if !monomer_set.contains(&x) {
            removed.insert(x);
        }
    }
    for &(a, b) in &md.dimers {
        let (i, j) = (aug.index_of(a).unwrap(), aug.index_of(b).unwrap());
        edges.push(aug.edge_between(i, j).unwrap());
    }
    for (a, b) in complete_triangle_row(aug.apex_range(), aug.top_range(), &removed)? {
        let (i, j) = (aug.index_of(a).unwrap(), aug.index_of(b).unwrap());
        edges.push(aug.edge_between(i, j).ok_or_else(|| Error::Numerical("triangle row edge missing".into()))?);
    }
    edges.sort_unstable();
    Ok(DimerCover { edges })
}

/// All perfect matchings of a small graph given as an edge list, as sorted edge-id lists.
pub fn enumerate_perfect_matchings(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for (e, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    let mut used = vec![false; n];
    let mut current = Vec::new();
    let mut out = Vec::new();
    fn rec(
        adj: &[Vec<(usize, usize)>],
        used: &mut [bool],
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let Some(v) = used.iter().position(|u| !u) else {
            let mut m = current.clone();
            m.sort_unstable();
            out.push(m);
            return;
        };
        used[v] = true;
        for &(w, e) in &adj[v] {
            if !used[w] {
                used[w] = true;
                current.push(e);
                rec(adj, used, current, out);
                current.pop();
                used[w] = false;
            }
        }
        used[v] = false;
    }
    if n % 2 == 0 {
        rec(&adj, &mut used, &mut current, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: i64, y: i64) -> LatticePoint {
        LatticePoint::new(x, y)
    }

    #[test]
    fn rectangle_sizes() {
        assert_eq!(build_rectangle_domain(3, 3).unwrap().len(), 8);
        let d = build_rectangle_domain(5, 5).unwrap();
        assert_eq!(d.len(), 22);
        assert_eq!(d.free_boundary().len(), 5);
        assert_eq!(build_rectangle_domain(5, 3).unwrap().len(), 12);
        assert_eq!(build_rectangle_domain(3, 5).unwrap().len(), 14);
        assert!(build_rectangle_domain(2, 5).is_err());
        assert!(build_rectangle_domain(1, 5).is_err());
    }

    #[test]
    fn rectangle_balance() {
        for w in (3..=15).step_by(2) {
            for h in (3..=9).step_by(2) {
                let d = build_rectangle_domain(w, h).unwrap();
                let b = d.vertices().iter().filter(|v| v.colour() == Colour::Black).count();
                assert_eq!(2 * b, d.len(), "{w}x{h}");
            }
        }
    }

    #[test]
    fn order_is_row_major() {
        let mut v = vec![p(2, 0), p(0, 1), p(1, 0), p(0, -1)];
        v.sort();
        assert_eq!(v, vec![p(0, -1), p(1, 0), p(2, 0), p(0, 1)]);
        assert_eq!(p(0, 0).colour(), Colour::Black);
        assert_eq!(p(1, 0).colour(), Colour::White);
        assert_eq!(p(3, -1).row_sign(), -1);
    }

    #[test]
    fn validation_failures() {
        // hole in the middle of a 3x3 block plus extension
        let mut pts = Vec::new();
        for y in 0..4 {
            for x in 0..4 {
                if !(x == 1 && y == 1) && !(x == 2 && y == 2) {
                    pts.push(p(x, y));
                }
            }
        }
        assert!(Domain::from_vertices(&pts).is_err());
        // disconnected free boundary
        let gap = [p(0, 0), p(2, 0), p(0, 1), p(1, 1), p(2, 1), p(3, 1)];
        let err = Domain::from_vertices(&gap).unwrap_err();
        assert!(err.to_string().contains("interval"));
        // odd vertex count
        let odd = [p(0, 0), p(1, 0), p(2, 0)];
        assert!(Domain::from_vertices(&odd).is_err());
        // below the line
        assert!(Domain::from_vertices(&[p(0, -1), p(0, 0)]).is_err());
    }

    #[test]
    fn domain_spec_parsing() {
        let s = DomainSpec::parse(r#"{"type":"rectangle","width":5,"height":3}"#).unwrap();
        assert_eq!(s, DomainSpec::Rectangle { width: 5, height: 3 });
        assert_eq!(DomainSpec::parse("rect:3x5").unwrap(), DomainSpec::Rectangle { width: 3, height: 5 });
        let e = DomainSpec::parse(r#"{"type":"explicit","vertices":[[0,0],[1,0],[0,1],[1,1]]}"#).unwrap();
        let d = e.build().unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.dimer_corners().len(), 2);
        let err = DomainSpec::parse("{\"type\":\"rectangle\",\n\"width\":}").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn zprime_values() {
        assert!((corner_weight(1.0) - 1.618_033_988_749_895).abs() < 1e-15);
        assert!((corner_weight(2.0) - (1.0 + 2f64.sqrt())).abs() < 1e-15);
        assert!((corner_weight(1e-12) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn segment_recursion() {
        let fib: Vec<f64> = (0..10).map(|n| segment_partition_function(n, 1.0)).collect();
        assert_eq!(fib, vec![1.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 55.0]);
        assert_eq!(segment_partition_function(0, 3.0), 1.0);
        let r = segment_partition_function(41, 2.0) / segment_partition_function(40, 2.0);
        assert!((r - corner_weight(2.0)).abs() < 1e-12);
        // closed form of the linear recursion
        let z: f64 = 0.7;
        let b = (1.0 + z * z / 4.0).sqrt();
        for n in 0..20 {
            let closed = (0.5 - z / (4.0 * b)) * (z / 2.0 - b).powi(n as i32)
                + (0.5 + z / (4.0 * b)) * (z / 2.0 + b).powi(n as i32);
            assert!((closed - segment_partition_function(n, z)).abs() < 1e-9 * closed);
        }
    }

    #[test]
    fn triangle_counts() {
        // 5 boundary vertices: k = 9
        assert_eq!(triangle_count(5), 9);
        assert_eq!(triangle_count(3), 5);
        assert_eq!(triangle_count(4), 6);
        for n in 2..30 {
            let k = triangle_count(n);
            assert_eq!(k / 2 + 1, n);
            assert_eq!((k - k / 2 + 1) % 2, 0);
        }
    }

    #[test]
    fn augmented_shape() {
        let d = build_rectangle_domain(5, 5).unwrap();
        let a0 = augment(&d, 1.0, 0).unwrap();
        assert_eq!(a0.k(), 9);
        // k + 2 vertices in the triangle row, 5 of them shared with the base
        assert_eq!(a0.len(), d.len() + 9 + 2 - 5);
        let a2 = augment_with_mode(&d, 1.0, 2, CornerMode::FiniteN).unwrap();
        // two extra tops and two extra apices on each side
        assert_eq!(a2.len(), a0.len() + 8);
        assert!(augment(&d, 0.0, 0).is_err());
        assert!(a0.edges().iter().all(|e| e.weight > 0.0));
        let legs_at_corner: Vec<f64> = a0
            .edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Leg && (a0.vertices()[e.u].x == 0 || a0.vertices()[e.v].x == 0))
            .map(|e| e.weight)
            .collect();
        assert!(legs_at_corner.iter().all(|w| (w - corner_weight(1.0)).abs() < 1e-15));
    }

    fn strip(k: usize) -> ((i64, i64), (i64, i64)) {
        let n = k / 2 + 1;
        let lo = if k % 2 == 1 { 0 } else { 1 };
        ((lo, n as i64), (0, n as i64 - 1))
    }

    fn strip_edges(apex: (i64, i64), tops: (i64, i64)) -> (Vec<LatticePoint>, Vec<(usize, usize)>) {
        let mut pts: Vec<LatticePoint> = (apex.0..=apex.1).map(|j| p(j, -1)).collect();
        pts.extend((tops.0..=tops.1).map(|a| p(a, 0)));
        let idx = |q: LatticePoint| pts.iter().position(|r| *r == q);
        let mut e = Vec::new();
        for j in apex.0..apex.1 {
            e.push((idx(p(j, -1)).unwrap(), idx(p(j + 1, -1)).unwrap()));
        }
        for a in tops.0..=tops.1 {
            for j in [a, a + 1] {
                if let Some(b) = idx(p(j, -1)) {
                    e.push((idx(p(a, 0)).unwrap(), b));
                }
            }
        }
        (pts, e)
    }

    #[test]
    fn triangle_row_unique_cover_matches_brute_force() {
        for k in 1..=8usize {
            let (apex, tops) = strip(k);
            let (pts, edges) = strip_edges(apex, tops);
            assert_eq!(pts.len(), k + 2);
            let n = (tops.1 - tops.0 + 1) as usize;
            for mask in 0u32..(1 << n) {
                let removed: BTreeSet<i64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i as i64).collect();
                let keep: Vec<usize> =
                    (0..pts.len()).filter(|&i| !(pts[i].y == 0 && removed.contains(&pts[i].x))).collect();
                let remap: HashMap<usize, usize> = keep.iter().enumerate().map(|(a, b)| (*b, a)).collect();
                let sub: Vec<(usize, usize)> = edges
                    .iter()
                    .filter_map(|(a, b)| Some((*remap.get(a)?, *remap.get(b)?)))
                    .collect();
                let brute = enumerate_perfect_matchings(keep.len(), &sub);
                let forced = complete_triangle_row(apex, tops, &removed);
                if removed.len() % 2 == k % 2 {
                    assert_eq!(brute.len(), 1, "k={k} W={removed:?}");
                    let cover = forced.unwrap();
                    let mut got: Vec<(LatticePoint, LatticePoint)> =
                        cover.into_iter().map(|(a, b)| if a < b { (a, b) } else { (b, a) }).collect();
                    got.sort();
                    let mut want: Vec<(LatticePoint, LatticePoint)> = brute[0]
                        .iter()
                        .map(|&e| {
                            let (a, b) = (pts[keep[sub[e].0]], pts[keep[sub[e].1]]);
                            if a < b {
                                (a, b)
                            } else {
                                (b, a)
                            }
                        })
                        .collect();
                    want.sort();
                    assert_eq!(got, want);
                } else {
                    assert!(brute.is_empty());
                    assert!(matches!(forced, Err(Error::NoCover(_))));
                }
            }
        }
    }

    #[test]
    fn k4_with_all_tops_removed_has_no_cover() {
        let (apex, tops) = strip(4);
        let removed: BTreeSet<i64> = (0..3).collect();
        assert!(matches!(complete_triangle_row(apex, tops, &removed), Err(Error::NoCover(_))));
    }

    #[test]
    fn k0_single_edge() {
        // T_0: one top, one apex
        let cover = complete_triangle_row((1, 1), (0, 0), &BTreeSet::new()).unwrap();
        assert_eq!(cover, vec![(p(0, 0), p(1, -1))]);
    }

    #[test]
    fn bijection_round_trip_3x3() {
        let d = build_rectangle_domain(3, 3).unwrap();
        let aug = augment(&d, 1.3, 0).unwrap();
        let edges: Vec<(usize, usize)> = aug.edges().iter().map(|e| (e.u, e.v)).collect();
        let all = enumerate_perfect_matchings(aug.len(), &edges);
        assert!(!all.is_empty());
        let mut images = HashSet::new();
        for m in &all {
            let cover = DimerCover { edges: m.clone() };
            let md = cover_to_md(&aug, &cover).unwrap();
            md.validate(&aug).unwrap();
            assert!((md.weight(&aug) - cover.weight(&aug)).abs() < 1e-12);
            assert_eq!(md_to_cover(&aug, &md).unwrap(), cover);
            images.insert(md);
        }
        assert_eq!(images.len(), all.len());
        // no-monomer cover maps back with every top removed from the row
        let no_mono = images.iter().find(|m| m.monomers.is_empty()).unwrap();
        let back = md_to_cover(&aug, no_mono).unwrap();
        assert!(back.edges.iter().all(|&e| aug.edges()[e].kind != EdgeKind::Leg));
    }

    #[test]
    fn invalid_cover_lists_vertices() {
        let d = build_rectangle_domain(3, 3).unwrap();
        let aug = augment(&d, 1.0, 0).unwrap();
        let md = MdCover::new(vec![(p(0, 0), p(1, 0))], vec![]);
        match md.validate(&aug) {
            Err(Error::InvalidCover { vertices, .. }) => assert!(vertices.contains(&p(2, 0))),
            other => panic!("{other:?}"),
        }
    }
}
