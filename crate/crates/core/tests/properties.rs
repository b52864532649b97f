use std::collections::BTreeSet;

use faer::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freedimer::fields::{
    dual_path, dual_path_horizontal_first, exact_height_moment, gff_covariance, height_along, reference_flow,
};
use freedimer::kasteleyn::{
    check_faces, inverse_kasteleyn, joint_dimer_probability, orient, partition_function, pfaffian,
};
use freedimer::lattice::{
    augment, complete_triangle_row, corner_weight, cover_to_md, enumerate_perfect_matchings, md_to_cover,
    segment_partition_function, AugmentedDomain, Colour, Domain, EdgeKind, LatticePoint,
};
use freedimer::linalg::C64;
use freedimer::mc::{enumerate_covers, enumerated_partition_function, sample_exact, RngStream};
use freedimer::potential::HalfPlaneKernel;
use freedimer::walks::{aux_params, effective_jump_weights, jump_mass};

fn column_domain(heights: &[i64]) -> Option<Domain> {
    let pts: Vec<LatticePoint> = heights
        .iter()
        .enumerate()
        .flat_map(|(x, &h)| (0..h).map(move |y| LatticePoint::new(x as i64, y)))
        .collect();
    Domain::from_vertices(&pts).ok()
}

fn small_graph() -> impl Strategy<Value = (Vec<i64>, f64)> {
    (prop::collection::vec(1i64..=4, 2..=5), 0.2f64..3.0)
}

fn lattice_key(aug: &AugmentedDomain, u: usize, v: usize) -> (LatticePoint, LatticePoint) {
    let (a, b) = (aug.vertices()[u], aug.vertices()[v]);
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn accepted_domains_are_balanced_and_exact((heights, z) in small_graph()) {
        let Some(d) = column_domain(&heights) else { return Ok(()) };
        prop_assume!(d.len() <= 20);
        let blacks = d.vertices().iter().filter(|p| p.colour() == Colour::Black).count();
        prop_assert_eq!(2 * blacks, d.len());
        prop_assert_eq!(2 * d.perfect_matching().len(), d.len());

        let aug = augment(&d, z, 0).unwrap();
        check_faces(&aug, &orient(&aug).unwrap()).unwrap();
        let covers = enumerate_covers(&aug).unwrap();
        let zt = enumerated_partition_function(&covers);
        let (pf, _) = partition_function(&aug).unwrap();
        prop_assert!((pf - zt).abs() <= 1e-9 * zt, "{} vs {}", pf, zt);

        let inv = inverse_kasteleyn(&aug).unwrap();
        for v in 0..aug.len() {
            let total: f64 = aug.neighbours(v).iter().map(|&(w, _)| inv.edge_probability(v, w)).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            for &(w, _) in aug.neighbours(v) {
                let c = inv.k.get(v, w) * inv.coupling(v, w);
                prop_assert!(c.im.abs() < 1e-9);
            }
        }
        // one- and two-edge marginals against enumeration
        let lattice: Vec<(usize, usize)> = aug
            .edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Lattice)
            .map(|e| (e.u, e.v))
            .collect();
        for (i, &(a, b)) in lattice.iter().enumerate() {
            let ka = lattice_key(&aug, a, b);
            let p1: f64 = covers.iter().filter(|(c, _)| c.dimers.contains(&ka)).map(|(_, w)| w).sum::<f64>() / zt;
            prop_assert!((inv.edge_probability(a, b) - p1).abs() <= 1e-9 * p1.max(1e-3));
            for &(c, e) in &lattice[i + 1..] {
                if [a, b].contains(&c) || [a, b].contains(&e) {
                    continue;
                }
                let kb = lattice_key(&aug, c, e);
                let p2: f64 = covers
                    .iter()
                    .filter(|(cv, _)| cv.dimers.contains(&ka) && cv.dimers.contains(&kb))
                    .map(|(_, w)| w)
                    .sum::<f64>()
                    / zt;
                let got = joint_dimer_probability(&inv, &[(a, b), (c, e)]).unwrap();
                prop_assert!((got - p2).abs() <= 1e-9 * p2.max(1e-3), "{} vs {}", got, p2);
            }
        }
        for (c, _) in &covers {
            let back = cover_to_md(&aug, &md_to_cover(&aug, c).unwrap()).unwrap();
            prop_assert_eq!(&back, c);
        }
    }

    #[test]
    fn coupling_is_antisymmetric((heights, z) in small_graph()) {
        let Some(d) = column_domain(&heights) else { return Ok(()) };
        let aug = augment(&d, z, 0).unwrap();
        let inv = inverse_kasteleyn(&aug).unwrap();
        for u in 0..aug.len() {
            for v in 0..aug.len() {
                prop_assert!((inv.coupling(u, v) + inv.coupling(v, u)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn pfaffian_squares_to_determinant(half in 1usize..=20, seed in any::<u64>()) {
        let n = 2 * half;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Mat::<C64>::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        let pf = pfaffian(m.as_ref()).unwrap();
        let det = m.determinant();
        prop_assert!((pf * pf - det).norm() <= 1e-9 * det.norm().max(1e-300));
    }

    #[test]
    fn jump_law_is_a_probability(z in 0.5f64..10.0) {
        let q = effective_jump_weights(z, 200).unwrap();
        prop_assert!(q[..=50].iter().all(|&x| x >= -1e-14));
        prop_assert!((jump_mass(&q) - 1.0).abs() < 1e-12);
        let g = aux_params(z).unwrap().gamma.abs();
        for k in 1..20 {
            prop_assert!((q[k + 1] / q[k] - g).abs() < 1e-10);
        }
    }

    #[test]
    fn triangle_row_is_the_unique_matching(tops in 1i64..=5, odd in any::<bool>(), mask in any::<u8>()) {
        let top_range = (0, tops - 1);
        let apex_range = if odd { (0, tops) } else { (1, tops) };
        let removed: BTreeSet<i64> = (0..tops).filter(|x| mask & (1 << x) != 0).collect();
        let mut pts = Vec::new();
        for j in apex_range.0..=apex_range.1 {
            pts.push(LatticePoint::new(j, -1));
        }
        for a in 0..tops {
            if !removed.contains(&a) {
                pts.push(LatticePoint::new(a, 0));
            }
        }
        prop_assume!(pts.len() <= 12);
        let idx = |p: LatticePoint| pts.iter().position(|q| *q == p);
        let mut edges = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            if p.y < 0 {
                if let Some(j) = idx(p.offset(1, 0)) {
                    edges.push((i, j));
                }
            } else {
                for j in [p.x, p.x + 1] {
                    if let Some(k) = idx(LatticePoint::new(j, -1)) {
                        edges.push((i, k));
                    }
                }
            }
        }
        let all = enumerate_perfect_matchings(pts.len(), &edges);
        match complete_triangle_row(apex_range, top_range, &removed) {
            Ok(pairs) => {
                prop_assert_eq!(all.len(), 1);
                let mut want: Vec<(LatticePoint, LatticePoint)> = all[0]
                    .iter()
                    .map(|&e| {
                        let (a, b) = (pts[edges[e].0], pts[edges[e].1]);
                        if a < b { (a, b) } else { (b, a) }
                    })
                    .collect();
                let mut got: Vec<(LatticePoint, LatticePoint)> =
                    pairs.into_iter().map(|(a, b)| if a < b { (a, b) } else { (b, a) }).collect();
                want.sort();
                got.sort();
                prop_assert_eq!(got, want);
            }
            Err(_) => prop_assert!(all.is_empty()),
        }
    }

    #[test]
    fn gff_covariance_symmetries(
        a1 in (-2.0f64..2.0, 0.2f64..2.0),
        b1 in (-2.0f64..2.0, 0.2f64..2.0),
        a2 in (-2.0f64..2.0, 0.2f64..2.0),
        b2 in (-2.0f64..2.0, 0.2f64..2.0),
    ) {
        let c = |p: (f64, f64)| C64::new(p.0, p.1);
        let (a1, b1, a2, b2) = (c(a1), c(b1), c(a2), c(b2));
        prop_assume!([a1, b1, a2, b2].iter().enumerate().all(|(i, p)| [a1, b1, a2, b2][i + 1..].iter().all(|q| (p - q).norm() > 1e-3)));
        let v = gff_covariance(a1, b1, a2, b2).unwrap();
        prop_assert!((v - gff_covariance(a2, b2, a1, b1).unwrap()).abs() < 1e-12);
        prop_assert!((v + gff_covariance(b1, a1, a2, b2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn streams_are_bit_exact(seed in any::<u64>(), stream in any::<u64>()) {
        let a: Vec<u64> = { let mut r = RngStream::new(seed, stream).rng(); (0..8).map(|_| r.random()).collect() };
        let b: Vec<u64> = { let mut r = RngStream::new(seed, stream).rng(); (0..8).map(|_| r.random()).collect() };
        prop_assert_eq!(a, b);
    }
}

#[test]
fn segment_ratio_tends_to_corner_weight() {
    for z in [0.3, 1.0, 2.5] {
        let mut last = f64::INFINITY;
        for n in (2..120).step_by(4) {
            let r = segment_partition_function(n + 1, z) / segment_partition_function(n, z);
            let err = (r - corner_weight(z)).abs();
            assert!(err < last || err < 1e-15, "z={z} n={n}");
            last = err;
        }
        assert!(last < 1e-10);
    }
}

#[test]
fn heights_are_path_independent() {
    let d = freedimer::lattice::build_rectangle_domain(5, 5).unwrap();
    let aug = augment(&d, 1.0, 0).unwrap();
    let inv = inverse_kasteleyn(&aug).unwrap();
    let flow = reference_flow(&aug, &inv);
    let mut rng = RngStream::new(42, 0).rng();
    let faces: Vec<LatticePoint> = (0..3).flat_map(|y| (0..4).map(move |x| LatticePoint::new(x, y))).collect();
    for _ in 0..100 {
        let cover = sample_exact(&aug, &mut rng).unwrap();
        for &a in &faces {
            for &b in &faces {
                let h1 = height_along(&aug, &flow, &cover, &dual_path(b, a)).unwrap();
                let h2 = height_along(&aug, &flow, &cover, &dual_path_horizontal_first(b, a)).unwrap();
                assert!((h1 - h2).abs() < 1e-12, "{a:?} {b:?}: {h1} vs {h2}");
            }
        }
    }
}

#[test]
fn height_moments_are_centred_and_exchange_symmetric() {
    let kernel = HalfPlaneKernel::new(1.0, 12, 16).unwrap();
    let f = LatticePoint::new;
    let p1 = (f(0, 2), f(0, 6));
    let p2 = (f(5, 3), f(5, 8));
    assert!(exact_height_moment(&kernel, &[p1]).unwrap().abs() < 1e-12);
    let m = exact_height_moment(&kernel, &[p1, p2]).unwrap();
    let swapped = exact_height_moment(&kernel, &[p2, p1]).unwrap();
    let flipped = exact_height_moment(&kernel, &[(p1.1, p1.0), p2]).unwrap();
    assert!((m - swapped).abs() < 1e-10 * m.abs().max(1e-12));
    assert!((m + flipped).abs() < 1e-10 * m.abs().max(1e-12));
}
