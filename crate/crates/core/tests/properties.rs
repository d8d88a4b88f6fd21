//! Randomized invariants across geometry, models, entropy and towers.

use std::collections::HashMap;

use num_traits::One;
use proptest::prelude::*;
use rankone::entropy::{entropy_of_masses, shields_bound};
use rankone::geometry::{
    boundary_containment_holds, boundary_ratio, cube_points, inner_boundary, is_separated, minkowski_sum,
    slab_points, DirectionSubspace,
};
use rankone::model::BRUTE_FORCE_BUDGET;
use rankone::schedule::{odometer_schedule, spacered_schedule, SpacerGrowth};
use rankone::towers::{
    derived_tower, random_metric_fixture, random_needgeom_fixture, restrict_tower, tower_distance, DerivedOutcome,
};
use rankone::{build_model, LatticePoint, LevelKModel, Rational, Rectangle, Shape};

fn shape_2d(points: &[(i64, i64)]) -> Shape {
    Shape::new(2, points.iter().map(|&(a, b)| LatticePoint(vec![a, b]))).unwrap()
}

fn window_with_origin() -> impl Strategy<Value = Shape> {
    prop::collection::vec((-2i64..=2, -2i64..=2), 0..5).prop_map(|mut v| {
        v.push((0, 0));
        shape_2d(&v)
    })
}

fn small_rect() -> impl Strategy<Value = Rectangle> {
    (-3i64..=3, -3i64..=3, 1i64..=7, 1i64..=7)
        .prop_map(|(x, y, w, h)| Rectangle::new(vec![x, y], vec![x + w - 1, y + h - 1]).unwrap())
}

/// Small schedules with at most a few thousand cells.
fn small_model() -> impl Strategy<Value = LevelKModel> {
    prop_oneof![
        (1usize..=2, 2i64..=3, 2usize..=4).prop_map(|(d, base, levels)| {
            let levels = if d == 2 && base == 3 { levels.min(3) } else { levels };
            (odometer_schedule(d, base, levels, 1 << 20).unwrap(), levels)
        }),
        (1usize..=2, 2i64..=3, 0i64..=2, 2usize..=4).prop_map(|(d, base_side, spacer, levels)| {
            let g = SpacerGrowth { base_side, copies: 2, spacer };
            (spacered_schedule(d, g, levels, 1 << 20).unwrap(), levels)
        }),
    ]
    .prop_map(|(s, levels)| build_model(&s, levels, 1 << 20).unwrap())
}

fn window_for(dim: usize, t: i64, dir: (i64, i64), m: i64) -> Shape {
    let t = Rational::from_integer(t);
    if dim == 1 || dir == (0, 0) {
        cube_points(t, dim).unwrap()
    } else {
        let v = DirectionSubspace::new(vec![LatticePoint(vec![dir.0, dir.1])]).unwrap();
        slab_points(&v, t, Rational::new(m, 2)).unwrap()
    }
}

fn label_entropy(labels: &[u32]) -> f64 {
    let mut counts: HashMap<u32, i64> = HashMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let n = labels.len() as i64;
    entropy_of_masses(&counts.values().map(|&c| Rational::new(c, n)).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn inner_boundary_lies_in_translate_differences(r in small_rect(), s in window_with_origin()) {
        prop_assert!(boundary_containment_holds(&r.to_shape(), &s).unwrap());
    }

    #[test]
    fn boundary_containment_for_irregular_shapes(
        pts in prop::collection::vec((-4i64..=4, -4i64..=4), 1..30),
        s in window_with_origin(),
    ) {
        prop_assert!(boundary_containment_holds(&shape_2d(&pts), &s).unwrap());
    }

    #[test]
    fn separation_matches_pairwise_check(
        r in small_rect(),
        js in prop::collection::vec((-10i64..=10, -10i64..=10), 1..6),
    ) {
        let j = shape_2d(&js);
        let rs = r.to_shape();
        let translates: Vec<Shape> = j.iter().map(|v| rs.translate(v)).collect();
        let mut disjoint = true;
        for a in 0..translates.len() {
            for b in a + 1..translates.len() {
                if translates[a].iter().any(|p| translates[b].contains(p)) {
                    disjoint = false;
                }
            }
        }
        prop_assert_eq!(is_separated(&rs, &j).unwrap(), disjoint);
        if disjoint {
            prop_assert_eq!(minkowski_sum(&rs, &j).unwrap().len(), rs.len() * j.len());
        }
    }

    #[test]
    fn slabs_grow_with_t_and_m(
        dir in (-3i64..=3, -3i64..=3).prop_filter("nonzero", |d| *d != (0, 0)),
        t in 1i64..=12, dt in 0i64..=4, m in 1i64..=6, dm in 0i64..=4,
    ) {
        let v = DirectionSubspace::new(vec![LatticePoint(vec![dir.0, dir.1])]).unwrap();
        let small = slab_points(&v, Rational::new(t, 2), Rational::new(m, 2)).unwrap();
        let big = slab_points(&v, Rational::new(t + dt, 2), Rational::new(m + dm, 2)).unwrap();
        prop_assert!(small.is_subset(&big));
        prop_assert!(small.contains(&LatticePoint(vec![0, 0])));
    }

    #[test]
    fn slab_membership_agrees_with_floats(
        dir in (-3i64..=3, -3i64..=3).prop_filter("nonzero", |d| *d != (0, 0)),
        t in 1i64..=20, m in 1i64..=8,
        z in (-12i64..=12, -12i64..=12),
    ) {
        let v = DirectionSubspace::new(vec![LatticePoint(vec![dir.0, dir.1])]).unwrap();
        let (tq, mq) = (Rational::new(t, 2), Rational::new(m, 2));
        let norm = ((dir.0 * dir.0 + dir.1 * dir.1) as f64).sqrt();
        let along = (z.0 * dir.0 + z.1 * dir.1) as f64 / norm;
        let across = (z.1 * dir.0 - z.0 * dir.1) as f64 / norm;
        let (tf, mf) = (t as f64 / 2.0, m as f64 / 4.0);
        let margin = [along, tf - along, mf - across.abs()].iter().map(|x| x.abs()).fold(f64::MAX, f64::min);
        prop_assume!(margin > 1e-9);
        let float_in = along >= 0.0 && along <= tf && across.abs() <= mf;
        prop_assert_eq!(v.slab_contains(&[z.0, z.1], tq, mq), float_in);
    }

    #[test]
    fn name_distribution_conserves_mass(
        model in small_model(),
        k_off in 0usize..=3, j_off in 0usize..=3,
        t in 1i64..=3, dir in (-2i64..=2, -2i64..=2), m in 1i64..=3,
    ) {
        let top = model.levels();
        let j = 1 + j_off % top;
        let k = 1 + k_off % j;
        let w = window_for(model.dim(), t, dir, m);
        let dist = model.name_distribution(k, j, &w).unwrap();
        prop_assert!(dist.total_mass().is_one());
        prop_assert!(dist.bad_mass >= Rational::from_integer(0));
        if model.cell_count() <= BRUTE_FORCE_BUDGET {
            let top_dist = model.name_distribution(k, top, &w).unwrap();
            prop_assert_eq!(top_dist, model.brute_force_name_distribution(k, &w, BRUTE_FORCE_BUDGET).unwrap());
        }
    }

    #[test]
    fn labels_refine_pointwise(model in small_model(), k_off in 0usize..=3) {
        let top = model.levels();
        prop_assume!(top >= 2);
        let k = 1 + k_off % (top - 1);
        let fine = model.level_labels(k + 1);
        let coarse = model.level_labels(k);
        let step = model.relative_labels(k + 1, k);
        for (f, c) in fine.iter().zip(coarse.iter()) {
            let expected = if *f == u32::MAX { u32::MAX } else { step[*f as usize] };
            prop_assert_eq!(*c, expected);
        }
    }

    #[test]
    fn joins_do_not_lower_entropy(model in small_model(), k_off in 0usize..=3, shift in 1i64..=3) {
        let top = model.levels();
        let k = 1 + k_off % top;
        let coarse = model.level_labels(k);
        let fine = model.level_labels(top);
        prop_assert!(label_entropy(&fine) + 1e-12 >= label_entropy(&coarse));

        // P ∨ T^{-v} P on the cells where both are defined.
        let rect = model.top_rect();
        let v = LatticePoint(vec![shift; model.dim()]);
        let mut pairs = Vec::new();
        let mut single = Vec::new();
        for (i, p) in rect.iter_points().enumerate() {
            if let Some(q) = model.translate_cell(&p, &v) {
                let qi = rect.index_of(&q.0).unwrap();
                single.push(coarse[i]);
                pairs.push((coarse[i], coarse[qi]));
            }
        }
        prop_assume!(!single.is_empty());
        let mut ids: HashMap<(u32, u32), u32> = HashMap::new();
        let joined: Vec<u32> = pairs.iter().map(|p| { let n = ids.len() as u32; *ids.entry(*p).or_insert(n) }).collect();
        prop_assert!(label_entropy(&joined) + 1e-12 >= label_entropy(&single));
    }

    #[test]
    fn shields_bound_holds(counts in prop::collection::vec(1i64..=50, 1..40), extra in 0usize..20, beta_num in 1i64..=100) {
        let total: i64 = counts.iter().sum();
        let beta = Rational::new(beta_num, 100);
        let masses: Vec<Rational> = counts.iter().map(|&c| beta * Rational::new(c, total)).collect();
        let h = entropy_of_masses(&masses);
        let alphabet = (counts.len() + extra) as f64;
        prop_assert!(h <= shields_bound(beta_num as f64 / 100.0, alphabet) + 1e-12);
    }

    #[test]
    fn tower_metric_is_a_metric(a in 0u64..10_000, b in 0u64..10_000) {
        let (p, q, _, _) = random_metric_fixture(a).unwrap();
        let (r, _, _, _) = random_metric_fixture(b).unwrap();
        let zero = Rational::from_integer(0);
        prop_assert_eq!(tower_distance(&p, &p).unwrap(), zero);
        let pq = tower_distance(&p, &q).unwrap();
        prop_assert_eq!(pq, tower_distance(&q, &p).unwrap());
        prop_assert!(pq >= zero && pq <= Rational::from_integer(2));
        if r.space() == p.space() && r.shape() == p.shape() {
            let pr = tower_distance(&p, &r).unwrap();
            let qr = tower_distance(&q, &r).unwrap();
            prop_assert!(pr <= pq + qr);
        }
    }

    #[test]
    fn restriction_contracts_distance(seed in 0u64..100_000) {
        let (q, q2, r, j) = random_metric_fixture(seed).unwrap();
        let a = restrict_tower(&q, &r, &j).unwrap();
        let b = restrict_tower(&q2, &r, &j).unwrap();
        prop_assert!(tower_distance(&a, &b).unwrap() <= tower_distance(&q, &q2).unwrap());
        prop_assert!(a.is_coarser_than(&q));
    }

    #[test]
    fn derived_tower_is_below_q(seed in 0u64..100_000) {
        let (p, q) = random_needgeom_fixture(seed).unwrap();
        match derived_tower(&p, &q).unwrap() {
            DerivedOutcome::Tower { tower, .. } => prop_assert!(tower.is_coarser_than(&q)),
            DerivedOutcome::EmptyStacking { .. } => {}
        }
    }
}

#[test]
fn cube_boundary_ratio_decreases() {
    let cross = shape_2d(&[(0, 0), (1, 0), (0, 1)]);
    let mut prev = Rational::from_integer(2);
    for k in 2..=200i64 {
        let r = Rectangle::cube(2, k).unwrap().to_shape();
        let ratio = boundary_ratio(&r, &cross).unwrap();
        assert!(ratio < prev, "k={k}: {ratio} !< {prev}");
        // Exact count: the perimeter.
        assert_eq!(inner_boundary(&r, &cross).unwrap().len() as i64, if k == 2 { 4 } else { 4 * k - 4 });
        prev = ratio;
    }
    assert!(prev < Rational::new(1, 10));
}
