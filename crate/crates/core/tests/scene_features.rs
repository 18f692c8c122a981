mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use auxgeo::features::{
    angle_equal, congruent_test, feature_vector, parallel_test, perp_test, seg_equal, similar_test, DEFAULT_BETA,
};
use auxgeo::scene::{Label, Scene, SceneError, Segment};
use common::{label, oracle_features, random_scene};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn segment_lengths() {
    let s = Scene::builder(2).point("A", &[0.0, 0.0]).point("B", &[3.0, 4.0]).point("C", &[1e-9, 0.0]).build();
    // C sits within the coincidence tolerance of A.
    assert!(matches!(s, Err(SceneError::CoincidentPoints(..))));
    let s = Scene::builder(2).point("A", &[0.0, 0.0]).point("B", &[3.0, 4.0]).build().unwrap();
    assert!(close(s.segment_length(&Segment::new("A", "B")).unwrap(), 5.0));
    let s = Scene::builder(3).point("A", &[1.0, 2.0, 2.0]).point("B", &[0.0, 0.0, 0.0]).build().unwrap();
    assert!(close(s.segment_length(&"AB".into()).unwrap(), 3.0));
}

#[test]
fn angles_at_a_vertex() {
    let s = Scene::builder(2)
        .point("O", &[0.0, 0.0])
        .point("X", &[2.0, 0.0])
        .point("Y", &[0.0, 5.0])
        .point("Z", &[3.0, 0.0])
        .point("W", &[-1.0, 1.0])
        .build()
        .unwrap();
    let at = |a: &str, b: &str| s.angle_at(&"O".into(), &a.into(), &b.into()).unwrap();
    assert!(close(at("X", "Y"), FRAC_PI_2));
    assert!(close(at("X", "Z"), 0.0));
    assert!(close(at("X", "W"), 3.0 * FRAC_PI_4));
    assert!(close(at("Y", "X"), at("X", "Y")));
}

#[test]
fn segment_angles() {
    let s = Scene::builder(2)
        .point("A", &[0.0, 0.0])
        .point("B", &[1.0, 0.0])
        .point("C", &[0.0, 1.0])
        .point("D", &[-1.0, 0.0])
        .point("E", &[1.0, 1.0])
        .build()
        .unwrap();
    let g = |i: &str, j: &str| s.segment_angle(&i.into(), &j.into()).unwrap();
    assert!(close(g("AB", "AC"), FRAC_PI_2));
    // AD is stored as A→D, pointing against A→B.
    assert!(close(g("AB", "AD"), PI));
    assert!(close(g("AB", "AE"), FRAC_PI_4));
}

#[test]
fn construction_rejects_bad_points() {
    let dup = Scene::builder(2).point("A", &[0.0, 0.0]).point("A", &[1.0, 0.0]).build();
    assert_eq!(dup.unwrap_err(), SceneError::DuplicateLabel(Label::new("A")));
    let same = Scene::builder(2).point("A", &[1.0, 1.0]).point("B", &[1.0, 1.0]).build();
    assert!(matches!(same, Err(SceneError::CoincidentPoints(..))));
    assert_eq!(Scene::builder(2).build().unwrap_err(), SceneError::Empty);
}

#[test]
fn pair_predicates() {
    let b = DEFAULT_BETA;
    assert!(seg_equal(5.0, 5.0, b) && seg_equal(5.0, 4.5, b) && !seg_equal(5.0, 4.0, b));
    assert!(angle_equal(FRAC_PI_2, FRAC_PI_2, b) && angle_equal(1.0, 0.9, b) && !angle_equal(1.0, 0.8, b));
    assert!(parallel_test(PI, b) && parallel_test(0.0, b) && !parallel_test(FRAC_PI_2, b));
    assert!(perp_test(FRAC_PI_2, b) && perp_test(1.4, b) && !perp_test(1.2, b));
    assert!(congruent_test([3.0, 4.0, 5.0], [3.0, 4.0, 5.0], b));
    assert!(congruent_test([3.0, 4.0, 5.0], [3.0, 4.0, 5.5], b));
    assert!(!congruent_test([3.0, 4.0, 5.0], [6.0, 8.0, 10.0], b));
    assert!(similar_test([3.0, 4.0, 5.0], [6.0, 8.0, 10.0], b));
    assert!(similar_test([3.0, 4.0, 5.0], [3.0, 4.0, 5.0], b));
    assert!(!similar_test([3.0, 4.0, 5.0], [3.0, 4.0, 6.0], b));
}

#[test]
fn example1_vector_matches_the_oracle() {
    let p = common::example1();
    let v = feature_vector(&p.scene, DEFAULT_BETA);
    assert_eq!(v.0, oracle_features(&p.scene, DEFAULT_BETA));
}

/// Quarter turns and integer shifts keep integer coordinates exact.
fn moved(s: &Scene, turns: u8, dx: f64, dy: f64) -> Scene {
    let mut b = Scene::builder(2);
    for p in s.points() {
        let [mut x, mut y, _] = p.pos.0;
        for _ in 0..turns {
            (x, y) = (-y, x);
        }
        b = b.point(p.label.clone(), &[x + dx, y + dy]);
    }
    for g in s.segments() {
        b = b.segment(g.clone());
    }
    b.build().unwrap()
}

fn grid_scene(coords: &[(i8, i8)], mask: u64) -> Option<Scene> {
    let mut b = Scene::builder(2);
    for (i, (x, y)) in coords.iter().enumerate() {
        b = b.point(label(i), &[f64::from(*x), f64::from(*y)]);
    }
    let mut bit = 0;
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            if mask >> (bit % 64) & 1 == 1 {
                b = b.segment(Segment::new(label(i), label(j)));
            }
            bit += 1;
        }
    }
    b.build().ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vector_matches_oracle(seed in any::<u64>(), n in 2usize..=9, dim in 2u8..=3, density in 0.2f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scene(&mut rng, n, dim, density);
        prop_assert_eq!(feature_vector(&s, DEFAULT_BETA).0, oracle_features(&s, DEFAULT_BETA));
    }

    #[test]
    fn angle_count_is_sum_of_degree_pairs(seed in any::<u64>(), n in 2usize..=10, density in 0.1f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scene(&mut rng, n, 2, density);
        let expected: usize = s.labels().map(|l| { let d = s.degree(l); d * d.saturating_sub(1) / 2 }).sum();
        prop_assert_eq!(s.enumerate_angles().len(), expected);
    }

    #[test]
    fn rigid_motion_invariance(
        coords in prop::collection::vec((-6i8..=6, -6i8..=6), 3..=7),
        mask in any::<u64>(),
        turns in 0u8..4,
        dx in -20i32..=20,
        dy in -20i32..=20,
    ) {
        let Some(s) = grid_scene(&coords, mask) else { return Ok(()) };
        let m = moved(&s, turns, f64::from(dx), f64::from(dy));
        prop_assert_eq!(feature_vector(&s, DEFAULT_BETA), feature_vector(&m, DEFAULT_BETA));
    }

    #[test]
    fn larger_beta_never_counts_fewer(seed in any::<u64>(), n in 3usize..=8, b1 in 0.01f64..0.5, extra in 0.0f64..0.4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scene(&mut rng, n, 2, 0.6);
        let lo = feature_vector(&s, b1);
        let hi = feature_vector(&s, b1 + extra);
        for k in 0..6 {
            prop_assert!(lo.0[k] <= hi.0[k], "component {} fell: {} > {}", k, lo.0[k], hi.0[k]);
        }
    }

    #[test]
    fn counts_bounded_by_pair_population(seed in any::<u64>(), n in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scene(&mut rng, n, 3, 0.5);
        let v = feature_vector(&s, DEFAULT_BETA).0;
        let pairs = |m: usize| (m * m.saturating_sub(1) / 2) as u64;
        let segs = pairs(s.segments().len());
        prop_assert!(v[0] <= segs && v[2] <= segs && v[3] <= segs);
        prop_assert!(v[1] <= pairs(s.enumerate_angles().len()));
        let tris = pairs(s.triangles().len());
        prop_assert!(v[4] <= tris && v[5] <= tris);
    }

    #[test]
    fn angles_are_symmetric_and_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scene(&mut rng, 3, 3, 1.0);
        let (a, b, c) = (label(0), label(1), label(2));
        let t = s.angle_at(&a, &b, &c).unwrap();
        prop_assert!((t - s.angle_at(&a, &c, &b).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=PI).contains(&t));
        let sum = t + s.angle_at(&b, &a, &c).unwrap() + s.angle_at(&c, &a, &b).unwrap();
        prop_assert!((sum - PI).abs() < 1e-9);
    }
}
