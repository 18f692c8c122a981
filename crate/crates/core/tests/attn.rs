mod common;

use std::collections::BTreeSet;

use auxgeo::attn::{
    analyze, apply_strategy, compute_levels, correlation, generate_strategies, point_sign, subgraph, Level, Relevance,
    Strategy, StrategyError, StrategyKind, DEFAULT_ALPHA,
};
use auxgeo::scene::{Conclusion, Fact, Label, Scene, Segment};
use auxgeo::search::canonical_scene_text;
use common::{label, random_scene};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn names(s: &[Strategy]) -> Vec<String> {
    s.iter().map(Strategy::canonical).collect()
}

#[test]
fn correlation_values() {
    let f = Level::Finite;
    assert_eq!(correlation(f(1), &[f(2), f(2)]), 1.5);
    assert_eq!(correlation(f(1), &[]), 1.0);
    let r = correlation(f(2), &[f(1), f(1), f(3)]);
    assert!((r - (0.5 + (2.0 + 1.0 / 3.0) / 3.0)).abs() < 1e-12);
    assert!((r - 1.2778).abs() < 5e-5);
    assert_eq!(correlation(Level::Unreachable, &[]), 0.0);
    assert_eq!((point_sign(1.5, 0.75), point_sign(0.5, 0.75), point_sign(0.75, 0.75)), (1, 0, 1));
}

#[test]
fn levels_count_hops_from_the_conclusion() {
    let s = Scene::builder(2)
        .point("A", &[0.0, 0.0])
        .point("B", &[1.0, 0.0])
        .point("C", &[2.0, 1.0])
        .point("D", &[3.0, 3.0])
        .point("Z", &[9.0, 9.0])
        .segment("AB")
        .segment("BC")
        .fact(Fact::parallel("CD", "AB"))
        .build()
        .unwrap();
    let c = Conclusion::new(Fact::midpoint("A", "AB"));
    let lv = compute_levels(&s, &c);
    let at = |l: &str| lv.get(&Label::new(l));
    assert_eq!((at("A"), at("B"), at("C")), (Level::Finite(1), Level::Finite(1), Level::Finite(2)));
    // D is related to the conclusion only through the given fact.
    assert_eq!(at("D"), Level::Finite(2));
    assert_eq!(at("Z"), Level::Unreachable);
}

#[test]
fn example1_drops_d() {
    let p = common::example1();
    let rel = analyze(&p.scene, &p.conclusion, DEFAULT_ALPHA, Relevance::Outward);
    let dropped: Vec<&str> = rel.iter().filter(|r| r.sign == 0).map(|r| r.label.as_str()).collect();
    assert_eq!(dropped, ["D"]);
    for r in rel.iter().filter(|r| r.conclusion) {
        assert_eq!(r.level, Level::Finite(1));
    }
    let g = subgraph(&p.scene, &p.conclusion, DEFAULT_ALPHA);
    assert!(!g.contains(&Label::new("D")));
    assert_eq!(g.points().len(), p.scene.points().len() - 1);
}

#[test]
fn example1_strategy_networks() {
    let p = common::example1();
    let full = generate_strategies(&p.scene, &p.conclusion);
    assert_eq!(
        names(&full),
        [
            "connect(B,D)",
            "connect(C,E)",
            "connect(D,E)",
            "connect(E,P)",
            "parallelogram(P;A,B)->G",
            "midpoint(B,P)->F",
            "project(C;A,B,P)->G",
        ]
    );
    assert_eq!(full.iter().map(|s| s.code).collect::<Vec<_>>(), (1..=7).collect::<Vec<_>>());
    let g = subgraph(&p.scene, &p.conclusion, DEFAULT_ALPHA);
    let pruned = generate_strategies(&g, &p.conclusion);
    assert_eq!(
        names(&pruned),
        ["connect(C,E)", "connect(E,P)", "parallelogram(P;A,B)->G", "midpoint(B,P)->F", "project(C;A,B,P)->G"]
    );
}

#[test]
fn apply_connect_and_reject_repeats() {
    let p = common::example1();
    let ce = Strategy { code: 1, kind: StrategyKind::Connect { a: "C".into(), b: "E".into() } };
    let (t, _) = apply_strategy(&p.scene, &ce).unwrap();
    assert_eq!(t.points().len(), p.scene.points().len());
    assert_eq!(t.segments().len(), p.scene.segments().len() + 1);
    assert!(matches!(apply_strategy(&t, &ce), Err(StrategyError::Rejected { .. })));
}

fn random_goal(n: usize, pick: [usize; 4]) -> Conclusion {
    let l = |i: usize| label(pick[i] % n);
    let (a, b) = (l(0), l(1));
    let b = if a == b { label((pick[1] + 1) % n) } else { b };
    let (c, d) = (l(2), l(3));
    let d = if c == d { label((pick[3] + 1) % n) } else { d };
    Conclusion::new(Fact::parallel(Segment::new(a, b), Segment::new(c, d)))
}

fn labels(s: &Scene) -> BTreeSet<Label> {
    s.labels().cloned().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conclusion_points_survive(seed in any::<u64>(), n in 2usize..=10, pick in any::<[usize; 4]>(), alpha in 0.05f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scene(&mut rng, n, 2, 0.3);
        let c = random_goal(n, pick);
        let g = subgraph(&s, &c, alpha);
        for p in c.points(&s) {
            prop_assert!(g.contains(&p), "{p} pruned");
        }
        prop_assert!(labels(&g).is_subset(&labels(&s)));
        prop_assert!(g.segments().is_subset(s.segments()));
        for (f, _) in g.facts() {
            prop_assert!(s.facts().iter().any(|(h, _)| h == f));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn higher_alpha_keeps_fewer_points(seed in any::<u64>(), n in 3usize..=10, pick in any::<[usize; 4]>(), a1 in 0.05f64..=1.0, a2 in 0.05f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scene(&mut rng, n, 2, 0.3);
        let c = random_goal(n, pick);
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(labels(&subgraph(&s, &c, hi)).is_subset(&labels(&subgraph(&s, &c, lo))));
    }

    #[test]
    fn pruned_strategies_come_from_the_full_network(seed in any::<u64>(), n in 3usize..=8, pick in any::<[usize; 4]>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scene(&mut rng, n, 2, 0.4);
        let c = random_goal(n, pick);
        let full: BTreeSet<String> = names(&generate_strategies(&s, &c)).into_iter().collect();
        let g = subgraph(&s, &c, DEFAULT_ALPHA);
        for st in generate_strategies(&g, &c) {
            prop_assert!(full.contains(&st.canonical()), "{} not in the full network", st.canonical());
        }
    }

    #[test]
    fn applying_leaves_the_input_alone(seed in any::<u64>(), n in 2usize..=7, pick in any::<[usize; 4]>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scene(&mut rng, n, 2, 0.4);
        let c = random_goal(n, pick);
        let before = canonical_scene_text(&s);
        for st in generate_strategies(&s, &c) {
            let _ = apply_strategy(&s, &st);
        }
        prop_assert_eq!(canonical_scene_text(&s), before);
    }
}
