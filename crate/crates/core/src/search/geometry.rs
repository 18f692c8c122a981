use rand::Rng;

use super::{search, Environment, Mode, SearchConfig, SearchError, SolveOutcome, StateSig, StatsStore};
use crate::attn::{apply_strategy, generate_strategies, subgraph_with, Strategy};
use crate::deduction::{proves, saturate, with_goal_planes, KnowledgeBase, RuleSet};
use crate::features::{feature_vector, FeatureVector};
use crate::problem::Problem;
use crate::scene::Scene;
use crate::scorer::{Contribution, Prediction};

/// A scene after some constructions, with everything derivable from it.
#[derive(Clone, Debug)]
pub struct GeoState {
    pub scene: Scene,
    pub kb: KnowledgeBase,
    pub features: FeatureVector,
    /// Applied constructions with the feature vector reached after each.
    pub history: Vec<(String, FeatureVector)>,
    pub solved: bool,
    pub signature: StateSig,
}

pub struct GeometryEnv<'a> {
    problem: &'a Problem,
    rules: &'a RuleSet,
    model: &'a dyn Contribution,
    beta: f64,
    deduction_budget: usize,
    root: GeoState,
}

impl<'a> GeometryEnv<'a> {
    /// Builds the root state, pruned to the relevant subgraph when `prune`.
    pub fn new(
        problem: &'a Problem,
        rules: &'a RuleSet,
        model: &'a dyn Contribution,
        cfg: &SearchConfig,
        prune: bool,
    ) -> Result<Self, SearchError> {
        cfg.validate()?;
        problem.conclusion.validate(&problem.scene)?;
        let scene = if prune {
            subgraph_with(&problem.scene, &problem.conclusion, cfg.alpha, cfg.relevance)
        } else {
            problem.scene.clone()
        };
        let root =
            build_state(problem, rules, cfg.beta, cfg.deduction_budget, scene, &KnowledgeBase::new(), Vec::new());
        Ok(GeometryEnv { problem, rules, model, beta: cfg.beta, deduction_budget: cfg.deduction_budget, root })
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    fn state_from(&self, scene: Scene, kb: &KnowledgeBase, history: Vec<(String, FeatureVector)>) -> GeoState {
        build_state(self.problem, self.rules, self.beta, self.deduction_budget, scene, kb, history)
    }
}

fn build_state(
    problem: &Problem,
    rules: &RuleSet,
    beta: f64,
    deduction_budget: usize,
    scene: Scene,
    kb: &KnowledgeBase,
    history: Vec<(String, FeatureVector)>,
) -> GeoState {
    let scene = with_goal_planes(&scene, &problem.conclusion);
    let kb = saturate(&scene, kb, rules, deduction_budget);
    let solved = proves(&kb, &problem.conclusion);
    GeoState {
        features: feature_vector(&scene, beta),
        signature: super::state_signature(&scene),
        scene,
        kb,
        history,
        solved,
    }
}

impl Environment for GeometryEnv<'_> {
    type State = GeoState;
    type Action = Strategy;

    fn root(&self) -> GeoState {
        self.root.clone()
    }

    fn solved(&self, s: &GeoState) -> bool {
        s.solved
    }

    fn signature(&self, s: &GeoState) -> StateSig {
        s.signature
    }

    fn actions(&self, s: &GeoState) -> Vec<Strategy> {
        generate_strategies(&s.scene, &self.problem.conclusion)
    }

    fn key(&self, a: &Strategy) -> String {
        a.canonical()
    }

    fn step(&self, s: &GeoState, a: &Strategy) -> Option<GeoState> {
        let (scene, _) = apply_strategy(&s.scene, a).ok()?;
        let mut history = s.history.clone();
        let mut next = self.state_from(scene, &s.kb, Vec::new());
        history.push((a.canonical(), next.features));
        next.history = history;
        Some(next)
    }

    fn judge(&self, s: &GeoState, a: &Strategy) -> Prediction {
        match apply_strategy(&s.scene, a) {
            Ok((after, _)) => self.model.contribution(a, &s.features, &feature_vector(&after, self.beta)),
            Err(_) => Prediction::from_probability(0.0),
        }
    }

    fn truncated(&self, s: &GeoState) -> bool {
        s.kb.truncated()
    }
}

/// Solves one problem: guided search starts from the pruned scene when
/// `cfg.prune` is set, UCT always from the full scene.
pub fn solve_problem(
    problem: &Problem,
    rules: &RuleSet,
    model: &dyn Contribution,
    store: &StatsStore,
    cfg: &SearchConfig,
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<SolveOutcome, SearchError> {
    let prune = mode == Mode::Guided && cfg.prune;
    let env = GeometryEnv::new(problem, rules, model, cfg, prune)?;
    search(&env, store, cfg, mode, rng)
}
