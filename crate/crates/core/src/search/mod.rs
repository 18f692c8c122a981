//! Episode-based construction search: UCT tree search and the
//! score-guided policy, sharing one statistics store.

mod geometry;
mod store;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attn::{Relevance, StrategyError, DEFAULT_ALPHA};
use crate::features::DEFAULT_BETA;
use crate::scene::SceneError;
use crate::scorer::Prediction;

pub use geometry::{solve_problem, GeoState, GeometryEnv};
pub use store::{
    canonical_scene_text, hash_text, state_signature, NodeStats, StateSig, StatsStore, StoreDelta, StoreKey,
};

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("statistics for {key} would have w = {w} > n = {n}")]
    InvalidStats { key: String, w: u64, n: u64 },
    #[error("statistics store line {line}: {message}")]
    StoreParse { line: usize, message: String },
    #[error("invalid search configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Win rate plus classifier verdict, with relevance pruning.
    #[default]
    Guided,
    /// Plain upper-confidence tree search over the full scene.
    Uct,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "guided" => Ok(Mode::Guided),
            "uct" => Ok(Mode::Uct),
            other => Err(format!("unknown mode `{other}` (expected `guided` or `uct`)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Exploration constant.
    pub c: f64,
    /// Prior weight on the exploration term.
    pub q: f64,
    /// Constructions per episode.
    pub max_steps: usize,
    /// Candidates kept for sampling in guided mode.
    pub top_m: usize,
    /// Take the best guided candidate instead of sampling.
    pub argmax: bool,
    /// Constructions allowed per solve.
    pub budget: usize,
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
    /// Prune the scene before guided search.
    pub prune: bool,
    pub relevance: Relevance,
    /// New facts allowed per saturation.
    pub deduction_budget: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            c: 2.0,
            q: 1.0,
            max_steps: 10,
            top_m: 10,
            argmax: false,
            budget: 200,
            seed: 0,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            prune: true,
            relevance: Relevance::Outward,
            deduction_budget: crate::deduction::DEFAULT_BUDGET,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::BadConfig(m.to_owned()));
        if !(self.c.is_finite() && self.c >= 0.0) {
            return bad("c must be a non-negative number");
        }
        if !(self.q.is_finite() && self.q >= 0.0) {
            return bad("q must be a non-negative number");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        if self.top_m == 0 {
            return bad("top_m must be at least 1");
        }
        if !self.alpha.is_finite() {
            return bad("alpha must be finite");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        Ok(())
    }
}

/// `w/n + c·q·√(ln N / n)`; infinite for an unvisited action.
pub fn uct_score(w: u64, n: u64, parent_n: u64, c: f64, q: f64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let n_f = n as f64;
    let ln_parent = (parent_n.max(1) as f64).ln();
    w as f64 / n_f + c * q * (ln_parent / n_f).sqrt()
}

/// `w/n + F`, with `w/n = 0` for an unvisited action.
pub fn guidance_score(w: u64, n: u64, f: u8) -> f64 {
    let rate = if n == 0 { 0.0 } else { w as f64 / n as f64 };
    rate + f64::from(f)
}

/// Index of the highest UCT score; ties go to the lower index.
pub fn select_uct(stats: &[NodeStats], c: f64) -> Option<usize> {
    let parent: u64 = stats.iter().map(|s| s.n).sum();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in stats.iter().enumerate() {
        let v = uct_score(s.w, s.n, parent, c, s.q);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|b| b.0)
}

/// Candidate indices ordered by score, then probability, then index, cut to
/// the first `top_m`.
pub fn rank_guided(scored: &[(f64, f64)], top_m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scored.len()).collect();
    idx.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0).then(scored[b].1.total_cmp(&scored[a].1)).then(a.cmp(&b)));
    idx.truncate(top_m);
    idx
}

/// Best ranked candidate, or a draw among the top `top_m` weighted by score
/// (uniform when every kept score is zero).
pub fn select_guided(scored: &[(f64, f64)], top_m: usize, argmax: bool, rng: &mut impl Rng) -> Option<usize> {
    let ranked = rank_guided(scored, top_m);
    if ranked.is_empty() {
        return None;
    }
    if argmax {
        return Some(ranked[0]);
    }
    let weights: Vec<f64> = ranked.iter().map(|&i| scored[i].0.max(0.0)).collect();
    let pick = match WeightedIndex::new(&weights) {
        Ok(dist) => dist.sample(rng),
        Err(_) => rng.gen_range(0..ranked.len()),
    };
    Some(ranked[pick])
}

/// A search problem seen through states, actions and a verdict oracle.
pub trait Environment {
    type State: Clone;
    type Action: Clone;

    fn root(&self) -> Self::State;
    fn solved(&self, s: &Self::State) -> bool;
    fn signature(&self, s: &Self::State) -> StateSig;
    /// Candidate actions, in code order.
    fn actions(&self, s: &Self::State) -> Vec<Self::Action>;
    fn key(&self, a: &Self::Action) -> String;
    /// `None` when the action cannot be applied.
    fn step(&self, s: &Self::State, a: &Self::Action) -> Option<Self::State>;
    fn judge(&self, s: &Self::State, a: &Self::Action) -> Prediction;
    /// Whether reasoning about `s` was cut short.
    fn truncated(&self, _s: &Self::State) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub state: String,
    pub action: String,
    pub score: f64,
    pub probability: Option<f64>,
    pub applied: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub solved: bool,
    /// Actions attempted, applied or not.
    pub steps: usize,
    pub trace: Vec<StepTrace>,
    /// Some state's deduction hit its budget.
    pub truncated: bool,
    /// One visit per attempted action. Guided episodes credit the win to
    /// the action that closed the goal; UCT episodes to every action on
    /// the path.
    pub delta: StoreDelta,
}

impl EpisodeResult {
    /// Applied actions in order.
    pub fn constructions(&self) -> Vec<String> {
        self.trace.iter().filter(|t| t.applied).map(|t| t.action.clone()).collect()
    }
}

/// One episode from the root, reading `store` and leaving it untouched.
/// Statistics recorded earlier in the episode are visible to later steps.
pub fn run_episode<E: Environment>(
    env: &E,
    store: &StatsStore,
    cfg: &SearchConfig,
    mode: Mode,
    max_steps: usize,
    rng: &mut impl Rng,
) -> EpisodeResult {
    let mut state = env.root();
    let mut solved = env.solved(&state);
    let mut truncated = env.truncated(&state);
    let mut trace = Vec::new();
    let mut path = Vec::new();
    let mut delta = StoreDelta::new();
    while !solved && trace.len() < max_steps {
        let actions = env.actions(&state);
        if actions.is_empty() {
            break;
        }
        let sig = env.signature(&state);
        let stats: Vec<NodeStats> = actions
            .iter()
            .map(|a| {
                let mut s = store.get_with(&delta, sig, &env.key(a));
                s.q = cfg.q;
                s
            })
            .collect();
        let (idx, score, probability) = match mode {
            Mode::Uct => {
                let i = select_uct(&stats, cfg.c).expect("non-empty");
                let parent = stats.iter().map(|s| s.n).sum();
                (i, uct_score(stats[i].w, stats[i].n, parent, cfg.c, cfg.q), None)
            }
            Mode::Guided => {
                let scored: Vec<(f64, f64)> = actions
                    .iter()
                    .zip(&stats)
                    .map(|(a, s)| {
                        let p = env.judge(&state, a);
                        (guidance_score(s.w, s.n, p.f), p.probability)
                    })
                    .collect();
                let i = select_guided(&scored, cfg.top_m, cfg.argmax, rng).expect("non-empty");
                (i, scored[i].0, Some(scored[i].1))
            }
        };
        let action = &actions[idx];
        let key = env.key(action);
        let next = env.step(&state, action);
        trace.push(StepTrace {
            state: sig.to_string(),
            action: key.clone(),
            score,
            probability,
            applied: next.is_some(),
        });
        match next {
            Some(n) => {
                solved = env.solved(&n);
                truncated |= env.truncated(&n);
                match mode {
                    Mode::Guided => delta.record(sig, &key, solved),
                    Mode::Uct => path.push((sig, key)),
                }
                state = n;
            }
            None => delta.record(sig, &key, false),
        }
    }
    for (sig, key) in &path {
        delta.record(*sig, key, solved);
    }
    EpisodeResult { solved, steps: trace.len(), trace, truncated, delta }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub solved: bool,
    /// Actions attempted across all episodes.
    pub expansions: usize,
    pub episodes: usize,
    /// Constructions of the successful episode.
    pub constructions: Vec<String>,
    pub truncated: bool,
    /// Statistics gathered during the solve.
    pub delta: StoreDelta,
}

/// Episodes from the root until the goal is proved or `cfg.budget` actions
/// have been attempted. Statistics accumulate in a private copy of `store`.
pub fn search<E: Environment>(
    env: &E,
    store: &StatsStore,
    cfg: &SearchConfig,
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<SolveOutcome, SearchError> {
    let mut local = store.clone();
    let mut delta = StoreDelta::new();
    let mut expansions = 0;
    let mut episodes = 0;
    let mut truncated = false;
    if env.solved(&env.root()) {
        return Ok(SolveOutcome { solved: true, expansions, episodes, constructions: Vec::new(), truncated, delta });
    }
    while expansions < cfg.budget {
        let ep = run_episode(env, &local, cfg, mode, cfg.max_steps.min(cfg.budget - expansions), rng);
        episodes += 1;
        expansions += ep.steps;
        truncated |= ep.truncated;
        local.fold(&ep.delta)?;
        delta.merge(&ep.delta);
        if ep.solved {
            let constructions = ep.constructions();
            return Ok(SolveOutcome { solved: true, expansions, episodes, constructions, truncated, delta });
        }
        if ep.steps == 0 {
            break;
        }
    }
    Ok(SolveOutcome { solved: false, expansions, episodes, constructions: Vec::new(), truncated, delta })
}

/// Whether training should go on after an episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub episodes: usize,
    pub solved: usize,
    pub stopped_early: bool,
}

/// Guided episodes cycling through `envs`, each folded into `store` as a
/// whole. `control` sees every finished episode and may stop the run.
pub fn a3c_train<E: Environment>(
    envs: &[E],
    store: &mut StatsStore,
    cfg: &SearchConfig,
    episodes: usize,
    rng: &mut impl Rng,
    mut control: impl FnMut(usize, &EpisodeResult) -> Control,
) -> Result<TrainSummary, SearchError> {
    if envs.is_empty() {
        return Err(SearchError::BadConfig("training needs at least one problem".into()));
    }
    let mut summary = TrainSummary::default();
    for i in 0..episodes {
        let ep = run_episode(&envs[i % envs.len()], store, cfg, Mode::Guided, cfg.max_steps, rng);
        store.fold(&ep.delta)?;
        summary.episodes += 1;
        summary.solved += usize::from(ep.solved);
        if control(i, &ep) == Control::Stop {
            summary.stopped_early = i + 1 < episodes;
            break;
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uct_reference_values() {
        assert_eq!(uct_score(0, 0, 10, 2.0, 1.0), f64::INFINITY);
        let v = uct_score(3, 4, 10, 2.0, 1.0);
        assert!((v - (0.75 + 2.0 * (10f64.ln() / 4.0).sqrt())).abs() < 1e-15);
        assert_eq!(uct_score(1, 1, 1, 2.0, 1.0), 1.0);
    }

    #[test]
    fn guidance_cold_start() {
        assert_eq!(guidance_score(0, 0, 1), 1.0);
        assert_eq!(guidance_score(0, 0, 0), 0.0);
        assert_eq!(guidance_score(1, 4, 1), 1.25);
    }

    #[test]
    fn uct_ties_prefer_lower_index() {
        let s = [NodeStats::new(0, 0), NodeStats::new(0, 0)];
        assert_eq!(select_uct(&s, 2.0), Some(0));
        let s = [NodeStats::new(1, 2), NodeStats::new(1, 2), NodeStats::new(0, 0)];
        assert_eq!(select_uct(&s, 2.0), Some(2));
        assert_eq!(select_uct(&[], 2.0), None);
    }

    #[test]
    fn guided_ranking_breaks_ties_by_probability_then_index() {
        let scored = [(1.0, 0.6), (1.0, 0.9), (0.0, 0.99), (1.0, 0.9)];
        assert_eq!(rank_guided(&scored, 10), vec![1, 3, 0, 2]);
        assert_eq!(rank_guided(&scored, 2), vec![1, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_guided(&scored, 10, true, &mut rng), Some(1));
    }

    #[test]
    fn guided_sampling_never_picks_zero_weight() {
        let scored = [(0.0, 0.1), (1.0, 0.7), (2.0, 0.8)];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            assert_ne!(select_guided(&scored, 10, false, &mut rng), Some(0));
        }
        let zeros = [(0.0, 0.1), (0.0, 0.2)];
        assert!(select_guided(&zeros, 10, false, &mut rng).is_some());
    }

    #[test]
    fn mode_parses() {
        assert_eq!("uct".parse::<Mode>().unwrap(), Mode::Uct);
        assert!("greedy".parse::<Mode>().is_err());
    }
}
