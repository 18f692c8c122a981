//! Problem files, the synthetic generator, training labels and benchmarks.

mod format;
mod synthetic;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deduction::RuleSet;
use crate::features::FeatureVector;
use crate::problem::Problem;
use crate::scorer::{ConstantContribution, Contribution, TrainingExample};
use crate::search::{solve_problem, Environment, GeometryEnv, Mode, SearchConfig, SearchError, StatsStore};

pub use format::{
    decimal, load_dir, load_problem, load_problems, problem_from_json, problem_to_json, save_problem, FORMAT,
};
pub use synthetic::{generate_synthetic, Family, FAMILIES};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("{file}: {inner}")]
    InFile { file: String, inner: Box<CorpusError> },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("labels line {line}: {message}")]
    Labels { line: usize, message: String },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("average accuracy rate of an empty sequence is undefined")]
    EmptyMetric,
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

impl CorpusError {
    fn in_file(self, path: &Path) -> Self {
        CorpusError::InFile { file: path.display().to_string(), inner: Box::new(self) }
    }
}

/// One judged construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub problem: String,
    pub strategy: String,
    pub v_before: FeatureVector,
    pub v_after: FeatureVector,
    /// 1 when the construction lets the goal be proved.
    pub label: u8,
}

impl LabelRecord {
    pub fn example(&self) -> TrainingExample {
        TrainingExample { v_before: self.v_before, v_after: self.v_after, label: self.label }
    }
}

/// Judges every candidate at each problem's search root and keeps all
/// positives plus random negatives, up to `per_problem` records each.
pub fn collect_labels(
    problems: &[Problem],
    rules: &RuleSet,
    cfg: &SearchConfig,
    per_problem: usize,
    seed: u64,
) -> Result<Vec<LabelRecord>, CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let judge = ConstantContribution(0.0);
    let mut out = Vec::new();
    for p in problems {
        let env = GeometryEnv::new(p, rules, &judge, cfg, cfg.prune)?;
        let root = env.root();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for a in env.actions(&root) {
            let Some(next) = env.step(&root, &a) else { continue };
            let rec = LabelRecord {
                problem: p.id.clone(),
                strategy: a.canonical(),
                v_before: root.features,
                v_after: next.features,
                label: u8::from(next.solved),
            };
            if next.solved {
                pos.push(rec);
            } else {
                neg.push(rec);
            }
        }
        neg.shuffle(&mut rng);
        pos.truncate(per_problem);
        let room = per_problem - pos.len();
        out.extend(pos);
        out.extend(neg.into_iter().take(room));
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<Vec<LabelRecord>, CorpusError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CorpusError::Io { path: path.display().to_string(), source: e })?;
    labels_from_jsonl(&text).map_err(|e| e.in_file(path))
}

pub fn save_labels(records: &[LabelRecord], path: &Path) -> Result<(), CorpusError> {
    std::fs::write(path, labels_to_jsonl(records))
        .map_err(|e| CorpusError::Io { path: path.display().to_string(), source: e })
}

pub fn labels_to_jsonl(records: &[LabelRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("serializes") + "\n").collect()
}

pub fn labels_from_jsonl(text: &str) -> Result<Vec<LabelRecord>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: LabelRecord =
                serde_json::from_str(l).map_err(|e| CorpusError::Labels { line: i + 1, message: e.to_string() })?;
            if r.label > 1 {
                return Err(CorpusError::Labels { line: i + 1, message: "label must be 0 or 1".into() });
            }
            Ok(r)
        })
        .collect()
}

/// Average accuracy rate: the mean of per-participant rates.
pub fn aar(rates: &[f64]) -> Result<f64, CorpusError> {
    if rates.is_empty() {
        return Err(CorpusError::EmptyMetric);
    }
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    /// Unsolved, but some deduction was cut short by its budget.
    Partial,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub id: String,
    pub family: Option<String>,
    pub status: Status,
    pub solved: bool,
    pub expansions: usize,
    pub episodes: usize,
    pub constructions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mode: Mode,
    pub budget: usize,
    pub seed: u64,
    /// Mean of the per-problem solved indicators.
    pub solve_rate: f64,
    pub solved: usize,
    pub total: usize,
    /// `(solved, total)` per family; problems without one count as `other`.
    pub families: BTreeMap<String, (usize, usize)>,
    pub outcomes: Vec<ProblemOutcome>,
}

impl BenchReport {
    pub fn family_rate(&self, family: &str) -> Option<f64> {
        self.families.get(family).map(|(s, t)| *s as f64 / *t as f64)
    }
}

/// Seed for problem `index`, independent of scheduling.
pub fn problem_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Solves every problem from its own copy of `store`, on `jobs` threads.
/// Results do not depend on `jobs`.
pub fn bench(
    problems: &[Problem],
    rules: &RuleSet,
    model: &dyn Contribution,
    store: &StatsStore,
    cfg: &SearchConfig,
    mode: Mode,
    jobs: usize,
) -> Result<BenchReport, CorpusError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CorpusError::Pool(e.to_string()))?;
    let outcomes: Vec<ProblemOutcome> = pool.install(|| {
        problems
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut rng = ChaCha8Rng::seed_from_u64(problem_seed(cfg.seed, i));
                let o = solve_problem(p, rules, model, store, cfg, mode, &mut rng)?;
                let status = match (o.solved, o.truncated) {
                    (true, _) => Status::Solved,
                    (false, true) => Status::Partial,
                    (false, false) => Status::Failed,
                };
                Ok(ProblemOutcome {
                    id: p.id.clone(),
                    family: p.family.clone(),
                    status,
                    solved: o.solved,
                    expansions: o.expansions,
                    episodes: o.episodes,
                    constructions: o.constructions,
                })
            })
            .collect::<Result<_, SearchError>>()
    })?;
    let mut families: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for o in &outcomes {
        let e = families.entry(o.family.clone().unwrap_or_else(|| "other".into())).or_default();
        e.0 += usize::from(o.solved);
        e.1 += 1;
    }
    let flags: Vec<f64> = outcomes.iter().map(|o| f64::from(u8::from(o.solved))).collect();
    Ok(BenchReport {
        mode,
        budget: cfg.budget,
        seed: cfg.seed,
        solve_rate: aar(&flags).unwrap_or(0.0),
        solved: outcomes.iter().filter(|o| o.solved).count(),
        total: outcomes.len(),
        families,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aar_is_the_mean() {
        assert!(aar(&[]).is_err());
        assert_eq!(aar(&[0.5, 1.0]).unwrap(), 0.75);
        assert_eq!(aar(&[0.3]).unwrap(), 0.3);
    }

    #[test]
    fn labels_round_trip() {
        let r = LabelRecord {
            problem: "p".into(),
            strategy: "connect(A,B)".into(),
            v_before: FeatureVector([1, 2, 3, 4, 5, 6]),
            v_after: FeatureVector([2, 2, 3, 4, 5, 6]),
            label: 1,
        };
        let text = labels_to_jsonl(&[r.clone(), r.clone()]);
        assert_eq!(labels_from_jsonl(&text).unwrap(), vec![r.clone(), r]);
        let err = labels_from_jsonl("{}\n").unwrap_err();
        assert!(matches!(err, CorpusError::Labels { line: 1, .. }));
    }

    #[test]
    fn problem_seeds_differ() {
        assert_ne!(problem_seed(0, 0), problem_seed(0, 1));
        assert_eq!(problem_seed(5, 3), problem_seed(5, 3));
    }
}
