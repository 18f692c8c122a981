use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use auxgeo::attn::{analyze, subgraph_with, Relevance, DEFAULT_ALPHA};
use auxgeo::corpus::{
    bench, collect_labels, generate_synthetic, load_labels, load_problem, load_problems, problem_to_json, save_labels,
    save_problem, BenchReport,
};
use auxgeo::deduction::{explain, RuleSet};
use auxgeo::features::DEFAULT_BETA;
use auxgeo::problem::Problem;
use auxgeo::scorer::{
    evaluate, split_dataset, train, ConstantContribution, Contribution, ContributionModel, TrainConfig, TrainingExample,
};
use auxgeo::search::{
    a3c_train, guidance_score, search, uct_score, Control, Environment, GeometryEnv, Mode, SearchConfig, StatsStore,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Searches for auxiliary constructions that make geometry goals provable.
#[derive(Parser)]
#[command(name = "auxgeo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem file and print the candidate tables and proof.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        inputs: Inputs,
        /// Write the outcome as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print relevance levels and the pruned scene of a problem.
    Subgraph {
        problem: PathBuf,
        /// Pruning threshold on the conclusion correlation.
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Which related points feed the correlation average.
        #[arg(long, value_enum, default_value_t = RelevanceArg::Outward)]
        relevance: RelevanceArg,
    },
    /// Write synthetic problems to a directory.
    Generate {
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Judge root constructions of a corpus and write training labels.
    Labels {
        problems: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Records kept per problem.
        #[arg(long, default_value_t = 10)]
        per_problem: usize,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Train the contribution classifier on a label file.
    TrainScorer {
        labels: PathBuf,
        /// Where to write the model.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long, default_value_t = 32)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write training and test metrics as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run guided training episodes over a corpus and update the store.
    TrainSearch {
        problems: PathBuf,
        /// Episodes to run, cycling through the corpus.
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Compare guided and UCT search on a corpus at the same budget.
    Bench {
        problems: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        inputs: Inputs,
        /// Worker threads; results do not depend on it.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write both reports as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SearchArgs {
    /// Pruning threshold on the conclusion correlation.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Relative tolerance of the feature predicates.
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// Exploration constant of the UCT score.
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    /// Constructions per episode.
    #[arg(long, default_value_t = 10)]
    max_steps: usize,
    /// Candidates kept for guided sampling.
    #[arg(long, default_value_t = 10)]
    top_m: usize,
    /// Constructions attempted per problem.
    #[arg(long, default_value_t = 200)]
    budget: usize,
    /// Selection rule: win rate plus classifier verdict, or plain UCT.
    #[arg(long, value_enum, default_value_t = ModeArg::Guided)]
    mode: ModeArg,
    /// Always take the best guided candidate instead of sampling.
    #[arg(long)]
    argmax: bool,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Search the full scene in guided mode too.
    #[arg(long)]
    no_prune: bool,
}

#[derive(Args)]
struct Inputs {
    /// Win/visit statistics file.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Contribution model file; without one every construction scores F = 1.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Guided,
    Uct,
}

#[derive(Clone, Copy, ValueEnum)]
enum RelevanceArg {
    Outward,
    All,
}

impl From<RelevanceArg> for Relevance {
    fn from(r: RelevanceArg) -> Self {
        match r {
            RelevanceArg::Outward => Relevance::Outward,
            RelevanceArg::All => Relevance::AllRelated,
        }
    }
}

impl SearchArgs {
    fn mode(&self) -> Mode {
        match self.mode {
            ModeArg::Guided => Mode::Guided,
            ModeArg::Uct => Mode::Uct,
        }
    }

    fn config(&self) -> Result<SearchConfig> {
        let cfg = SearchConfig {
            c: self.c,
            max_steps: self.max_steps,
            top_m: self.top_m,
            argmax: self.argmax,
            budget: self.budget,
            seed: self.seed,
            alpha: self.alpha,
            beta: self.beta,
            prune: !self.no_prune,
            ..SearchConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Inputs {
    fn model(&self) -> Result<Box<dyn Contribution>> {
        match &self.model {
            Some(p) => {
                let m = ContributionModel::load(p).with_context(|| format!("loading model {}", p.display()))?;
                Ok(Box::new(m))
            }
            None => Ok(Box::new(ConstantContribution(0.5))),
        }
    }

    fn store(&self) -> Result<StatsStore> {
        match &self.store {
            Some(p) => StatsStore::load(p).with_context(|| format!("loading store {}", p.display())),
            None => Ok(StatsStore::new()),
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    let mut last = out.clone();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !last.contains(&text) {
            out += &format!(": {text}");
        }
        last = text;
    }
    out
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { problem, search, inputs, report } => solve(&problem, &search, &inputs, report.as_deref()),
        Command::Subgraph { problem, alpha, relevance } => subgraph(&problem, alpha, relevance.into()),
        Command::Generate { count, seed, out } => generate(count, seed, &out),
        Command::Labels { problems, out, per_problem, search } => labels(&problems, &out, per_problem, &search),
        Command::TrainScorer { labels, out, epochs, lr, batch_size, hidden, seed, report } => {
            let cfg = TrainConfig {
                max_epochs: epochs,
                learning_rate: lr,
                batch_size,
                hidden,
                seed,
                ..TrainConfig::default()
            };
            train_scorer(&labels, &out, &cfg, report.as_deref())
        }
        Command::TrainSearch { problems, episodes, search, inputs } => {
            train_search(&problems, episodes, &search, &inputs)
        }
        Command::Bench { problems, search, inputs, jobs, report } => {
            run_bench(&problems, &search, &inputs, jobs, report.as_deref())
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn solve(path: &Path, args: &SearchArgs, inputs: &Inputs, report: Option<&Path>) -> Result<ExitCode> {
    let problem = load_problem(path)?;
    let cfg = args.config()?;
    let mode = args.mode();
    let model = inputs.model()?;
    let store = inputs.store()?;
    let rules = RuleSet::standard();
    let prune = mode == Mode::Guided && cfg.prune;
    let env = GeometryEnv::new(&problem, &rules, model.as_ref(), &cfg, prune)?;
    let root = env.root();

    println!("problem {} ({} search, budget {})", problem.id, mode_name(mode), cfg.budget);
    if prune {
        let kept: BTreeSet<_> = root.scene.labels().collect();
        let dropped: Vec<&str> = problem.scene.labels().filter(|l| !kept.contains(l)).map(|l| l.as_str()).collect();
        println!("pruned points: {}", if dropped.is_empty() { "none".to_owned() } else { dropped.join(" ") });
    }
    let actions = env.actions(&root);
    println!("\nstrategies");
    println!("{:>5}  strategy", "code");
    for a in &actions {
        println!("{:>5}  {}", a.code, a.canonical());
    }
    println!("\nguidance");
    println!("{:>5}  {:<28} {:>10} {:>10} {:>3} {:>9}", "code", "strategy", "w", "n", "F", "score");
    let sig = env.signature(&root);
    let stats: Vec<_> = actions.iter().map(|a| store.get(sig, &env.key(a))).collect();
    let parent: u64 = stats.iter().map(|s| s.n).sum();
    for (a, s) in actions.iter().zip(&stats) {
        let (f, score) = match mode {
            Mode::Guided => {
                let f = env.judge(&root, a).f;
                (f.to_string(), guidance_score(s.w, s.n, f))
            }
            Mode::Uct => ("-".to_owned(), uct_score(s.w, s.n, parent, cfg.c, cfg.q)),
        };
        println!("{:>5}  {:<28} {:>10} {:>10} {:>3} {:>9.4}", a.code, a.canonical(), s.w, s.n, f, score);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let outcome = search(&env, &store, &cfg, mode, &mut rng)?;
    println!(
        "\n{} after {} expansions in {} episodes",
        if outcome.solved { "solved" } else { "unsolved" },
        outcome.expansions,
        outcome.episodes
    );
    if outcome.solved {
        println!("constructions:");
        for (i, c) in outcome.constructions.iter().enumerate() {
            println!("  {}. {c}", i + 1);
        }
        let end = replay(&env, &outcome.constructions)?;
        println!("proof:");
        print!("{}", explain(&end.kb, &problem.conclusion)?);
    } else if outcome.truncated {
        println!("deduction hit its budget in at least one state");
    }
    if let Some(p) = report {
        let doc = serde_json::json!({
            "problem": problem.id,
            "mode": mode,
            "solved": outcome.solved,
            "expansions": outcome.expansions,
            "episodes": outcome.episodes,
            "constructions": outcome.constructions,
        });
        write_json(p, &doc)?;
    }
    Ok(if outcome.solved { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// Re-applies named constructions from the root.
fn replay(env: &GeometryEnv<'_>, names: &[String]) -> Result<auxgeo::search::GeoState> {
    let mut s = env.root();
    for name in names {
        let a = env.actions(&s).into_iter().find(|a| &a.canonical() == name);
        let Some(next) = a.and_then(|a| env.step(&s, &a)) else { bail!("construction {name} cannot be replayed") };
        s = next;
    }
    Ok(s)
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Guided => "guided",
        Mode::Uct => "uct",
    }
}

fn subgraph(path: &Path, alpha: f64, relevance: Relevance) -> Result<ExitCode> {
    let p = load_problem(path)?;
    println!("{:<6} {:>6} {:>12} {:>5}", "point", "level", "correlation", "sign");
    for r in analyze(&p.scene, &p.conclusion, alpha, relevance) {
        let mark = if r.conclusion { "  conclusion" } else { "" };
        println!("{:<6} {:>6} {:>12.4} {:>5}{mark}", r.label.as_str(), r.level.to_string(), r.correlation, r.sign);
    }
    let g = subgraph_with(&p.scene, &p.conclusion, alpha, relevance);
    let kept: BTreeSet<_> = g.labels().collect();
    let dropped: Vec<&str> = p.scene.labels().filter(|l| !kept.contains(l)).map(|l| l.as_str()).collect();
    println!("\npruned: {}", if dropped.is_empty() { "none".to_owned() } else { dropped.join(" ") });
    let mut pruned = Problem::new(p.id.clone(), g, p.conclusion.clone())?;
    pruned.family = p.family.clone();
    pruned.expected = p.expected.clone();
    println!("{}", problem_to_json(&pruned));
    Ok(ExitCode::SUCCESS)
}

fn generate(count: usize, seed: u64, out: &Path) -> Result<ExitCode> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for p in generate_synthetic(seed, count) {
        save_problem(&p, &out.join(format!("{}.json", p.id)))?;
    }
    println!("wrote {count} problems to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn labels(problems: &Path, out: &Path, per_problem: usize, args: &SearchArgs) -> Result<ExitCode> {
    let problems = load_problems(problems)?;
    let cfg = args.config()?;
    let records = collect_labels(&problems, &RuleSet::standard(), &cfg, per_problem, cfg.seed)?;
    save_labels(&records, out)?;
    let pos = records.iter().filter(|r| r.label == 1).count();
    println!(
        "{} labels ({pos} positive, {} negative) from {} problems",
        records.len(),
        records.len() - pos,
        problems.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn train_scorer(path: &Path, out: &Path, cfg: &TrainConfig, report: Option<&Path>) -> Result<ExitCode> {
    let data: Vec<TrainingExample> = load_labels(path)?.iter().map(|r| r.example()).collect();
    let (train_set, val, test) = split_dataset(&data, cfg.seed);
    let (model, rep) = train(&train_set, cfg).with_context(|| format!("training on {}", path.display()))?;
    println!("{} training, {} validation, {} test examples", train_set.len(), val.len(), test.len());
    println!("epochs {}  final loss {:.4}", rep.epoch_loss.len(), rep.epoch_loss.last().copied().unwrap_or(f64::NAN));
    println!("train accuracy {:.4}", rep.train_accuracy);
    let mut metrics = serde_json::Map::new();
    for (name, set) in [("validation", &val), ("test", &test)] {
        if set.is_empty() {
            continue;
        }
        let m = evaluate(&model, set)?;
        println!("{name} accuracy {:.4} precision {:.4} recall {:.4}", m.accuracy, m.precision, m.recall);
        metrics.insert(name.to_owned(), serde_json::to_value(m)?);
    }
    model.save(out).with_context(|| format!("writing model {}", out.display()))?;
    if let Some(p) = report {
        write_json(p, &serde_json::json!({ "training": rep, "evaluation": metrics }))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn train_search(path: &Path, episodes: usize, args: &SearchArgs, inputs: &Inputs) -> Result<ExitCode> {
    let Some(store_path) = &inputs.store else { bail!("train-search needs --store to write statistics to") };
    let problems = load_problems(path)?;
    let cfg = args.config()?;
    let model = inputs.model()?;
    let rules = RuleSet::standard();
    let mut store = if store_path.exists() {
        StatsStore::load(store_path).with_context(|| format!("loading store {}", store_path.display()))?
    } else {
        StatsStore::new()
    };
    let envs = problems
        .iter()
        .map(|p| GeometryEnv::new(p, &rules, model.as_ref(), &cfg, cfg.prune))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let summary = a3c_train(&envs, &mut store, &cfg, episodes, &mut rng, |_, _| Control::Continue)?;
    store.save(store_path).with_context(|| format!("writing store {}", store_path.display()))?;
    println!("{} episodes, {} solved; store holds {} entries", summary.episodes, summary.solved, store.len());
    Ok(ExitCode::SUCCESS)
}

fn run_bench(path: &Path, args: &SearchArgs, inputs: &Inputs, jobs: usize, report: Option<&Path>) -> Result<ExitCode> {
    let problems = load_problems(path)?;
    let cfg = args.config()?;
    let model = inputs.model()?;
    let store = inputs.store()?;
    let rules = RuleSet::standard();
    let guided = bench(&problems, &rules, model.as_ref(), &store, &cfg, Mode::Guided, jobs)?;
    let uct = bench(&problems, &rules, model.as_ref(), &store, &cfg, Mode::Uct, jobs)?;
    print!("{}", bench_table(&guided, &uct));
    if let Some(p) = report {
        write_json(p, &serde_json::json!({ "guided": guided, "uct": uct }))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn bench_table(guided: &BenchReport, uct: &BenchReport) -> String {
    let cell = |r: &BenchReport, fam: &str| {
        r.families.get(fam).map(|(s, t)| format!("{s}/{t}")).unwrap_or_else(|| "-".to_owned())
    };
    let families: BTreeSet<&String> = guided.families.keys().chain(uct.families.keys()).collect();
    let mut out = format!("budget {} per problem, seed {}\n", guided.budget, guided.seed);
    out += &format!("{:<16} {:>10} {:>10}\n", "family", "guided", "uct");
    for f in families {
        out += &format!("{:<16} {:>10} {:>10}\n", f, cell(guided, f), cell(uct, f));
    }
    let total = |r: &BenchReport| format!("{}/{}", r.solved, r.total);
    out += &format!("{:<16} {:>10} {:>10}\n", "all", total(guided), total(uct));
    out += &format!("{:<16} {:>10.4} {:>10.4}\n", "solve rate", guided.solve_rate, uct.solve_rate);
    out
}
