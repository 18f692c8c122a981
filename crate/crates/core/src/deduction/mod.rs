//! Forward-chaining saturation over scene facts.
//!
//! Evaluation is semi-naive: after the first round, join rules only fire on
//! facts derived in the previous round. Every collection touched here is
//! ordered, so the derived fact sequence is a function of the inputs alone.

mod rules;

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;

use crate::scene::{Conclusion, Fact, PlaneRef, Provenance, Scene};

pub use rules::{Rule, RuleSet};

/// Default cap on new facts per saturation call.
pub const DEFAULT_BUDGET: usize = 5000;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DeductionError {
    #[error("goal {0} is not derivable from the knowledge base")]
    NoDerivation(Box<Fact>),
    #[error("unknown rule id `{0}`")]
    UnknownRule(String),
}

/// Facts with their provenance, in insertion order. Premises of a derived
/// fact always precede it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KnowledgeBase {
    facts: IndexMap<Fact, Provenance>,
    truncated: bool,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, f: &Fact) -> bool {
        self.facts.contains_key(f)
    }

    pub fn provenance(&self, f: &Fact) -> Option<&Provenance> {
        self.facts.get(f)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Fact, &Provenance)> {
        self.facts.iter()
    }

    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.facts.keys()
    }

    /// Set when the last saturation stopped at its budget.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Inserts unless present; returns whether the fact was new.
    pub fn insert(&mut self, f: Fact, prov: Provenance) -> bool {
        if self.facts.contains_key(&f) {
            return false;
        }
        self.facts.insert(f, prov);
        true
    }

    /// Canonical text, one fact per line, sorted. Used for determinism checks.
    pub fn canonical_text(&self) -> String {
        let mut lines: Vec<String> =
            self.facts.keys().map(|f| serde_json::to_string(f).expect("facts serialize")).collect();
        lines.sort();
        lines.join("\n")
    }
}

/// Runs `rules` over the scene facts and `kb` until nothing new appears or
/// `budget` new facts have been added.
pub fn saturate(scene: &Scene, kb: &KnowledgeBase, rules: &RuleSet, budget: usize) -> KnowledgeBase {
    let mut out = kb.clone();
    out.truncated = false;
    for (f, prov) in scene.facts() {
        out.insert(f.clone(), prov.clone());
    }
    if rules.is_empty() {
        return out;
    }
    let mut added = 0usize;
    let mut pending: Vec<(Fact, Vec<Fact>, &'static str)> = Vec::new();
    for rule in rules.iter() {
        for (f, premises) in rule.seed(scene) {
            pending.push((f, premises, rule.id));
        }
    }
    let mut delta: Vec<Fact> = out.facts.keys().cloned().collect();
    loop {
        for rule in rules.iter() {
            for d in &delta {
                for (f, premises) in rule.join(scene, &out.facts, d) {
                    pending.push((f, premises, rule.id));
                }
            }
        }
        let mut next = Vec::new();
        for (f, premises, rule) in pending.drain(..) {
            let f = f.canonical();
            if out.facts.contains_key(&f) {
                continue;
            }
            if added == budget {
                out.truncated = true;
                return out;
            }
            out.facts.insert(f.clone(), Provenance::Derived { rule: rule.to_owned(), premises });
            added += 1;
            next.push(f);
        }
        if next.is_empty() {
            return out;
        }
        delta = next;
    }
}

/// Whether the (canonical) goal is in the knowledge base.
pub fn proves(kb: &KnowledgeBase, conc: &Conclusion) -> bool {
    kb.contains(&conc.goal.clone().canonical())
}

/// Adds every goal plane whose points all exist and span a plane.
///
/// A goal such as "AP ∥ plane CEF" names a plane through a point that is only
/// created by a construction; once it exists the plane becomes a scene entity
/// so membership facts can be derived for it.
pub fn with_goal_planes(scene: &Scene, conc: &Conclusion) -> Scene {
    let planes: Vec<&PlaneRef> = match &conc.goal {
        Fact::InPlane(_, p) | Fact::ParallelToPlane(_, p) => vec![p],
        _ => Vec::new(),
    };
    let missing: Vec<&PlaneRef> = planes
        .into_iter()
        .filter(|p| !scene.has_plane(p) && p.labels().iter().all(|l| scene.contains(l)))
        .filter(|p| scene.plane_frame(p).is_some())
        .collect();
    if missing.is_empty() {
        return scene.clone();
    }
    let mut b = scene.to_builder();
    for p in missing {
        b.add_plane(p.clone());
    }
    b.build().expect("adding a spanning plane keeps the scene valid")
}

/// Where a proof-tree node comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Given,
    Construction(String),
    Rule(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofNode {
    pub fact: Fact,
    pub source: Source,
    pub premises: Vec<ProofNode>,
}

impl ProofNode {
    /// Number of levels, a leaf being 1.
    pub fn depth(&self) -> usize {
        1 + self.premises.iter().map(ProofNode::depth).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(ProofNode::size).sum::<usize>()
    }

    /// Rule ids used anywhere in the tree.
    pub fn rules(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_rules(&mut out);
        out
    }

    fn collect_rules(&self, out: &mut BTreeSet<String>) {
        if let Source::Rule(r) = &self.source {
            out.insert(r.clone());
        }
        for p in &self.premises {
            p.collect_rules(out);
        }
    }

    fn write_indented(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let tag = match &self.source {
            Source::Given => "given".to_owned(),
            Source::Construction(s) => format!("construction {s}"),
            Source::Rule(r) => r.clone(),
        };
        writeln!(f, "{:indent$}{}  [{}]", "", self.fact, tag, indent = depth * 2)?;
        for p in &self.premises {
            p.write_indented(f, depth + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for ProofNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_indented(f, 0)
    }
}

/// Derivation tree for the goal, down to given and construction facts.
pub fn explain(kb: &KnowledgeBase, conc: &Conclusion) -> Result<ProofNode, DeductionError> {
    let goal = conc.goal.clone().canonical();
    if !kb.contains(&goal) {
        return Err(DeductionError::NoDerivation(Box::new(goal)));
    }
    Ok(build_node(kb, &goal, &mut Vec::new()))
}

fn build_node(kb: &KnowledgeBase, fact: &Fact, stack: &mut Vec<Fact>) -> ProofNode {
    let prov = kb.provenance(fact).expect("premises are in the knowledge base");
    let source = match prov {
        Provenance::Given => Source::Given,
        Provenance::Construction(s) => Source::Construction(s.clone()),
        Provenance::Derived { rule, .. } => Source::Rule(rule.clone()),
    };
    let mut premises = Vec::new();
    if let Provenance::Derived { premises: ps, .. } = prov {
        stack.push(fact.clone());
        for p in ps {
            // Premises precede conclusions, so this never triggers on a kb
            // built by `saturate`; it guards hand-assembled ones.
            if !stack.contains(p) {
                premises.push(build_node(kb, p, stack));
            }
        }
        stack.pop();
    }
    ProofNode { fact: fact.clone(), source, premises }
}
