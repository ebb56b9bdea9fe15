//! Structure learners: PC-Stable and Inter-IAMB (constraint-based), hill
//! climbing and tabu search (score-based), MMHC and H2PC (hybrid).
//!
//! All six share one constraint semantics. Required edges are present and
//! oriented from the start and never removed; forbidden edges are never
//! added, and undirected edges with one forbidden orientation are oriented
//! the other way before the orientation rules run.

mod constraint;
mod hybrid;
mod search;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::RwLock;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::CategoricalDataset;
use crate::error::{Error, Result};
use crate::graph::{consistent_extension, Dag, Pdag};
use crate::knowledge::{KnowledgeConstraints, ResolvedConstraints};
use crate::par::Exec;
use crate::scoring::{g2_test, CiTestResult};

pub use search::MoveKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    PcStable,
    InterIamb,
    Hc,
    Tabu,
    Mmhc,
    H2pc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] =
        [Algorithm::PcStable, Algorithm::InterIamb, Algorithm::Hc, Algorithm::Tabu, Algorithm::Mmhc, Algorithm::H2pc];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::PcStable => "pc_stable",
            Algorithm::InterIamb => "inter_iamb",
            Algorithm::Hc => "hc",
            Algorithm::Tabu => "tabu",
            Algorithm::Mmhc => "mmhc",
            Algorithm::H2pc => "h2pc",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '.'], "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == key || (key == "pc" && *a == Algorithm::PcStable))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown algorithm `{s}` (expected one of pc_stable, inter_iamb, hc, tabu, mmhc, h2pc)"
                ))
            })
    }
}

/// Learner hyperparameters. JSON field names follow the usual short forms
/// (`alpha`, `tabu`, `restart`, `max_iter`, `max_sx`); an unbounded limit is
/// written as `null` or `"Inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    #[serde(rename = "tabu")]
    pub tabu_list_length: usize,
    #[serde(rename = "restart")]
    pub restarts: usize,
    #[serde(rename = "max_iter", with = "unbounded")]
    pub max_iterations: Option<u64>,
    #[serde(rename = "max_sx", with = "unbounded")]
    pub max_conditioning_size: Option<u64>,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            algorithm: Algorithm::Hc,
            alpha: 0.05,
            tabu_list_length: 10,
            restarts: 0,
            max_iterations: None,
            max_conditioning_size: None,
            seed: 0,
            exec: Exec::Parallel,
        }
    }
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        LearnerConfig { algorithm, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if self.tabu_list_length < 1 {
            return Err(Error::InvalidArgument("tabu list length must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn max_sx(&self) -> usize {
        self.max_conditioning_size.map_or(usize::MAX, |m| m.min(usize::MAX as u64) as usize)
    }
}

mod unbounded {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_u64(*x),
            None => s.serialize_str("Inf"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<u64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
            Null(()),
        }
        match Option::<Raw>::deserialize(d)? {
            None | Some(Raw::Null(())) => Ok(None),
            Some(Raw::Num(x)) => Ok(Some(x)),
            Some(Raw::Text(t)) if t.eq_ignore_ascii_case("inf") => Ok(None),
            Some(Raw::Text(t)) => Err(serde::de::Error::custom(format!("expected a count or \"Inf\", got {t:?}"))),
        }
    }
}

/// One step recorded by a learner, with node names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEntry {
    Move { kind: MoveKind, from: String, to: String, delta: f64, score: f64 },
    Restart { index: usize, score: f64 },
    Removed { x: String, y: String, sepset: Vec<String>, p_value: f64 },
    Oriented { from: String, to: String, rule: String },
    Conflict { detail: String },
    Repair { detail: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnStats {
    pub tests: u64,
    pub score_evaluations: u64,
    pub iterations: u64,
}

#[derive(Debug, Clone)]
pub struct LearnResult {
    pub algorithm: Algorithm,
    /// Learner output before extension (a DAG for score-based learners).
    pub graph: Pdag,
    /// Constraint-respecting DAG used for scoring and averaging.
    pub dag: Dag,
    pub forced_extension: bool,
    pub trace: Vec<TraceEntry>,
    pub stats: LearnStats,
    /// Per-node blankets or parent-child sets found by the first phase of
    /// Inter-IAMB and the hybrid learners, by name.
    pub candidate_sets: Option<Vec<Vec<String>>>,
}

/// Runs the configured learner on a complete dataset.
pub fn learn(d: &CategoricalDataset, cfg: &LearnerConfig, k: &KnowledgeConstraints) -> Result<LearnResult> {
    cfg.validate()?;
    d.require_complete("structure learning")?;
    let cons = k.resolve(&d.names())?;
    let ctx = Context::new(d, cfg, &cons);
    let mut out = match cfg.algorithm {
        Algorithm::Hc => search::learn_hc(&ctx)?,
        Algorithm::Tabu => search::learn_tabu(&ctx)?,
        Algorithm::PcStable => constraint::learn_pc_stable(&ctx)?,
        Algorithm::InterIamb => constraint::learn_inter_iamb(&ctx)?,
        Algorithm::Mmhc => hybrid::learn_mmhc(&ctx)?,
        Algorithm::H2pc => hybrid::learn_h2pc(&ctx)?,
    };
    out.stats.tests = ctx.tests.load(Ordering::Relaxed);
    Ok(out)
}

pub fn learn_hc(d: &CategoricalDataset, cfg: &LearnerConfig, k: &KnowledgeConstraints) -> Result<LearnResult> {
    learn(d, &LearnerConfig { algorithm: Algorithm::Hc, ..cfg.clone() }, k)
}

pub fn learn_tabu(d: &CategoricalDataset, cfg: &LearnerConfig, k: &KnowledgeConstraints) -> Result<LearnResult> {
    learn(d, &LearnerConfig { algorithm: Algorithm::Tabu, ..cfg.clone() }, k)
}

pub fn learn_pc_stable(d: &CategoricalDataset, cfg: &LearnerConfig, k: &KnowledgeConstraints) -> Result<LearnResult> {
    learn(d, &LearnerConfig { algorithm: Algorithm::PcStable, ..cfg.clone() }, k)
}

pub fn learn_inter_iamb(d: &CategoricalDataset, cfg: &LearnerConfig, k: &KnowledgeConstraints) -> Result<LearnResult> {
    learn(d, &LearnerConfig { algorithm: Algorithm::InterIamb, ..cfg.clone() }, k)
}

pub fn learn_mmhc(d: &CategoricalDataset, cfg: &LearnerConfig, k: &KnowledgeConstraints) -> Result<LearnResult> {
    learn(d, &LearnerConfig { algorithm: Algorithm::Mmhc, ..cfg.clone() }, k)
}

pub fn learn_h2pc(d: &CategoricalDataset, cfg: &LearnerConfig, k: &KnowledgeConstraints) -> Result<LearnResult> {
    learn(d, &LearnerConfig { algorithm: Algorithm::H2pc, ..cfg.clone() }, k)
}

/// Markov blankets as found by the interleaved forward/backward search,
/// before symmetrisation; exposed for inspection and tests.
pub fn markov_blankets(d: &CategoricalDataset, cfg: &LearnerConfig) -> Result<Vec<Vec<String>>> {
    cfg.validate()?;
    d.require_complete("structure learning")?;
    let cons = ResolvedConstraints::none(d.n_vars());
    let ctx = Context::new(d, cfg, &cons);
    Ok((0..d.n_vars())
        .map(|t| constraint::markov_blanket(&ctx, t).into_iter().map(|v| d.variable(v).name.clone()).collect())
        .collect())
}

type CiKey = (usize, usize, Vec<usize>);

/// Shared state of one learner run.
pub(crate) struct Context<'a> {
    pub data: &'a CategoricalDataset,
    pub cfg: &'a LearnerConfig,
    pub cons: &'a ResolvedConstraints,
    /// Node indices sorted by name; iteration order wherever order matters.
    pub order: Vec<usize>,
    /// Position of each node in `order`.
    pub rank: Vec<usize>,
    tests: AtomicU64,
    ci_cache: RwLock<HashMap<CiKey, CiTestResult>>,
}

impl<'a> Context<'a> {
    fn new(data: &'a CategoricalDataset, cfg: &'a LearnerConfig, cons: &'a ResolvedConstraints) -> Self {
        let mut order: Vec<usize> = (0..data.n_vars()).collect();
        order.sort_by(|&a, &b| data.variable(a).name.cmp(&data.variable(b).name));
        let mut rank = vec![0; order.len()];
        for (r, &v) in order.iter().enumerate() {
            rank[v] = r;
        }
        Context { data, cfg, cons, order, rank, tests: AtomicU64::new(0), ci_cache: RwLock::new(HashMap::new()) }
    }

    pub fn n(&self) -> usize {
        self.data.n_vars()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.data.variable(v).name
    }

    pub fn names(&self, vs: &[usize]) -> Vec<String> {
        let mut out: Vec<String> = vs.iter().map(|&v| self.name(v).to_string()).collect();
        out.sort();
        out
    }

    /// Sorts node indices by name.
    pub fn sort_by_name(&self, vs: &mut [usize]) {
        vs.sort_by_key(|&v| self.rank[v]);
    }

    /// Cached G² test of `x ⟂ y | z`.
    pub fn test(&self, x: usize, y: usize, z: &[usize]) -> CiTestResult {
        // canonical by name, so the computation is independent of column order
        let (a, b) = if self.rank[x] < self.rank[y] { (x, y) } else { (y, x) };
        let mut zs = z.to_vec();
        self.sort_by_name(&mut zs);
        let key = (a, b, zs);
        if let Some(r) = self.ci_cache.read().get(&key) {
            return r.clone();
        }
        self.tests.fetch_add(1, Ordering::Relaxed);
        let r = g2_test(self.data, a, b, &key.2, self.cfg.alpha);
        self.ci_cache.write().insert(key, r.clone());
        r
    }
}

/// Subsets of `pool` of exactly `size` elements, in lexicographic position order.
pub(crate) fn subsets(pool: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if size > pool.len() {
        return out;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(idx.iter().map(|&i| pool[i]).collect());
        let mut i = size;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + pool.len() - size {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Extends a learner's PDAG to a DAG and enforces the constraints on it:
/// required edges are inserted first, then the extension's edges in
/// topological order, skipping forbidden or cycle-closing ones.
pub(crate) fn finalize(
    ctx: &Context<'_>,
    algorithm: Algorithm,
    graph: Pdag,
    mut trace: Vec<TraceEntry>,
    stats: LearnStats,
) -> LearnResult {
    let ext = consistent_extension(&graph);
    if ext.forced {
        trace.push(TraceEntry::Conflict {
            detail: "no consistent extension exists; used fallback orientation".into(),
        });
    }
    let dag = enforce(ctx, &ext.dag, &mut trace);
    LearnResult { algorithm, graph, dag, forced_extension: ext.forced, trace, stats, candidate_sets: None }
}

pub(crate) fn enforce(ctx: &Context<'_>, dag: &Dag, trace: &mut Vec<TraceEntry>) -> Dag {
    let mut out = dag.empty_like();
    for &(a, b) in ctx.cons.required_edges() {
        out.add_edge(a, b).expect("required edges are acyclic after validation");
    }
    for v in dag.topological_order() {
        for &u in dag.parents(v) {
            if out.has_edge(u, v) {
                continue;
            }
            if ctx.cons.is_forbidden(u, v) {
                trace.push(TraceEntry::Repair { detail: format!("dropped forbidden {} -> {}", ctx.name(u), ctx.name(v)) });
                continue;
            }
            if out.has_edge(v, u) || out.add_edge(u, v).is_err() {
                trace.push(TraceEntry::Repair {
                    detail: format!("dropped {} -> {} conflicting with required edges", ctx.name(u), ctx.name(v)),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_enumeration() {
        assert_eq!(subsets(&[1, 2, 3], 2), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(subsets(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert!(subsets(&[1], 2).is_empty());
        assert_eq!(subsets(&[5, 6, 7, 8], 4).len(), 1);
        assert_eq!(subsets(&[0, 1, 2, 3, 4], 3).len(), 10);
    }

    #[test]
    fn config_json_uses_short_names() {
        let cfg = LearnerConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        for key in ["\"alpha\":0.05", "\"tabu\":10", "\"restart\":0", "\"max_iter\":\"Inf\"", "\"max_sx\":\"Inf\""] {
            assert!(text.contains(key), "{text}");
        }
        let parsed: LearnerConfig =
            serde_json::from_str(r#"{"algorithm":"tabu","tabu":5,"max_sx":3,"max_iter":null}"#).unwrap();
        assert_eq!(parsed.algorithm, Algorithm::Tabu);
        assert_eq!(parsed.tabu_list_length, 5);
        assert_eq!(parsed.max_conditioning_size, Some(3));
        assert_eq!(parsed.max_iterations, None);
        assert_eq!(parsed.alpha, 0.05);
        assert!(serde_json::from_str::<LearnerConfig>(r#"{"max_sx":"lots"}"#).is_err());
    }

    #[test]
    fn config_validation_and_names() {
        assert!(LearnerConfig { alpha: 1.0, ..Default::default() }.validate().is_err());
        assert!(LearnerConfig { tabu_list_length: 0, ..Default::default() }.validate().is_err());
        assert_eq!("PC-Stable".parse::<Algorithm>().unwrap(), Algorithm::PcStable);
        assert_eq!("inter.iamb".parse::<Algorithm>().unwrap(), Algorithm::InterIamb);
        assert!("gs".parse::<Algorithm>().is_err());
    }
}
