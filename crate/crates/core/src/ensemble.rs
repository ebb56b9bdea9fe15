//! Model averaging: keep the directed edges found by at least `L` of `K`
//! learned DAGs, assembled into one acyclic graph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::CategoricalDataset;
use crate::error::{Error, Result};
use crate::graph::{check_same_nodes, Dag};
use crate::knowledge::KnowledgeConstraints;
use crate::scoring::bic;

/// How often each directed edge occurs across `k` DAGs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeTally {
    names: Vec<String>,
    k: usize,
    counts: BTreeMap<(usize, usize), usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCount {
    pub from: String,
    pub to: String,
    pub count: usize,
}

pub fn tally_edges(dags: &[Dag]) -> Result<EdgeTally> {
    let first = dags.first().ok_or_else(|| Error::InvalidArgument("no DAGs to tally".into()))?;
    let names = first.names().to_vec();
    let mut counts = BTreeMap::new();
    for g in dags {
        check_same_nodes(&names, g.names())?;
        let g = g.aligned_to(&names)?;
        for e in g.edges() {
            *counts.entry(e).or_insert(0) += 1;
        }
    }
    Ok(EdgeTally { names, k: dags.len(), counts })
}

impl EdgeTally {
    /// Builds a tally from explicit counts; each pair's total must not exceed `k`.
    pub fn from_counts(names: &[&str], k: usize, counts: &[(&str, &str, usize)]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let idx = |n: &str| names.iter().position(|x| x == n).ok_or_else(|| Error::UnknownVariable(n.to_string()));
        let mut map = BTreeMap::new();
        for &(f, t, c) in counts {
            let (a, b) = (idx(f)?, idx(t)?);
            if a == b {
                return Err(Error::SelfLoop(f.to_string()));
            }
            if c > 0 {
                map.insert((a, b), c);
            }
        }
        for (&(a, b), &c) in &map {
            if c + map.get(&(b, a)).copied().unwrap_or(0) > k {
                return Err(Error::InvalidArgument(format!(
                    "counts for {} - {} exceed k = {k}",
                    names[a], names[b]
                )));
            }
        }
        Ok(EdgeTally { names, k, counts: map })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn count(&self, from: &str, to: &str) -> usize {
        match (self.index(from), self.index(to)) {
            (Some(a), Some(b)) => self.count_idx(a, b),
            _ => 0,
        }
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Counts for `a -> b` and `b -> a`, and the undirected count, which is
    /// always zero because inputs are extended DAGs.
    pub fn pair(&self, a: &str, b: &str) -> (usize, usize, usize) {
        (self.count(a, b), self.count(b, a), 0)
    }

    fn count_idx(&self, a: usize, b: usize) -> usize {
        self.counts.get(&(a, b)).copied().unwrap_or(0)
    }

    /// All observed edges, most frequent first, ties by names.
    pub fn entries(&self) -> Vec<EdgeCount> {
        let mut out: Vec<EdgeCount> = self
            .counts
            .iter()
            .map(|(&(a, b), &count)| EdgeCount { from: self.names[a].clone(), to: self.names[b].clone(), count })
            .collect();
        out.sort_by(|x, y| y.count.cmp(&x.count).then_with(|| (&x.from, &x.to).cmp(&(&y.from, &y.to))));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Required,
    Added,
    /// Inserted against the tallied direction to avoid a cycle.
    Reversed,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyEvent {
    pub from: String,
    pub to: String,
    pub count: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub threshold: usize,
    pub dag: Dag,
    pub log: Vec<AssemblyEvent>,
}

/// Builds the consensus DAG at threshold `l`.
///
/// Required edges go in first. Remaining edges with count at least `l`
/// are inserted by decreasing count, ties by (from, to) name. When both
/// orientations of a pair qualify with equal counts, an orientation
/// preference decides, then whichever keeps the graph acyclic, then name
/// order. An edge that would close a cycle is reversed; if that fails too
/// it is dropped and logged. Forbidden edges are never inserted.
pub fn assemble(tally: &EdgeTally, l: usize, k: &KnowledgeConstraints) -> Result<Assembled> {
    if l == 0 || l > tally.k {
        return Err(Error::InvalidArgument(format!("threshold {l} must lie in 1..={}", tally.k)));
    }
    let names = &tally.names;
    let cons = k.resolve(names)?;
    let mut dag = Dag::new(names.clone())?;
    let mut log = Vec::new();
    for &(a, b) in cons.required_edges() {
        dag.add_edge(a, b)?;
        log.push(AssemblyEvent {
            from: names[a].clone(),
            to: names[b].clone(),
            count: tally.count_idx(a, b),
            outcome: Outcome::Required,
        });
    }

    let mut cands: Vec<((usize, usize), usize)> =
        tally.counts.iter().filter(|&(_, &c)| c >= l).map(|(&e, &c)| (e, c)).collect();
    cands.sort_by(|&((a, b), c), &((x, y), d)| d.cmp(&c).then_with(|| (&names[a], &names[b]).cmp(&(&names[x], &names[y]))));

    for ((a, b), count) in cands {
        if dag.adjacent(a, b) {
            continue;
        }
        let (mut u, mut v) = (a, b);
        if tally.count_idx(b, a) == count {
            // tie between orientations of one pair
            let pref = k.preference(&names[a], &names[b]).and_then(|(f, _)| if *f == names[b] { Some((b, a)) } else { None });
            if let Some(p) = pref {
                (u, v) = p;
            } else if dag.would_create_cycle(a, b) && !dag.would_create_cycle(b, a) {
                (u, v) = (b, a);
            }
        }
        let count = tally.count_idx(u, v);
        let mut event = |from: usize, to: usize, outcome| {
            log.push(AssemblyEvent { from: names[from].clone(), to: names[to].clone(), count, outcome })
        };
        if cons.is_forbidden(u, v) {
            event(u, v, Outcome::Dropped);
        } else if !dag.would_create_cycle(u, v) {
            dag.add_edge(u, v)?;
            event(u, v, Outcome::Added);
        } else if !cons.is_forbidden(v, u) && !dag.would_create_cycle(v, u) {
            dag.add_edge(v, u)?;
            event(v, u, Outcome::Reversed);
        } else {
            event(u, v, Outcome::Dropped);
        }
    }
    Ok(Assembled { threshold: l, dag, log })
}

/// Consensus graphs for every threshold `1..=k` with their BIC.
#[derive(Debug, Clone)]
pub struct AveragedFamily {
    pub members: Vec<Assembled>,
    pub bic: Vec<f64>,
    pub selected_l: usize,
}

impl AveragedFamily {
    pub fn selected(&self) -> &Assembled {
        &self.members[self.selected_l - 1]
    }

    pub fn member(&self, l: usize) -> Option<&Assembled> {
        l.checked_sub(1).and_then(|i| self.members.get(i))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let members: Vec<serde_json::Value> = self
            .members
            .iter()
            .zip(&self.bic)
            .map(|(m, b)| {
                serde_json::json!({
                    "l": m.threshold,
                    "bic": b,
                    "edges": m.dag.edge_names().into_iter().map(|(f, t)| serde_json::json!({"from": f, "to": t})).collect::<Vec<_>>(),
                    "log": m.log,
                })
            })
            .collect();
        serde_json::json!({ "selected_l": self.selected_l, "members": members })
    }
}

/// Assembles every threshold and picks the one whose consensus graph has
/// the highest BIC on `d`; ties go to the larger threshold.
pub fn select_by_bic(tally: &EdgeTally, d: &CategoricalDataset, k: &KnowledgeConstraints) -> Result<AveragedFamily> {
    check_same_nodes(tally.names(), &d.names())?;
    d.require_complete("model averaging")?;
    let ls: Vec<usize> = (1..=tally.k).collect();
    let built = crate::par::Exec::default().map(&ls, |&l| -> Result<(Assembled, f64)> {
        let a = assemble(tally, l, k)?;
        let s = bic(&a.dag, d)?;
        Ok((a, s))
    });
    let mut members = Vec::new();
    let mut scores = Vec::new();
    for b in built {
        let (a, s) = b?;
        members.push(a);
        scores.push(s);
    }
    let mut selected_l = 1;
    for (i, &s) in scores.iter().enumerate() {
        if s >= scores[selected_l - 1] {
            selected_l = i + 1;
        }
    }
    Ok(AveragedFamily { members, bic: scores, selected_l })
}
