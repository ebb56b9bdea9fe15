//! Greedy search over DAGs with the BIC score: hill climbing with optional
//! random restarts, tabu search, and the candidate-restricted climb used by
//! the hybrid learners.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{finalize, Algorithm, Context, LearnResult, LearnStats, TraceEntry};
use crate::error::Result;
use crate::graph::Dag;
use crate::scoring::BicScorer;

/// Smallest score gain counted as an improvement.
const EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Add,
    Delete,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Move {
    kind: MoveKind,
    from: usize,
    to: usize,
}

impl Move {
    fn inverse(self) -> Move {
        match self.kind {
            MoveKind::Add => Move { kind: MoveKind::Delete, ..self },
            MoveKind::Delete => Move { kind: MoveKind::Add, ..self },
            MoveKind::Reverse => Move { kind: MoveKind::Reverse, from: self.to, to: self.from },
        }
    }
}

struct State {
    dag: Dag,
    local: Vec<f64>,
}

impl State {
    fn score(&self) -> f64 {
        self.local.iter().sum()
    }
}

struct Engine<'c, 'a> {
    ctx: &'c Context<'a>,
    scorer: BicScorer<'a>,
    /// Pairs the search may connect, beyond the required edges.
    allowed: Option<Vec<Vec<bool>>>,
}

impl<'c, 'a> Engine<'c, 'a> {
    fn new(ctx: &'c Context<'a>, allowed: Option<Vec<Vec<bool>>>) -> Result<Self> {
        Ok(Engine { ctx, scorer: BicScorer::new(ctx.data)?, allowed })
    }

    fn start(&self) -> State {
        let mut dag = Dag::new(self.ctx.data.names()).expect("dataset names are unique");
        for &(a, b) in self.ctx.cons.required_edges() {
            dag.add_edge(a, b).expect("required edges are acyclic after validation");
        }
        self.state(dag)
    }

    fn state(&self, dag: Dag) -> State {
        let local = (0..dag.node_count()).map(|v| self.local(&dag, v, None, None)).collect();
        State { dag, local }
    }

    fn local(&self, g: &Dag, v: usize, add: Option<usize>, drop: Option<usize>) -> f64 {
        let mut pa: Vec<usize> = g.parents(v).iter().copied().filter(|&p| Some(p) != drop).collect();
        pa.extend(add);
        self.scorer.local(v, &pa)
    }

    fn pair_allowed(&self, a: usize, b: usize) -> bool {
        self.allowed.as_ref().is_none_or(|m| m[a][b])
    }

    /// Legal moves in canonical order: kind, then source name, then target name.
    fn legal_moves(&self, g: &Dag) -> Vec<Move> {
        let ctx = self.ctx;
        let n = g.node_count();
        let reach: Vec<Vec<bool>> = (0..n)
            .map(|s| {
                let mut seen = vec![false; n];
                let mut stack = vec![s];
                while let Some(u) = stack.pop() {
                    for &c in g.children(u) {
                        if !seen[c] {
                            seen[c] = true;
                            stack.push(c);
                        }
                    }
                }
                seen
            })
            .collect();
        let mut edges = g.edges();
        edges.sort_by_key(|&(u, v)| (ctx.rank[u], ctx.rank[v]));

        let mut moves = Vec::new();
        for &u in &ctx.order {
            for &v in &ctx.order {
                if u != v
                    && !g.adjacent(u, v)
                    && !ctx.cons.is_forbidden(u, v)
                    && self.pair_allowed(u, v)
                    && !reach[v][u]
                {
                    moves.push(Move { kind: MoveKind::Add, from: u, to: v });
                }
            }
        }
        for &(u, v) in &edges {
            if !ctx.cons.is_required(u, v) {
                moves.push(Move { kind: MoveKind::Delete, from: u, to: v });
            }
        }
        for &(u, v) in &edges {
            if !ctx.cons.is_required(u, v)
                && !ctx.cons.is_forbidden(v, u)
                && self.pair_allowed(v, u)
                && !g.has_path_avoiding(u, v, Some((u, v)))
            {
                moves.push(Move { kind: MoveKind::Reverse, from: u, to: v });
            }
        }
        moves
    }

    fn delta(&self, s: &State, m: Move) -> f64 {
        let (u, v, g) = (m.from, m.to, &s.dag);
        match m.kind {
            MoveKind::Add => self.local(g, v, Some(u), None) - s.local[v],
            MoveKind::Delete => self.local(g, v, None, Some(u)) - s.local[v],
            MoveKind::Reverse => {
                self.local(g, v, None, Some(u)) - s.local[v] + self.local(g, u, Some(v), None) - s.local[u]
            }
        }
    }

    fn evaluate(&self, s: &State) -> Vec<(Move, f64)> {
        let moves = self.legal_moves(&s.dag);
        let deltas = self.ctx.cfg.exec.map(&moves, |&m| self.delta(s, m));
        moves.into_iter().zip(deltas).collect()
    }

    fn apply(&self, s: &mut State, m: Move) {
        match m.kind {
            MoveKind::Add => s.dag.add_edge(m.from, m.to).expect("legal move"),
            MoveKind::Delete => {
                s.dag.remove_edge(m.from, m.to);
            }
            MoveKind::Reverse => s.dag.reverse_edge(m.from, m.to).expect("legal move"),
        }
        for v in [m.from, m.to] {
            s.local[v] = self.local(&s.dag, v, None, None);
        }
    }

    fn record(&self, trace: &mut Vec<TraceEntry>, m: Move, delta: f64, score: f64) {
        trace.push(TraceEntry::Move {
            kind: m.kind,
            from: self.ctx.name(m.from).to_string(),
            to: self.ctx.name(m.to).to_string(),
            delta,
            score,
        });
    }

    /// First move with the largest delta among those passing `eligible`.
    fn best(candidates: &[(Move, f64)], eligible: impl Fn(&(Move, f64)) -> bool) -> Option<(Move, f64)> {
        let mut best: Option<(Move, f64)> = None;
        for c in candidates.iter().filter(|c| eligible(c)) {
            if best.is_none_or(|(_, d)| c.1 > d) {
                best = Some(*c);
            }
        }
        best
    }

    fn climb(&self, s: &mut State, trace: &mut Vec<TraceEntry>, stats: &mut LearnStats) {
        loop {
            if self.ctx.cfg.max_iterations.is_some_and(|m| stats.iterations >= m) {
                return;
            }
            let candidates = self.evaluate(s);
            match Self::best(&candidates, |_| true) {
                Some((m, d)) if d > EPS => {
                    self.apply(s, m);
                    stats.iterations += 1;
                    self.record(trace, m, d, s.score());
                }
                _ => return,
            }
        }
    }

    fn hill_climb(&self, trace: &mut Vec<TraceEntry>, stats: &mut LearnStats) -> Dag {
        let mut s = self.start();
        self.climb(&mut s, trace, stats);
        let restarts = self.ctx.cfg.restarts;
        if restarts == 0 {
            return s.dag;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.ctx.cfg.seed);
        let mut best = s;
        for index in 0..restarts {
            let mut cur = self.state(best.dag.clone());
            let perturb = (cur.dag.edge_count() / 4).max(1);
            for _ in 0..perturb {
                let moves = self.legal_moves(&cur.dag);
                if moves.is_empty() {
                    break;
                }
                let m = moves[rng.random_range(0..moves.len())];
                self.apply(&mut cur, m);
            }
            self.climb(&mut cur, trace, stats);
            trace.push(TraceEntry::Restart { index, score: cur.score() });
            if cur.score() > best.score() + EPS {
                best = cur;
            }
        }
        best.dag
    }

    fn tabu_search(&self, trace: &mut Vec<TraceEntry>, stats: &mut LearnStats) -> Dag {
        let len = self.ctx.cfg.tabu_list_length;
        let mut cur = self.start();
        let mut best_dag = cur.dag.clone();
        let mut best_score = cur.score();
        let mut tabu: VecDeque<Move> = VecDeque::with_capacity(len);
        let mut stale = 0;
        while stale < len {
            if self.ctx.cfg.max_iterations.is_some_and(|m| stats.iterations >= m) {
                break;
            }
            let current = cur.score();
            let candidates = self.evaluate(&cur);
            let pick = Self::best(&candidates, |&(m, d)| !tabu.contains(&m) || current + d > best_score + EPS);
            let Some((m, d)) = pick else { break };
            self.apply(&mut cur, m);
            stats.iterations += 1;
            self.record(trace, m, d, cur.score());
            if tabu.len() == len {
                tabu.pop_front();
            }
            tabu.push_back(m.inverse());
            if cur.score() > best_score + EPS {
                best_score = cur.score();
                best_dag = cur.dag.clone();
                stale = 0;
            } else {
                stale += 1;
            }
        }
        best_dag
    }
}

fn finish(ctx: &Context<'_>, alg: Algorithm, engine: &Engine<'_, '_>, dag: Dag, trace: Vec<TraceEntry>, mut stats: LearnStats) -> LearnResult {
    stats.score_evaluations = engine.scorer.cache().misses();
    finalize(ctx, alg, dag.to_pdag(), trace, stats)
}

pub(crate) fn learn_hc(ctx: &Context<'_>) -> Result<LearnResult> {
    let engine = Engine::new(ctx, None)?;
    let (mut trace, mut stats) = (Vec::new(), LearnStats::default());
    let dag = engine.hill_climb(&mut trace, &mut stats);
    Ok(finish(ctx, Algorithm::Hc, &engine, dag, trace, stats))
}

pub(crate) fn learn_tabu(ctx: &Context<'_>) -> Result<LearnResult> {
    let engine = Engine::new(ctx, None)?;
    let (mut trace, mut stats) = (Vec::new(), LearnStats::default());
    let dag = engine.tabu_search(&mut trace, &mut stats);
    Ok(finish(ctx, Algorithm::Tabu, &engine, dag, trace, stats))
}

/// Hill climbing where only pairs marked in `allowed` (symmetric) may be joined.
pub(crate) fn restricted_hc(
    ctx: &Context<'_>,
    alg: Algorithm,
    allowed: Vec<Vec<bool>>,
    mut trace: Vec<TraceEntry>,
    mut stats: LearnStats,
) -> Result<LearnResult> {
    let engine = Engine::new(ctx, Some(allowed))?;
    let dag = engine.hill_climb(&mut trace, &mut stats);
    Ok(finish(ctx, alg, &engine, dag, trace, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CategoricalDataset, Variable};
    use crate::knowledge::KnowledgeConstraints;
    use crate::learners::{learn, LearnerConfig};
    use crate::scoring::bic;

    fn chain_data() -> CategoricalDataset {
        // A -> B -> C with strong dependence, deterministic pseudo-noise
        let vars = vec![Variable::new("A", &["0", "1"]), Variable::new("B", &["0", "1"]), Variable::new("C", &["0", "1"])];
        let mut cols = vec![Vec::new(), Vec::new(), Vec::new()];
        for i in 0..2000u32 {
            let a = (i % 2) as u16;
            let b = if i % 7 == 0 { 1 - a } else { a };
            let c = if i % 5 == 0 { 1 - b } else { b };
            cols[0].push(a);
            cols[1].push(b);
            cols[2].push(c);
        }
        CategoricalDataset::from_columns(vars, cols).unwrap()
    }

    #[test]
    fn hill_climbing_trace_is_strictly_increasing() {
        let d = chain_data();
        let r = learn(&d, &LearnerConfig::new(Algorithm::Hc), &KnowledgeConstraints::default()).unwrap();
        let scores: Vec<f64> = r
            .trace
            .iter()
            .filter_map(|t| match t {
                TraceEntry::Move { score, .. } => Some(*score),
                _ => None,
            })
            .collect();
        assert!(!scores.is_empty());
        assert!(scores.windows(2).all(|w| w[1] > w[0]));
        assert!((scores.last().unwrap() - bic(&r.dag, &d).unwrap()).abs() < 1e-6);
        assert_eq!(r.dag.edge_count(), 2);
        assert!(r.dag.adjacent(0, 1) && r.dag.adjacent(1, 2));
    }

    #[test]
    fn tabu_never_worse_than_hill_climbing() {
        let d = chain_data();
        let k = KnowledgeConstraints::default();
        let hc = learn(&d, &LearnerConfig::new(Algorithm::Hc), &k).unwrap();
        let tabu = learn(&d, &LearnerConfig::new(Algorithm::Tabu), &k).unwrap();
        assert!(bic(&tabu.dag, &d).unwrap() >= bic(&hc.dag, &d).unwrap() - 1e-9);
    }

    #[test]
    fn constraints_hold_in_search() {
        let d = chain_data();
        let mut k = KnowledgeConstraints::default();
        k.require("C", "A").forbid("A", "B").forbid("B", "A");
        let r = learn(&d, &LearnerConfig::new(Algorithm::Hc), &k).unwrap();
        assert!(r.dag.has_edge(2, 0));
        assert!(!r.dag.adjacent(0, 1));
    }

    #[test]
    fn move_inverse() {
        let m = Move { kind: MoveKind::Reverse, from: 1, to: 2 };
        assert_eq!(m.inverse(), Move { kind: MoveKind::Reverse, from: 2, to: 1 });
        let a = Move { kind: MoveKind::Add, from: 1, to: 2 };
        assert_eq!(a.inverse().inverse(), a);
    }
}
