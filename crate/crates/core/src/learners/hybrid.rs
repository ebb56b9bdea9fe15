//! Hybrid learners: a constraint-based candidate phase restricting a
//! hill-climbing search.

use super::constraint::{find_sepset, markov_blanket, removal};
use super::search::restricted_hc;
use super::{subsets, Algorithm, Context, LearnResult, LearnStats, TraceEntry};
use crate::error::Result;

/// Max-min parents and children of `t`, with backward pruning.
pub(crate) fn mmpc(ctx: &Context<'_>, t: usize, trace: &mut Vec<TraceEntry>) -> Vec<usize> {
    let max_sx = ctx.cfg.max_sx();
    // (candidate, largest p-value seen, smallest statistic seen)
    let mut cands: Vec<(usize, f64, f64)> = Vec::new();
    for &x in ctx.order.iter().filter(|&&x| x != t) {
        let r = ctx.test(t, x, &[]);
        if r.independent {
            trace.push(removal(ctx, t, x, &[], r.p_value));
        } else {
            cands.push((x, r.p_value, r.statistic));
        }
    }
    let mut cpc: Vec<usize> = Vec::new();
    while !cands.is_empty() {
        let (pos, _) = cands
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.1.total_cmp(&b.1).then(b.2.total_cmp(&a.2)).then(ctx.rank[a.0].cmp(&ctx.rank[b.0])))
            .expect("non-empty");
        let (x, _, _) = cands.remove(pos);
        let others = cpc.clone();
        cpc.push(x);
        if max_sx == 0 {
            continue;
        }
        let updated = ctx.cfg.exec.map(&cands, |&(c, mut max_p, mut min_stat)| {
            for size in 0..=others.len().min(max_sx - 1) {
                for mut s in subsets(&others, size) {
                    s.push(x);
                    let r = ctx.test(t, c, &s);
                    if r.independent {
                        return Err((s, r.p_value));
                    }
                    max_p = max_p.max(r.p_value);
                    min_stat = min_stat.min(r.statistic);
                }
            }
            Ok((c, max_p, min_stat))
        });
        let mut kept = Vec::new();
        for (&(c, _, _), u) in cands.iter().zip(updated) {
            match u {
                Ok(entry) => kept.push(entry),
                Err((s, p)) => trace.push(removal(ctx, t, c, &s, p)),
            }
        }
        cands = kept;
    }
    ctx.sort_by_name(&mut cpc);
    for x in cpc.clone() {
        let pool: Vec<usize> = cpc.iter().copied().filter(|&v| v != x).collect();
        if let Some((s, p)) = find_sepset(ctx, t, x, &pool, 1..=max_sx) {
            trace.push(removal(ctx, t, x, &s, p));
            cpc.retain(|&v| v != x);
        }
    }
    cpc
}

/// Parents and children of `t` by pruning its Markov blanket level by
/// level; a member is dropped only when a separating subset is found.
pub(crate) fn hpc(ctx: &Context<'_>, t: usize, trace: &mut Vec<TraceEntry>) -> Vec<usize> {
    let mut pc = markov_blanket(ctx, t);
    let max_sx = ctx.cfg.max_sx();
    let mut level = 0;
    while level <= max_sx && level < pc.len() {
        for x in pc.clone() {
            let pool: Vec<usize> = pc.iter().copied().filter(|&v| v != x).collect();
            if let Some((s, p)) = find_sepset(ctx, t, x, &pool, level..=level) {
                trace.push(removal(ctx, t, x, &s, p));
                pc.retain(|&v| v != x);
            }
        }
        level += 1;
    }
    pc
}

fn hybrid(ctx: &Context<'_>, alg: Algorithm) -> Result<LearnResult> {
    let n = ctx.n();
    let nodes: Vec<usize> = (0..n).collect();
    let found = ctx.cfg.exec.map(&nodes, |&t| {
        let mut trace = Vec::new();
        let pc = if alg == Algorithm::Mmhc { mmpc(ctx, t, &mut trace) } else { hpc(ctx, t, &mut trace) };
        (pc, trace)
    });
    let mut member = vec![vec![false; n]; n];
    let mut trace = Vec::new();
    for (t, (pc, tr)) in found.iter().enumerate() {
        for &x in pc {
            member[t][x] = true;
        }
        trace.extend(tr.iter().cloned());
    }
    let mut allowed = vec![vec![false; n]; n];
    let mut sets = vec![Vec::new(); n];
    for a in 0..n {
        for b in 0..n {
            let joined = if alg == Algorithm::Mmhc {
                member[a][b] && member[b][a]
            } else {
                member[a][b] || member[b][a]
            };
            allowed[a][b] = joined && !ctx.cons.both_forbidden(a, b);
            if allowed[a][b] {
                sets[a].push(b);
            }
        }
    }
    let stats = LearnStats::default();
    let mut out = restricted_hc(ctx, alg, allowed, trace, stats)?;
    out.candidate_sets = Some(sets.iter().map(|s| ctx.names(s)).collect());
    Ok(out)
}

pub(crate) fn learn_mmhc(ctx: &Context<'_>) -> Result<LearnResult> {
    hybrid(ctx, Algorithm::Mmhc)
}

pub(crate) fn learn_h2pc(ctx: &Context<'_>) -> Result<LearnResult> {
    hybrid(ctx, Algorithm::H2pc)
}

#[cfg(test)]
mod tests {
    use crate::dataset::{CategoricalDataset, Variable};
    use crate::knowledge::KnowledgeConstraints;
    use crate::learners::{learn, Algorithm, LearnerConfig};

    /// A -> B -> C -> D chain with 10% flips, E independent.
    fn chain() -> CategoricalDataset {
        let vars: Vec<Variable> = ["A", "B", "C", "D", "E"].iter().map(|&n| Variable::new(n, &["0", "1"])).collect();
        let mut cols = vec![Vec::new(); 5];
        let mut state = 987654321u64;
        let mut unif = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..3000 {
            let a = (unif() < 0.5) as u16;
            let b = if unif() < 0.1 { 1 - a } else { a };
            let c = if unif() < 0.1 { 1 - b } else { b };
            let d = if unif() < 0.1 { 1 - c } else { c };
            let e = (unif() < 0.5) as u16;
            for (col, v) in cols.iter_mut().zip([a, b, c, d, e]) {
                col.push(v);
            }
        }
        CategoricalDataset::from_columns(vars, cols).unwrap()
    }

    #[test]
    fn hybrids_recover_chain_skeleton() {
        let d = chain();
        for alg in [Algorithm::Mmhc, Algorithm::H2pc] {
            let r = learn(&d, &LearnerConfig::new(alg), &KnowledgeConstraints::default()).unwrap();
            let mut skel: Vec<(usize, usize)> = r.dag.edges().into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
            skel.sort();
            assert_eq!(skel, vec![(0, 1), (1, 2), (2, 3)], "{alg}");
            let sets = r.candidate_sets.unwrap();
            assert_eq!(sets[1], vec!["A".to_string(), "C".to_string()], "{alg}");
            assert!(sets[4].is_empty());
        }
    }

    #[test]
    fn hybrid_keeps_required_edge_outside_candidates() {
        let d = chain();
        let mut k = KnowledgeConstraints::default();
        k.require("E", "A");
        let r = learn(&d, &LearnerConfig::new(Algorithm::Mmhc), &k).unwrap();
        assert!(r.dag.has_edge(4, 0));
    }
}
