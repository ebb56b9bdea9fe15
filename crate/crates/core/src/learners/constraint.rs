//! Constraint-based learners and the shared orientation phase.

use std::collections::HashMap;

use super::{finalize, subsets, Algorithm, Context, LearnResult, LearnStats, TraceEntry};
use crate::error::Result;
use crate::graph::{apply_meek_rules, Pdag};

pub(crate) type Sepsets = HashMap<(usize, usize), Vec<usize>>;

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Complete graph minus pairs forbidden in both directions.
pub(crate) fn initial_adjacency(ctx: &Context<'_>) -> Vec<Vec<bool>> {
    let n = ctx.n();
    (0..n).map(|a| (0..n).map(|b| a != b && !ctx.cons.both_forbidden(a, b)).collect()).collect()
}

fn sorted_neighbors(ctx: &Context<'_>, adj: &[Vec<bool>], v: usize) -> Vec<usize> {
    ctx.order.iter().copied().filter(|&u| adj[v][u]).collect()
}

/// First subset of `pool` (by size, then position) of at most `max_size`
/// elements that separates `x` and `y`.
pub(crate) fn find_sepset(
    ctx: &Context<'_>,
    x: usize,
    y: usize,
    pool: &[usize],
    sizes: std::ops::RangeInclusive<usize>,
) -> Option<(Vec<usize>, f64)> {
    let hi = (*sizes.end()).min(pool.len());
    for size in *sizes.start()..=hi {
        for s in subsets(pool, size) {
            let r = ctx.test(x, y, &s);
            if r.independent {
                return Some((s, r.p_value));
            }
        }
    }
    None
}

pub(crate) fn removal(ctx: &Context<'_>, x: usize, y: usize, sepset: &[usize], p_value: f64) -> TraceEntry {
    let (a, b) = if ctx.rank[x] < ctx.rank[y] { (x, y) } else { (y, x) };
    TraceEntry::Removed {
        x: ctx.name(a).to_string(),
        y: ctx.name(b).to_string(),
        sepset: ctx.names(sepset),
        p_value,
    }
}

/// Pairs `(x, y)` with `x` before `y` by name.
fn ordered_pairs(ctx: &Context<'_>, adj: &[Vec<bool>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &x) in ctx.order.iter().enumerate() {
        for &y in &ctx.order[i + 1..] {
            if adj[x][y] {
                out.push((x, y));
            }
        }
    }
    out
}

pub(crate) fn learn_pc_stable(ctx: &Context<'_>) -> Result<LearnResult> {
    let mut adj = initial_adjacency(ctx);
    let mut sepsets = Sepsets::new();
    let mut trace = Vec::new();
    let mut stats = LearnStats::default();
    let max_sx = ctx.cfg.max_sx();
    let mut level = 0usize;
    while level <= max_sx {
        // neighbour sets are frozen for the whole level
        let nbrs: Vec<Vec<usize>> = (0..ctx.n()).map(|v| sorted_neighbors(ctx, &adj, v)).collect();
        let edges: Vec<(usize, usize)> = ordered_pairs(ctx, &adj)
            .into_iter()
            .filter(|&(x, y)| nbrs[x].len() > level || nbrs[y].len() > level)
            .collect();
        if edges.is_empty() {
            break;
        }
        stats.iterations += 1;
        let found = ctx.cfg.exec.map(&edges, |&(x, y)| {
            if ctx.cons.pair_required(x, y) {
                return None;
            }
            for (a, b) in [(x, y), (y, x)] {
                let pool: Vec<usize> = nbrs[a].iter().copied().filter(|&v| v != b).collect();
                if let Some(hit) = find_sepset(ctx, x, y, &pool, level..=level) {
                    return Some(hit);
                }
            }
            None
        });
        for (&(x, y), hit) in edges.iter().zip(found) {
            if let Some((s, p)) = hit {
                adj[x][y] = false;
                adj[y][x] = false;
                trace.push(removal(ctx, x, y, &s, p));
                sepsets.insert(key(x, y), s);
            }
        }
        level += 1;
    }
    let pdag = orient(ctx, &adj, &sepsets, &mut trace);
    Ok(finalize(ctx, Algorithm::PcStable, pdag, trace, stats))
}

/// Interleaved grow/shrink search for the Markov blanket of `t`.
pub(crate) fn markov_blanket(ctx: &Context<'_>, t: usize) -> Vec<usize> {
    let mut mb: Vec<usize> = Vec::new();
    let cap = 4 * ctx.n() + 16;
    for _ in 0..cap {
        let cands: Vec<usize> = ctx.order.iter().copied().filter(|&x| x != t && !mb.contains(&x)).collect();
        let results = ctx.cfg.exec.map(&cands, |&x| ctx.test(t, x, &mb));
        let mut added = None;
        let best = cands.iter().zip(&results).min_by(|(_, a), (_, b)| {
            a.p_value.total_cmp(&b.p_value).then(b.statistic.total_cmp(&a.statistic))
        });
        if let Some((&x, r)) = best {
            if !r.independent {
                mb.push(x);
                ctx.sort_by_name(&mut mb);
                added = Some(x);
            }
        }
        let mut removed = Vec::new();
        for &y in &mb.clone() {
            let rest: Vec<usize> = mb.iter().copied().filter(|&v| v != y).collect();
            if ctx.test(t, y, &rest).independent {
                mb.retain(|&v| v != y);
                removed.push(y);
            }
        }
        if added.is_none() && removed.is_empty() {
            break;
        }
        if added.is_some_and(|x| removed.contains(&x)) {
            break;
        }
    }
    mb
}

pub(crate) fn learn_inter_iamb(ctx: &Context<'_>) -> Result<LearnResult> {
    let n = ctx.n();
    let nodes: Vec<usize> = (0..n).collect();
    let blankets = ctx.cfg.exec.map(&nodes, |&t| markov_blanket(ctx, t));
    let mut member = vec![vec![false; n]; n];
    for (t, mb) in blankets.iter().enumerate() {
        for &x in mb {
            member[t][x] = true;
        }
    }
    let mut sym = vec![vec![false; n]; n];
    for a in 0..n {
        for b in 0..n {
            sym[a][b] = a != b
                && ((member[a][b] && member[b][a]) || ctx.cons.pair_required(a, b))
                && !ctx.cons.both_forbidden(a, b);
        }
    }

    let mut trace = Vec::new();
    let stats = LearnStats { iterations: 1, ..Default::default() };
    let pairs = ordered_pairs(ctx, &sym);
    let max_sx = ctx.cfg.max_sx();
    let found = ctx.cfg.exec.map(&pairs, |&(x, y)| {
        if ctx.cons.pair_required(x, y) {
            return None;
        }
        let px: Vec<usize> = sorted_neighbors(ctx, &sym, x).into_iter().filter(|&v| v != y).collect();
        let py: Vec<usize> = sorted_neighbors(ctx, &sym, y).into_iter().filter(|&v| v != x).collect();
        let pool = if py.len() < px.len() { py } else { px };
        find_sepset(ctx, x, y, &pool, 0..=max_sx)
    });
    let mut adj = sym.clone();
    let mut sepsets = Sepsets::new();
    for (&(x, y), hit) in pairs.iter().zip(found) {
        if let Some((s, p)) = hit {
            adj[x][y] = false;
            adj[y][x] = false;
            trace.push(removal(ctx, x, y, &s, p));
            sepsets.insert(key(x, y), s);
        }
    }
    let pdag = orient(ctx, &adj, &sepsets, &mut trace);
    let mut out = finalize(ctx, Algorithm::InterIamb, pdag, trace, stats);
    out.candidate_sets = Some(blankets.iter().map(|mb| ctx.names(mb)).collect());
    Ok(out)
}

/// Orients a skeleton: required edges, then v-structures (first found wins),
/// then edges with one forbidden direction, then the Meek rules.
pub(crate) fn orient(ctx: &Context<'_>, adj: &[Vec<bool>], sepsets: &Sepsets, trace: &mut Vec<TraceEntry>) -> Pdag {
    let cons = ctx.cons;
    let mut p = Pdag::new(ctx.data.names()).expect("dataset names are unique");
    for (x, y) in ordered_pairs(ctx, adj) {
        p.set_undirected(x, y).expect("valid indices");
    }
    for &(a, b) in cons.required_edges() {
        p.set_directed(a, b).expect("valid indices");
    }
    let oriented = |trace: &mut Vec<TraceEntry>, a: usize, b: usize, rule: &str| {
        trace.push(TraceEntry::Oriented { from: ctx.name(a).to_string(), to: ctx.name(b).to_string(), rule: rule.into() });
    };

    for &c in &ctx.order {
        let nb = sorted_neighbors(ctx, adj, c);
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if adj[a][b] {
                    continue;
                }
                let Some(s) = sepsets.get(&key(a, b)) else { continue };
                if s.contains(&c) {
                    continue;
                }
                for x in [a, b] {
                    if p.has_undirected(x, c) {
                        if cons.is_forbidden(x, c) {
                            trace.push(TraceEntry::Conflict {
                                detail: format!(
                                    "v-structure {} -> {} <- {} needs forbidden {} -> {}",
                                    ctx.name(a), ctx.name(c), ctx.name(b), ctx.name(x), ctx.name(c)
                                ),
                            });
                        } else {
                            p.orient(x, c);
                            oriented(trace, x, c, "v-structure");
                        }
                    } else if p.has_directed(c, x) {
                        trace.push(TraceEntry::Conflict {
                            detail: format!(
                                "v-structure {} -> {} <- {} contradicts {} -> {}",
                                ctx.name(a), ctx.name(c), ctx.name(b), ctx.name(c), ctx.name(x)
                            ),
                        });
                    }
                }
            }
        }
    }

    let undirected: Vec<(usize, usize)> = p.undirected_edges().iter().copied().collect();
    for (a, b) in undirected {
        match (cons.is_forbidden(a, b), cons.is_forbidden(b, a)) {
            (true, false) => {
                p.orient(b, a);
                oriented(trace, b, a, "knowledge");
            }
            (false, true) => {
                p.orient(a, b);
                oriented(trace, a, b, "knowledge");
            }
            _ => {}
        }
    }
    apply_meek_rules(&mut p, &|a, b| !cons.is_forbidden(a, b));
    p
}
