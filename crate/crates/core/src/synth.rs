//! Ground-truth generators: random networks and a sepsis-like scenario
//! built on the knowledge constraints.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::cbn::DiscreteBayesNet;
use crate::dataset::Variable;
use crate::error::{Error, Result};
use crate::graph::{count_fragments, Dag};
use crate::knowledge::{sepsis_constraints, KnowledgeConstraints};

/// Random DAG over `node_count` nodes `X1..Xn`: nodes are visited in a random
/// order and each draws between 0 and `max_parents` parents among earlier
/// ones. CPT rows come from a symmetric Dirichlet(1). `state_counts` holds
/// one cardinality for all nodes or one per node.
pub fn random_net(node_count: usize, max_parents: usize, state_counts: &[usize], seed: u64) -> Result<DiscreteBayesNet> {
    if node_count == 0 {
        return Err(Error::InvalidArgument("node_count must be at least 1".into()));
    }
    if max_parents >= node_count {
        return Err(Error::InvalidArgument(format!("max_parents {max_parents} must be below node_count {node_count}")));
    }
    let cards: Vec<usize> = match state_counts.len() {
        1 => vec![state_counts[0]; node_count],
        l if l == node_count => state_counts.to_vec(),
        l => return Err(Error::InvalidArgument(format!("{l} state counts for {node_count} nodes"))),
    };
    if cards.iter().any(|&c| !(2..=u16::MAX as usize - 1).contains(&c)) {
        return Err(Error::InvalidArgument("every node needs at least two states".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (1..=node_count).map(|i| format!("X{i}")).collect();
    let mut dag = Dag::new(names.clone())?;
    let mut perm: Vec<usize> = (0..node_count).collect();
    perm.shuffle(&mut rng);
    for j in 0..node_count {
        let k = rng.random_range(0..=max_parents.min(j));
        for &p in perm[..j].choose_multiple(&mut rng, k) {
            dag.add_edge(p, perm[j])?;
        }
    }
    let variables: Vec<Variable> = names
        .iter()
        .zip(&cards)
        .map(|(n, &c)| Variable { name: n.clone(), states: (0..c).map(|s| s.to_string()).collect() })
        .collect();
    let tables = (0..node_count)
        .map(|v| {
            let q: usize = dag.parents(v).iter().map(|&p| cards[p]).product();
            (0..q).map(|_| dirichlet_row(&mut rng, cards[v])).collect()
        })
        .collect();
    DiscreteBayesNet::new(dag, variables, tables)
}

fn dirichlet_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1).max(1e-300)).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

pub const SEPSIS: &str = "Sepsis";
pub const INFECTIOUS_AGENTS: &str = "Infectious Agents";
pub const TARGET_PREVALENCE: f64 = 0.0356;

/// Variable roster with state labels.
fn roster() -> Vec<Variable> {
    let bin = |n: &str| Variable::new(n, &["0", "1"]);
    let mut v = vec![
        Variable::new("Age", &["0-17", "18-44", "45-64", "65-79", "80+"]),
        Variable::new("Gender", &["F", "M"]),
        Variable::new("Ethnic Group", &["White", "Asian", "Black", "Mixed", "Other"]),
        Variable::new("Number of diagnoses", &["0-4", "5-9", "10+"]),
        Variable::new("Number of procedures", &["0", "1-2", "3+"]),
    ];
    for n in [
        "White blood cell counts",
        "Glucose",
        "Urinary catheters",
        "Central venous lines",
        "Mechanical ventilation",
        "Fluid resuscitation",
        "Vasoactive drugs",
        "Emergency surgeries",
        "Parenteral nutrition",
        "Low serum albumin level at admission",
        "Abdominal surgery",
        "Coma",
        "Chronic Obstructive Pulmonary Disease",
        "Immunosuppressive disorders",
        "Alcohol dependence",
        "Elevated respiratory rate",
        "Hypotension",
        "Impaired swallow and aspiration",
        "Trauma",
        "Reduced oxygen saturation",
        "Tachycardia",
        "Antibiotics",
        "Elevated lactate level",
        "Myelodysplastic disorders",
        "Cystic fibrosis",
        "Diabetes",
        "Cancer",
        "Anuria",
        "Chronic Kidney Disease Stage 3+",
        INFECTIOUS_AGENTS,
        SEPSIS,
    ] {
        v.push(bin(n));
    }
    v
}

const FILLER_PER_NODE: f64 = 1.5;
const MAX_PARENTS: usize = 4;

/// A 36-variable network shaped like the sepsis study: every required edge
/// of the bundled constraints plus `Infectious Agents -> Sepsis`, filler
/// edges up to about 1.5 edges per node that respect the tiers, a connected
/// skeleton, and a `Sepsis` prevalence of 3.56% checked by exact inference.
pub fn sepsis_scenario(seed: u64) -> Result<(DiscreteBayesNet, KnowledgeConstraints)> {
    let k = sepsis_constraints();
    let variables = roster();
    let names: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();
    let n = names.len();
    let idx = |s: &str| names.iter().position(|x| x == s).expect("roster name");
    let sepsis = idx(SEPSIS);
    let tier1: BTreeSet<usize> = k.tiers[0].variables.iter().map(|s| idx(s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut dag = Dag::new(names.clone())?;
    for (a, b) in &k.required {
        dag.add_edge(idx(a), idx(b))?;
    }
    dag.add_edge(idx(INFECTIOUS_AGENTS), sepsis)?;

    // causal order: tier 1, then a random order of the rest that respects
    // the required edges, with Sepsis last
    let mut rest: Vec<usize> = (0..n).filter(|v| !tier1.contains(v) && *v != sepsis).collect();
    rest.shuffle(&mut rng);
    let mut order: Vec<usize> = tier1.iter().copied().collect();
    let mut placed = vec![false; n];
    for &v in &order {
        placed[v] = true;
    }
    while order.len() < n - 1 {
        let next = *rest
            .iter()
            .find(|&&v| !placed[v] && dag.parents(v).iter().all(|&p| placed[p]))
            .expect("required edges are acyclic");
        placed[next] = true;
        order.push(next);
    }
    order.push(sepsis);
    let mut pos = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }

    let can_join = |dag: &Dag, u: usize, v: usize| {
        pos[u] < pos[v] && !tier1.contains(&v) && v != sepsis && !dag.adjacent(u, v) && dag.parents(v).len() < MAX_PARENTS
    };
    let want = (FILLER_PER_NODE * n as f64).round() as usize;
    let mut guard = 0;
    while dag.edge_count() < want && guard < 100_000 {
        guard += 1;
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if can_join(&dag, u, v) {
            dag.add_edge(u, v)?;
        }
    }
    // join any stray component to the rest
    while count_fragments(&dag.to_pdag()) > 1 {
        let comp = component_of(&dag, order[0]);
        let mut joined = false;
        'outer: for &a in &order {
            for &b in &order {
                let (u, v) = if pos[a] < pos[b] { (a, b) } else { (b, a) };
                if comp[a] != comp[b] && can_join(&dag, u, v) {
                    dag.add_edge(u, v)?;
                    joined = true;
                    break 'outer;
                }
            }
        }
        if !joined {
            return Err(Error::Constraint("could not connect the scenario graph".into()));
        }
    }

    let cards: Vec<usize> = variables.iter().map(|v| v.cardinality()).collect();
    let mut tables: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
    for v in 0..n {
        let parents: Vec<usize> = dag.parents(v).iter().copied().collect();
        let pcards: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
        let rows = if parents.is_empty() {
            vec![root_marginal(&names[v], cards[v], &mut rng)]
        } else {
            let weights: Vec<f64> = parents
                .iter()
                .map(|&p| {
                    let w = rng.random_range(1.4..2.4);
                    let required = k.required.contains(&(names[p].clone(), names[v].clone())) || v == sepsis;
                    if required || rng.random_bool(0.6) {
                        w
                    } else {
                        -w
                    }
                })
                .collect();
            if cards[v] == 2 {
                let push: f64 = weights.iter().filter(|&&w| w > 0.0).sum();
                let intercept = rng.random_range(-2.0..-0.5) - 0.25 * push;
                logistic_rows(&pcards, &weights, intercept)
            } else {
                ordinal_rows(&pcards, &weights, cards[v])
            }
        };
        tables.push(rows);
    }
    let mut net = DiscreteBayesNet::new(dag, variables, tables)?;
    let weights: Vec<f64> = (0..net.cpt(sepsis).parents().len()).map(|_| rng.random_range(1.5..2.5)).collect();
    tune_prevalence(&mut net, sepsis, &weights, TARGET_PREVALENCE)?;
    Ok((net, k))
}

fn component_of(dag: &Dag, start: usize) -> Vec<bool> {
    let mut seen = vec![false; dag.node_count()];
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        if !seen[u] {
            seen[u] = true;
            stack.extend(dag.parents(u).iter().chain(dag.children(u)).copied());
        }
    }
    seen
}

fn root_marginal(name: &str, card: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match name {
        "Age" => vec![0.12, 0.28, 0.25, 0.22, 0.13],
        "Gender" => vec![0.52, 0.48],
        "Ethnic Group" => vec![0.70, 0.12, 0.08, 0.04, 0.06],
        _ if card == 2 => {
            let p = rng.random_range(0.1..0.4);
            vec![1.0 - p, p]
        }
        _ => vec![1.0 / card as f64; card],
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Parent configurations (last parent fastest) as scaled scores in [0, 1].
fn configs(pcards: &[usize]) -> Vec<Vec<f64>> {
    let q: usize = pcards.iter().product();
    (0..q)
        .map(|mut j| {
            let mut x = vec![0.0; pcards.len()];
            for k in (0..pcards.len()).rev() {
                x[k] = (j % pcards[k]) as f64 / (pcards[k] - 1) as f64;
                j /= pcards[k];
            }
            x
        })
        .collect()
}

fn linear(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(a, b)| a * b).sum()
}

fn logistic_rows(pcards: &[usize], weights: &[f64], intercept: f64) -> Vec<Vec<f64>> {
    configs(pcards)
        .iter()
        .map(|x| {
            let p = sigmoid(intercept + linear(x, weights));
            vec![1.0 - p, p]
        })
        .collect()
}

fn ordinal_rows(pcards: &[usize], weights: &[f64], card: usize) -> Vec<Vec<f64>> {
    let shift = 0.5 * weights.iter().sum::<f64>();
    configs(pcards)
        .iter()
        .map(|x| {
            let eta = linear(x, weights) - shift;
            let mut cum: Vec<f64> =
                (0..card - 1).map(|k| sigmoid(1.5 * (k as f64 - (card as f64 - 2.0) / 2.0) - eta)).collect();
            cum.push(1.0);
            let mut row = Vec::with_capacity(card);
            let mut prev = 0.0;
            for c in cum {
                row.push(c - prev);
                prev = c;
            }
            row
        })
        .collect()
}

/// Bisects the intercept of `target`'s logistic CPT until its exact
/// marginal matches `prevalence`.
fn tune_prevalence(net: &mut DiscreteBayesNet, target: usize, weights: &[f64], prevalence: f64) -> Result<()> {
    let pcards: Vec<usize> = net.cpt(target).parents().iter().map(|&p| net.variable(p).cardinality()).collect();
    let (mut lo, mut hi) = (-30.0f64, 10.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        net.set_rows(target, &logistic_rows(&pcards, weights, mid))?;
        let p = net.posterior(target, &[])?[1];
        if p < prevalence {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    net.set_rows(target, &logistic_rows(&pcards, weights, 0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_net_examples() {
        let one = random_net(1, 0, &[3], 1).unwrap();
        assert_eq!(one.cpt(0).row_count(), 1);
        let flat = random_net(6, 0, &[2], 2).unwrap();
        assert_eq!(flat.dag().edge_count(), 0);
        let a = random_net(8, 3, &[2], 9).unwrap();
        assert_eq!(a, random_net(8, 3, &[2], 9).unwrap());
        assert!((0..8).all(|v| a.dag().parents(v).len() <= 3));
        assert!(random_net(3, 3, &[2], 0).is_err());
        assert!(random_net(3, 1, &[2, 2], 0).is_err());
    }

    #[test]
    fn sepsis_scenario_shape() {
        let (net, k) = sepsis_scenario(1).unwrap();
        assert_eq!(net.node_count(), 36);
        let dag = net.dag();
        assert_eq!(k.required.len(), 21);
        for (a, b) in &k.required {
            assert!(dag.has_edge(dag.require_index(a).unwrap(), dag.require_index(b).unwrap()), "{a} -> {b}");
        }
        for t in ["Age", "Gender", "Ethnic Group"] {
            assert!(dag.parents(dag.require_index(t).unwrap()).is_empty());
        }
        let s = dag.require_index(SEPSIS).unwrap();
        assert!(dag.children(s).is_empty());
        assert_eq!(count_fragments(&dag.to_pdag()), 1);
        let p = net.posterior(s, &[]).unwrap()[1];
        assert!((p - TARGET_PREVALENCE).abs() < 1e-6, "{p}");
        assert!(dag.edge_count() >= 50);
        let forbidden = k.expand_tiers(net.names()).unwrap();
        for (a, b) in dag.edge_names() {
            assert!(!forbidden.contains(&(a, b)));
        }
    }
}
