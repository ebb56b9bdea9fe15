use std::collections::BTreeSet;

use causalbn::graph::consistent_extension;
use causalbn::knowledge::KnowledgeConstraints;
use causalbn::learners::{learn, Algorithm, LearnerConfig, TraceEntry};
use causalbn::par::Exec;
use causalbn::scoring::{bic, BicScorer};
use causalbn::synth::random_net;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn skeleton_names(g: &causalbn::graph::Dag) -> BTreeSet<(String, String)> {
    g.edge_names().into_iter().map(|(a, b)| if a < b { (a, b) } else { (b, a) }).collect()
}

#[test]
fn every_learner_respects_constraints() {
    let net = random_net(7, 2, &[2], 11).unwrap();
    let d = net.sample(3000, 5, Exec::Parallel).unwrap();
    let mut k = KnowledgeConstraints::default();
    // pick constraints against whatever the data suggest
    let edges = net.dag().edge_names();
    let (a, b) = edges[0].clone();
    k.require(&b, &a);
    k.forbid(&edges[1].0, &edges[1].1);
    k.forbid(&edges[1].1, &edges[1].0);
    k.forbid("X1", "X2");
    for alg in Algorithm::ALL {
        let r = learn(&d, &LearnerConfig::new(alg), &k).unwrap();
        let e = r.dag.edge_names();
        assert!(e.contains(&(b.clone(), a.clone())), "{alg}: required edge missing");
        assert!(!r.dag.adjacent(d.index_of(&edges[1].0).unwrap(), d.index_of(&edges[1].1).unwrap()), "{alg}");
        assert!(!e.contains(&("X1".into(), "X2".into())), "{alg}");
        assert_eq!(r.dag.names(), d.names().as_slice());
        // a DAG by construction; double-check through topological order
        assert_eq!(r.dag.topological_order().len(), 7);
    }
}

#[test]
fn bic_is_score_equivalent() {
    for seed in 0..10 {
        let net = random_net(5, 3, &[2, 3, 2, 2, 3], seed).unwrap();
        let d = net.sample(500, seed, Exec::Sequential).unwrap();
        let g = net.dag();
        let other = consistent_extension(&g.to_cpdag()).dag;
        assert!((bic(g, &d).unwrap() - bic(&other, &d).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn hill_climbing_improves_monotonically_and_tabu_dominates() {
    for seed in 0..4 {
        let net = random_net(8, 2, &[2], 100 + seed).unwrap();
        let d = net.sample(5000, seed, Exec::Parallel).unwrap();
        let k = KnowledgeConstraints::default();
        let hc = learn(&d, &LearnerConfig::new(Algorithm::Hc), &k).unwrap();
        let tabu = learn(&d, &LearnerConfig::new(Algorithm::Tabu), &k).unwrap();
        let scores: Vec<f64> = hc
            .trace
            .iter()
            .filter_map(|t| if let TraceEntry::Move { score, .. } = t { Some(*score) } else { None })
            .collect();
        assert!(scores.windows(2).all(|w| w[1] > w[0]));
        let scorer = BicScorer::new(&d).unwrap();
        assert!(scorer.score(&tabu.dag) >= scorer.score(&hc.dag) - 1e-9);
    }
}

#[test]
fn restarts_never_hurt() {
    let net = random_net(8, 3, &[2], 3).unwrap();
    let d = net.sample(2000, 1, Exec::Parallel).unwrap();
    let k = KnowledgeConstraints::default();
    let plain = learn(&d, &LearnerConfig::new(Algorithm::Hc), &k).unwrap();
    let cfg = LearnerConfig { restarts: 3, seed: 9, ..LearnerConfig::new(Algorithm::Hc) };
    let restarted = learn(&d, &cfg, &k).unwrap();
    assert!(bic(&restarted.dag, &d).unwrap() >= bic(&plain.dag, &d).unwrap() - 1e-9);
    assert_eq!(restarted.trace.iter().filter(|t| matches!(t, TraceEntry::Restart { .. })).count(), 3);
}

#[test]
fn pc_stable_ignores_column_order() {
    let net = random_net(8, 2, &[2], 21).unwrap();
    let d = net.sample(4000, 2, Exec::Parallel).unwrap();
    let k = KnowledgeConstraints::default();
    let base = skeleton_names(&learn(&d, &LearnerConfig::new(Algorithm::PcStable), &k).unwrap().dag);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..3 {
        let mut perm: Vec<usize> = (0..d.n_vars()).collect();
        perm.shuffle(&mut rng);
        let shuffled = d.select_columns(&perm);
        let r = learn(&shuffled, &LearnerConfig::new(Algorithm::PcStable), &k).unwrap();
        assert_eq!(skeleton_names(&r.dag), base);
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let net = random_net(7, 2, &[2], 8).unwrap();
    let d = net.sample(3000, 3, Exec::Parallel).unwrap();
    let k = KnowledgeConstraints::default();
    for alg in Algorithm::ALL {
        let par = learn(&d, &LearnerConfig { exec: Exec::Parallel, ..LearnerConfig::new(alg) }, &k).unwrap();
        let seq = learn(&d, &LearnerConfig { exec: Exec::Sequential, ..LearnerConfig::new(alg) }, &k).unwrap();
        assert_eq!(par.dag, seq.dag, "{alg}");
        assert_eq!(par.graph, seq.graph, "{alg}");
    }
}

#[test]
fn missing_data_is_rejected() {
    let vars = vec![causalbn::dataset::Variable::new("A", &["0", "1"]), causalbn::dataset::Variable::new("B", &["0", "1"])];
    let d = causalbn::dataset::CategoricalDataset::from_rows(vars, &[vec!["0", "NA"], vec!["1", "1"]]).unwrap();
    assert!(learn(&d, &LearnerConfig::default(), &KnowledgeConstraints::default()).is_err());
}
