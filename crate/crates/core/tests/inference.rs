use causalbn::cbn::{effect_report, fit, DiscreteBayesNet, Query};
use causalbn::par::Exec;
use causalbn::synth::random_net;

/// Every full assignment of the network, last node fastest.
fn assignments(net: &DiscreteBayesNet) -> Vec<Vec<u16>> {
    let cards: Vec<usize> = net.variables().iter().map(|v| v.cardinality()).collect();
    let total: usize = cards.iter().product();
    (0..total)
        .map(|mut j| {
            let mut a = vec![0u16; cards.len()];
            for k in (0..cards.len()).rev() {
                a[k] = (j % cards[k]) as u16;
                j /= cards[k];
            }
            a
        })
        .collect()
}

fn brute_posterior(net: &DiscreteBayesNet, t: usize, s: u16, ev: &[(usize, u16)]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for a in assignments(net) {
        if ev.iter().all(|&(v, x)| a[v] == x) {
            let p = net.joint(&a);
            den += p;
            if a[t] == s {
                num += p;
            }
        }
    }
    num / den
}

/// Truncated factorisation: drop the intervened node's factor and clamp it.
fn brute_do(net: &DiscreteBayesNet, t: usize, s: u16, x: usize, xs: u16) -> f64 {
    let mut num = 0.0;
    for a in assignments(net) {
        if a[x] != xs || a[t] != s {
            continue;
        }
        num += (0..net.node_count()).filter(|&v| v != x).map(|v| net.cpt(v).prob(a[v], &a)).product::<f64>();
    }
    num
}

#[test]
fn elimination_matches_enumeration() {
    for seed in 0..25 {
        let net = random_net(5, 3, &[2, 3, 2, 2, 2], seed).unwrap();
        let names = net.names().to_vec();
        for t in 0..5 {
            let ev_var = (t + 2) % 5;
            for s in 0..net.variable(ev_var).cardinality() as u16 {
                let got = net.posterior(t, &[(ev_var, s)]).unwrap();
                for (state, &p) in got.iter().enumerate() {
                    let want = brute_posterior(&net, t, state as u16, &[(ev_var, s)]);
                    assert!((p - want).abs() < 1e-9, "seed {seed} {}: {p} vs {want}", names[t]);
                }
                assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn intervention_matches_truncated_factorisation() {
    for seed in 0..25 {
        let net = random_net(5, 2, &[2], 50 + seed).unwrap();
        let names = net.names().to_vec();
        for (t, x) in [(0, 1), (4, 2), (3, 0)] {
            let q = Query::new(&names[t], "1").doing(&names[x], "1");
            let got = net.intervene(&q).unwrap();
            let want = brute_do(&net, t, 1, x, 1);
            assert!((got - want).abs() < 1e-9, "seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn effect_without_directed_path_is_zero() {
    let net = random_net(4, 2, &[2], 77).unwrap();
    let dag = net.dag();
    for x in 0..4 {
        for t in 0..4 {
            if x != t && !dag.has_path(x, t) {
                let r = effect_report(&net, &net.names()[x], &net.names()[t]).unwrap();
                assert!(r.absolute.abs() < 1e-12);
            }
        }
    }
}

#[test]
fn fit_recovers_sampled_parameters() {
    let net = random_net(4, 2, &[2], 5).unwrap();
    let d = net.sample(100_000, 9, Exec::Parallel).unwrap();
    let refit = fit(net.dag(), &d, 0.0).unwrap();
    let all = assignments(&net);
    for v in 0..4 {
        let (a, b) = (net.cpt(v), refit.cpt(v));
        let mut support = vec![0.0; a.row_count()];
        for x in &all {
            support[a.config_of(x)] += net.joint(x);
        }
        for j in 0..a.row_count() {
            // rare parent configurations carry little data
            if support[j] < 0.05 {
                continue;
            }
            for (x, y) in a.row(j).iter().zip(b.row(j)) {
                assert!((x - y).abs() < 0.02, "node {v} row {j}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn network_json_round_trip_preserves_queries() {
    let net = random_net(6, 3, &[3], 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    net.save(&path).unwrap();
    let back = DiscreteBayesNet::load(&path).unwrap();
    assert_eq!(back.dag(), net.dag());
    assert_eq!(back.variables(), net.variables());
    for v in 0..net.node_count() {
        let (a, b) = (net.cpt(v), back.cpt(v));
        assert_eq!(a.parents(), b.parents());
        for j in 0..a.row_count() {
            for (x, y) in a.row(j).iter().zip(b.row(j)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
    let q = net.posterior(0, &[(5, 1)]).unwrap();
    let r = back.posterior(0, &[(5, 1)]).unwrap();
    assert!(q.iter().zip(&r).all(|(x, y)| (x - y).abs() < 1e-12));
}
