use causalbn::knowledge::KnowledgeConstraints;
use causalbn::learners::{learn, Algorithm, LearnerConfig};
use causalbn::par::Exec;
use causalbn::synth::random_net;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn learners(c: &mut Criterion) {
    let net = random_net(20, 3, &[2, 3], 1).unwrap();
    let d = net.sample(20_000, 2, Exec::Parallel).unwrap();
    let k = KnowledgeConstraints::default();
    let mut group = c.benchmark_group("learn");
    group.sample_size(10);
    for alg in [Algorithm::Hc, Algorithm::PcStable, Algorithm::Mmhc] {
        for (label, exec) in MODES {
            let cfg = LearnerConfig { exec, ..LearnerConfig::new(alg) };
            group.bench_with_input(BenchmarkId::new(alg.as_str(), label), &cfg, |b, cfg| {
                b.iter(|| learn(&d, cfg, &k).unwrap())
            });
        }
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let net = random_net(30, 3, &[2], 4).unwrap();
    let mut group = c.benchmark_group("sample");
    group.sample_size(10);
    for (label, exec) in MODES {
        group.bench_function(BenchmarkId::new("100k_rows", label), |b| b.iter(|| net.sample(100_000, 7, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, learners, sampling);
criterion_main!(benches);
