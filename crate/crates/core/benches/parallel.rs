use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use overlap_core::analytics::tp_fisher_information;
use overlap_core::harness::{run_benchmark_with, ExperimentConfig};
use overlap_core::par::Execution;
use overlap_core::strategies::Strategy;
use overlap_core::tomography::{estimate_kappa_seeded, KAPPA_MUB};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn campaign(c: &mut Criterion) {
    let mut group = c.benchmark_group("campaign");
    group.sample_size(10);
    for strategy in [Strategy::Tp, Strategy::Ost] {
        let config = ExperimentConfig {
            strategies: vec![strategy],
            c_grid: vec![0.2, 0.5, 0.8],
            m_pairs: 20,
            n_repeats: 10,
            r_runs: 2,
            ..Default::default()
        };
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, strategy), &config, |b, config| {
                b.iter(|| run_benchmark_with(config, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn fisher(c: &mut Criterion) {
    let mut group = c.benchmark_group("tp_fisher");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| tp_fisher_information(0.5, 900, KAPPA_MUB, 20_000, 0, exec).unwrap())
        });
    }
    group.finish();
}

fn kappa(c: &mut Criterion) {
    let mut group = c.benchmark_group("kappa_fit");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| estimate_kappa_seeded(&[300, 900], 200, 5, 0, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, campaign, fisher, kappa);
criterion_main!(benches);
