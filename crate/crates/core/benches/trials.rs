use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use uccsim::csample::{correlated_sample, sharpened_pair, SharedRandomness};
use uccsim::dist::JointDistribution;
use uccsim::exec::Execution;
use uccsim::lowerbound::lowerbound_sweep;
use uccsim::rng::rng_from_seed;
use uccsim::uncertain::{estimate_uncertain_error, generate_instance};

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn uncertain_trials(c: &mut Criterion) {
    let mu = JointDistribution::noisy_hypercube(8, 0.1).unwrap();
    let inst = generate_instance(&mu, 2, 0.0, 0.05, &mut rng_from_seed(1)).unwrap();
    let mut group = c.benchmark_group("uncertain_trials");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new(name, 64), &exec, |b, &exec| {
            b.iter(|| estimate_uncertain_error(&inst, 0.3, 64, 7, exec).unwrap())
        });
    }
    group.finish();
}

fn csample_runs(c: &mut Criterion) {
    let (p, q) = sharpened_pair(64, 3).unwrap();
    let mut group = c.benchmark_group("csample_runs");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new(name, 1000), &exec, |b, &exec| {
            b.iter(|| {
                exec.map(1000, |i| {
                    correlated_sample(&p, &q, 0.05, &SharedRandomness::new(i as u64)).unwrap().agreed()
                })
            })
        });
    }
    group.finish();
}

fn spectral_sweep(c: &mut Criterion) {
    let ps: Vec<f64> = (1..=45).map(|i| i as f64 / 100.0).collect();
    let mut group = c.benchmark_group("lowerbound_sweep");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new(name, ps.len()), &exec, |b, &exec| {
            b.iter(|| lowerbound_sweep(&ps, &[1, 2, 3], 0.1, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, uncertain_trials, csample_runs, spectral_sweep);
criterion_main!(benches);
