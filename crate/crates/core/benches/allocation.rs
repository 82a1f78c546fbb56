use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mcdmac::allocator::{
    random_problem, solve_bruteforce, solve_dp, solve_dp_with, AllocationProblem, DpOptions,
};
use mcdmac::exec::{self, Execution};

fn batch(n: usize, channels: usize) -> Vec<AllocationProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    (0..n)
        .map(|_| loop {
            let p = random_problem(&mut rng, channels, 4);
            if p.n_channels() == channels {
                break p;
            }
        })
        .collect()
}

fn dp_vs_bruteforce(c: &mut Criterion) {
    let mut g = c.benchmark_group("single_instance");
    for m in [2usize, 4, 6] {
        let p = batch(1, m).pop().unwrap();
        g.bench_with_input(BenchmarkId::new("dp", m), &p, |b, p| {
            b.iter(|| solve_dp(black_box(p)))
        });
        g.bench_with_input(BenchmarkId::new("dp_no_pruning", m), &p, |b, p| {
            let opts = DpOptions {
                ip_dominance: false,
                dp_dominance: false,
                record_stages: false,
            };
            b.iter(|| solve_dp_with(black_box(p), opts))
        });
        g.bench_with_input(BenchmarkId::new("bruteforce", m), &p, |b, p| {
            b.iter(|| solve_bruteforce(black_box(p)).unwrap())
        });
    }
    g.finish();
}

fn batch_execution(c: &mut Criterion) {
    let problems = batch(2000, 6);
    let mut g = c.benchmark_group("batch_2000_dp");
    for (name, e) in [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ] {
        g.bench_function(name, |b| {
            b.iter(|| exec::map_range(e, problems.len(), |i| solve_dp(&problems[i]).total_rate))
        });
    }
    g.finish();
}

criterion_group!(benches, dp_vs_bruteforce, batch_execution);
criterion_main!(benches);
