use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use plap_bench::{interval, params};
use plap_core::{solve_eigenpair, SolverOptions};

fn solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("solver");
    g.sample_size(10);
    let opts = SolverOptions {
        tol: 1e-8,
        ..Default::default()
    };
    for p in [4.0, 16.0, 64.0] {
        let d = interval(200);
        let prm = params(p);
        g.bench_with_input(BenchmarkId::new("interval_200", p), &prm, |b, prm| {
            b.iter(|| solve_eigenpair(&d, prm, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, solve);
criterion_main!(benches);
