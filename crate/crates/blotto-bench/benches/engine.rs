use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use blotto_bench::{random_pool, random_records};
use blotto_core::analysis::best_response::best_response_expected_states;
use blotto_core::analysis::regression::{fit_performance_regression, HcType};
use blotto_core::{compute_standings, resolve_match, run_round_robin, validate_allocation};

fn bench_resolve_match(c: &mut Criterion) {
    let a = validate_allocation(&[4, 13, 3, 17, 21, 3, 21, 5, 13]).unwrap();
    let b = validate_allocation(&[12, 11, 11, 11, 11, 11, 11, 11, 11]).unwrap();
    c.bench_function("resolve_match", |bench| {
        bench.iter(|| resolve_match(black_box(&a), black_box(&b)))
    });
}

fn bench_round_robin(c: &mut Criterion) {
    let pool = random_pool(207, 17);
    let mut group = c.benchmark_group("round_robin");
    group.sample_size(20);
    group.bench_function("207_strategies", |bench| {
        bench.iter(|| run_round_robin(black_box(&pool)).unwrap())
    });
    group.bench_function("207_standings", |bench| {
        bench.iter(|| compute_standings(black_box(&pool)).unwrap())
    });
    group.finish();
}

fn bench_best_response(c: &mut Criterion) {
    let allocations: Vec<_> = random_pool(100, 23)
        .into_iter()
        .map(|s| s.allocation)
        .collect();
    c.bench_function("best_response_100_pool", |bench| {
        bench.iter(|| best_response_expected_states(black_box(&allocations)).unwrap())
    });
}

fn bench_regression(c: &mut Criterion) {
    let records = random_records(205, 31);
    c.bench_function("ols_hc1_205_records", |bench| {
        bench.iter(|| fit_performance_regression(black_box(&records), HcType::Hc1).unwrap())
    });
}

criterion_group!(
    benches,
    bench_resolve_match,
    bench_round_robin,
    bench_best_response,
    bench_regression
);
criterion_main!(benches);
