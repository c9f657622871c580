use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ddimg_core::rank_pooling::{hierarchical_rank_pool, rank_pool, FeatureSequence, HierarchyConfig, RankPoolParams};
use ddimg_core::SolverKind;

fn ramp(k: usize, dim: usize) -> FeatureSequence {
    let rows = (0..k)
        .map(|t| {
            (0..dim)
                .map(|d| ((t * 31 + d * 17) % 97) as f64 / 97.0 + t as f64 * 0.01)
                .collect()
        })
        .collect();
    FeatureSequence::from_rows(rows).unwrap()
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("rank_pool");
    for &k in &[3usize, 6, 12] {
        let x = ramp(k, 576);
        for (name, solver) in [
            ("dual", SolverKind::DualCoordinate),
            ("subgradient", SolverKind::Subgradient),
        ] {
            let params = RankPoolParams {
                solver,
                ..RankPoolParams::default()
            };
            group.bench_with_input(BenchmarkId::new(name, k), &x, |b, x| {
                b.iter(|| rank_pool(black_box(x), &params))
            });
        }
    }
    group.finish();
}

fn hierarchy(c: &mut Criterion) {
    let x = ramp(30, 24 * 24);
    let (config, params) = (HierarchyConfig::default(), RankPoolParams::default());
    c.bench_function("hierarchical_30x576", |b| {
        b.iter(|| hierarchical_rank_pool(black_box(&x), &config, &params))
    });
}

criterion_group!(benches, solvers, hierarchy);
criterion_main!(benches);
