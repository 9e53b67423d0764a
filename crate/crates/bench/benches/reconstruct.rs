use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mpms_bench::desk_scene;
use mpms_core::{reconstruct_pipeline, Method, RmaParams};

fn migration(c: &mut Criterion) {
    let mut g = c.benchmark_group("rma_compensated");
    for n in [32, 64] {
        let (echo, grid) = desk_scene(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| reconstruct_pipeline(&echo, &grid, &RmaParams::default(), Method::RmaCompensated).unwrap())
        });
    }
    g.finish();
}

fn backprojection(c: &mut Criterion) {
    let mut g = c.benchmark_group("bpa");
    g.sample_size(10);
    let (echo, grid) = desk_scene(32);
    g.bench_function("32", |b| {
        b.iter(|| reconstruct_pipeline(&echo, &grid, &RmaParams::default(), Method::Bpa).unwrap())
    });
    g.finish();
}

criterion_group!(benches, migration, backprojection);
criterion_main!(benches);
