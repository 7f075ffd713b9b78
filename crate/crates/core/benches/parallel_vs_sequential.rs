use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use kernelbound::coefficients::Variant;
use kernelbound::par::Exec;
use kernelbound::presets;
use kernelbound::solver::{assemble, kernel_columns, GridSpec, Propagator};

fn kernel_batch(c: &mut Criterion) {
    let spec = presets::polynomial_example().operator();
    let grid = GridSpec::new(1, 8.0, 1.0 / 32.0).unwrap();
    let op = assemble(&spec, Variant::P, &grid).unwrap();
    let prop = Propagator::new(&op, 1.0, 1.0 / 128.0, &[0.25, 0.5]).unwrap();
    let sources: Vec<(usize, usize)> = (-8..=8)
        .flat_map(|i| {
            let node = grid.node_at(&[i as f64 / 4.0]).unwrap();
            [(node, 0), (node, 1)]
        })
        .collect();
    let mut group = c.benchmark_group("parallel_vs_sequential");
    group.sample_size(10);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        group.bench_with_input(BenchmarkId::new("kernel_columns", name), &exec, |b, &exec| {
            b.iter(|| kernel_columns(&prop, &sources, 2.0 * grid.mesh, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kernel_batch);
criterion_main!(benches);
