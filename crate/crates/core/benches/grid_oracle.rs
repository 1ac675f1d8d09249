use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use opinion_stackelberg::oracle::{
    dp_grid_oracle, qp_grid_oracle, random_dp_instance, random_qp_instance, GridSpec,
};
use opinion_stackelberg::parallel::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn qp_grid(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let problem = random_qp_instance(&mut rng, 3, 2);
    let grid = GridSpec::unit_box(3, 2e-3).unwrap();
    let mut group = c.benchmark_group("qp_grid_oracle");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| qp_grid_oracle(black_box(&problem), &grid, exec).unwrap())
        });
    }
    group.finish();
}

fn dp_grid(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let inst = random_dp_instance(&mut rng, 2, 2, 2, 2e5);
    let mut group = c.benchmark_group("dp_grid_oracle");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                dp_grid_oracle(
                    &inst.mats,
                    &inst.weights,
                    black_box(&inst.x),
                    inst.k,
                    inst.n,
                    &inst.grid,
                    exec,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, qp_grid, dp_grid);
criterion_main!(benches);
