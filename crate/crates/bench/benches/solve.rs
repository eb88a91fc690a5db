use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use scvx_bench::{planar, table1, with_guess};
use scvx_core::{
    build, infeasible_initialization, project_and_convexify, scvx_fast, solve, ClarabelBackend, ConvexifyOptions,
    PenaltyObjective, SolverConfig,
};

fn full_solves(c: &mut Criterion) {
    let mut group = c.benchmark_group("scvx_fast");
    group.sample_size(10);
    for (name, params) in [("table1", table1()), ("planar", planar())] {
        let (problem, z0) = with_guess(&params);
        let config = SolverConfig::default();
        group.bench_function(name, |b| b.iter(|| scvx_fast(&problem, black_box(&z0), &config).unwrap()));
    }
    group.finish();
}

fn pieces(c: &mut Criterion) {
    let (problem, z0) = with_guess(&table1());
    let options = ConvexifyOptions::default();
    let backend = ClarabelBackend::default();
    c.bench_function("initialization/table1", |b| {
        b.iter(|| infeasible_initialization(black_box(&z0), &problem, &options, &backend).unwrap())
    });

    let z = infeasible_initialization(&z0, &problem, &options, &backend).unwrap().z;
    let region = project_and_convexify(&z, &problem, &options).unwrap();
    let objective = PenaltyObjective::default_for(&problem, 0.0).unwrap();
    let program = build(&objective, &region, &problem).unwrap();
    c.bench_function("subproblem/table1", |b| b.iter(|| solve(black_box(&program), &backend).unwrap()));
}

criterion_group!(benches, full_solves, pieces);
criterion_main!(benches);
