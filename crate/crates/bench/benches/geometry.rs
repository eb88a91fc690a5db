use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;

use scvx_bench::{table1, v, with_guess};
use scvx_core::{
    infeasible_initialization, mvee_cover, project_and_convexify, ClarabelBackend, ConvexSet, ConvexifyOptions,
    Ellipsoid,
};

fn projections(c: &mut Criterion) {
    let rotated = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 4.0]);
    let ellipsoid = ConvexSet::Ellipsoid(Ellipsoid::from_center_matrix(&v(&[0.0, 0.0, 0.0]), &rotated).unwrap());
    let cube = ConvexSet::aabb(&v(&[-1.0, -1.0, -1.0]), &v(&[1.0, 1.0, 1.0])).unwrap();
    let outside = v(&[1.7, -2.2, 0.9]);
    let inside = v(&[0.1, 0.2, -0.1]);

    c.bench_function("project/ellipsoid_3d", |b| b.iter(|| ellipsoid.project(black_box(&outside)).unwrap()));
    c.bench_function("project/box_3d", |b| b.iter(|| cube.project(black_box(&outside)).unwrap()));
    c.bench_function("nearest_boundary/ellipsoid_inside", |b| {
        b.iter(|| ellipsoid.nearest_boundary(black_box(&inside)).unwrap())
    });
}

fn covers(c: &mut Criterion) {
    let obstacles = table1().obstacles;
    let pair = [obstacles[0].clone(), obstacles[1].clone()];
    c.bench_function("mvee/ellipsoid_and_box", |b| b.iter(|| mvee_cover(black_box(&pair)).unwrap()));
}

fn regions(c: &mut Criterion) {
    let (problem, z0) = with_guess(&table1());
    let options = ConvexifyOptions::default();
    let z = infeasible_initialization(&z0, &problem, &options, &ClarabelBackend::default()).unwrap().z;
    c.bench_function("convexify/table1", |b| {
        b.iter(|| project_and_convexify(black_box(&z), &problem, &options).unwrap())
    });
}

criterion_group!(benches, projections, covers, regions);
criterion_main!(benches);
