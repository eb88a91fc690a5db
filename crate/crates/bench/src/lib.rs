//! Problems shared by the benchmarks in `benches/`.

use nalgebra::DVector;

use scvx_core::{ConvexSet, Ellipsoid, MultirotorParams, ProblemDefinition, StackedVariable};

pub fn v(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}

fn ellipsoid(center: &[f64], semi_axes: &[f64]) -> ConvexSet {
    ConvexSet::Ellipsoid(Ellipsoid::axis_aligned(&v(center), &v(semi_axes)).unwrap())
}

/// The bundled 3-D scenario: 20 steps over 15 s with five tall keep-out sets.
pub fn table1() -> MultirotorParams {
    MultirotorParams {
        horizon: 20,
        final_time: 15.0,
        max_speed: Some(2.0),
        max_control: Some(13.33),
        cone_half_angle: Some(30f64.to_radians()),
        cone_axis: v(&[0.0, 0.0, 1.0]),
        gravity: v(&[0.0, 0.0, -9.81]),
        initial_position: v(&[-2.0, 6.0, 0.0]),
        initial_velocity: v(&[0.0, 0.0, 0.0]),
        final_position: v(&[6.0, 2.0, 0.5]),
        final_velocity: v(&[0.0, 0.0, 0.0]),
        obstacles: vec![
            ellipsoid(&[1.0, 5.6, 0.0], &[1.2, 1.0, 20.0]),
            ConvexSet::aabb(&v(&[0.4, 6.4, -20.0]), &v(&[1.6, 7.2, 20.0])).unwrap(),
            ellipsoid(&[1.6, 2.8, 0.0], &[1.0, 1.1, 20.0]),
            ellipsoid(&[3.9, 3.6, 0.0], &[0.8, 0.6, 20.0]),
            ConvexSet::aabb(&v(&[4.1, 1.2, -20.0]), &v(&[5.0, 3.0, 20.0])).unwrap(),
        ],
    }
}

/// The bundled planar scenario: a ball and an ellipse across a 10 m transfer.
pub fn planar() -> MultirotorParams {
    MultirotorParams {
        horizon: 25,
        final_time: 12.0,
        max_speed: Some(2.0),
        max_control: Some(3.0),
        cone_half_angle: None,
        cone_axis: v(&[0.0, 1.0]),
        gravity: v(&[0.0, 0.0]),
        initial_position: v(&[0.0, 0.0]),
        initial_velocity: v(&[0.0, 0.0]),
        final_position: v(&[10.0, 0.0]),
        final_velocity: v(&[0.0, 0.0]),
        obstacles: vec![ConvexSet::ball(v(&[3.0, 0.55]), 1.0).unwrap(), ellipsoid(&[7.0, -0.6], &[1.2, 0.9])],
    }
}

/// The problem and its straight-line guess.
pub fn with_guess(params: &MultirotorParams) -> (ProblemDefinition, StackedVariable) {
    let problem = params.build().unwrap();
    let z0 = params.straight_line_guess(&problem);
    (problem, z0)
}
