use nalgebra::DVector;

use super::*;
use crate::geometry::ConvexSet;

fn v(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}

fn planar(horizon: usize, obstacles: Vec<ConvexSet>) -> Result<ProblemDefinition, ProblemError> {
    let dynamics = discretize_double_integrator(0.5, 2)?;
    let boundary = BoundaryConditions { initial: v(&[0.0, 0.0, 0.0, 0.0]), terminal: v(&[4.0, 0.0, 0.0, 0.0]) };
    ProblemDefinition::builder(horizon, dynamics, boundary)
        .obstacles(obstacles)
        .state_set(AdmissibleSet::new(vec![SetConstraint::NormBall { components: vec![2, 3], radius: 3.0 }]))
        .control_set(AdmissibleSet::new(vec![SetConstraint::NormBall { components: vec![0, 1], radius: 5.0 }]))
        .time_step(0.5)
        .build()
}

#[test]
fn builder_defaults_obstacle_coordinates_to_leading_components() {
    let ball = ConvexSet::ball(v(&[2.0, 0.0]), 0.5).unwrap();
    let problem = planar(5, vec![ball]).unwrap();
    assert_eq!(problem.obstacle_coordinates(), &[0, 1]);
    assert_eq!(problem.layout().len(), 4 * 5 + 2 * 4);
    assert_eq!(problem.free_steps(), 1..4);
}

#[test]
fn endpoint_inside_obstacle_rejected() {
    let ball = ConvexSet::ball(v(&[4.0, 0.2]), 0.5).unwrap();
    match planar(5, vec![ball]) {
        Err(ProblemError::EndpointInsideObstacle { endpoint, obstacle, .. }) => {
            assert_eq!((endpoint, obstacle), ("terminal", 0));
        }
        other => panic!("expected endpoint error, got {other:?}"),
    }
}

#[test]
fn unbounded_and_misdimensioned_obstacles_rejected() {
    let half = ConvexSet::halfspace(v(&[0.0, 1.0]), -5.0).unwrap();
    assert!(matches!(planar(5, vec![half]), Err(ProblemError::Invalid(_))));
    let ball3 = ConvexSet::ball(v(&[2.0, 0.0, 0.0]), 0.5).unwrap();
    let ball2 = ConvexSet::ball(v(&[2.0, 0.0]), 0.5).unwrap();
    assert!(matches!(planar(5, vec![ball2, ball3]), Err(ProblemError::DimensionMismatch { index: 1, .. })));
}

#[test]
fn set_constraint_violation() {
    let ball = SetConstraint::NormBall { components: vec![0, 1], radius: 1.0 };
    assert_eq!(ball.violation(&[0.6, 0.8, 100.0]), 0.0);
    assert!((ball.violation(&[3.0, 4.0, 0.0]) - 4.0).abs() < 1e-15);

    let cone =
        SetConstraint::Cone { components: vec![0, 1, 2], axis: vec![0.0, 0.0, 1.0], half_angle: 30f64.to_radians() };
    assert_eq!(cone.violation(&[0.0, 0.0, 1.0]), 0.0);
    assert!(cone.violation(&[1.0, 0.0, 1.0]) > 0.0);
    assert_eq!(cone.violation(&[0.4, 0.0, 1.0]), 0.0);

    let bounds = SetConstraint::Bounds { component: 1, lower: -1.0, upper: 2.0 };
    assert_eq!(bounds.violation(&[9.0, 0.0]), 0.0);
    assert_eq!(bounds.violation(&[9.0, 3.0]), 1.0);
}

#[test]
fn set_constraints_validated() {
    let dynamics = discretize_double_integrator(1.0, 1).unwrap();
    let boundary = BoundaryConditions { initial: v(&[0.0, 0.0]), terminal: v(&[1.0, 0.0]) };
    let bad = ProblemDefinition::builder(3, dynamics.clone(), boundary.clone())
        .control_set(AdmissibleSet::new(vec![SetConstraint::NormBall { components: vec![3], radius: 1.0 }]))
        .build();
    assert!(matches!(bad, Err(ProblemError::Invalid(_))));
    let cone = ProblemDefinition::builder(3, dynamics, boundary)
        .state_set(AdmissibleSet::new(vec![SetConstraint::Cone {
            components: vec![0, 1],
            axis: vec![0.0, 2.0],
            half_angle: 0.5,
        }]))
        .build()
        .unwrap();
    // Axes are normalized on build.
    match &cone.state_sets()[0].constraints[0] {
        SetConstraint::Cone { axis, .. } => assert_eq!(axis, &vec![0.0, 1.0]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn constraint_stack_rows_and_gradients() {
    let ball = ConvexSet::ball(v(&[2.0, 1.0]), 0.5).unwrap();
    let problem = planar(3, vec![ball.clone()]).unwrap();
    let stack_view = ConstraintStack::new(&problem);
    // M = sT + n(T−1) = 1·3 + 4·2.
    assert_eq!(stack_view.len(), 11);

    let states = vec![v(&[0.0, 0.0, 0.0, 0.0]), v(&[2.0, 0.0, 1.0, 0.0]), v(&[4.0, 0.0, 0.0, 0.0])];
    let controls = vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0])];
    let y = stack(&states, &controls).unwrap();
    let h = stack_view.h(&y).unwrap();
    assert!((h[1] - 0.5).abs() < 1e-15);
    let q = stack_view.q(&y).unwrap();
    assert_eq!(q.len(), 11);

    // Obstacle row of step 1 depends only on the position block of x_2.
    let grad = stack_view.row_gradient(8 + 1, &y).unwrap();
    let layout = problem.layout();
    assert!((grad[layout.state_index(1, 1)] + 1.0).abs() < 1e-15);
    assert_eq!(grad.iter().filter(|g| **g != 0.0).count(), 1);

    // Dynamics row gradients against central differences.
    let g0 = stack_view.g(&y).unwrap();
    for row in 0..8 {
        let grad = stack_view.row_gradient(row, &y).unwrap();
        for k in 0..layout.len() {
            let mut yp = y.as_vector().clone();
            yp[k] += 1e-6;
            let gp = stack_view.g(&StackedVariable::new(*layout, yp).unwrap()).unwrap();
            let fd = (gp[row] - g0[row]) / 1e-6;
            assert!((fd - grad[k]).abs() < 1e-6, "row {row} var {k}: {fd} vs {}", grad[k]);
        }
    }
}

#[test]
fn penalty_modes() {
    let problem = planar(3, vec![]).unwrap();
    let states = vec![v(&[0.0, 0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0, 0.0]), v(&[4.0, 0.0, 0.0, 0.0])];
    let controls = vec![v(&[3.0, 4.0]), v(&[0.0, 0.0])];
    let y = stack(&states, &controls).unwrap();
    let hard = PenaltyObjective::default_for(&problem, 0.0).unwrap();
    assert_eq!(hard.mode(), PenaltyMode::HardEquality);
    assert_eq!(evaluate_penalty(&y, &problem, &hard).unwrap(), 5.0);

    let defect = dynamics_defect(&y, &problem).unwrap();
    let l1: f64 = defect.iter().map(|g| g.abs()).sum();
    assert!(l1 > 0.0);
    let soft = PenaltyObjective::penalized(2.0).unwrap();
    assert!((evaluate_penalty(&y, &problem, &soft).unwrap() - (5.0 + 2.0 * l1)).abs() < 1e-12);
    assert!(PenaltyObjective::penalized(-1.0).is_err());
}

#[test]
fn domain_violation_counts_pins() {
    let problem = planar(3, vec![]).unwrap();
    let states = vec![v(&[0.0, 0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0, 0.0]), v(&[4.0, 0.5, 0.0, 0.0])];
    let controls = vec![v(&[0.0, 0.0]), v(&[0.0, 0.0])];
    let y = stack(&states, &controls).unwrap();
    assert_eq!(problem.domain_violation(&y), 0.5);
}
