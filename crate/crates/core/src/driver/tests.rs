use proptest::prelude::*;

use super::*;
use crate::fixtures::*;
use crate::problem::MultirotorParams;

fn run(params: &MultirotorParams, config: &SolverConfig) -> SolveReport {
    let (problem, z0) = with_guess(params);
    scvx_fast(&problem, &z0, config).unwrap()
}

fn assert_monotone_and_feasible(report: &SolveReport) {
    let p = &report.penalty_history;
    for w in p.windows(2) {
        assert!(w[1] <= w[0] + MONOTONE_SLACK * (1.0 + w[0].abs()), "penalty rose: {p:?}");
    }
    for z in &report.iterates {
        assert!(report.problem.min_obstacle_value(z).unwrap() >= -1e-6);
        assert!(report.problem.domain_violation(z) <= 1e-6);
        assert!(dynamics_defect(z, &report.problem).unwrap().amax() <= 1e-6);
    }
}

#[test]
fn obstacle_free_takes_two_subproblems() {
    for params in [planar(vec![]), table1(vec![])] {
        let report = run(&params, &SolverConfig::default());
        assert!(report.converged());
        assert_eq!(report.num_subproblems(), 2);
        assert!(fixed_point_residual(&report).unwrap() <= 1e-6);
    }
}

#[test]
fn obstacle_runs_converge_monotonically() {
    for params in [planar(two_obstacles()), table1(table1_obstacles())] {
        let report = run(&params, &SolverConfig::default());
        assert!(report.converged(), "{:?}", report.failure);
        assert!(report.initialization_used);
        assert!(report.num_subproblems() <= 25);
        assert_monotone_and_feasible(&report);
        assert!(report.iterations.iter().all(|r| r.accepted));
        let epsilon = report.config.epsilon;
        assert!(fixed_point_residual(&report).unwrap() <= 10.0 * epsilon);
    }
}

#[test]
fn obstacles_raise_the_cost() {
    let free = run(&table1(vec![]), &SolverConfig::default());
    let blocked = run(&table1(table1_obstacles()), &SolverConfig::default());
    assert!(blocked.final_penalty() > free.final_penalty() + 1e-3);
}

#[test]
fn table1_rates_are_superlinear() {
    let report = run(&table1(table1_obstacles()), &SolverConfig::default());
    let rates = convergence_rate_diagnostics(&report).unwrap();
    assert!(rates.superlinear_signature, "{:?}", rates.ratios);
}

#[test]
fn runs_are_deterministic() {
    let params = table1(table1_obstacles());
    let a = run(&params, &SolverConfig::default());
    let b = run(&params, &SolverConfig::default());
    assert_eq!(a.iterates, b.iterates);
    assert_eq!(a.penalty_history, b.penalty_history);
}

#[test]
fn residual_is_large_away_from_a_fixed_point() {
    let report = run(&planar(vec![]), &SolverConfig::default());
    let mut z = report.final_iterate().clone();
    for i in report.problem.free_steps() {
        let mut x = z.state_at(i).into_owned();
        x[1] += 0.5;
        z.set_state(i, &x);
    }
    let backend = ClarabelBackend::default();
    let r = residual_at(&z, &report.problem, &report.objective, 0, Selection::NearestMinimizer, &backend).unwrap();
    assert!(r > 100.0 * report.config.epsilon, "residual {r}");
}

#[test]
fn perturbed_guesses_initialize() {
    let params = table1(table1_obstacles());
    let problem = params.build().unwrap();
    let config = SolverConfig { max_iterations: 1, ..SolverConfig::default() };
    for seed in 0..5 {
        let z0 = params.perturbed_guess(&problem, seed);
        assert!(problem.min_obstacle_value(&z0).unwrap() < 0.0);
        let report = scvx_fast(&problem, &z0, &config).unwrap();
        assert!(problem.min_obstacle_value(&report.iterates[0]).unwrap() >= -1e-6);
    }
}

#[test]
fn penalized_mode_reaches_dynamic_feasibility() {
    let config = SolverConfig { mode: Some(PenaltyMode::Penalized), lambda: 10.0, ..SolverConfig::default() };
    for params in [planar(two_obstacles()), table1(table1_obstacles())] {
        let report = run(&params, &config);
        assert!(report.converged(), "{:?}", report.failure);
        assert!(dynamics_defect(report.final_iterate(), &report.problem).unwrap().amax() <= DEFECT_TOL);
    }
}

#[test]
fn escalation_restores_feasibility() {
    let config = SolverConfig {
        mode: Some(PenaltyMode::Penalized),
        lambda: 1.0,
        escalation_rounds: 2,
        ..SolverConfig::default()
    };
    let report = run(&planar(two_obstacles()), &config);
    assert!(report.converged(), "{:?}", report.failure);
    assert!(report.objective.lambda() > 1.0);
    assert!(dynamics_defect(report.final_iterate(), &report.problem).unwrap().amax() <= DEFECT_TOL);
}

#[test]
fn invalid_configs_are_rejected() {
    let (problem, z0) = with_guess(&planar(vec![]));
    for config in [
        SolverConfig { epsilon: 0.0, ..SolverConfig::default() },
        SolverConfig { max_iterations: 0, ..SolverConfig::default() },
        SolverConfig { lambda: -1.0, ..SolverConfig::default() },
    ] {
        assert!(matches!(scvx_fast(&problem, &z0, &config), Err(DriverError::InvalidConfig(_))));
    }
}

#[test]
fn iteration_cap_is_reported() {
    let config = SolverConfig { max_iterations: 1, ..SolverConfig::default() };
    let report = run(&table1(table1_obstacles()), &config);
    assert_eq!(report.termination, TerminationReason::IterationCap);
    assert_eq!(report.num_subproblems(), 1);
}

#[test]
fn rate_table_flags_superlinear_sequences() {
    let linear: Vec<f64> = (0..10).map(|k| 2f64.powi(-k)).collect();
    let table = RateTable::from_errors(linear).unwrap();
    assert!(table.ratios.iter().all(|r| (r - 0.5).abs() < 1e-15));
    assert!(!table.superlinear_signature);

    let superlinear: Vec<f64> = (0..6).map(|k| 2f64.powi(-k * k)).collect();
    let table = RateTable::from_errors(superlinear).unwrap();
    assert!(table.superlinear_signature);
}

#[test]
fn rate_table_needs_three_errors() {
    assert!(matches!(RateTable::from_errors(vec![1.0, 0.5]), Err(DriverError::TooFewIterates { .. })));
}

proptest! {
    #[test]
    fn geometric_errors_are_not_superlinear(m in 1i32..8, n in 3i32..20) {
        let errors: Vec<f64> = (0..n).map(|k| 2f64.powi(-m * k)).collect();
        let table = RateTable::from_errors(errors).unwrap();
        prop_assert!(!table.superlinear_signature);
    }
}
