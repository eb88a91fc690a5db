//! The outer loop: initialize if needed, then project, convexify and solve
//! until the subproblem no longer improves the penalty.

mod rates;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convexify::{
    infeasible_initialization, is_feasible, project_and_convexify, ConvexifyError, ConvexifyOptions,
    InitializationOutcome, CONTAINS_TOL,
};
use crate::problem::{
    dynamics_defect, evaluate_penalty, PenaltyMode, PenaltyObjective, ProblemDefinition, ProblemError, StackedVariable,
};
use crate::subproblem::{
    build, nearest_minimizer, solve, ClarabelBackend, SolveStatus, SolverBackend, SubproblemError,
};

pub use rates::{convergence_rate_diagnostics, RateTable};

/// Slack allowed on `P(z⁽ᵏ⁺¹⁾) ≤ P(z⁽ᵏ⁾)` before a step counts as an increase.
pub const MONOTONE_SLACK: f64 = 1e-8;
/// Largest `|g_j|` accepted as dynamically feasible after convergence in
/// penalized mode; above it the penalty weight is escalated.
pub const DEFECT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("initialization failed: {0}")]
    Initialization(#[source] ConvexifyError),
    #[error(transparent)]
    Convexify(#[from] ConvexifyError),
    #[error(transparent)]
    Subproblem(#[from] SubproblemError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("rate diagnostics need at least {needed} iterates, got {found}")]
    TooFewIterates { needed: usize, found: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Clarabel,
}

impl BackendKind {
    pub fn instantiate(self) -> Box<dyn SolverBackend> {
        match self {
            Self::Clarabel => Box::new(ClarabelBackend::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop when a subproblem improves the penalty by less than this.
    pub epsilon: f64,
    /// Cap on the number of subproblems solved.
    pub max_iterations: usize,
    pub lambda: f64,
    /// `None` picks hard equalities for linear dynamics, penalized otherwise.
    pub mode: Option<PenaltyMode>,
    pub seed: u64,
    /// Times `λ` may be multiplied by 10 when a penalized run converges with
    /// a dynamics defect above [`DEFECT_TOL`].
    pub escalation_rounds: usize,
    pub backend: BackendKind,
    pub selection: Selection,
}

/// Which minimizer of a subproblem becomes the next iterate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Whatever the backend returns.
    Backend,
    /// The near-minimizer closest to the current iterate.
    #[default]
    NearestMinimizer,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iterations: 100,
            lambda: 0.0,
            mode: None,
            seed: 0,
            escalation_rounds: 0,
            backend: BackendKind::Clarabel,
            selection: Selection::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(DriverError::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(DriverError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(DriverError::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn objective_for(&self, problem: &ProblemDefinition) -> Result<PenaltyObjective, DriverError> {
        let objective = match self.mode {
            Some(mode) => PenaltyObjective::new(mode, self.lambda)?,
            None => PenaltyObjective::default_for(problem, self.lambda)?,
        };
        objective.check_compatible(problem)?;
        Ok(objective)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Converged,
    IterationCap,
    BackendFailure,
}

impl TerminationReason {
    pub fn name(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::IterationCap => "iteration_cap",
            Self::BackendFailure => "backend_failure",
        }
    }
}

/// One solved subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// `Φ(z⁽ᵏ⁾)`.
    pub subproblem_value: f64,
    pub status: SolveStatus,
    pub backend_iterations: u32,
    pub cuts: usize,
    /// `‖y_opt − z⁽ᵏ⁾‖₂`.
    pub step_norm: f64,
    /// Whether `y_opt` became the next iterate (it is not when it would
    /// raise the penalty).
    pub accepted: bool,
    pub lambda: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub problem: ProblemDefinition,
    pub config: SolverConfig,
    pub objective: PenaltyObjective,
    /// `z⁽⁰⁾, …, z⁽ᵏ*⁾`; `z⁽⁰⁾` is the initialized guess when initialization ran.
    pub iterates: Vec<StackedVariable>,
    /// `P(z⁽ᵏ⁾)`, one entry per iterate, under the `λ` in force when the
    /// iterate was produced.
    pub penalty_history: Vec<f64>,
    /// One entry per subproblem solved; `iterations.len()` SOCPs in total.
    pub iterations: Vec<IterationRecord>,
    pub termination: TerminationReason,
    /// Backend error behind [`TerminationReason::BackendFailure`].
    pub failure: Option<String>,
    pub initialization_used: bool,
    pub initialization: Option<InitializationOutcome>,
    pub initialization_seconds: f64,
}

impl SolveReport {
    pub fn final_iterate(&self) -> &StackedVariable {
        self.iterates.last().expect("a report always holds the starting iterate")
    }

    pub fn final_penalty(&self) -> f64 {
        *self.penalty_history.last().expect("a report always holds the starting penalty")
    }

    pub fn subproblem_values(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.subproblem_value).collect()
    }

    pub fn num_subproblems(&self) -> usize {
        self.iterations.len()
    }

    pub fn converged(&self) -> bool {
        self.termination == TerminationReason::Converged
    }
}

/// Runs the method with the backend named in `config`.
pub fn scvx_fast(
    problem: &ProblemDefinition,
    z0: &StackedVariable,
    config: &SolverConfig,
) -> Result<SolveReport, DriverError> {
    let backend = config.backend.instantiate();
    scvx_fast_with_backend(problem, z0, config, backend.as_ref())
}

pub fn scvx_fast_with_backend(
    problem: &ProblemDefinition,
    z0: &StackedVariable,
    config: &SolverConfig,
    backend: &dyn SolverBackend,
) -> Result<SolveReport, DriverError> {
    config.validate()?;
    let mut objective = config.objective_for(problem)?;
    let options = ConvexifyOptions { mode: objective.mode(), seed: config.seed };

    let start = Instant::now();
    let mut initialization = None;
    let mut z = z0.clone();
    if !is_feasible(z0, problem, objective.mode(), CONTAINS_TOL)? {
        let outcome = infeasible_initialization(z0, problem, &options, backend).map_err(DriverError::Initialization)?;
        z = outcome.z.clone();
        initialization = Some(outcome);
    }
    let initialization_seconds = start.elapsed().as_secs_f64();

    let mut penalty = evaluate_penalty(&z, problem, &objective)?;
    let mut report = SolveReport {
        problem: problem.clone(),
        config: config.clone(),
        objective,
        iterates: vec![z.clone()],
        penalty_history: vec![penalty],
        iterations: Vec::new(),
        termination: TerminationReason::IterationCap,
        failure: None,
        initialization_used: initialization.is_some(),
        initialization,
        initialization_seconds,
    };
    let mut escalations = 0;

    while report.iterations.len() < config.max_iterations {
        let started = Instant::now();
        let region = project_and_convexify(&z, problem, &options)?;
        let program = build(&objective, &region, problem)?;
        let solution = match solve(&program, backend).and_then(|s| match config.selection {
            Selection::Backend => Ok(s),
            Selection::NearestMinimizer => nearest_minimizer(&program, &s, &z, backend),
        }) {
            Ok(s) => s,
            Err(
                e @ (SubproblemError::Infeasible | SubproblemError::Unbounded | SubproblemError::NumericalLimit { .. }),
            ) => {
                report.termination = TerminationReason::BackendFailure;
                report.failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let candidate = evaluate_penalty(&solution.y_opt, problem, &objective)?;
        let accepted = candidate <= penalty + MONOTONE_SLACK * (1.0 + penalty.abs());
        let improvement = penalty - solution.objective_value;
        report.iterations.push(IterationRecord {
            subproblem_value: solution.objective_value,
            status: solution.status,
            backend_iterations: solution.stats.iterations,
            cuts: region.cuts().len(),
            step_norm: solution.y_opt.distance(&z),
            accepted,
            lambda: objective.lambda(),
            seconds: started.elapsed().as_secs_f64(),
        });
        if accepted {
            z = solution.y_opt;
            penalty = candidate;
            report.iterates.push(z.clone());
            report.penalty_history.push(penalty);
        }
        let converged = improvement.abs() < config.epsilon;
        if !accepted && !converged {
            report.termination = TerminationReason::BackendFailure;
            report.failure = Some(format!("subproblem solution raised the penalty from {penalty:e} to {candidate:e}"));
            break;
        }
        if converged || !accepted {
            let escalate = objective.mode() == PenaltyMode::Penalized
                && escalations < config.escalation_rounds
                && dynamics_defect(&z, problem)?.amax() > DEFECT_TOL;
            if !escalate {
                report.termination = TerminationReason::Converged;
                break;
            }
            escalations += 1;
            objective = objective.with_lambda((objective.lambda() * 10.0).max(1.0))?;
            penalty = evaluate_penalty(&z, problem, &objective)?;
        }
    }
    report.objective = objective;
    Ok(report)
}

/// Re-convexifies at the final iterate `z*`, solves once more and returns
/// `‖y_opt − z*‖₂`; near zero exactly when `z*` is a fixed point of the
/// iteration map.
pub fn fixed_point_residual(report: &SolveReport) -> Result<f64, DriverError> {
    let backend = report.config.backend.instantiate();
    fixed_point_residual_with_backend(report, backend.as_ref())
}

pub fn fixed_point_residual_with_backend(
    report: &SolveReport,
    backend: &dyn SolverBackend,
) -> Result<f64, DriverError> {
    let config = &report.config;
    residual_at(report.final_iterate(), &report.problem, &report.objective, config.seed, config.selection, backend)
}

/// `‖argmin{P(y) | y ∈ F_z} − z‖₂`, with the minimizer chosen as the driver
/// would choose it.
pub fn residual_at(
    z: &StackedVariable,
    problem: &ProblemDefinition,
    objective: &PenaltyObjective,
    seed: u64,
    selection: Selection,
    backend: &dyn SolverBackend,
) -> Result<f64, DriverError> {
    let options = ConvexifyOptions { mode: objective.mode(), seed };
    let region = project_and_convexify(z, problem, &options)?;
    let program = build(objective, &region, problem)?;
    let mut solution = solve(&program, backend)?;
    if selection == Selection::NearestMinimizer {
        solution = nearest_minimizer(&program, &solution, z, backend)?;
    }
    Ok(solution.y_opt.distance(z))
}

#[cfg(test)]
mod tests;
