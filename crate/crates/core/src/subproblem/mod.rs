//! The convex subproblem `min {P(y) | y ∈ F_z}` as a second-order cone
//! program, and the solver backend interface.

mod backend;
mod program;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convexify::ConvexifiedRegion;
use crate::problem::{AffineExpr, PenaltyMode, PenaltyObjective, ProblemDefinition, ProblemError, StackedVariable};

pub use backend::{BackendResult, ClarabelBackend, SolverBackend};
pub use program::{ConeKind, ConicProgram, SocBlock};

/// Backend tolerance on the first attempt.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Tolerance of the single retry after a numerical failure.
pub const RELAXED_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SubproblemError {
    #[error("cost has no conic representation and cannot be used in a subproblem")]
    UnsupportedCost,
    #[error("dynamics have no conic representation of the required form")]
    UnsupportedDynamics,
    #[error("backend `{0}` does not support second-order cones")]
    UnsupportedCone(String),
    #[error("malformed conic program: {0}")]
    Malformed(String),
    #[error("subproblem is infeasible; the convexified region should contain the current iterate")]
    Infeasible,
    #[error("subproblem is unbounded")]
    Unbounded,
    #[error("backend stopped at its numerical limit, also at relaxed tolerance {tolerance:e}")]
    NumericalLimit { tolerance: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Infeasible => "infeasible",
            Self::Unbounded => "unbounded",
            Self::NumericalLimit => "numerical_limit",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverStats {
    pub iterations: u32,
    pub solve_seconds: f64,
    /// Tolerance of the accepted attempt.
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemSolution {
    pub y_opt: StackedVariable,
    /// Auxiliary (epigraph) variables after `y`.
    pub auxiliaries: Vec<f64>,
    /// Optimal value of the subproblem, `Φ(z)`.
    pub objective_value: f64,
    pub status: SolveStatus,
    pub stats: SolverStats,
}

/// Assembles the subproblem over `region` for the penalty `objective`.
///
/// Cost norms become epigraph cones, region cuts linear inequalities, the
/// boundary states equality pins. In hard-equality mode the dynamics are
/// equalities; in penalized mode `λ·Σ g_j(y)` enters the cost (the region's
/// dynamics cuts keep `g ≥ 0`, so this sum is `λ‖g‖₁`).
pub fn build(
    objective: &PenaltyObjective,
    region: &ConvexifiedRegion,
    problem: &ProblemDefinition,
) -> Result<ConicProgram, SubproblemError> {
    objective.check_compatible(problem)?;
    let layout = *problem.layout();
    let mut program = ConicProgram::empty(layout);
    let cost = problem.cost().conic_form(&layout).ok_or(SubproblemError::UnsupportedCost)?;
    program.add_conic_cost(&cost, 1.0);
    if objective.mode() == PenaltyMode::Penalized && objective.lambda() > 0.0 {
        for step in 0..layout.num_controls() {
            let rows = problem.dynamics().defect_rows(&layout, step).ok_or(SubproblemError::UnsupportedDynamics)?;
            for row in &rows {
                program.add_conic_cost(row, objective.lambda());
            }
        }
    }
    program.add_boundary_pins(problem);
    if objective.mode() == PenaltyMode::HardEquality {
        program.add_dynamics_equalities(problem)?;
    }
    program.add_domain(problem);
    for cut in region.cuts() {
        program.inequalities.push(cut.expr.clone());
    }
    Ok(program)
}

/// Solves `program`, retrying once at [`RELAXED_TOLERANCE`] if the backend
/// hits its numerical limit.
pub fn solve(program: &ConicProgram, backend: &dyn SolverBackend) -> Result<SubproblemSolution, SubproblemError> {
    program.validate()?;
    if !program.soc_blocks.is_empty() && !backend.supports_soc() {
        return Err(SubproblemError::UnsupportedCone(backend.name().to_string()));
    }
    let mut result = backend.solve_with_tolerance(program, DEFAULT_TOLERANCE)?;
    let mut tolerance = DEFAULT_TOLERANCE;
    if result.status == SolveStatus::NumericalLimit {
        result = backend.solve_with_tolerance(program, RELAXED_TOLERANCE)?;
        tolerance = RELAXED_TOLERANCE;
    }
    match result.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(SubproblemError::Infeasible),
        SolveStatus::Unbounded => return Err(SubproblemError::Unbounded),
        SolveStatus::NumericalLimit => return Err(SubproblemError::NumericalLimit { tolerance }),
    }
    let n = program.stacked_len();
    let y_opt = StackedVariable::new(program.layout, nalgebra::DVector::from_column_slice(&result.x[..n]))?;
    Ok(SubproblemSolution {
        objective_value: program.objective(&result.x),
        auxiliaries: result.x[n..].to_vec(),
        y_opt,
        status: result.status,
        stats: SolverStats { iterations: result.iterations, solve_seconds: result.solve_seconds, tolerance },
    })
}

/// Relative slack on the optimal value defining the near-optimal set in
/// [`nearest_minimizer`].
pub const SELECTION_SLACK: f64 = 1e-7;

/// Among the points of `program` whose cost is within
/// `SELECTION_SLACK·(1 + |Φ|)` of the optimal value `Φ` of `solution`, the
/// one nearest `anchor`.
///
/// Minimum-fuel programs are often degenerate (a whole face of minimizers);
/// an interior-point backend then returns an arbitrary point of that face.
/// Selecting the nearest one makes the iteration map single-valued.
pub fn nearest_minimizer(
    program: &ConicProgram,
    solution: &SubproblemSolution,
    anchor: &StackedVariable,
    backend: &dyn SolverBackend,
) -> Result<SubproblemSolution, SubproblemError> {
    let phi = solution.objective_value;
    let mut stage = program.clone();
    let mut budget = AffineExpr::constant(phi + SELECTION_SLACK * (1.0 + phi.abs()) - program.cost_constant);
    for (i, &c) in program.linear_cost.iter().enumerate() {
        if c != 0.0 {
            budget = budget.term(i, -c);
        }
    }
    stage.inequalities.push(budget);
    stage.linear_cost.iter_mut().for_each(|c| *c = 0.0);
    stage.cost_constant = 0.0;
    let t = stage.add_variable(1.0);
    stage.soc_blocks.push(SocBlock {
        kind: ConeKind::Epigraph,
        head: AffineExpr::var(t),
        tail: anchor.as_slice().iter().enumerate().map(|(i, a)| AffineExpr::var(i).plus_constant(-a)).collect(),
    });
    let selected = solve(&stage, backend)?;
    let mut x = selected.y_opt.as_slice().to_vec();
    x.extend_from_slice(&selected.auxiliaries[..program.num_vars - program.stacked_len()]);
    Ok(SubproblemSolution {
        y_opt: selected.y_opt,
        auxiliaries: x[program.stacked_len()..].to_vec(),
        objective_value: phi,
        status: selected.status,
        stats: SolverStats {
            iterations: solution.stats.iterations + selected.stats.iterations,
            solve_seconds: solution.stats.solve_seconds + selected.stats.solve_seconds,
            tolerance: solution.stats.tolerance.max(selected.stats.tolerance),
        },
    })
}
