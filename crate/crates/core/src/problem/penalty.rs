use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{ProblemDefinition, ProblemError, StackedVariable};

/// How the dynamics equalities `g(y) = 0` enter the subproblem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Keep `g(y) = 0` as equality constraints. Only valid for linear dynamics.
    #[default]
    HardEquality,
    /// Relax to `g(y) ≥ 0` and add `λ‖g(y)‖₁` to the cost.
    Penalized,
}

/// The penalty function `P(y) = J(y) + λ‖g(y)‖₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyObjective {
    mode: PenaltyMode,
    lambda: f64,
}

impl PenaltyObjective {
    pub fn new(mode: PenaltyMode, lambda: f64) -> Result<Self, ProblemError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(ProblemError::Invalid(format!("penalty weight must be >= 0, got {lambda}")));
        }
        Ok(Self { mode, lambda })
    }

    pub fn hard_equality() -> Self {
        Self { mode: PenaltyMode::HardEquality, lambda: 0.0 }
    }

    pub fn penalized(lambda: f64) -> Result<Self, ProblemError> {
        Self::new(PenaltyMode::Penalized, lambda)
    }

    /// Hard equalities for linear dynamics, penalized with `lambda` otherwise.
    pub fn default_for(problem: &ProblemDefinition, lambda: f64) -> Result<Self, ProblemError> {
        if problem.dynamics().is_linear() {
            Self::new(PenaltyMode::HardEquality, lambda)
        } else {
            Self::penalized(lambda)
        }
    }

    pub fn mode(&self) -> PenaltyMode {
        self.mode
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self, ProblemError> {
        Self::new(self.mode, lambda)
    }

    pub fn check_compatible(&self, problem: &ProblemDefinition) -> Result<(), ProblemError> {
        if self.mode == PenaltyMode::HardEquality && !problem.dynamics().is_linear() {
            return Err(ProblemError::Invalid(
                "nonlinear dynamics cannot be kept as hard equalities; use penalized mode".into(),
            ));
        }
        Ok(())
    }
}

fn check_length(y: &StackedVariable, problem: &ProblemDefinition) -> Result<(), ProblemError> {
    if y.layout() != *problem.layout() {
        return Err(ProblemError::DimensionMismatch {
            what: "stacked variable".into(),
            index: 0,
            expected: problem.layout().len(),
            found: y.as_slice().len(),
        });
    }
    Ok(())
}

/// The stacked defect `g(y)` with blocks `g_i = f(x_i, u_i) - x_{i+1} + x_i`.
pub fn dynamics_defect(y: &StackedVariable, problem: &ProblemDefinition) -> Result<DVector<f64>, ProblemError> {
    check_length(y, problem)?;
    let layout = problem.layout();
    let n = layout.state_dim;
    let mut g = DVector::zeros(layout.num_defects());
    for i in 0..layout.num_controls() {
        let x = y.state_at(i);
        let inc = problem.dynamics().increment(x.as_slice(), y.control_at(i).as_slice());
        let block = inc - y.state_at(i + 1) + x;
        g.rows_mut(i * n, n).copy_from(&block);
    }
    Ok(g)
}

/// `J(y) + λ‖g(y)‖₁` in penalized mode, `J(y)` in hard-equality mode.
pub fn evaluate_penalty(
    y: &StackedVariable,
    problem: &ProblemDefinition,
    objective: &PenaltyObjective,
) -> Result<f64, ProblemError> {
    check_length(y, problem)?;
    let base = problem.cost().evaluate(problem.layout(), y.as_slice());
    match objective.mode() {
        PenaltyMode::HardEquality => Ok(base),
        PenaltyMode::Penalized => {
            if objective.lambda() == 0.0 {
                return Ok(base);
            }
            let g = dynamics_defect(y, problem)?;
            Ok(base + objective.lambda() * g.iter().map(|v| v.abs()).sum::<f64>())
        }
    }
}

/// Row view of `q(y) = (g(y), h(y))`, where `h` collects every obstacle row
/// at every step: `h = (h(x_1), …, h(x_T))` with one entry per obstacle.
#[derive(Clone, Copy, Debug)]
pub struct ConstraintStack<'a> {
    problem: &'a ProblemDefinition,
}

impl<'a> ConstraintStack<'a> {
    pub fn new(problem: &'a ProblemDefinition) -> Self {
        Self { problem }
    }

    /// Scalar obstacle rows per step, `s`.
    pub fn rows_per_step(&self) -> usize {
        self.problem.obstacles().len()
    }

    /// `M = sT + n(T-1)`.
    pub fn len(&self) -> usize {
        let layout = self.problem.layout();
        self.rows_per_step() * layout.horizon + layout.num_defects()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn g(&self, y: &StackedVariable) -> Result<DVector<f64>, ProblemError> {
        dynamics_defect(y, self.problem)
    }

    pub fn h(&self, y: &StackedVariable) -> Result<DVector<f64>, ProblemError> {
        check_length(y, self.problem)?;
        let s = self.rows_per_step();
        let horizon = self.problem.layout().horizon;
        let mut h = DVector::zeros(s * horizon);
        for i in 0..horizon {
            let p = self.problem.position(y, i);
            for (j, obstacle) in self.problem.obstacles().iter().enumerate() {
                h[i * s + j] = obstacle.membership_value(&p)?;
            }
        }
        Ok(h)
    }

    pub fn q(&self, y: &StackedVariable) -> Result<DVector<f64>, ProblemError> {
        let g = self.g(y)?;
        let h = self.h(y)?;
        Ok(DVector::from_iterator(g.len() + h.len(), g.iter().chain(h.iter()).copied()))
    }

    /// Generalized gradient of row `row` of `q` with respect to `y`.
    pub fn row_gradient(&self, row: usize, y: &StackedVariable) -> Result<DVector<f64>, ProblemError> {
        check_length(y, self.problem)?;
        let layout = self.problem.layout();
        let mut grad = DVector::zeros(layout.len());
        let num_g = layout.num_defects();
        if row < num_g {
            let (step, j) = (row / layout.state_dim, row % layout.state_dim);
            let jac = self.problem.dynamics().jacobian(y.state_at(step).as_slice(), y.control_at(step).as_slice());
            for k in 0..layout.state_dim {
                grad[layout.state_index(step, k)] = jac[(j, k)];
            }
            for k in 0..layout.control_dim {
                grad[layout.control_index(step, k)] = jac[(j, layout.state_dim + k)];
            }
            grad[layout.state_index(step + 1, j)] -= 1.0;
            grad[layout.state_index(step, j)] += 1.0;
        } else {
            let s = self.rows_per_step();
            let h_row = row - num_g;
            let (step, j) = (h_row / s, h_row % s);
            let p = self.problem.position(y, step);
            let local = self.problem.obstacles()[j].gradient(&p)?;
            for (k, &coord) in self.problem.obstacle_coordinates().iter().enumerate() {
                grad[layout.state_index(step, coord)] = local[k];
            }
        }
        Ok(grad)
    }
}
