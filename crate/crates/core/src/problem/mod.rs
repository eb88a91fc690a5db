//! Problem data for the discrete-time optimal control problem
//!
//! ```text
//! min  J(y)
//! s.t. x_{i+1} - x_i = f(x_i, u_i)      i = 1..T-1
//!      h(x_i) ≥ 0                       i = 1..T      (outside every keep-out set)
//!      u_i ∈ U_i,  x_i ∈ X_i
//!      x_1 = x(t0),  x_T = x(tf)
//! ```
//!
//! over the stacked vector `y = (x_1, …, x_T, u_1, …, u_{T-1})`.

mod conic;
mod cost;
mod dynamics;
mod multirotor;
mod penalty;
mod stacking;

use nalgebra::{DVector, DVectorView};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConvexSet, GeometryError};

pub use conic::{AffineExpr, ConicFunction, NormTerm};
pub use cost::{ConvexCost, CostModel};
pub use dynamics::{discretize_double_integrator, ConvexDynamics, DynamicsModel, LinearDynamics, SocDynamics};
pub use multirotor::MultirotorParams;
pub use penalty::{dynamics_defect, evaluate_penalty, ConstraintStack, PenaltyMode, PenaltyObjective};
pub use stacking::{stack, Layout, StackedVariable};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("{what} {index}: expected dimension {expected}, found {found}")]
    DimensionMismatch { what: String, index: usize, expected: usize, found: usize },
    #[error("{endpoint} position lies inside obstacle {obstacle} (membership value {value:e})")]
    EndpointInsideObstacle { endpoint: &'static str, obstacle: usize, value: f64 },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One convex constraint on a state or control vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetConstraint {
    /// `‖v[components]‖₂ ≤ radius`.
    NormBall { components: Vec<usize>, radius: f64 },
    /// `axisᵀ v[components] ≥ ‖v[components]‖₂ cos(half_angle)`, `axis` unit length.
    Cone { components: Vec<usize>, axis: Vec<f64>, half_angle: f64 },
    /// `lower ≤ v[component] ≤ upper`.
    Bounds { component: usize, lower: f64, upper: f64 },
}

impl SetConstraint {
    /// Amount by which `v` violates the constraint; zero when satisfied.
    pub fn violation(&self, v: &[f64]) -> f64 {
        match self {
            Self::NormBall { components, radius } => (sub_norm(v, components) - radius).max(0.0),
            Self::Cone { components, axis, half_angle } => {
                let along: f64 = components.iter().zip(axis).map(|(&c, a)| a * v[c]).sum();
                (sub_norm(v, components) * half_angle.cos() - along).max(0.0)
            }
            Self::Bounds { component, lower, upper } => (lower - v[*component]).max(v[*component] - upper).max(0.0),
        }
    }

    fn validate(&self, dim: usize) -> Result<Self, ProblemError> {
        let check_components = |components: &[usize]| {
            if components.is_empty() || components.iter().any(|&c| c >= dim) {
                Err(ProblemError::Invalid(format!(
                    "set constraint components {components:?} out of range for dimension {dim}"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            Self::NormBall { components, radius } => {
                check_components(components)?;
                if !(*radius > 0.0) {
                    return Err(ProblemError::Invalid(format!("norm bound must be positive, got {radius}")));
                }
                Ok(self.clone())
            }
            Self::Cone { components, axis, half_angle } => {
                check_components(components)?;
                let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
                if axis.len() != components.len() || norm == 0.0 {
                    return Err(ProblemError::Invalid("cone axis must be nonzero and match its components".into()));
                }
                if !(*half_angle > 0.0 && *half_angle <= std::f64::consts::FRAC_PI_2) {
                    return Err(ProblemError::Invalid(format!("cone half-angle {half_angle} must lie in (0, pi/2]")));
                }
                Ok(Self::Cone {
                    components: components.clone(),
                    axis: axis.iter().map(|a| a / norm).collect(),
                    half_angle: *half_angle,
                })
            }
            Self::Bounds { component, lower, upper } => {
                check_components(&[*component])?;
                if !(lower <= upper) {
                    return Err(ProblemError::Invalid(format!("empty bounds [{lower}, {upper}]")));
                }
                Ok(self.clone())
            }
        }
    }
}

fn sub_norm(v: &[f64], components: &[usize]) -> f64 {
    components.iter().map(|&c| v[c] * v[c]).sum::<f64>().sqrt()
}

/// Intersection of [`SetConstraint`]s; empty means unconstrained.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub constraints: Vec<SetConstraint>,
}

impl AdmissibleSet {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn new(constraints: Vec<SetConstraint>) -> Self {
        Self { constraints }
    }

    pub fn violation(&self, v: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.violation(v)).fold(0.0, f64::max)
    }
}

/// Pinned initial and terminal states.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryConditions {
    pub initial: DVector<f64>,
    pub terminal: DVector<f64>,
}

/// The convex domain `Y`: admissible sets plus the pinned boundary states.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub state_sets: Vec<AdmissibleSet>,
    pub control_sets: Vec<AdmissibleSet>,
    pub boundary: BoundaryConditions,
}

impl Domain {
    pub fn violation(&self, y: &StackedVariable) -> f64 {
        domain_violation(&self.state_sets, &self.control_sets, &self.boundary, y)
    }
}

fn domain_violation(
    state_sets: &[AdmissibleSet],
    control_sets: &[AdmissibleSet],
    boundary: &BoundaryConditions,
    y: &StackedVariable,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, set) in state_sets.iter().enumerate() {
        worst = worst.max(set.violation(y.state_at(i).as_slice()));
    }
    for (i, set) in control_sets.iter().enumerate() {
        worst = worst.max(set.violation(y.control_at(i).as_slice()));
    }
    let last = state_sets.len() - 1;
    worst = worst.max((y.state_at(0) - &boundary.initial).amax());
    worst.max((y.state_at(last) - &boundary.terminal).amax())
}

/// A validated problem instance. Immutable once built.
#[derive(Clone, Debug)]
pub struct ProblemDefinition {
    layout: Layout,
    dynamics: DynamicsModel,
    state_sets: Vec<AdmissibleSet>,
    control_sets: Vec<AdmissibleSet>,
    obstacles: Vec<ConvexSet>,
    obstacle_coordinates: Vec<usize>,
    boundary: BoundaryConditions,
    cost: CostModel,
    time_step: Option<f64>,
}

impl ProblemDefinition {
    pub fn builder(horizon: usize, dynamics: DynamicsModel, boundary: BoundaryConditions) -> ProblemBuilder {
        ProblemBuilder {
            horizon,
            dynamics,
            boundary,
            state_sets: None,
            control_sets: None,
            obstacles: Vec::new(),
            obstacle_coordinates: None,
            cost: CostModel::MinimumFuel,
            time_step: None,
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dynamics(&self) -> &DynamicsModel {
        &self.dynamics
    }

    pub fn state_sets(&self) -> &[AdmissibleSet] {
        &self.state_sets
    }

    pub fn control_sets(&self) -> &[AdmissibleSet] {
        &self.control_sets
    }

    pub fn obstacles(&self) -> &[ConvexSet] {
        &self.obstacles
    }

    /// State components the obstacles act on (typically the position block).
    pub fn obstacle_coordinates(&self) -> &[usize] {
        &self.obstacle_coordinates
    }

    pub fn boundary(&self) -> &BoundaryConditions {
        &self.boundary
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn time_step(&self) -> Option<f64> {
        self.time_step
    }

    /// Steps whose state is not pinned, `1..T-1` zero-based.
    pub fn free_steps(&self) -> std::ops::Range<usize> {
        1..self.layout.horizon - 1
    }

    /// Same problem with a different obstacle list (e.g. ellipsoidal covers).
    pub fn with_obstacles(&self, obstacles: Vec<ConvexSet>) -> Result<Self, ProblemError> {
        let mut out = self.clone();
        out.obstacles = obstacles;
        out.validate_obstacles()?;
        Ok(out)
    }

    /// The obstacle coordinates of state `step`.
    pub fn position(&self, y: &StackedVariable, step: usize) -> DVector<f64> {
        self.project_state(&y.state_at(step))
    }

    pub fn project_state(&self, x: &DVectorView<'_, f64>) -> DVector<f64> {
        DVector::from_iterator(self.obstacle_coordinates.len(), self.obstacle_coordinates.iter().map(|&c| x[c]))
    }

    /// Smallest obstacle row value over all steps and obstacles, `+∞`
    /// without obstacles.
    pub fn min_obstacle_value(&self, y: &StackedVariable) -> Result<f64, ProblemError> {
        let mut min = f64::INFINITY;
        for i in 0..self.layout.horizon {
            let p = self.position(y, i);
            for obstacle in &self.obstacles {
                min = min.min(obstacle.membership_value(&p)?);
            }
        }
        Ok(min)
    }

    /// Largest violation of the admissible sets and boundary pins.
    pub fn domain_violation(&self, y: &StackedVariable) -> f64 {
        domain_violation(&self.state_sets, &self.control_sets, &self.boundary, y)
    }

    /// Owned copy of the domain `Y` (admissible sets and pins).
    pub fn domain(&self) -> Domain {
        Domain {
            state_sets: self.state_sets.clone(),
            control_sets: self.control_sets.clone(),
            boundary: self.boundary.clone(),
        }
    }

    fn validate_obstacles(&self) -> Result<(), ProblemError> {
        let d = self.obstacle_coordinates.len();
        for (j, obstacle) in self.obstacles.iter().enumerate() {
            if obstacle.dim() != d {
                return Err(ProblemError::DimensionMismatch {
                    what: "obstacle".into(),
                    index: j,
                    expected: d,
                    found: obstacle.dim(),
                });
            }
            if !obstacle.is_bounded() {
                return Err(ProblemError::Invalid(format!("obstacle {j} is unbounded")));
            }
            let p0 = self.project_state(&self.boundary.initial.as_view());
            let pf = self.project_state(&self.boundary.terminal.as_view());
            for (endpoint, p) in [("initial", p0), ("terminal", pf)] {
                let value = obstacle.membership_value(&p)?;
                if value < 0.0 {
                    return Err(ProblemError::EndpointInsideObstacle { endpoint, obstacle: j, value });
                }
            }
        }
        Ok(())
    }
}

pub struct ProblemBuilder {
    horizon: usize,
    dynamics: DynamicsModel,
    boundary: BoundaryConditions,
    state_sets: Option<Vec<AdmissibleSet>>,
    control_sets: Option<Vec<AdmissibleSet>>,
    obstacles: Vec<ConvexSet>,
    obstacle_coordinates: Option<Vec<usize>>,
    cost: CostModel,
    time_step: Option<f64>,
}

impl ProblemBuilder {
    /// Same admissible set at every step.
    pub fn state_set(mut self, set: AdmissibleSet) -> Self {
        self.state_sets = Some(vec![set; self.horizon]);
        self
    }

    pub fn state_sets(mut self, sets: Vec<AdmissibleSet>) -> Self {
        self.state_sets = Some(sets);
        self
    }

    pub fn control_set(mut self, set: AdmissibleSet) -> Self {
        self.control_sets = Some(vec![set; self.horizon.saturating_sub(1)]);
        self
    }

    pub fn control_sets(mut self, sets: Vec<AdmissibleSet>) -> Self {
        self.control_sets = Some(sets);
        self
    }

    pub fn obstacles(mut self, obstacles: Vec<ConvexSet>) -> Self {
        self.obstacles = obstacles;
        self
    }

    /// Defaults to the leading `d` state components, `d` the obstacle dimension.
    pub fn obstacle_coordinates(mut self, coordinates: Vec<usize>) -> Self {
        self.obstacle_coordinates = Some(coordinates);
        self
    }

    pub fn cost(mut self, cost: CostModel) -> Self {
        self.cost = cost;
        self
    }

    pub fn time_step(mut self, dt: f64) -> Self {
        self.time_step = Some(dt);
        self
    }

    pub fn build(self) -> Result<ProblemDefinition, ProblemError> {
        let n = self.dynamics.state_dim();
        let m = self.dynamics.control_dim();
        let layout = Layout::new(self.horizon, n, m)?;
        for (what, v) in [("initial state", &self.boundary.initial), ("terminal state", &self.boundary.terminal)] {
            if v.len() != n {
                return Err(ProblemError::DimensionMismatch {
                    what: what.into(),
                    index: 0,
                    expected: n,
                    found: v.len(),
                });
            }
        }
        if let DynamicsModel::ComponentwiseConvex(f) = &self.dynamics {
            if let Some(j) = f.convex_components().iter().position(|&c| !c) {
                return Err(ProblemError::Invalid(format!("dynamics component {j} is not declared convex")));
            }
        }
        let state_sets = self.state_sets.unwrap_or_else(|| vec![AdmissibleSet::default(); self.horizon]);
        let control_sets = self.control_sets.unwrap_or_else(|| vec![AdmissibleSet::default(); self.horizon - 1]);
        if state_sets.len() != self.horizon || control_sets.len() != self.horizon - 1 {
            return Err(ProblemError::Invalid(format!(
                "expected {} state sets and {} control sets, got {} and {}",
                self.horizon,
                self.horizon - 1,
                state_sets.len(),
                control_sets.len()
            )));
        }
        let validate_all = |sets: Vec<AdmissibleSet>, dim: usize| -> Result<Vec<AdmissibleSet>, ProblemError> {
            sets.into_iter()
                .map(|s| {
                    Ok(AdmissibleSet {
                        constraints: s.constraints.iter().map(|c| c.validate(dim)).collect::<Result<_, _>>()?,
                    })
                })
                .collect()
        };
        let state_sets = validate_all(state_sets, n)?;
        let control_sets = validate_all(control_sets, m)?;

        let obstacle_coordinates = match self.obstacle_coordinates {
            Some(c) => c,
            None => (0..self.obstacles.first().map_or(0, ConvexSet::dim)).collect(),
        };
        if obstacle_coordinates.iter().any(|&c| c >= n) {
            return Err(ProblemError::Invalid(format!(
                "obstacle coordinates {obstacle_coordinates:?} exceed state dimension {n}"
            )));
        }
        if let Some(dt) = self.time_step {
            if !(dt > 0.0) {
                return Err(ProblemError::Invalid(format!("time step must be positive, got {dt}")));
            }
        }
        let problem = ProblemDefinition {
            layout,
            dynamics: self.dynamics,
            state_sets,
            control_sets,
            obstacles: self.obstacles,
            obstacle_coordinates,
            boundary: self.boundary,
            cost: self.cost,
            time_step: self.time_step,
        };
        problem.validate_obstacles()?;
        Ok(problem)
    }
}

#[cfg(test)]
mod tests;
