use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::ConvexSet;

use super::{
    discretize_double_integrator, AdmissibleSet, BoundaryConditions, CostModel, DynamicsModel, ProblemDefinition,
    ProblemError, SetConstraint, StackedVariable,
};

/// A point-mass multirotor: double-integrator dynamics under constant
/// gravity, speed and acceleration limits, a thrust pointing cone, keep-out
/// sets on the position and minimum-fuel cost.
///
/// Keep-out sets of lower dimension than the position constrain its leading
/// coordinates, e.g. 2-D sets in a 3-D problem are vertical prisms.
#[derive(Clone, Debug, PartialEq)]
pub struct MultirotorParams {
    pub horizon: usize,
    pub final_time: f64,
    pub max_speed: Option<f64>,
    pub max_control: Option<f64>,
    /// Half-angle (radians) of the cone around `cone_axis` that `u` must lie in.
    pub cone_half_angle: Option<f64>,
    pub cone_axis: DVector<f64>,
    pub gravity: DVector<f64>,
    pub initial_position: DVector<f64>,
    pub initial_velocity: DVector<f64>,
    pub final_position: DVector<f64>,
    pub final_velocity: DVector<f64>,
    pub obstacles: Vec<ConvexSet>,
}

impl MultirotorParams {
    pub fn dim(&self) -> usize {
        self.initial_position.len()
    }

    /// `t_f / (T − 1)`.
    pub fn time_step(&self) -> f64 {
        self.final_time / (self.horizon as f64 - 1.0)
    }

    pub fn build(&self) -> Result<ProblemDefinition, ProblemError> {
        let d = self.dim();
        let vectors = [
            ("initial velocity", &self.initial_velocity),
            ("final position", &self.final_position),
            ("final velocity", &self.final_velocity),
            ("gravity", &self.gravity),
            ("cone axis", &self.cone_axis),
        ];
        for (index, (what, v)) in vectors.into_iter().enumerate() {
            if v.len() != d {
                return Err(ProblemError::DimensionMismatch { what: what.into(), index, expected: d, found: v.len() });
            }
        }
        if self.horizon < 2 {
            return Err(ProblemError::Invalid(format!("horizon must be at least 2, got {}", self.horizon)));
        }
        let dt = self.time_step();
        let dynamics = match discretize_double_integrator(dt, d)? {
            DynamicsModel::LinearZoh(lin) => DynamicsModel::LinearZoh(lin.with_input_offset(&self.gravity)),
            other => other,
        };
        let stack =
            |p: &DVector<f64>, v: &DVector<f64>| DVector::from_iterator(2 * d, p.iter().chain(v.iter()).copied());
        let boundary = BoundaryConditions {
            initial: stack(&self.initial_position, &self.initial_velocity),
            terminal: stack(&self.final_position, &self.final_velocity),
        };
        let mut state = Vec::new();
        if let Some(radius) = self.max_speed {
            state.push(SetConstraint::NormBall { components: (d..2 * d).collect(), radius });
        }
        let mut control = Vec::new();
        if let Some(radius) = self.max_control {
            control.push(SetConstraint::NormBall { components: (0..d).collect(), radius });
        }
        if let Some(half_angle) = self.cone_half_angle {
            control.push(SetConstraint::Cone {
                components: (0..d).collect(),
                axis: self.cone_axis.iter().copied().collect(),
                half_angle,
            });
        }
        ProblemDefinition::builder(self.horizon, dynamics, boundary)
            .state_set(AdmissibleSet::new(state))
            .control_set(AdmissibleSet::new(control))
            .obstacles(self.obstacles.clone())
            .obstacle_coordinates((0..self.obstacles.first().map_or(d, ConvexSet::dim)).collect())
            .cost(CostModel::MinimumFuel)
            .time_step(dt)
            .build()
    }

    /// Positions interpolated linearly between the endpoints, zero velocity
    /// at interior steps and hover control `u = −g`.
    pub fn straight_line_guess(&self, problem: &ProblemDefinition) -> StackedVariable {
        let layout = *problem.layout();
        let d = self.dim();
        let mut z = StackedVariable::zeros(layout);
        let last = layout.horizon - 1;
        for i in 0..layout.horizon {
            let s = i as f64 / last as f64;
            let p = &self.initial_position * (1.0 - s) + &self.final_position * s;
            let mut x = DVector::zeros(2 * d);
            x.rows_mut(0, d).copy_from(&p);
            z.set_state(i, &x);
        }
        z.set_state(0, &problem.boundary().initial);
        z.set_state(last, &problem.boundary().terminal);
        let hover = -&self.gravity;
        for i in 0..layout.num_controls() {
            z.set_control(i, &hover);
        }
        z
    }

    /// The straight-line guess with every interior position shifted by one
    /// common offset, uniform in `±0.3` per axis, plus per-step jitter in
    /// `±0.05`; reproducible from `seed`.
    pub fn perturbed_guess(&self, problem: &ProblemDefinition, seed: u64) -> StackedVariable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = self.straight_line_guess(problem);
        let d = self.dim();
        let offset: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.3..0.3)).collect();
        for i in 1..problem.layout().horizon - 1 {
            let mut x = z.state_at(i).into_owned();
            for (k, o) in offset.iter().enumerate() {
                x[k] += o + rng.gen_range(-0.05..0.05);
            }
            z.set_state(i, &x);
        }
        z
    }
}
