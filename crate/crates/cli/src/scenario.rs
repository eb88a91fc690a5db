//! Scenario files: a versioned TOML document describing one multirotor
//! problem, its solver settings and its initial guess.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use scvx_core::{
    stack, ConvexSet, Ellipsoid, GeometryError, MultirotorParams, PenaltyMode, Polytope, ProblemDefinition,
    ProblemError, Selection, SolverConfig, StackedVariable,
};

/// The only format version this build reads and writes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {source}")]
    Parse { origin: String, source: Box<toml::de::Error> },
    #[error("cannot serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unsupported format_version {found} (this build reads version {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("{field}: {source}")]
    Geometry { field: String, source: GeometryError },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn field_error(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Field { field: field.into(), message: message.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    #[serde(default)]
    pub name: String,
    pub horizon: HorizonSection,
    #[serde(default)]
    pub limits: LimitsSection,
    pub environment: EnvironmentSection,
    pub boundary: BoundarySection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<ObstacleRecord>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub initial_guess: InitialGuess,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    /// Number of states `T`.
    pub steps: usize,
    /// `t_f` in seconds.
    pub final_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_control: Option<f64>,
    /// Thrust-cone half-angle in degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone_half_angle_deg: Option<f64>,
    /// Cone axis; defaults to the last coordinate axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone_axis: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub gravity: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub initial_position: Vec<f64>,
    pub initial_velocity: Vec<f64>,
    pub final_position: Vec<f64>,
    pub final_velocity: Vec<f64>,
}

/// One keep-out set. Sets of lower dimension than the position are vertical
/// prisms over its leading coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleRecord {
    /// Axis-aligned with `semi_axes`, or `(x − c)ᵀ shape (x − c) ≤ 1`.
    Ellipsoid {
        center: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        semi_axes: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shape: Option<Vec<Vec<f64>>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `normals[k]ᵀx ≤ offsets[k]` for every face.
    Polytope {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
}

impl ObstacleRecord {
    pub fn to_set(&self, field: &str) -> Result<ConvexSet, ScenarioError> {
        let geometry = |source| ScenarioError::Geometry { field: field.to_string(), source };
        match self {
            Self::Ellipsoid { center, semi_axes, shape } => {
                let c = DVector::from_column_slice(center);
                let e = match (semi_axes, shape) {
                    (Some(s), None) => {
                        expect_len(&format!("{field}.semi_axes"), s, center.len())?;
                        Ellipsoid::axis_aligned(&c, &DVector::from_column_slice(s))
                    }
                    (None, Some(rows)) => {
                        Ellipsoid::from_center_matrix(&c, &matrix(&format!("{field}.shape"), rows, center.len())?)
                    }
                    _ => return Err(field_error(field, "ellipsoid needs exactly one of semi_axes and shape")),
                };
                e.map(ConvexSet::Ellipsoid).map_err(geometry)
            }
            Self::Ball { center, radius } => {
                ConvexSet::ball(DVector::from_column_slice(center), *radius).map_err(geometry)
            }
            Self::Box { lower, upper } => {
                expect_len(&format!("{field}.upper"), upper, lower.len())?;
                if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                    return Err(field_error(field, "box needs lower < upper in every coordinate"));
                }
                ConvexSet::aabb(&DVector::from_column_slice(lower), &DVector::from_column_slice(upper))
                    .map_err(geometry)
            }
            Self::Polytope { normals, offsets } => {
                expect_len(&format!("{field}.offsets"), offsets, normals.len())?;
                let d = normals.first().map_or(0, Vec::len);
                let faces = normals
                    .iter()
                    .zip(offsets)
                    .enumerate()
                    .map(|(k, (a, b))| {
                        expect_len(&format!("{field}.normals[{k}]"), a, d)?;
                        Ok((DVector::from_column_slice(a), -b))
                    })
                    .collect::<Result<Vec<_>, ScenarioError>>()?;
                Polytope::new(faces).map(ConvexSet::Polytope).map_err(geometry)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to hard equalities for the (linear) multirotor dynamics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<PenaltyMode>,
    #[serde(default)]
    pub escalation_rounds: usize,
    #[serde(default)]
    pub selection: Selection,
}

fn default_epsilon() -> f64 {
    SolverConfig::default().epsilon
}

fn default_max_iterations() -> usize {
    SolverConfig::default().max_iterations
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            epsilon: c.epsilon,
            lambda: c.lambda,
            max_iterations: c.max_iterations,
            seed: c.seed,
            mode: c.mode,
            escalation_rounds: c.escalation_rounds,
            selection: c.selection,
        }
    }
}

impl SolverSection {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            lambda: self.lambda,
            mode: self.mode,
            seed: self.seed,
            escalation_rounds: self.escalation_rounds,
            selection: self.selection,
            ..SolverConfig::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialGuess {
    /// Positions interpolated between the endpoints, zero interior velocity,
    /// hover control.
    #[default]
    StraightLine,
    /// Full trajectory: `T` rows of `(p, v)` and `T − 1` rows of `u`.
    Explicit { states: Vec<Vec<f64>>, controls: Vec<Vec<f64>> },
}

/// A parsed and validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub params: MultirotorParams,
    pub problem: ProblemDefinition,
    pub config: SolverConfig,
    pub z0: StackedVariable,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    parse_scenario(&text, &path.display().to_string())
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text)
        .map_err(|source| ScenarioError::Parse { origin: origin.to_string(), source: Box::new(source) })?;
    Scenario::from_file(file)
}

impl ScenarioFile {
    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string(self)?)
    }
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        if file.format_version != FORMAT_VERSION {
            return Err(ScenarioError::Version { found: file.format_version });
        }
        let params = params_from(&file)?;
        let problem = params.build()?;
        let z0 = match &file.initial_guess {
            InitialGuess::StraightLine => params.straight_line_guess(&problem),
            InitialGuess::Explicit { states, controls } => explicit_guess(&problem, states, controls)?,
        };
        let config = file.solver.to_config();
        config.validate().map_err(|e| field_error("solver", e.to_string()))?;
        Ok(Self { file, params, problem, config, z0 })
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }
}

fn params_from(file: &ScenarioFile) -> Result<MultirotorParams, ScenarioError> {
    let b = &file.boundary;
    let d = b.initial_position.len();
    if !(1..=3).contains(&d) {
        return Err(field_error("boundary.initial_position", format!("expected 1 to 3 coordinates, got {d}")));
    }
    for (field, v) in [
        ("boundary.initial_velocity", &b.initial_velocity),
        ("boundary.final_position", &b.final_position),
        ("boundary.final_velocity", &b.final_velocity),
        ("environment.gravity", &file.environment.gravity),
    ] {
        expect_len(field, v, d)?;
    }
    let h = &file.horizon;
    if h.steps < 2 {
        return Err(field_error("horizon.steps", format!("need at least 2 steps, got {}", h.steps)));
    }
    if !(h.final_time > 0.0 && h.final_time.is_finite()) {
        return Err(field_error(
            "horizon.final_time",
            format!("time step must be positive, got t_f = {}", h.final_time),
        ));
    }
    let l = &file.limits;
    for (field, value) in [("limits.max_speed", l.max_speed), ("limits.max_control", l.max_control)] {
        if let Some(v) = value {
            if !(v > 0.0 && v.is_finite()) {
                return Err(field_error(field, format!("must be positive, got {v}")));
            }
        }
    }
    if let Some(deg) = l.cone_half_angle_deg {
        if !(deg > 0.0 && deg < 90.0) {
            return Err(field_error("limits.cone_half_angle_deg", format!("must lie in (0, 90), got {deg}")));
        }
    }
    let cone_axis = match &l.cone_axis {
        Some(axis) => {
            expect_len("limits.cone_axis", axis, d)?;
            DVector::from_column_slice(axis)
        }
        None => DVector::from_fn(d, |i, _| if i + 1 == d { 1.0 } else { 0.0 }),
    };
    let obstacles = file
        .obstacles
        .iter()
        .enumerate()
        .map(|(j, o)| {
            let field = format!("obstacles[{j}]");
            let set = o.to_set(&field)?;
            if set.dim() > d {
                return Err(field_error(field, format!("has {} coordinates, the position has {d}", set.dim())));
            }
            Ok(set)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(j) = obstacles.iter().position(|o| o.dim() != obstacles[0].dim()) {
        return Err(field_error(format!("obstacles[{j}]"), "all obstacles must have the same dimension"));
    }
    let v = |x: &Vec<f64>| DVector::from_column_slice(x);
    Ok(MultirotorParams {
        horizon: h.steps,
        final_time: h.final_time,
        max_speed: l.max_speed,
        max_control: l.max_control,
        cone_half_angle: l.cone_half_angle_deg.map(f64::to_radians),
        cone_axis,
        gravity: v(&file.environment.gravity),
        initial_position: v(&b.initial_position),
        initial_velocity: v(&b.initial_velocity),
        final_position: v(&b.final_position),
        final_velocity: v(&b.final_velocity),
        obstacles,
    })
}

fn explicit_guess(
    problem: &ProblemDefinition,
    states: &[Vec<f64>],
    controls: &[Vec<f64>],
) -> Result<StackedVariable, ScenarioError> {
    let layout = problem.layout();
    if states.len() != layout.horizon {
        return Err(field_error(
            "initial_guess.states",
            format!("expected {} rows, got {}", layout.horizon, states.len()),
        ));
    }
    if controls.len() != layout.num_controls() {
        return Err(field_error(
            "initial_guess.controls",
            format!("expected {} rows, got {}", layout.num_controls(), controls.len()),
        ));
    }
    let rows = |name: &str, rows: &[Vec<f64>], width: usize| {
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                expect_len(&format!("initial_guess.{name}[{i}]"), r, width)?;
                Ok(DVector::from_column_slice(r))
            })
            .collect::<Result<Vec<_>, ScenarioError>>()
    };
    let x = rows("states", states, layout.state_dim)?;
    let u = rows("controls", controls, layout.control_dim)?;
    Ok(stack(&x, &u)?)
}

/// The explicit-guess section holding `z`.
pub fn explicit_guess_of(z: &StackedVariable) -> InitialGuess {
    let (states, controls) = z.unstack();
    let rows = |v: Vec<DVector<f64>>| v.into_iter().map(|r| r.iter().copied().collect()).collect();
    InitialGuess::Explicit { states: rows(states), controls: rows(controls) }
}

fn expect_len(field: &str, v: &[f64], expected: usize) -> Result<(), ScenarioError> {
    if v.len() != expected {
        return Err(field_error(field, format!("expected {expected} values, got {}", v.len())));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(field_error(field, format!("non-finite value {x}")));
    }
    Ok(())
}

fn matrix(field: &str, rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>, ScenarioError> {
    if rows.len() != d {
        return Err(field_error(field, format!("expected {d} rows, got {}", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        expect_len(&format!("{field}[{i}]"), r, d)?;
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}
