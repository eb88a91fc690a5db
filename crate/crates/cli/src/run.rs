//! Orchestration behind the subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DVector;
use serde::Serialize;

use scvx_core::{
    build, evaluate_penalty, fixed_point_residual, merge_intersecting, project_and_convexify, scvx_fast, ConvexSet,
    ConvexifyOptions, SolveReport, TerminationReason,
};

use crate::output::{self, Summary};
use crate::scenario::{load_scenario, ObstacleRecord, Scenario};

/// Command-line overrides of the scenario's solver section.
#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub out: PathBuf,
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
    pub max_iterations: Option<usize>,
    pub seed: Option<u64>,
    pub dry_run: bool,
    pub dump_conic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    IterationCap,
    BackendFailure,
    DryRun,
}

impl RunStatus {
    /// 0 converged (or dry run), 2 iteration cap, 3 failure.
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Converged | Self::DryRun => 0,
            Self::IterationCap => 2,
            Self::BackendFailure => 3,
        }
    }
}

pub fn apply_overrides(scenario: &mut Scenario, options: &SolveOptions) -> Result<()> {
    let c = &mut scenario.config;
    if let Some(e) = options.epsilon {
        c.epsilon = e;
    }
    if let Some(l) = options.lambda {
        c.lambda = l;
    }
    if let Some(k) = options.max_iterations {
        c.max_iterations = k;
    }
    if let Some(s) = options.seed {
        c.seed = s;
    }
    c.validate()?;
    Ok(())
}

/// Loads, solves and writes every artifact into `options.out`.
pub fn solve(scenario_path: &Path, options: &SolveOptions, log: &mut dyn Write) -> Result<RunStatus> {
    let mut scenario = load_scenario(scenario_path)?;
    apply_overrides(&mut scenario, options)?;
    if options.dry_run {
        describe(&scenario, log)?;
        return Ok(RunStatus::DryRun);
    }
    let report = scvx_fast(&scenario.problem, &scenario.z0, &scenario.config)?;
    write_outputs(&scenario, &report, options)?;
    writeln!(
        log,
        "{}: {} after {} subproblems, cost {} -> {}",
        scenario.name(),
        report.termination.name(),
        report.num_subproblems(),
        output::num(report.penalty_history[0]),
        output::num(report.final_penalty()),
    )?;
    Ok(match report.termination {
        TerminationReason::Converged => RunStatus::Converged,
        TerminationReason::IterationCap => RunStatus::IterationCap,
        TerminationReason::BackendFailure => RunStatus::BackendFailure,
    })
}

pub fn describe(scenario: &Scenario, log: &mut dyn Write) -> Result<()> {
    let p = &scenario.problem;
    let layout = p.layout();
    writeln!(log, "scenario {}", scenario.name())?;
    writeln!(log, "  steps {}, time step {}", layout.horizon, output::num(scenario.params.time_step()))?;
    writeln!(log, "  state dim {}, control dim {}, variables {}", layout.state_dim, layout.control_dim, layout.len())?;
    writeln!(log, "  obstacles {}, free steps {}", p.obstacles().len(), p.free_steps().len())?;
    writeln!(
        log,
        "  epsilon {}, lambda {}, max iterations {}",
        scenario.config.epsilon, scenario.config.lambda, scenario.config.max_iterations
    )?;
    Ok(())
}

pub fn write_outputs(scenario: &Scenario, report: &SolveReport, options: &SolveOptions) -> Result<()> {
    let dir = &options.out;
    let z = report.final_iterate();
    let residual = if report.converged() { Some(fixed_point_residual(report)?) } else { None };
    let guess_cost = evaluate_penalty(&scenario.z0, &scenario.problem, &report.objective)?;
    let summary = Summary::new(scenario.name(), report, guess_cost, residual)?;
    let mut json = serde_json::to_string_pretty(&summary).context("serializing summary")?;
    json.push('\n');

    let files: [(&str, String); 6] = [
        (output::TRAJECTORY_FILE, output::trajectory_csv(z, &scenario.params)),
        (output::HISTORY_FILE, output::history_csv(report)),
        (output::TIMING_FILE, output::timing_csv(report)),
        (output::SUMMARY_FILE, json),
        (output::PLOT_TRAJECTORY_FILE, output::plot_trajectory(z, &scenario.params)),
        (output::PLOT_CONVERGENCE_FILE, output::plot_convergence(report)),
    ];
    for (name, contents) in files {
        output::write_atomic(&dir.join(name), contents.as_bytes())?;
    }
    if options.dump_conic {
        dump_conic(report, &dir.join(output::CONIC_DIR))?;
    }
    Ok(())
}

/// Rebuilds the program of every subproblem from the iterate it was built
/// around and writes it in the plain-text conic format.
fn dump_conic(report: &SolveReport, dir: &Path) -> Result<()> {
    let options = ConvexifyOptions { mode: report.objective.mode(), seed: report.config.seed };
    let mut current = 0;
    for (k, record) in report.iterations.iter().enumerate() {
        let region = project_and_convexify(&report.iterates[current], &report.problem, &options)?;
        let objective = report.objective.with_lambda(record.lambda)?;
        let program = build(&objective, &region, &report.problem)?;
        output::write_atomic(&dir.join(format!("subproblem_{:03}.txt", k + 1)), program.to_text().as_bytes())?;
        if record.accepted {
            current += 1;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ProjectionReport {
    membership_value: f64,
    inside: bool,
    projection: Vec<f64>,
    distance: f64,
    normal: Option<Vec<f64>>,
    nearest_boundary: Vec<f64>,
    boundary_distance: f64,
}

/// `set_spec` is an obstacle record as an inline TOML table body, e.g.
/// `kind = "ball", center = [0, 0], radius = 1`; `point` is comma-separated.
pub fn project(set_spec: &str, point: &str, log: &mut dyn Write) -> Result<()> {
    #[derive(serde::Deserialize)]
    struct Wrapper {
        set: ObstacleRecord,
    }
    let wrapper: Wrapper = toml::from_str(&format!("set = {{ {set_spec} }}")).context("parsing set spec")?;
    let set = wrapper.set.to_set("set")?;
    let coords = point
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("parsing coordinate `{s}`")))
        .collect::<Result<Vec<_>>>()?;
    if coords.len() != set.dim() {
        bail!("point has {} coordinates, the set has {}", coords.len(), set.dim());
    }
    let z = DVector::from_vec(coords);
    let membership_value = set.membership_value(&z)?;
    let projection = set.project(&z)?;
    let boundary = set.nearest_boundary(&z)?;
    let report = ProjectionReport {
        membership_value,
        inside: membership_value <= 0.0,
        projection: projection.projection.iter().copied().collect(),
        distance: projection.distance,
        normal: boundary.normal.as_ref().map(|n| n.iter().copied().collect()),
        nearest_boundary: boundary.projection.iter().copied().collect(),
        boundary_distance: boundary.distance,
    };
    writeln!(log, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

#[derive(Serialize)]
struct CoverReport {
    members: Vec<usize>,
    center: Vec<f64>,
    /// `P` of `(x − center)ᵀ P (x − center) ≤ 1`.
    shape: Vec<Vec<f64>>,
    semi_axes: Vec<f64>,
}

/// Covering ellipsoids of every group of intersecting obstacles.
pub fn cover(scenario_path: &Path, log: &mut dyn Write) -> Result<()> {
    let scenario = load_scenario(scenario_path)?;
    let (sets, groups) = merge_intersecting(scenario.problem.obstacles())?;
    let mut covers = Vec::new();
    for (set, members) in sets.iter().zip(groups) {
        if members.len() < 2 {
            continue;
        }
        let ConvexSet::Ellipsoid(e) = set else { bail!("cover of {members:?} is not an ellipsoid") };
        let shape = e.a() / (-e.c() - e.b().dot(e.center()));
        covers.push(CoverReport {
            members,
            center: e.center().iter().copied().collect(),
            shape: shape.row_iter().map(|r| r.iter().copied().collect()).collect(),
            semi_axes: e.semi_axes().iter().copied().collect(),
        });
    }
    writeln!(log, "{}", serde_json::to_string_pretty(&covers)?)?;
    Ok(())
}
