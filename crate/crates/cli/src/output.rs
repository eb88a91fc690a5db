//! Run artifacts. Every file is written to a temporary name and renamed into
//! place; floats are printed with 17 significant digits. Wall-clock times go
//! to `timing.csv` only, so every other file is reproducible byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use scvx_core::{
    convergence_rate_diagnostics, dynamics_defect, MultirotorParams, SolveReport, StackedVariable, TerminationReason,
};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const HISTORY_FILE: &str = "history.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_TRAJECTORY_FILE: &str = "plot_trajectory.dat";
pub const PLOT_CONVERGENCE_FILE: &str = "plot_convergence.dat";
pub const CONIC_DIR: &str = "conic";

pub const HISTORY_COLUMNS: [&str; 10] = [
    "iteration",
    "penalty",
    "subproblem_value",
    "improvement",
    "displacement",
    "accepted",
    "cuts",
    "backend_iterations",
    "lambda",
    "status",
];

pub const TIMING_COLUMNS: [&str; 3] = ["iteration", "phase", "wall_ms"];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot serialize summary: {0}")]
    Json(#[from] serde_json::Error),
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), OutputError> {
    let io = |source| OutputError::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn axis_names(d: usize) -> Vec<String> {
    if d <= 3 {
        ["x", "y", "z"][..d].iter().map(|s| s.to_string()).collect()
    } else {
        (0..d).map(|k| k.to_string()).collect()
    }
}

pub fn trajectory_columns(d: usize) -> Vec<String> {
    let axes = axis_names(d);
    let mut cols = vec!["step".to_string(), "t".to_string()];
    for prefix in ["p", "v", "u"] {
        cols.extend(axes.iter().map(|a| format!("{prefix}_{a}")));
    }
    cols.push("fuel".into());
    cols
}

/// One row per step: time, position, velocity, and the control applied from
/// that step with its norm. The last step has no control; its `u` and `fuel`
/// fields are empty.
pub fn trajectory_csv(z: &StackedVariable, params: &MultirotorParams) -> String {
    let d = params.dim();
    let dt = params.time_step();
    let layout = z.layout();
    let mut out = trajectory_columns(d).join(",");
    out.push('\n');
    for i in 0..layout.horizon {
        let mut row = vec![i.to_string(), num(i as f64 * dt)];
        row.extend(z.state_at(i).iter().map(|&v| num(v)));
        if i < layout.num_controls() {
            let u = z.control_at(i);
            row.extend(u.iter().map(|&v| num(v)));
            row.push(num(u.norm()));
        } else {
            row.extend(std::iter::repeat_n(String::new(), d + 1));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Row 0 is the starting iterate; row `k` is the `k`-th subproblem, with
/// `penalty` the value after the step (unchanged if it was rejected).
pub fn history_csv(report: &SolveReport) -> String {
    let mut out = HISTORY_COLUMNS.join(",");
    out.push('\n');
    let p = &report.penalty_history;
    let _ = writeln!(out, "0,{},,,,,,,,", num(p[0]));
    let mut current = 0;
    for (k, r) in report.iterations.iter().enumerate() {
        let before = p[current];
        if r.accepted {
            current += 1;
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            k + 1,
            num(p[current]),
            num(r.subproblem_value),
            num(before - r.subproblem_value),
            num(r.step_norm),
            r.accepted,
            r.cuts,
            r.backend_iterations,
            num(r.lambda),
            r.status.name(),
        );
    }
    out
}

pub fn timing_csv(report: &SolveReport) -> String {
    let mut out = TIMING_COLUMNS.join(",");
    out.push('\n');
    let _ = writeln!(out, "0,initialization,{}", num(report.initialization_seconds * 1e3));
    for (k, r) in report.iterations.iter().enumerate() {
        let _ = writeln!(out, "{},subproblem,{}", k + 1, num(r.seconds * 1e3));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub termination: String,
    pub converged: bool,
    pub failure: Option<String>,
    /// Subproblems solved by the main loop.
    pub iterations: usize,
    pub accepted_iterations: usize,
    pub initialization_used: bool,
    pub initialization_displacement: Option<f64>,
    /// `P` of the supplied guess (before any initialization).
    pub guess_cost: f64,
    /// `P` of the first iterate (after initialization).
    pub initial_cost: f64,
    pub final_cost: f64,
    /// `Σ‖u_i‖` of the final trajectory.
    pub total_fuel: f64,
    pub fixed_point_residual: Option<f64>,
    pub rate_ratios: Option<Vec<f64>>,
    pub superlinear_signature: Option<bool>,
    pub max_dynamics_defect: f64,
    pub min_obstacle_value: Option<f64>,
    pub epsilon: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Summary {
    pub fn new(
        scenario: &str,
        report: &SolveReport,
        guess_cost: f64,
        fixed_point_residual: Option<f64>,
    ) -> Result<Self, scvx_core::DriverError> {
        let z = report.final_iterate();
        let layout = z.layout();
        let rates = if report.converged() { convergence_rate_diagnostics(report).ok() } else { None };
        let problem = &report.problem;
        Ok(Self {
            scenario: scenario.to_string(),
            termination: report.termination.name().to_string(),
            converged: report.termination == TerminationReason::Converged,
            failure: report.failure.clone(),
            iterations: report.num_subproblems(),
            accepted_iterations: report.iterates.len() - 1,
            initialization_used: report.initialization_used,
            initialization_displacement: report.initialization.as_ref().map(|o| o.displacement),
            guess_cost,
            initial_cost: report.penalty_history[0],
            final_cost: report.final_penalty(),
            total_fuel: (0..layout.num_controls()).map(|i| z.control_at(i).norm()).sum(),
            fixed_point_residual,
            superlinear_signature: rates.as_ref().map(|r| r.superlinear_signature),
            rate_ratios: rates.map(|r| r.ratios),
            max_dynamics_defect: dynamics_defect(z, problem)?.amax(),
            min_obstacle_value: if problem.obstacles().is_empty() {
                None
            } else {
                Some(problem.min_obstacle_value(z)?)
            },
            epsilon: report.config.epsilon,
            lambda: report.objective.lambda(),
            seed: report.config.seed,
        })
    }
}

/// Whitespace-separated columns for gnuplot and friends.
pub fn plot_trajectory(z: &StackedVariable, params: &MultirotorParams) -> String {
    let d = params.dim();
    let axes = axis_names(d);
    let mut out = format!("# t {}\n", axes.iter().map(|a| format!("p_{a}")).collect::<Vec<_>>().join(" "));
    for i in 0..z.layout().horizon {
        let p: Vec<String> = z.state_at(i).iter().take(d).map(|&v| num(v)).collect();
        let _ = writeln!(out, "{} {}", num(i as f64 * params.time_step()), p.join(" "));
    }
    out
}

/// Penalty and distance to the final iterate for every accepted iterate.
pub fn plot_convergence(report: &SolveReport) -> String {
    let z_star = report.final_iterate();
    let mut out = String::from("# k penalty distance_to_final\n");
    for (k, (z, p)) in report.iterates.iter().zip(&report.penalty_history).enumerate() {
        let _ = writeln!(out, "{k} {} {}", num(*p), num(z.distance(z_star)));
    }
    out
}
