//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line even when all of them pass.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Rotation3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scvx_cli::output::{HISTORY_FILE, TRAJECTORY_FILE};
use scvx_cli::run::{solve, SolveOptions};
use scvx_cli::scenario::load_scenario;
use scvx_core::{
    convergence_rate_diagnostics, dynamics_defect, fixed_point_residual, infeasible_initialization, is_feasible,
    scvx_fast, ClarabelBackend, ConvexSet, ConvexifyOptions, Ellipsoid, SolveReport,
};

const SCENARIOS: [&str; 3] = ["obstacle_free", "two_obstacle_2d", "table1"];
const GOLDEN_TABLE1_COST: f64 = 1.8642414361809628e2;
const GOLDEN_TABLE1_ITERATIONS: usize = 4;

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

struct Run {
    name: &'static str,
    report: SolveReport,
    seconds: f64,
}

fn run(name: &'static str) -> Run {
    let scenario = load_scenario(&bundled(name)).expect("bundled scenario loads");
    let start = Instant::now();
    let report = scvx_fast(&scenario.problem, &scenario.z0, &scenario.config).expect("solve runs");
    Run { name, report, seconds: start.elapsed().as_secs_f64() }
}

type Check = Result<String, String>;

fn monotone(runs: &[Run]) -> Check {
    let mut notes = Vec::new();
    for r in runs {
        if !r.report.converged() {
            return Err(format!("{} terminated with {}", r.name, r.report.termination.name()));
        }
        if r.seconds > 10.0 {
            return Err(format!("{} took {:.2} s", r.name, r.seconds));
        }
        let p = &r.report.penalty_history;
        if let Some(k) = (1..p.len()).find(|&k| p[k] > p[k - 1] + 1e-8) {
            return Err(format!("{}: P rose from {} to {} at accepted iterate {k}", r.name, p[k - 1], p[k]));
        }
        notes.push(format!("{} {:.3} s", r.name, r.seconds));
    }
    Ok(notes.join(", "))
}

fn feasible_iterates(runs: &[Run]) -> Check {
    let (mut worst_h, mut worst_defect) = (f64::INFINITY, 0f64);
    for r in runs {
        let problem = &r.report.problem;
        for (k, z) in r.report.iterates.iter().enumerate() {
            let h = problem.min_obstacle_value(z).unwrap();
            let defect = dynamics_defect(z, problem).unwrap().amax();
            if h < -1e-6 || defect > 1e-6 {
                return Err(format!("{} iterate {k}: obstacle row {h:e}, defect {defect:e}", r.name));
            }
            worst_h = worst_h.min(h);
            worst_defect = worst_defect.max(defect);
        }
    }
    Ok(format!("min obstacle row {worst_h:.3e}, max defect {worst_defect:.3e}"))
}

fn randomized_guesses() -> Check {
    let backend = ClarabelBackend::default();
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for name in ["two_obstacle_2d", "table1"] {
        let scenario = load_scenario(&bundled(name)).unwrap();
        let problem = &scenario.problem;
        let options = ConvexifyOptions { mode: scenario.config.objective_for(problem).unwrap().mode(), seed: 0 };
        for seed in 0..20 {
            let z0 = scenario.params.perturbed_guess(problem, seed);
            if is_feasible(&z0, problem, options.mode, 1e-6).unwrap() {
                return Err(format!("{name} seed {seed}: guess is already feasible"));
            }
            let out = infeasible_initialization(&z0, problem, &options, &backend)
                .map_err(|e| format!("{name} seed {seed}: {e}"))?;
            let h = problem.min_obstacle_value(&out.z).unwrap();
            let defect = dynamics_defect(&out.z, problem).unwrap().amax();
            if h < -1e-6 || defect > 1e-6 {
                return Err(format!("{name} seed {seed}: obstacle row {h:e}, defect {defect:e}"));
            }
            worst = worst.min(h);
            count += 1;
        }
    }
    Ok(format!("{count} guesses, min obstacle row {worst:.3e}"))
}

/// A keep-out set together with a parametrization of its boundary.
enum Shape {
    /// `center + L s` with `‖s‖ = 1`.
    Ellipsoid {
        center: DVector<f64>,
        l: DMatrix<f64>,
    },
    Box {
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
}

/// A random set, its boundary, its center and a radius that encloses it.
fn random_shape(rng: &mut ChaCha8Rng, dim: usize, kind: usize) -> (ConvexSet, Shape, DVector<f64>, f64) {
    let center = DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0));
    match kind {
        0 | 1 => {
            let semi = if kind == 0 {
                DVector::from_fn(dim, |_, _| rng.gen_range(0.3..2.0))
            } else {
                DVector::from_element(dim, rng.gen_range(0.3..2.0))
            };
            let rotation = if dim == 2 {
                let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()])
            } else {
                let axis = nalgebra::Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let r = Rotation3::new(axis.normalize() * rng.gen_range(0.0..std::f64::consts::PI));
                DMatrix::from_iterator(3, 3, r.matrix().iter().copied())
            };
            let l = &rotation * DMatrix::from_diagonal(&semi);
            let set = if kind == 1 {
                ConvexSet::ball(center.clone(), semi[0]).unwrap()
            } else {
                let inv = DMatrix::from_diagonal(&semi.map(|s| 1.0 / (s * s)));
                ConvexSet::Ellipsoid(
                    Ellipsoid::from_center_matrix(&center, &(&rotation * inv * rotation.transpose())).unwrap(),
                )
            };
            (set, Shape::Ellipsoid { center: center.clone(), l }, center, semi.max())
        }
        _ => {
            let half = DVector::from_fn(dim, |_, _| rng.gen_range(0.15..1.0));
            let (lo, hi) = (&center - &half, &center + &half);
            (ConvexSet::aabb(&lo, &hi).unwrap(), Shape::Box { lo, hi }, center, half.norm())
        }
    }
}

/// Coordinate pattern search from `start`, shrinking the step until it
/// falls below `1e-12`.
fn pattern_search(mut x: Vec<f64>, step: f64, f: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let mut best = f(&x);
    let mut h = step;
    while h > 1e-12 {
        let mut improved = false;
        for k in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut trial = x.clone();
                trial[k] += sign * h;
                let v = f(&trial);
                if v < best {
                    (x, best, improved) = (trial, v, true);
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (x, best)
}

/// Distance from `z` to the boundary by dense sampling followed by local
/// refinement; returns the distance and the boundary point.
fn boundary_oracle(shape: &Shape, z: &DVector<f64>) -> (f64, DVector<f64>) {
    let dim = z.len();
    match shape {
        Shape::Ellipsoid { center, l } => {
            let point = |s: &[f64]| {
                let s = DVector::from_column_slice(s);
                center + l * (&s / s.norm())
            };
            let dist = |s: &[f64]| (point(s) - z).norm();
            let mut samples = Vec::new();
            if dim == 2 {
                for k in 0..3600 {
                    let a = k as f64 * std::f64::consts::TAU / 3600.0;
                    samples.push(vec![a.cos(), a.sin()]);
                }
            } else {
                for i in 0..120 {
                    let polar = (i as f64 + 0.5) * std::f64::consts::PI / 120.0;
                    for j in 0..240 {
                        let az = j as f64 * std::f64::consts::TAU / 240.0;
                        samples.push(vec![polar.sin() * az.cos(), polar.sin() * az.sin(), polar.cos()]);
                    }
                }
            }
            let start = samples.into_iter().min_by(|a, b| dist(a).total_cmp(&dist(b))).unwrap();
            let (s, d) = pattern_search(start, 0.05, dist);
            (d, point(&s))
        }
        Shape::Box { lo, hi } => {
            let mut best = (f64::INFINITY, z.clone());
            // Each face fixes one coordinate at a bound; the rest range over the face.
            for axis in 0..dim {
                for bound in [lo[axis], hi[axis]] {
                    let free: Vec<usize> = (0..dim).filter(|&k| k != axis).collect();
                    let point = |t: &[f64]| {
                        let mut p = DVector::from_element(dim, 0.0);
                        p[axis] = bound;
                        for (j, &k) in free.iter().enumerate() {
                            p[k] = t[j].clamp(lo[k], hi[k]);
                        }
                        p
                    };
                    let dist = |t: &[f64]| (point(t) - z).norm();
                    let n: usize = if dim == 2 { 400 } else { 60 };
                    let mut start = vec![0.0; free.len()];
                    let mut start_d = f64::INFINITY;
                    let grid = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / n as f64;
                    let total = (n + 1).pow(free.len() as u32);
                    for idx in 0..total {
                        let mut rest = idx;
                        let t: Vec<f64> = free
                            .iter()
                            .map(|&k| {
                                let i = rest % (n + 1);
                                rest /= n + 1;
                                grid(k, i)
                            })
                            .collect();
                        let d = dist(&t);
                        if d < start_d {
                            (start, start_d) = (t, d);
                        }
                    }
                    let (t, d) = pattern_search(start, 0.02, dist);
                    if d < best.0 {
                        best = (d, point(&t));
                    }
                }
            }
            best
        }
    }
}

/// Collinearity error between the outward normal cone at `p` and `z − p`.
fn kkt_error(set: &ConvexSet, shape: &Shape, p: &DVector<f64>, z: &DVector<f64>) -> f64 {
    let d = (z - p).normalize();
    match shape {
        Shape::Ellipsoid { .. } => {
            let g = set.gradient(p).unwrap().normalize();
            (g - d).norm()
        }
        // `d` must vanish along free coordinates and point outward at active bounds.
        Shape::Box { lo, hi } => (0..p.len())
            .map(|k| {
                let scale = 1e-9 * (1.0 + hi[k].abs().max(lo[k].abs()));
                if (p[k] - hi[k]).abs() <= scale {
                    (-d[k]).max(0.0)
                } else if (p[k] - lo[k]).abs() <= scale {
                    d[k].max(0.0)
                } else {
                    d[k].abs()
                }
            })
            .fold(0.0, f64::max),
    }
}

fn projection_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut worst_distance, mut worst_kkt) = (0f64, 0f64);
    for pair in 0..200 {
        let dim = if pair % 2 == 0 { 2 } else { 3 };
        let (set, shape, center, extent) = random_shape(&mut rng, dim, (pair / 2) % 3);
        let direction = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)).normalize();
        let z = &center + direction * extent * rng.gen_range(1.05..3.0);
        let result = set.project(&z).map_err(|e| format!("pair {pair}: {e}"))?;
        let (oracle, _) = boundary_oracle(&shape, &z);
        let distance_error = (result.distance - oracle).abs();
        let kkt = kkt_error(&set, &shape, &result.projection, &z);
        if distance_error > 1e-5 || kkt > 1e-6 {
            return Err(format!(
                "pair {pair} ({dim}-D): distance {} vs oracle {oracle}, KKT error {kkt:e}",
                result.distance
            ));
        }
        worst_distance = worst_distance.max(distance_error);
        worst_kkt = worst_kkt.max(kkt);
    }
    Ok(format!("200 pairs, max distance error {worst_distance:.3e}, max KKT error {worst_kkt:.3e}"))
}

fn fixed_points(runs: &[Run]) -> Check {
    let mut notes = Vec::new();
    for r in runs {
        let fpr = fixed_point_residual(&r.report).map_err(|e| format!("{}: {e}", r.name))?;
        let bound = 10.0 * r.report.config.epsilon;
        if fpr > bound {
            return Err(format!("{}: residual {fpr:e} > {bound:e}", r.name));
        }
        notes.push(format!("{} {fpr:.3e}", r.name));
    }
    Ok(notes.join(", "))
}

fn superlinear(table1: &Run) -> Check {
    let rates = convergence_rate_diagnostics(&table1.report).map_err(|e| e.to_string())?;
    let cost = table1.report.final_penalty();
    let iterations = table1.report.num_subproblems();
    if !rates.superlinear_signature {
        return Err(format!("ratios {:?} are not strictly decreasing", rates.ratios));
    }
    if (cost - GOLDEN_TABLE1_COST).abs() > 1e-6 {
        return Err(format!("final cost {cost} differs from {GOLDEN_TABLE1_COST}"));
    }
    if iterations != GOLDEN_TABLE1_ITERATIONS {
        return Err(format!("{iterations} iterations, expected {GOLDEN_TABLE1_ITERATIONS}"));
    }
    Ok(format!("ratios {:.4?}, cost {cost}, {iterations} iterations", rates.ratios))
}

fn iteration_budget(table1: &Run) -> Check {
    let n = table1.report.num_subproblems();
    let slowest = table1.report.iterations.iter().map(|r| r.seconds).fold(0.0, f64::max);
    if n > 25 || slowest >= 1.0 {
        return Err(format!("{n} iterations, slowest subproblem {slowest:.3} s"));
    }
    Ok(format!("{n} iterations, slowest subproblem {:.1} ms", slowest * 1e3))
}

fn reproducible() -> Check {
    let mut notes = Vec::new();
    for name in SCENARIOS {
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for dir in &dirs {
            let options = SolveOptions { out: dir.path().to_path_buf(), ..Default::default() };
            solve(&bundled(name), &options, &mut std::io::sink()).map_err(|e| format!("{name}: {e:#}"))?;
        }
        for file in [HISTORY_FILE, TRAJECTORY_FILE] {
            let a = fs::read(dirs[0].path().join(file)).unwrap();
            let b = fs::read(dirs[1].path().join(file)).unwrap();
            if a != b {
                return Err(format!("{name}: {file} differs between runs"));
            }
        }
        notes.push(name);
    }
    Ok(format!("history and trajectory identical for {}", notes.join(", ")))
}

fn main() -> ExitCode {
    let runs: Vec<Run> = SCENARIOS.iter().map(|&n| run(n)).collect();
    let table1 = &runs[2];
    let results: [(&str, Check); 8] = [
        ("monotone penalty on every bundled scenario", monotone(&runs)),
        ("iterates stay obstacle-free and dynamically feasible", feasible_iterates(&runs)),
        ("randomized infeasible guesses initialize", randomized_guesses()),
        ("projections match the boundary-sampling oracle", projection_oracle()),
        ("converged points are fixed points", fixed_points(&runs)),
        ("superlinear rates and golden table1 result", superlinear(table1)),
        ("table1 iteration and time budget", iteration_budget(table1)),
        ("byte-identical artifacts across runs", reproducible()),
    ];
    let mut failed = 0;
    for (k, (label, result)) in results.iter().enumerate() {
        match result {
            Ok(note) => println!("PASS {} {label}: {note}", k + 1),
            Err(note) => {
                failed += 1;
                println!("FAIL {} {label}: {note}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
