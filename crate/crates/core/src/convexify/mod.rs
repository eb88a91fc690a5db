//! The convexified region `F_z = {y ∈ Y | l(y, z) ≥ 0}` around a feasible
//! iterate, and the one-shot initialization that produces such an iterate.

mod init;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{ConvexSet, GeometryError, ProjectionResult};
use crate::problem::{
    AffineExpr, ConicFunction, Domain, Layout, PenaltyMode, ProblemDefinition, ProblemError, StackedVariable,
};
use crate::subproblem::SubproblemError;

pub use init::{infeasible_initialization, is_feasible, merge_intersecting, InitializationOutcome};

/// Tolerance of [`contains`] on cut slacks and domain constraints.
pub const CONTAINS_TOL: f64 = 1e-8;
/// How deep (signed distance) an iterate may sit inside an obstacle and still
/// be convexified around; matches the iterate feasibility tolerance.
pub const ITERATE_TOL: f64 = 1e-6;
/// Size of the symmetry-breaking perturbation applied to projection ties.
pub const TIE_PERTURBATION: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ConvexifyError {
    #[error(
        "iterate is inside obstacle {obstacle} at step {step} (signed distance {depth:e}); \
         run infeasible initialization first"
    )]
    InfeasibleIterate { step: usize, obstacle: usize, depth: f64 },
    #[error("iterate violates dynamics row {row} (g = {value:e} < 0) in penalized mode")]
    DynamicsViolated { row: usize, value: f64 },
    #[error("no trajectory avoids the keep-out sets: {0}; separate the obstacles or move the endpoints")]
    ObstructedCorridor(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Subproblem(#[from] SubproblemError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct ConvexifyOptions {
    pub mode: PenaltyMode,
    /// Seed of the tie-breaking perturbations.
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutSource {
    /// Supporting halfspace of keep-out set `j`.
    Obstacle(usize),
    /// Linearization of dynamics defect row `j` (index into `g`).
    Dynamics(usize),
}

/// `expr(y) ≥ 0` in stacked coordinates, with a unit-norm gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionCut {
    pub step: usize,
    pub source: CutSource,
    pub expr: AffineExpr,
}

impl RegionCut {
    pub fn slack(&self, y: &StackedVariable) -> f64 {
        self.expr.evaluate(y.as_slice())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexifiedRegion {
    cuts: Vec<RegionCut>,
    domain: Domain,
    source_iterate: StackedVariable,
}

impl ConvexifiedRegion {
    /// Region with no cuts, only the domain `Y`.
    pub fn domain_only(problem: &ProblemDefinition, source: StackedVariable) -> Self {
        Self { cuts: Vec::new(), domain: problem.domain(), source_iterate: source }
    }

    pub fn cuts(&self) -> &[RegionCut] {
        &self.cuts
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn source_iterate(&self) -> &StackedVariable {
        &self.source_iterate
    }

    pub fn layout(&self) -> Layout {
        self.source_iterate.layout()
    }

    /// Smallest cut slack at `y` (`+∞` without cuts).
    pub fn min_slack(&self, y: &StackedVariable) -> f64 {
        self.cuts.iter().map(|c| c.slack(y)).fold(f64::INFINITY, f64::min)
    }
}

/// `y ∈ F_z` up to [`CONTAINS_TOL`].
pub fn contains(region: &ConvexifiedRegion, y: &StackedVariable) -> bool {
    contains_within(region, y, CONTAINS_TOL)
}

pub fn contains_within(region: &ConvexifiedRegion, y: &StackedVariable, tolerance: f64) -> bool {
    y.layout() == region.layout() && region.min_slack(y) >= -tolerance && region.domain.violation(y) <= tolerance
}

/// Builds `F_z`: for every free step `i` and obstacle `j` the supporting
/// halfspace at the projection of `x_i` onto obstacle `j`, plus (penalized
/// mode) the gradient linearization of every defect row at `z`.
///
/// Both cut families under-approximate their rows, so the region is inside
/// the feasible set; each cut passes through or below `z`, so `z` is in it.
pub fn project_and_convexify(
    z: &StackedVariable,
    problem: &ProblemDefinition,
    options: &ConvexifyOptions,
) -> Result<ConvexifiedRegion, ConvexifyError> {
    check_layout(z, problem)?;
    let mut cuts = Vec::new();
    for step in problem.free_steps() {
        let p = problem.position(z, step);
        for (j, obstacle) in problem.obstacles().iter().enumerate() {
            let depth = obstacle.signed_distance_estimate(&p)?;
            if depth < -ITERATE_TOL {
                return Err(ConvexifyError::InfeasibleIterate { step, obstacle: j, depth });
            }
            let cut = obstacle_cut(problem, obstacle, &p, step, j, options.seed)?;
            cuts.push(RegionCut { step, source: CutSource::Obstacle(j), expr: cut });
        }
    }
    if options.mode == PenaltyMode::Penalized {
        cuts.extend(dynamics_cuts(z, problem, true)?);
    }
    Ok(ConvexifiedRegion { cuts, domain: problem.domain(), source_iterate: z.clone() })
}

fn check_layout(z: &StackedVariable, problem: &ProblemDefinition) -> Result<(), ProblemError> {
    if z.layout() != *problem.layout() {
        return Err(ProblemError::DimensionMismatch {
            what: "stacked variable".into(),
            index: 0,
            expected: problem.layout().len(),
            found: z.as_slice().len(),
        });
    }
    Ok(())
}

/// Supporting cut of `obstacle` at the boundary point nearest `p`, lifted to
/// the state block of `step`.
pub(crate) fn obstacle_cut(
    problem: &ProblemDefinition,
    obstacle: &ConvexSet,
    p: &DVector<f64>,
    step: usize,
    obstacle_index: usize,
    seed: u64,
) -> Result<AffineExpr, ConvexifyError> {
    let boundary = nearest_boundary_tiebroken(obstacle, p, step, obstacle_index, seed)?;
    let normal =
        boundary.normal.as_ref().ok_or_else(|| GeometryError::InteriorPoint { point: p.iter().copied().collect() })?;
    let layout = problem.layout();
    let mut expr = AffineExpr::constant(-normal.dot(&boundary.projection));
    for (k, &coord) in problem.obstacle_coordinates().iter().enumerate() {
        expr = expr.term(layout.state_index(step, coord), normal[k]);
    }
    Ok(expr.canonical())
}

/// `nearest_boundary`, re-queried from a seeded `1e-6` perturbation of `p`
/// when the nearest boundary point is not unique.
fn nearest_boundary_tiebroken(
    set: &ConvexSet,
    p: &DVector<f64>,
    step: usize,
    obstacle: usize,
    seed: u64,
) -> Result<ProjectionResult, GeometryError> {
    match set.nearest_boundary(p) {
        Err(GeometryError::AmbiguousProjection { .. }) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((step as u64) << 32) | obstacle as u64);
            let mut last = None;
            for _ in 0..8 {
                let direction = loop {
                    let v = DVector::from_fn(p.len(), |_, _| rng.gen_range(-1.0..1.0));
                    let n: f64 = v.norm();
                    if n > 1e-3 && n <= 1.0 {
                        break v / n;
                    }
                };
                match set.nearest_boundary(&(p + direction * TIE_PERTURBATION)) {
                    Err(e @ GeometryError::AmbiguousProjection { .. }) => last = Some(e),
                    other => return other,
                }
            }
            Err(last.expect("at least one attempt"))
        }
        other => other,
    }
}

/// `g_j(z) + ∇g_j(z)ᵀ(y − z) ≥ 0` for every defect row, normalized. With
/// `require_feasible`, rows with `g_j(z) < −ITERATE_TOL` are an error.
pub(crate) fn dynamics_cuts(
    z: &StackedVariable,
    problem: &ProblemDefinition,
    require_feasible: bool,
) -> Result<Vec<RegionCut>, ConvexifyError> {
    let layout = *problem.layout();
    let y = z.as_slice();
    let mut cuts = Vec::with_capacity(layout.num_defects());
    for step in 0..layout.num_controls() {
        let rows: Vec<ConicFunction> =
            problem.dynamics().defect_rows(&layout, step).ok_or(SubproblemError::UnsupportedDynamics)?;
        for (j, row) in rows.iter().enumerate() {
            let index = step * layout.state_dim + j;
            let value = row.evaluate(y);
            if require_feasible && value < -ITERATE_TOL {
                return Err(ConvexifyError::DynamicsViolated { row: index, value });
            }
            let grad = row.subgradient(y);
            let norm = grad.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
            let mut expr = AffineExpr::constant(value);
            for &(i, c) in &grad {
                expr = expr.term(i, c);
                expr.constant -= c * y[i];
            }
            let expr = if norm > 0.0 { expr.scaled(1.0 / norm) } else { expr };
            cuts.push(RegionCut { step, source: CutSource::Dynamics(index), expr: expr.canonical() });
        }
    }
    Ok(cuts)
}
