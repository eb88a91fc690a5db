use nalgebra::DVector;

use crate::geometry::{intersects, mvee_cover, ConvexSet};
use crate::problem::{dynamics_defect, AffineExpr, PenaltyMode, ProblemDefinition, StackedVariable};
use crate::subproblem::{solve, ConeKind, ConicProgram, SocBlock, SolverBackend, SubproblemError};

use super::{check_layout, dynamics_cuts, obstacle_cut, ConvexifyError, ConvexifyOptions, CONTAINS_TOL};

/// Cuts of the initialization projection are shifted outward by this much so
/// that backend round-off cannot leave a state on the wrong side.
const INIT_CUT_MARGIN: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct InitializationOutcome {
    pub z: StackedVariable,
    /// `false` when the input was already feasible and returned unchanged.
    pub changed: bool,
    /// Keep-out sets the cuts were taken from: the obstacles, with every
    /// group of mutually intersecting obstacles replaced by one ellipsoid.
    pub cover_sets: Vec<ConvexSet>,
    /// Original obstacle indices behind each entry of `cover_sets`.
    pub groups: Vec<Vec<usize>>,
    /// `(step, obstacle)` rows with negative membership value at the input.
    pub violated_rows: Vec<(usize, usize)>,
    /// `‖z − z0‖₂`.
    pub displacement: f64,
}

/// `z ∈ F`: obstacle rows at least `−tolerance` at every step, domain within
/// `tolerance`, and the dynamics satisfied per `mode`.
pub fn is_feasible(
    z: &StackedVariable,
    problem: &ProblemDefinition,
    mode: PenaltyMode,
    tolerance: f64,
) -> Result<bool, ConvexifyError> {
    check_layout(z, problem)?;
    if problem.min_obstacle_value(z)? < -tolerance || problem.domain_violation(z) > tolerance {
        return Ok(false);
    }
    let g = dynamics_defect(z, problem)?;
    let scale = 1.0 + z.as_vector().amax();
    Ok(match mode {
        PenaltyMode::HardEquality => g.amax() <= tolerance * scale,
        PenaltyMode::Penalized => g.iter().all(|&v| v >= -tolerance * scale),
    })
}

/// Moves an arbitrary trajectory into the feasible set in one projection.
///
/// Mutually intersecting obstacles are first merged under a covering
/// ellipsoid. Every free state then gets the supporting halfspace at its
/// nearest boundary point of every cover set (for states inside a set, the
/// tangent at the closest exit), and `z0` is projected in the Euclidean norm
/// onto those halfspaces intersected with the domain, the pins and the
/// dynamics. The result lies outside every cover set, hence outside every
/// obstacle.
pub fn infeasible_initialization(
    z0: &StackedVariable,
    problem: &ProblemDefinition,
    options: &ConvexifyOptions,
    backend: &dyn SolverBackend,
) -> Result<InitializationOutcome, ConvexifyError> {
    check_layout(z0, problem)?;
    let violated_rows = violated_rows(z0, problem)?;
    if is_feasible(z0, problem, options.mode, CONTAINS_TOL)? {
        return Ok(InitializationOutcome {
            z: z0.clone(),
            changed: false,
            cover_sets: problem.obstacles().to_vec(),
            groups: (0..problem.obstacles().len()).map(|j| vec![j]).collect(),
            violated_rows,
            displacement: 0.0,
        });
    }

    let (cover_sets, groups) = merge_intersecting(problem.obstacles())?;
    let covered = problem.with_obstacles(cover_sets.clone()).map_err(|e| {
        ConvexifyError::ObstructedCorridor(format!("the cover of intersecting obstacles swallows an endpoint ({e})"))
    })?;

    let layout = *problem.layout();
    let mut program = ConicProgram::empty(layout);
    let t = program.add_variable(1.0);
    program.soc_blocks.push(SocBlock {
        kind: ConeKind::Epigraph,
        head: AffineExpr::var(t),
        tail: (0..layout.len()).map(|i| AffineExpr::var(i).plus_constant(-z0.as_slice()[i])).collect(),
    });
    program.add_boundary_pins(problem);
    if options.mode == PenaltyMode::HardEquality {
        program.add_dynamics_equalities(problem)?;
    } else {
        program.inequalities.extend(dynamics_cuts(z0, problem, false)?.into_iter().map(|c| c.expr));
    }
    program.add_domain(problem);
    for step in problem.free_steps() {
        let p = problem.position(z0, step);
        for (j, set) in covered.obstacles().iter().enumerate() {
            let cut = obstacle_cut(&covered, set, &p, step, j, options.seed)?;
            program.inequalities.push(cut.plus_constant(-INIT_CUT_MARGIN));
        }
    }

    let solution = match solve(&program, backend) {
        Err(SubproblemError::Infeasible) => {
            return Err(ConvexifyError::ObstructedCorridor(
                "the halfspaces separating the states from the obstacles leave no admissible trajectory".into(),
            ))
        }
        other => other?,
    };
    let mut z = solution.y_opt;
    let last = layout.horizon - 1;
    z.set_state(0, &problem.boundary().initial);
    z.set_state(last, &problem.boundary().terminal);
    let displacement = z.distance(z0);
    Ok(InitializationOutcome { z, changed: true, cover_sets, groups, violated_rows, displacement })
}

fn violated_rows(z: &StackedVariable, problem: &ProblemDefinition) -> Result<Vec<(usize, usize)>, ConvexifyError> {
    let mut rows = Vec::new();
    for step in 0..problem.layout().horizon {
        let p: DVector<f64> = problem.position(z, step);
        for (j, obstacle) in problem.obstacles().iter().enumerate() {
            if obstacle.membership_value(&p)? < 0.0 {
                rows.push((step, j));
            }
        }
    }
    Ok(rows)
}

/// Replaces every connected group of intersecting sets by its covering
/// ellipsoid, repeating until no two resulting sets intersect. Returns the
/// sets and, for each, the input indices it stands for.
pub fn merge_intersecting(obstacles: &[ConvexSet]) -> Result<(Vec<ConvexSet>, Vec<Vec<usize>>), ConvexifyError> {
    let mut sets = obstacles.to_vec();
    let mut groups: Vec<Vec<usize>> = (0..obstacles.len()).map(|j| vec![j]).collect();
    loop {
        let n = sets.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut merged_any = false;
        for a in 0..n {
            for b in a + 1..n {
                if intersects(&sets[a], &sets[b])? {
                    let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                    if ra != rb {
                        parent[rb.max(ra)] = ra.min(rb);
                    }
                    merged_any = true;
                }
            }
        }
        if !merged_any {
            return Ok((sets, groups));
        }
        let mut next_sets = Vec::new();
        let mut next_groups = Vec::new();
        for r in 0..n {
            let members: Vec<usize> = (0..n).filter(|&i| root(&mut parent, i) == r).collect();
            if members.is_empty() {
                continue;
            }
            let mut group: Vec<usize> = members.iter().flat_map(|&i| groups[i].iter().copied()).collect();
            group.sort_unstable();
            if members.len() == 1 {
                next_sets.push(sets[members[0]].clone());
            } else {
                let parts: Vec<ConvexSet> = members.iter().map(|&i| sets[i].clone()).collect();
                next_sets.push(mvee_cover(&parts)?);
            }
            next_groups.push(group);
        }
        sets = next_sets;
        groups = next_groups;
    }
}
