//! Successive convexification for discrete-time optimal control problems
//! whose non-convexity comes from convex keep-out zones and componentwise
//! convex dynamics.
//!
//! Each iteration projects the current trajectory onto every keep-out set,
//! replaces each set by the supporting halfspace at its projection point and
//! solves the resulting second-order cone program. No trust region is used:
//! the convexified region always contains the current iterate and is always
//! contained in the true feasible set, so the penalized cost decreases
//! monotonically.
//!
//! The crate is organised bottom-up:
//!
//! - [`problem`]: problem data, the stacked decision vector and the penalty objective.
//! - [`geometry`]: keep-out sets, Euclidean projection, supporting cuts, ellipsoidal covers.
//! - [`convexify`]: the convexified region around an iterate and infeasible initialization.
//! - [`subproblem`]: conic program assembly and the solver backend interface.
//! - [`driver`]: the outer loop and convergence diagnostics.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convexify;
pub mod driver;
pub mod geometry;
pub mod problem;
pub mod subproblem;

#[cfg(test)]
pub(crate) mod fixtures;

pub use convexify::{
    contains, contains_within, infeasible_initialization, is_feasible, merge_intersecting, project_and_convexify,
    ConvexifiedRegion, ConvexifyError, ConvexifyOptions, CutSource, InitializationOutcome, RegionCut,
};
pub use driver::{
    convergence_rate_diagnostics, fixed_point_residual, scvx_fast, scvx_fast_with_backend, BackendKind, DriverError,
    IterationRecord, RateTable, Selection, SolveReport, SolverConfig, TerminationReason,
};
pub use geometry::{
    intersects, mvee_cover, supporting_cut, ConvexSet, Ellipsoid, GeometryError, HalfspaceCut, Polytope,
    ProjectionResult,
};
pub use problem::{
    discretize_double_integrator, dynamics_defect, evaluate_penalty, stack, AdmissibleSet, AffineExpr,
    BoundaryConditions, ConicFunction, ConstraintStack, CostModel, Domain, DynamicsModel, Layout, MultirotorParams,
    NormTerm, PenaltyMode, PenaltyObjective, ProblemDefinition, ProblemError, SetConstraint, StackedVariable,
};
pub use subproblem::{
    build, solve, ClarabelBackend, ConicProgram, SolveStatus, SolverBackend, SubproblemError, SubproblemSolution,
};
