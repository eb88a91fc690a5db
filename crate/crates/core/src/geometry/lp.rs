//! Small dense LPs `min cᵀx s.t. Gx ≤ h` for polytope validation.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, DVector};

use super::GeometryError;

pub(crate) enum LpOutcome {
    Optimal(DVector<f64>),
    Unbounded,
    Infeasible,
}

pub(crate) fn minimize(c: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> Result<LpOutcome, GeometryError> {
    let (m, n) = g.shape();
    let a = CscMatrix::new(
        m,
        n,
        (0..=n).map(|j| j * m).collect(),
        (0..n).flat_map(|_| 0..m).collect(),
        g.as_slice().to_vec(),
    );
    let p = CscMatrix::zeros((n, n));
    let settings = DefaultSettings { verbose: false, ..DefaultSettings::default() };
    let mut solver =
        DefaultSolver::new(&p, c.as_slice(), &a, h.as_slice(), &[SupportedConeT::NonnegativeConeT(m)], settings)
            .map_err(|e| GeometryError::Lp(e.to_string()))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            Ok(LpOutcome::Optimal(DVector::from_vec(solver.solution.x.clone())))
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Ok(LpOutcome::Unbounded),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Ok(LpOutcome::Infeasible),
        other => Err(GeometryError::Lp(format!("{other:?}"))),
    }
}
