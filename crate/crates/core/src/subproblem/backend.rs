use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::problem::AffineExpr;

use super::{ConicProgram, SolveStatus, SubproblemError};

/// Raw result of one backend call.
#[derive(Clone, Debug)]
pub struct BackendResult {
    pub status: SolveStatus,
    /// Primal solution (or best iterate), one entry per program variable.
    pub x: Vec<f64>,
    pub iterations: u32,
    pub solve_seconds: f64,
}

/// A conic solver able to handle linear equalities, linear inequalities and
/// second-order cones.
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &str;

    fn supports_soc(&self) -> bool;

    /// Solves with primal/dual feasibility and gap tolerances set to
    /// `tolerance`.
    fn solve_with_tolerance(&self, program: &ConicProgram, tolerance: f64) -> Result<BackendResult, SubproblemError>;
}

/// Interior-point backend on top of Clarabel.
#[derive(Clone, Debug)]
pub struct ClarabelBackend {
    pub max_iterations: u32,
    /// Optional diagonal variable scaling `x = D x̃`; identity when `None`.
    pub scaling: Option<Vec<f64>>,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { max_iterations: 200, scaling: None }
    }
}

struct Triplets {
    rows: usize,
    entries: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
}

impl Triplets {
    /// Appends the row `s = expr(x)`, i.e. `−aᵀx + s = c`.
    fn push(&mut self, expr: &AffineExpr, scale: &dyn Fn(usize) -> f64) {
        for (i, c) in expr.canonical().terms {
            self.entries.push((self.rows, i, -c * scale(i)));
        }
        self.rhs.push(expr.constant);
        self.rows += 1;
    }

    fn into_csc(mut self, cols: usize) -> CscMatrix<f64> {
        self.entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut colptr = vec![0usize; cols + 1];
        let mut rowval = Vec::with_capacity(self.entries.len());
        let mut nzval = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            colptr[c + 1] += 1;
            rowval.push(r);
            nzval.push(v);
        }
        for c in 0..cols {
            colptr[c + 1] += colptr[c];
        }
        CscMatrix::new(self.rows, cols, colptr, rowval, nzval)
    }
}

impl SolverBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn supports_soc(&self) -> bool {
        true
    }

    fn solve_with_tolerance(&self, program: &ConicProgram, tolerance: f64) -> Result<BackendResult, SubproblemError> {
        let n = program.num_vars;
        let scale = |i: usize| self.scaling.as_ref().and_then(|s| s.get(i).copied()).unwrap_or(1.0);

        let mut t = Triplets { rows: 0, entries: Vec::new(), rhs: Vec::new() };
        let mut cones = Vec::new();
        for e in &program.equalities {
            t.push(e, &scale);
        }
        if !program.equalities.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(program.equalities.len()));
        }
        for e in &program.inequalities {
            t.push(e, &scale);
        }
        if !program.inequalities.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(program.inequalities.len()));
        }
        for block in &program.soc_blocks {
            t.push(&block.head, &scale);
            for e in &block.tail {
                t.push(e, &scale);
            }
            cones.push(SupportedConeT::SecondOrderConeT(block.dim()));
        }
        let rhs = std::mem::take(&mut t.rhs);
        let a = t.into_csc(n);
        let q: Vec<f64> = (0..n).map(|i| program.linear_cost[i] * scale(i)).collect();
        let p = CscMatrix::zeros((n, n));

        let settings = DefaultSettings {
            verbose: false,
            max_iter: self.max_iterations,
            tol_feas: tolerance,
            tol_gap_abs: tolerance,
            tol_gap_rel: tolerance,
            ..DefaultSettings::default()
        };
        let start = Instant::now();
        let mut solver = DefaultSolver::new(&p, &q, &a, &rhs, &cones, settings)
            .map_err(|e| SubproblemError::Malformed(e.to_string()))?;
        solver.solve();
        let status = match solver.solution.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::NumericalLimit,
        };
        let x = solver.solution.x.iter().enumerate().map(|(i, v)| v * scale(i)).collect();
        Ok(BackendResult {
            status,
            x,
            iterations: solver.solution.iterations,
            solve_seconds: start.elapsed().as_secs_f64(),
        })
    }
}
