use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{AffineExpr, ConicFunction, Layout, ProblemError};

/// `x_{i+1} = A x_i + B u_i + affine`, e.g. a zero-order-hold double
/// integrator with `affine = B·g` for a constant gravity input.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub affine: DVector<f64>,
}

impl LinearDynamics {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, affine: DVector<f64>) -> Result<Self, ProblemError> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || affine.len() != n || b.ncols() == 0 || n == 0 {
            return Err(ProblemError::Invalid(format!(
                "linear dynamics shapes A {}x{}, B {}x{}, affine {} are inconsistent",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                affine.len()
            )));
        }
        Ok(Self { a, b, affine })
    }

    /// Adds a constant offset to the input, `B(u + offset)`.
    pub fn with_input_offset(mut self, offset: &DVector<f64>) -> Self {
        self.affine += &self.b * offset;
        self
    }

    pub fn next_state(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.affine
    }
}

/// Dynamics `x_{i+1} - x_i = f(x_i, u_i)` whose every component `f_j` is
/// convex in `(x_i, u_i)`.
pub trait ConvexDynamics: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    /// `f(x, u)`.
    fn evaluate(&self, x: &[f64], u: &[f64]) -> DVector<f64>;
    /// Generalized Jacobian of `f`, `n × (n + m)` over `(x, u)`.
    fn jacobian(&self, x: &[f64], u: &[f64]) -> DMatrix<f64>;
    /// Per-component convexity declaration.
    fn convex_components(&self) -> Vec<bool>;
    /// Each `f_j` as a conic function over the local vector `(x, u)` with
    /// indices `0..n+m`, if it has one. Required to solve subproblems.
    fn conic_form(&self) -> Option<Vec<ConicFunction>> {
        None
    }
}

/// Componentwise convex dynamics given directly in conic form.
#[derive(Clone, Debug, PartialEq)]
pub struct SocDynamics {
    state_dim: usize,
    control_dim: usize,
    rows: Vec<ConicFunction>,
}

impl SocDynamics {
    pub fn new(state_dim: usize, control_dim: usize, rows: Vec<ConicFunction>) -> Result<Self, ProblemError> {
        if rows.len() != state_dim {
            return Err(ProblemError::DimensionMismatch {
                what: "dynamics rows".into(),
                index: 0,
                expected: state_dim,
                found: rows.len(),
            });
        }
        for (j, row) in rows.iter().enumerate() {
            if row.max_index().is_some_and(|i| i >= state_dim + control_dim) {
                return Err(ProblemError::Invalid(format!("dynamics row {j} references a variable outside (x, u)")));
            }
            if row.norms.iter().any(|t| t.weight < 0.0) {
                return Err(ProblemError::Invalid(format!(
                    "dynamics row {j} has a negative norm weight and is not convex"
                )));
            }
        }
        Ok(Self { state_dim, control_dim, rows })
    }

    fn local(x: &[f64], u: &[f64]) -> Vec<f64> {
        x.iter().chain(u).copied().collect()
    }
}

impl ConvexDynamics for SocDynamics {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn control_dim(&self) -> usize {
        self.control_dim
    }

    fn evaluate(&self, x: &[f64], u: &[f64]) -> DVector<f64> {
        let v = Self::local(x, u);
        DVector::from_iterator(self.state_dim, self.rows.iter().map(|r| r.evaluate(&v)))
    }

    fn jacobian(&self, x: &[f64], u: &[f64]) -> DMatrix<f64> {
        let v = Self::local(x, u);
        let mut jac = DMatrix::zeros(self.state_dim, self.state_dim + self.control_dim);
        for (j, row) in self.rows.iter().enumerate() {
            for (k, g) in row.subgradient(&v) {
                jac[(j, k)] = g;
            }
        }
        jac
    }

    fn convex_components(&self) -> Vec<bool> {
        vec![true; self.state_dim]
    }

    fn conic_form(&self) -> Option<Vec<ConicFunction>> {
        Some(self.rows.clone())
    }
}

#[derive(Clone, Debug)]
pub enum DynamicsModel {
    LinearZoh(LinearDynamics),
    ComponentwiseConvex(Arc<dyn ConvexDynamics>),
}

impl DynamicsModel {
    pub fn state_dim(&self) -> usize {
        match self {
            Self::LinearZoh(lin) => lin.a.nrows(),
            Self::ComponentwiseConvex(f) => f.state_dim(),
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            Self::LinearZoh(lin) => lin.b.ncols(),
            Self::ComponentwiseConvex(f) => f.control_dim(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::LinearZoh(_))
    }

    pub fn as_linear(&self) -> Option<&LinearDynamics> {
        match self {
            Self::LinearZoh(lin) => Some(lin),
            Self::ComponentwiseConvex(_) => None,
        }
    }

    /// `f(x, u) = x_{i+1} - x_i`.
    pub fn increment(&self, x: &[f64], u: &[f64]) -> DVector<f64> {
        match self {
            Self::LinearZoh(lin) => {
                let x = DVector::from_column_slice(x);
                let u = DVector::from_column_slice(u);
                lin.next_state(&x, &u) - x
            }
            Self::ComponentwiseConvex(f) => f.evaluate(x, u),
        }
    }

    /// Generalized Jacobian of `f` over `(x, u)`.
    pub fn jacobian(&self, x: &[f64], u: &[f64]) -> DMatrix<f64> {
        match self {
            Self::LinearZoh(lin) => {
                let n = lin.a.nrows();
                let mut jac = DMatrix::zeros(n, n + lin.b.ncols());
                jac.view_mut((0, 0), (n, n)).copy_from(&(&lin.a - DMatrix::identity(n, n)));
                jac.view_mut((0, n), (n, lin.b.ncols())).copy_from(&lin.b);
                jac
            }
            Self::ComponentwiseConvex(f) => f.jacobian(x, u),
        }
    }

    /// The defect rows `g_{i,j}(y) = f_j(x_i, u_i) - x_{i+1,j} + x_{i,j}` of
    /// step `step` as conic functions in stacked coordinates, or `None` when
    /// the dynamics have no conic form.
    pub fn defect_rows(&self, layout: &Layout, step: usize) -> Option<Vec<ConicFunction>> {
        let n = layout.state_dim;
        let lift = move |k: usize| {
            if k < n {
                layout.state_index(step, k)
            } else {
                layout.control_index(step, k - n)
            }
        };
        let local_rows: Vec<ConicFunction> = match self {
            Self::LinearZoh(lin) => (0..n)
                .map(|j| {
                    let mut expr = AffineExpr::constant(lin.affine[j]);
                    for k in 0..n {
                        let coeff = lin.a[(j, k)] - if j == k { 1.0 } else { 0.0 };
                        if coeff != 0.0 {
                            expr.terms.push((k, coeff));
                        }
                    }
                    for k in 0..lin.b.ncols() {
                        if lin.b[(j, k)] != 0.0 {
                            expr.terms.push((n + k, lin.b[(j, k)]));
                        }
                    }
                    ConicFunction::affine(expr)
                })
                .collect(),
            Self::ComponentwiseConvex(f) => f.conic_form()?,
        };
        Some(
            local_rows
                .into_iter()
                .enumerate()
                .map(|(j, row)| {
                    let mut lifted = row.remap(lift);
                    lifted.affine.terms.push((layout.state_index(step + 1, j), -1.0));
                    lifted.affine.terms.push((layout.state_index(step, j), 1.0));
                    lifted.affine = lifted.affine.canonical();
                    lifted
                })
                .collect(),
        )
    }
}

/// Zero-order-hold discretization of a `dim`-axis double integrator with
/// state `(p, v)`: `A = [[I, dt I], [0, I]]`, `B = [[dt²/2 I], [dt I]]`.
pub fn discretize_double_integrator(dt: f64, dim: usize) -> Result<DynamicsModel, ProblemError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ProblemError::Invalid(format!("time step must be positive, got {dt}")));
    }
    if dim == 0 {
        return Err(ProblemError::Invalid("double integrator needs at least one axis".into()));
    }
    let n = 2 * dim;
    let mut a = DMatrix::identity(n, n);
    let mut b = DMatrix::zeros(n, dim);
    for k in 0..dim {
        a[(k, dim + k)] = dt;
        b[(k, k)] = 0.5 * dt * dt;
        b[(dim + k, k)] = dt;
    }
    Ok(DynamicsModel::LinearZoh(LinearDynamics { a, b, affine: DVector::zeros(n) }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn unit_step_closed_form() {
        let model = discretize_double_integrator(1.0, 1).unwrap();
        let lin = model.as_linear().unwrap();
        assert_eq!(lin.a, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]));
        assert_eq!(lin.b, DMatrix::from_row_slice(2, 1, &[0.5, 1.0]));
    }

    #[test]
    fn half_step_input_matrix() {
        let model = discretize_double_integrator(0.5, 1).unwrap();
        assert_eq!(model.as_linear().unwrap().b, DMatrix::from_row_slice(2, 1, &[0.125, 0.5]));
    }

    #[test]
    fn rejects_nonpositive_step() {
        assert!(discretize_double_integrator(0.0, 3).is_err());
        assert!(discretize_double_integrator(-1.0, 3).is_err());
        assert!(discretize_double_integrator(f64::NAN, 3).is_err());
    }

    #[test]
    fn two_half_steps_equal_one_full_step() {
        for &dt in &[0.1, 0.37, 1.0, 2.5] {
            let half = discretize_double_integrator(dt, 3).unwrap();
            let full = discretize_double_integrator(2.0 * dt, 3).unwrap();
            let (h, f) = (half.as_linear().unwrap(), full.as_linear().unwrap());
            let a2 = &h.a * &h.a;
            let b2 = &h.a * &h.b + &h.b;
            assert!((a2 - &f.a).amax() < 1e-12);
            assert!((b2 - &f.b).amax() < 1e-12);

            let x0 = DVector::from_column_slice(&[1.0, -2.0, 0.5, 0.3, 0.0, -0.7]);
            let u = DVector::from_column_slice(&[0.4, 1.1, -9.81]);
            let twice = h.next_state(&h.next_state(&x0, &u), &u);
            let once = f.next_state(&x0, &u);
            for k in 0..6 {
                assert!(close(twice[k], once[k], 1e-12));
            }
        }
    }

    #[test]
    fn linear_defect_rows_vanish_on_rollout() {
        let model = discretize_double_integrator(0.5, 2).unwrap();
        let lin = model.as_linear().unwrap().clone().with_input_offset(&DVector::from_column_slice(&[0.0, -9.81]));
        let model = DynamicsModel::LinearZoh(lin.clone());
        let layout = Layout::new(3, 4, 2).unwrap();
        let x0 = DVector::from_column_slice(&[0.0, 1.0, 0.5, -0.5]);
        let u0 = DVector::from_column_slice(&[1.0, 10.0]);
        let u1 = DVector::from_column_slice(&[-0.5, 9.0]);
        let x1 = lin.next_state(&x0, &u0);
        let x2 = lin.next_state(&x1, &u1);
        let y = super::super::stack(&[x0, x1, x2], &[u0, u1]).unwrap();
        for step in 0..2 {
            for row in model.defect_rows(&layout, step).unwrap() {
                assert!(row.evaluate(y.as_slice()).abs() < 1e-12);
            }
        }
    }
}
