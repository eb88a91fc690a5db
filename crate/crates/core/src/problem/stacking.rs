use std::ops::Range;

use nalgebra::{DVector, DVectorView};
use serde::{Deserialize, Serialize};

use super::ProblemError;

/// Index layout of the stacked decision vector
/// `y = (x_1, …, x_T, u_1, …, u_{T-1})`.
///
/// Steps are zero-based: `state_range(0)` is `x_1` and `control_range(0)` is
/// `u_1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub horizon: usize,
    pub state_dim: usize,
    pub control_dim: usize,
}

impl Layout {
    pub fn new(horizon: usize, state_dim: usize, control_dim: usize) -> Result<Self, ProblemError> {
        if horizon < 2 {
            return Err(ProblemError::Invalid(format!("horizon must be at least 2, got {horizon}")));
        }
        if state_dim == 0 || control_dim == 0 {
            return Err(ProblemError::Invalid("state and control dimensions must be positive".into()));
        }
        Ok(Self { horizon, state_dim, control_dim })
    }

    /// `N = m(T-1) + nT`.
    pub fn len(&self) -> usize {
        self.state_dim * self.horizon + self.control_dim * self.num_controls()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_controls(&self) -> usize {
        self.horizon - 1
    }

    /// Length of the dynamics defect `g(y)`, `n(T-1)`.
    pub fn num_defects(&self) -> usize {
        self.state_dim * (self.horizon - 1)
    }

    pub fn state_index(&self, step: usize, component: usize) -> usize {
        debug_assert!(step < self.horizon && component < self.state_dim);
        step * self.state_dim + component
    }

    pub fn control_index(&self, step: usize, component: usize) -> usize {
        debug_assert!(step < self.num_controls() && component < self.control_dim);
        self.state_dim * self.horizon + step * self.control_dim + component
    }

    pub fn state_range(&self, step: usize) -> Range<usize> {
        let start = self.state_index(step, 0);
        start..start + self.state_dim
    }

    pub fn control_range(&self, step: usize) -> Range<usize> {
        let start = self.control_index(step, 0);
        start..start + self.control_dim
    }
}

/// The decision vector together with its layout.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedVariable {
    layout: Layout,
    data: DVector<f64>,
}

impl StackedVariable {
    pub fn new(layout: Layout, data: DVector<f64>) -> Result<Self, ProblemError> {
        if data.len() != layout.len() {
            return Err(ProblemError::DimensionMismatch {
                what: "stacked variable".into(),
                index: 0,
                expected: layout.len(),
                found: data.len(),
            });
        }
        Ok(Self { layout, data })
    }

    pub fn zeros(layout: Layout) -> Self {
        Self { layout, data: DVector::zeros(layout.len()) }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }

    pub fn state_at(&self, step: usize) -> DVectorView<'_, f64> {
        self.data.rows(step * self.layout.state_dim, self.layout.state_dim)
    }

    pub fn control_at(&self, step: usize) -> DVectorView<'_, f64> {
        self.data.rows(self.layout.control_index(step, 0), self.layout.control_dim)
    }

    pub fn set_state(&mut self, step: usize, value: &DVector<f64>) {
        let range = self.layout.state_range(step);
        self.data.rows_mut(range.start, range.len()).copy_from(value);
    }

    pub fn set_control(&mut self, step: usize, value: &DVector<f64>) {
        let range = self.layout.control_range(step);
        self.data.rows_mut(range.start, range.len()).copy_from(value);
    }

    /// Splits back into `T` states and `T-1` controls.
    pub fn unstack(&self) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let states = (0..self.layout.horizon).map(|i| self.state_at(i).into_owned()).collect();
        let controls = (0..self.layout.num_controls()).map(|i| self.control_at(i).into_owned()).collect();
        (states, controls)
    }

    pub fn distance(&self, other: &StackedVariable) -> f64 {
        (&self.data - &other.data).norm()
    }
}

/// Stacks `T` states and `T-1` controls into `y`. Dimensions are taken from
/// the first state and control.
pub fn stack(states: &[DVector<f64>], controls: &[DVector<f64>]) -> Result<StackedVariable, ProblemError> {
    let horizon = states.len();
    if horizon < 2 {
        return Err(ProblemError::Invalid(format!("need at least 2 states, got {horizon}")));
    }
    if controls.len() != horizon - 1 {
        return Err(ProblemError::DimensionMismatch {
            what: "control count".into(),
            index: controls.len(),
            expected: horizon - 1,
            found: controls.len(),
        });
    }
    let layout = Layout::new(horizon, states[0].len(), controls[0].len())?;
    let mut data = DVector::zeros(layout.len());
    for (i, x) in states.iter().enumerate() {
        if x.len() != layout.state_dim {
            return Err(ProblemError::DimensionMismatch {
                what: "state".into(),
                index: i,
                expected: layout.state_dim,
                found: x.len(),
            });
        }
        data.rows_mut(layout.state_index(i, 0), layout.state_dim).copy_from(x);
    }
    for (i, u) in controls.iter().enumerate() {
        if u.len() != layout.control_dim {
            return Err(ProblemError::DimensionMismatch {
                what: "control".into(),
                index: i,
                expected: layout.control_dim,
                found: u.len(),
            });
        }
        data.rows_mut(layout.control_index(i, 0), layout.control_dim).copy_from(u);
    }
    Ok(StackedVariable { layout, data })
}
