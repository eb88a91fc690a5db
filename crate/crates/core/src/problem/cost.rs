use std::fmt;
use std::sync::Arc;

use super::{AffineExpr, ConicFunction, Layout, NormTerm};

/// A user-supplied convex cost `J(y)`.
pub trait ConvexCost: Send + Sync + fmt::Debug {
    fn evaluate(&self, y: &[f64]) -> f64;
    /// Conic form over stacked coordinates; `None` means the cost cannot be
    /// used in a subproblem.
    fn conic_form(&self, _layout: &Layout) -> Option<ConicFunction> {
        None
    }
}

#[derive(Clone, Debug)]
pub enum CostModel {
    /// `Σ_i ‖u_i‖₂` over all controls.
    MinimumFuel,
    /// Any cost already written as a conic function of `y`.
    Conic(ConicFunction),
    Custom(Arc<dyn ConvexCost>),
}

impl CostModel {
    pub fn evaluate(&self, layout: &Layout, y: &[f64]) -> f64 {
        match self {
            Self::MinimumFuel => (0..layout.num_controls())
                .map(|i| y[layout.control_range(i)].iter().map(|v| v * v).sum::<f64>().sqrt())
                .sum(),
            Self::Conic(f) => f.evaluate(y),
            Self::Custom(cost) => cost.evaluate(y),
        }
    }

    pub fn conic_form(&self, layout: &Layout) -> Option<ConicFunction> {
        match self {
            Self::MinimumFuel => Some(minimum_fuel(layout)),
            Self::Conic(f) => Some(f.clone()),
            Self::Custom(cost) => cost.conic_form(layout),
        }
    }
}

fn minimum_fuel(layout: &Layout) -> ConicFunction {
    let norms = (0..layout.num_controls())
        .map(|i| NormTerm::new(1.0, layout.control_range(i).map(AffineExpr::var).collect()))
        .collect();
    ConicFunction { affine: AffineExpr::default(), norms }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuel_sums_control_norms() {
        let layout = Layout::new(3, 1, 2).unwrap();
        let y = [0.0, 0.0, 0.0, 3.0, 4.0, 0.0, -2.0];
        assert_eq!(CostModel::MinimumFuel.evaluate(&layout, &y), 7.0);
        let conic = CostModel::MinimumFuel.conic_form(&layout).unwrap();
        assert_eq!(conic.norms.len(), 2);
        assert_eq!(conic.evaluate(&y), 7.0);
    }

    #[derive(Debug)]
    struct Opaque;
    impl ConvexCost for Opaque {
        fn evaluate(&self, y: &[f64]) -> f64 {
            y.iter().map(|v| v.abs()).sum()
        }
    }

    #[test]
    fn opaque_cost_has_no_conic_form() {
        let layout = Layout::new(2, 1, 1).unwrap();
        let cost = CostModel::Custom(Arc::new(Opaque));
        assert_eq!(cost.evaluate(&layout, &[1.0, -2.0, 3.0]), 6.0);
        assert!(cost.conic_form(&layout).is_none());
    }
}
