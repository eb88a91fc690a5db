use serde::Serialize;

use super::{DriverError, SolveReport};

/// Errors `e_k = ‖z⁽ᵏ⁾ − z*‖` and successive ratios `e_{k+1}/e_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateTable {
    pub errors: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Ratios over the final half of the run are strictly decreasing.
    pub superlinear_signature: bool,
}

impl RateTable {
    /// Minimum number of errors for a meaningful table.
    pub const MIN_ERRORS: usize = 3;

    pub fn from_errors(errors: Vec<f64>) -> Result<Self, DriverError> {
        if errors.len() < Self::MIN_ERRORS {
            return Err(DriverError::TooFewIterates { needed: Self::MIN_ERRORS + 1, found: errors.len() + 1 });
        }
        let ratios: Vec<f64> = errors.windows(2).map(|w| w[1] / w[0]).collect();
        let tail = Self::final_half(&ratios);
        let superlinear_signature = tail.len() >= 2 && tail.windows(2).all(|w| w[1] < w[0]);
        Ok(Self { errors, ratios, superlinear_signature })
    }

    /// The ratios the signature is judged on.
    pub fn final_half(ratios: &[f64]) -> &[f64] {
        &ratios[ratios.len() / 2..]
    }

    pub fn final_half_ratios(&self) -> &[f64] {
        Self::final_half(&self.ratios)
    }
}

/// Rate table of a converged run with `z*` taken as the final iterate.
///
/// Iterates that coincide with `z*` (error below round-off) carry no rate
/// information and end the table.
pub fn convergence_rate_diagnostics(report: &SolveReport) -> Result<RateTable, DriverError> {
    let z_star = report.final_iterate();
    let floor = 1e-12 * (1.0 + z_star.as_vector().norm());
    let errors: Vec<f64> = report.iterates[..report.iterates.len() - 1]
        .iter()
        .map(|z| z.distance(z_star))
        .take_while(|&e| e > floor)
        .collect();
    if report.iterates.len() < 4 {
        return Err(DriverError::TooFewIterates { needed: 4, found: report.iterates.len() });
    }
    RateTable::from_errors(errors)
}
