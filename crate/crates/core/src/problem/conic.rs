//! Sparse affine expressions and second-order-cone representable convex
//! functions over the stacked decision vector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// `Σ coeff·y[index] + constant`, stored sparsely.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(value: f64) -> Self {
        Self { terms: Vec::new(), constant: value }
    }

    /// The single variable `y[index]`.
    pub fn var(index: usize) -> Self {
        Self { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn term(mut self, index: usize, coeff: f64) -> Self {
        self.terms.push((index, coeff));
        self
    }

    pub fn plus_constant(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * y[i]).sum::<f64>() + self.constant
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { terms: self.terms.iter().map(|&(i, c)| (i, c * factor)).collect(), constant: self.constant * factor }
    }

    /// Rewrites variable indices, e.g. to lift a per-step expression into
    /// stacked coordinates.
    pub fn remap(&self, map: impl Fn(usize) -> usize) -> Self {
        Self { terms: self.terms.iter().map(|&(i, c)| (map(i), c)).collect(), constant: self.constant }
    }

    /// Merges repeated indices and drops exact zeros, ordered by index.
    pub fn canonical(&self) -> Self {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, c) in &self.terms {
            *merged.entry(i).or_insert(0.0) += c;
        }
        Self { terms: merged.into_iter().filter(|&(_, c)| c != 0.0).collect(), constant: self.constant }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }
}

/// `weight · ‖(e_1(y), …, e_k(y))‖₂` with `weight ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTerm {
    pub weight: f64,
    pub components: Vec<AffineExpr>,
}

impl NormTerm {
    pub fn new(weight: f64, components: Vec<AffineExpr>) -> Self {
        Self { weight, components }
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.weight * self.components.iter().map(|e| e.evaluate(y).powi(2)).sum::<f64>().sqrt()
    }
}

/// An affine part plus a nonnegative combination of Euclidean norms of
/// affine maps. Convex by construction and representable with one
/// second-order cone per norm term.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicFunction {
    pub affine: AffineExpr,
    pub norms: Vec<NormTerm>,
}

impl ConicFunction {
    pub fn affine(expr: AffineExpr) -> Self {
        Self { affine: expr, norms: Vec::new() }
    }

    pub fn with_norm(mut self, term: NormTerm) -> Self {
        self.norms.push(term);
        self
    }

    pub fn is_affine(&self) -> bool {
        self.norms.iter().all(|n| n.weight == 0.0)
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.affine.evaluate(y) + self.norms.iter().map(|n| n.evaluate(y)).sum::<f64>()
    }

    /// A subgradient, returned sparse and ordered by index. At a kink of a
    /// norm term (zero argument) that term contributes nothing.
    pub fn subgradient(&self, y: &[f64]) -> Vec<(usize, f64)> {
        let mut grad: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, c) in &self.affine.terms {
            *grad.entry(i).or_insert(0.0) += c;
        }
        for term in &self.norms {
            let values: Vec<f64> = term.components.iter().map(|e| e.evaluate(y)).collect();
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            for (expr, value) in term.components.iter().zip(&values) {
                let scale = term.weight * value / norm;
                for &(i, c) in &expr.terms {
                    *grad.entry(i).or_insert(0.0) += scale * c;
                }
            }
        }
        grad.into_iter().collect()
    }

    pub fn remap(&self, map: impl Fn(usize) -> usize + Copy) -> Self {
        Self {
            affine: self.affine.remap(map),
            norms: self
                .norms
                .iter()
                .map(|n| NormTerm { weight: n.weight, components: n.components.iter().map(|e| e.remap(map)).collect() })
                .collect(),
        }
    }

    pub fn plus(mut self, other: &ConicFunction) -> Self {
        self.affine.terms.extend_from_slice(&other.affine.terms);
        self.affine.constant += other.affine.constant;
        self.norms.extend(other.norms.iter().cloned());
        self
    }

    pub fn max_index(&self) -> Option<usize> {
        let norm_max = self.norms.iter().flat_map(|n| n.components.iter().filter_map(AffineExpr::max_index)).max();
        self.affine.max_index().max(norm_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_evaluates_and_canonicalizes() {
        let e = AffineExpr::var(0).term(2, 3.0).term(0, -1.0).plus_constant(1.5);
        assert_eq!(e.evaluate(&[7.0, 0.0, 2.0]), 7.5);
        assert_eq!(e.canonical().terms, vec![(2, 3.0)]);
    }

    #[test]
    fn norm_subgradient_matches_direction() {
        let f = ConicFunction::affine(AffineExpr::var(2))
            .with_norm(NormTerm::new(2.0, vec![AffineExpr::var(0), AffineExpr::var(1)]));
        let y = [3.0, 4.0, 1.0];
        assert!((f.evaluate(&y) - 11.0).abs() < 1e-15);
        let g = f.subgradient(&y);
        assert_eq!(g, vec![(0, 1.2), (1, 1.6), (2, 1.0)]);
        assert!(!f.is_affine());
    }
}
