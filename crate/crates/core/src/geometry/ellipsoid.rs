use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::GeometryError;

const SECULAR_TOL: f64 = 1e-10;
const SECULAR_MAX_ITER: usize = 200;

/// `{x | xᵀAx + 2bᵀx + c ≤ 0}` with `A` symmetric positive definite.
///
/// Internally the set is kept as `(x − m)ᵀA(x − m) ≤ r²` with
/// `m = −A⁻¹b`, `r² = bᵀA⁻¹b − c`, and `A = V diag(λ) Vᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEllipsoid", into = "RawEllipsoid")]
pub struct Ellipsoid {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
    center: DVector<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    r2: f64,
}

#[derive(Serialize, Deserialize)]
struct RawEllipsoid {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl TryFrom<RawEllipsoid> for Ellipsoid {
    type Error = GeometryError;
    fn try_from(raw: RawEllipsoid) -> Result<Self, Self::Error> {
        Ellipsoid::new(raw.a, raw.b, raw.c)
    }
}

impl From<Ellipsoid> for RawEllipsoid {
    fn from(e: Ellipsoid) -> Self {
        RawEllipsoid { a: e.a, b: e.b, c: e.c }
    }
}

impl Ellipsoid {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self, GeometryError> {
        let d = b.len();
        if a.shape() != (d, d) || d == 0 {
            return Err(GeometryError::InvalidSet(format!("shape matrix is {:?}, expected {d}x{d}", a.shape())));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(GeometryError::InvalidSet("non-finite ellipsoid data".into()));
        }
        let scale = a.amax().max(f64::MIN_POSITIVE);
        if (&a - a.transpose()).amax() > 1e-12 * scale {
            return Err(GeometryError::InvalidSet("shape matrix is not symmetric".into()));
        }
        let a = (&a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(a.clone());
        let (lmin, lmax) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        if !(lmin > 1e-14 * lmax) {
            return Err(GeometryError::InvalidSet(format!(
                "shape matrix is not positive definite (min eigenvalue {lmin:e})"
            )));
        }
        let vt_b = eig.eigenvectors.transpose() * &b;
        let center = -(&eig.eigenvectors * vt_b.component_div(&eig.eigenvalues));
        let r2 = -b.dot(&center) - c;
        if !(r2 > 0.0) {
            return Err(GeometryError::InvalidSet(format!("ellipsoid is empty (c - bᵀA⁻¹b = {:e})", -r2)));
        }
        Ok(Self { a, b, c, center, eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors, r2 })
    }

    /// `{x | (x − center)ᵀ P (x − center) ≤ 1}`.
    pub fn from_center_matrix(center: &DVector<f64>, p: &DMatrix<f64>) -> Result<Self, GeometryError> {
        let p = (p + p.transpose()) * 0.5;
        let b = -(&p * center);
        let c = center.dot(&(&p * center)) - 1.0;
        Self::new(p, b, c)
    }

    pub fn axis_aligned(center: &DVector<f64>, semi_axes: &DVector<f64>) -> Result<Self, GeometryError> {
        if semi_axes.len() != center.len() || semi_axes.iter().any(|&s| !(s > 0.0)) {
            return Err(GeometryError::InvalidSet("semi-axes must be positive and match the center".into()));
        }
        let p = DMatrix::from_diagonal(&semi_axes.map(|s| 1.0 / (s * s)));
        Self::from_center_matrix(center, &p)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// Semi-axis lengths, paired with the columns of [`Self::axes`].
    pub fn semi_axes(&self) -> DVector<f64> {
        self.eigenvalues.map(|l| (self.r2 / l).sqrt())
    }

    pub fn axes(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn max_semi_axis(&self) -> f64 {
        (self.r2 / self.eigenvalues.min()).sqrt()
    }

    /// Volume relative to the unit ball of the same dimension.
    pub fn volume_ratio_to_unit_ball(&self) -> f64 {
        self.semi_axes().iter().product()
    }

    /// `center + V diag(semi_axes) s`, maps the unit sphere onto the boundary.
    pub fn from_unit(&self, s: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.eigenvectors * s.component_mul(&self.semi_axes())
    }

    pub(crate) fn value(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.center;
        d.dot(&(&self.a * &d)) - self.r2
    }

    pub(crate) fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.a * (x - &self.center)) * 2.0
    }

    pub(crate) fn signed_distance_estimate(&self, x: &DVector<f64>) -> f64 {
        let q = self.value(x);
        let g = self.gradient(x).norm();
        let floor = 2.0 * self.r2.sqrt() * self.eigenvalues.min().sqrt();
        q / g.max(floor)
    }

    fn local(&self, z: &DVector<f64>) -> DVector<f64> {
        self.eigenvectors.transpose() * (z - &self.center)
    }

    /// Moves `v` (eigen coordinates) radially onto the boundary, removing the
    /// residual of the multiplier solve.
    fn finish(&self, v: DVector<f64>) -> DVector<f64> {
        let level: f64 = v.iter().zip(self.eigenvalues.iter()).map(|(vk, l)| l * vk * vk).sum();
        let v = if level > 0.0 { v * (self.r2 / level).sqrt() } else { v };
        &self.center + &self.eigenvectors * v
    }

    /// Projection of a point with `q(z) > 0`.
    pub(crate) fn project_outside(&self, z: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        let w = self.local(z);
        let lmin = self.eigenvalues.min();
        let hi = w.norm() / (self.r2.sqrt() * lmin.sqrt());
        let nu = self.secular_root(&w, 0.0, hi)?;
        let v = DVector::from_fn(w.len(), |k, _| w[k] / (1.0 + nu * self.eigenvalues[k]));
        Ok(self.finish(v))
    }

    /// Closest boundary point to an interior `z`, with the outward normal.
    pub(crate) fn nearest_boundary_inside(
        &self,
        z: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), GeometryError> {
        let w = self.local(z);
        let lmax = self.eigenvalues.max();
        let top: Vec<bool> = self.eigenvalues.iter().map(|&l| l >= lmax * (1.0 - 1e-12)).collect();
        let tiny = 1e-15 * self.max_semi_axis();
        let hard = w.iter().zip(&top).all(|(wk, &t)| !t || wk.abs() <= tiny);
        let pole = -1.0 / lmax;
        let v = if hard {
            // The multiplier may sit at the pole; the top-eigenspace block is
            // then only fixed up to sign and rotation.
            let rest: f64 = (0..w.len())
                .filter(|&k| !top[k])
                .map(|k| {
                    let l = self.eigenvalues[k];
                    l * w[k] * w[k] / (1.0 - l / lmax).powi(2)
                })
                .sum::<f64>()
                - self.r2;
            if rest < 0.0 {
                return Err(GeometryError::AmbiguousProjection { point: z.iter().copied().collect() });
            }
            let nu = self.secular_root(&w, pole, 0.0)?;
            DVector::from_fn(w.len(), |k, _| if top[k] { 0.0 } else { w[k] / (1.0 + nu * self.eigenvalues[k]) })
        } else {
            let nu = self.secular_root(&w, pole, 0.0)?;
            DVector::from_fn(w.len(), |k, _| w[k] / (1.0 + nu * self.eigenvalues[k]))
        };
        let x = self.finish(v);
        let g = self.gradient(&x);
        let n = g.norm();
        Ok((x, g / n))
    }

    /// Root of `φ(ν) = Σ λ_k w_k²/(1 + νλ_k)² − r²` in `(lo, hi)` by
    /// safeguarded Newton. `φ` is convex and decreasing on the bracket.
    fn secular_root(&self, w: &DVector<f64>, lo: f64, hi: f64) -> Result<f64, GeometryError> {
        let lam = &self.eigenvalues;
        let phi = |nu: f64| -> (f64, f64) {
            let mut f = -self.r2;
            let mut df = 0.0;
            for k in 0..w.len() {
                let den = 1.0 + nu * lam[k];
                let t = lam[k] * w[k] * w[k] / (den * den);
                f += t;
                df -= 2.0 * t * lam[k] / den;
            }
            (f, df)
        };
        let (mut lo, mut hi) = (lo, hi);
        // Start from whichever end is finite and has φ > 0 (left of the root).
        let mut nu = if lo == 0.0 { 0.0 } else { 0.5 * (lo + hi) };
        let mut last_step = f64::INFINITY;
        for _ in 0..SECULAR_MAX_ITER {
            let (f, df) = phi(nu);
            if f == 0.0 {
                return Ok(nu);
            }
            if f > 0.0 {
                lo = nu;
            } else {
                hi = nu;
            }
            let newton = nu - f / df;
            let next = if df < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            last_step = (next - nu).abs();
            nu = next;
            if last_step <= SECULAR_TOL * nu.abs().max(1.0) || hi - lo <= SECULAR_TOL * nu.abs().max(1.0) {
                return Ok(nu);
            }
        }
        Err(GeometryError::NonConvergence {
            method: "ellipsoid secular equation",
            iterations: SECULAR_MAX_ITER,
            residual: last_step,
        })
    }
}
