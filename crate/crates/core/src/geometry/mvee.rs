//! Minimum-volume enclosing ellipsoid of a union of convex sets.
//!
//! The union is replaced by a finite surrogate (surface samples for curved
//! sets, vertices for polytopes), the MVEE of the surrogate is computed by
//! Khachiyan's barycentric coordinate ascent with Wolfe–Atwood away steps,
//! and the result is rescaled so that it provably contains every input set,
//! not just the samples.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{ConvexSet, Ellipsoid, GeometryError};

#[derive(Clone, Debug, PartialEq)]
pub struct MveeOptions {
    /// Surface samples per ellipsoid or ball.
    pub samples: usize,
    /// Relative tolerance on the optimality conditions of the sample MVEE.
    pub tolerance: f64,
    /// Final volume inflation factor (≥ 1) applied after exact rescaling.
    pub volume_inflation: f64,
    pub max_iterations: usize,
}

impl Default for MveeOptions {
    fn default() -> Self {
        Self { samples: 512, tolerance: 1e-6, volume_inflation: 1.0005, max_iterations: 200_000 }
    }
}

/// Ellipsoid containing every set in `sets`, with default options.
pub fn mvee_cover(sets: &[ConvexSet]) -> Result<ConvexSet, GeometryError> {
    mvee_cover_with(sets, &MveeOptions::default())
}

pub fn mvee_cover_with(sets: &[ConvexSet], options: &MveeOptions) -> Result<ConvexSet, GeometryError> {
    let first = sets.first().ok_or_else(|| GeometryError::InvalidSet("cover of an empty list".into()))?;
    let d = first.dim();
    let mut points = Vec::new();
    for set in sets {
        if set.dim() != d {
            return Err(GeometryError::DimensionMismatch { expected: d, found: set.dim() });
        }
        points.extend(set.surrogate_points(options.samples)?);
    }
    check_full_dimensional(&points)?;

    let (center, shape) = khachiyan(&points, options.tolerance, options.max_iterations)?;
    let mut gamma: f64 = 0.0;
    for set in sets {
        gamma = gamma.max(max_quadratic_form(set, &center, &shape)?);
    }
    let radial2 = options.volume_inflation.powf(2.0 / d as f64);
    let shape = shape / (gamma * radial2);
    Ellipsoid::from_center_matrix(&center, &shape).map(ConvexSet::Ellipsoid)
}

pub(super) fn check_full_dimensional(points: &[DVector<f64>]) -> Result<(), GeometryError> {
    let d = points[0].len();
    let n = points.len() as f64;
    let mean = points.iter().fold(DVector::zeros(d), |acc, p| acc + p) / n;
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let c = p - &mean;
        cov += &c * c.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let (kmin, kmax) = (eig.eigenvalues.imin(), eig.eigenvalues.imax());
    if eig.eigenvalues[kmin] <= 1e-12 * eig.eigenvalues[kmax].max(f64::MIN_POSITIVE) {
        return Err(GeometryError::DegenerateUnion {
            direction: eig.eigenvectors.column(kmin).iter().copied().collect(),
        });
    }
    Ok(())
}

/// MVEE `{x | (x − c)ᵀP(x − c) ≤ 1}` of a point cloud, up to the scaling
/// factor implied by `tol`.
pub(crate) fn khachiyan(
    points: &[DVector<f64>],
    tol: f64,
    max_iterations: usize,
) -> Result<(DVector<f64>, DMatrix<f64>), GeometryError> {
    let d = points[0].len();
    let n = points.len();
    let dd = (d + 1) as f64;
    let lifted: Vec<DVector<f64>> = points.iter().map(|p| p.clone().insert_row(d, 1.0)).collect();
    let mut u = vec![1.0 / n as f64; n];

    let moment = |u: &[f64]| {
        let mut m = DMatrix::zeros(d + 1, d + 1);
        for (q, &w) in lifted.iter().zip(u) {
            if w > 0.0 {
                m += q * q.transpose() * w;
            }
        }
        m
    };
    let invert = |m: DMatrix<f64>| {
        m.cholesky().map(|c| c.inverse()).ok_or(GeometryError::DegenerateUnion { direction: Vec::new() })
    };
    let mut minv = invert(moment(&u))?;
    let mut kappa: Vec<f64> = lifted.iter().map(|q| q.dot(&(&minv * q))).collect();

    for iter in 0..max_iterations {
        let mut jp = 0;
        let mut jm = usize::MAX;
        for i in 0..n {
            if kappa[i] > kappa[jp] {
                jp = i;
            }
            if u[i] > 0.0 && (jm == usize::MAX || kappa[i] < kappa[jm]) {
                jm = i;
            }
        }
        let eps_plus = kappa[jp] / dd - 1.0;
        let eps_minus = 1.0 - kappa[jm] / dd;
        let residual = eps_plus.max(eps_minus);
        if residual <= tol {
            break;
        }
        let (j, beta) = if eps_plus >= eps_minus {
            (jp, (kappa[jp] - dd) / (dd * (kappa[jp] - 1.0)))
        } else {
            let uj = u[jm];
            let limit = if uj < 1.0 { -uj / (1.0 - uj) } else { f64::NEG_INFINITY };
            (jm, ((kappa[jm] - dd) / (dd * (kappa[jm] - 1.0))).max(limit))
        };

        for w in u.iter_mut() {
            *w *= 1.0 - beta;
        }
        u[j] += beta;
        if u[j] < 1e-300 {
            u[j] = 0.0;
        }

        if iter % 200 == 199 {
            minv = invert(moment(&u))?;
            for (k, q) in kappa.iter_mut().zip(&lifted) {
                *k = q.dot(&(&minv * q));
            }
        } else {
            // Rank-one update of M⁻¹ and of every κ_i.
            let mq = &minv * &lifted[j];
            let denom = (1.0 - beta) + beta * kappa[j];
            let scale = 1.0 / (1.0 - beta);
            for (k, q) in kappa.iter_mut().zip(&lifted) {
                let t = q.dot(&mq);
                *k = scale * (*k - beta * t * t / denom);
            }
            minv = (&minv - &mq * mq.transpose() * (beta / denom)) * scale;
        }
        if iter + 1 == max_iterations {
            return Err(GeometryError::NonConvergence {
                method: "Khachiyan MVEE",
                iterations: max_iterations,
                residual,
            });
        }
    }

    let mut center = DVector::zeros(d);
    let mut second = DMatrix::zeros(d, d);
    for (p, &w) in points.iter().zip(&u) {
        center += p * w;
        second += p * p.transpose() * w;
    }
    let cov = second - &center * center.transpose();
    let shape = cov.cholesky().ok_or(GeometryError::DegenerateUnion { direction: Vec::new() })?.inverse() / d as f64;
    Ok((center, shape))
}

/// `max_{x ∈ set} (x − c)ᵀP(x − c)`.
fn max_quadratic_form(set: &ConvexSet, c: &DVector<f64>, p: &DMatrix<f64>) -> Result<f64, GeometryError> {
    let form = |x: &DVector<f64>| {
        let e = x - c;
        e.dot(&(p * &e))
    };
    match set {
        ConvexSet::Polytope(poly) => Ok(poly.vertices().iter().map(form).fold(0.0, f64::max)),
        ConvexSet::Ball { center, radius } => {
            let r = DMatrix::identity(center.len(), center.len()) * *radius;
            Ok(max_over_image_of_ball(&r, &(center - c), p))
        }
        ConvexSet::Ellipsoid(e) => {
            let r = e.axes() * DMatrix::from_diagonal(&e.semi_axes());
            Ok(max_over_image_of_ball(&r, &(e.center() - c), p))
        }
        ConvexSet::Halfspace { .. } => Err(GeometryError::Unbounded),
    }
}

/// `max_{‖s‖ ≤ 1} (Rs + δ)ᵀP(Rs + δ)`: a convex maximization attained on the
/// sphere, where the multiplier `μ ≥ λ_max(RᵀPR)` solves
/// `Σ g̃_k²/(μ − λ_k)² = 1`.
fn max_over_image_of_ball(r: &DMatrix<f64>, delta: &DVector<f64>, p: &DMatrix<f64>) -> f64 {
    let h = r.transpose() * p * r;
    let h = (&h + h.transpose()) * 0.5;
    let g = r.transpose() * (p * delta);
    let constant = delta.dot(&(p * delta));
    let eig = SymmetricEigen::new(h.clone());
    let gt = eig.eigenvectors.transpose() * &g;
    let lam = &eig.eigenvalues;
    let lmax = lam.max();
    let evaluate = |s: &DVector<f64>| s.dot(&(&h * s)) + 2.0 * g.dot(s) + constant;

    let gnorm = g.norm();
    if gnorm == 0.0 {
        return lmax + constant;
    }
    let top: Vec<bool> = lam.iter().map(|&l| l >= lmax - 1e-12 * lmax.abs().max(1.0)).collect();
    let top_weight: f64 = gt.iter().zip(&top).filter(|(_, &t)| t).map(|(v, _)| v * v).sum();
    let rest_at_pole: f64 = (0..lam.len()).filter(|&k| !top[k]).map(|k| (gt[k] / (lmax - lam[k])).powi(2)).sum();
    if top_weight <= 1e-28 * gnorm * gnorm && rest_at_pole <= 1.0 {
        // Hard case: μ = λ_max, the top block fills the remaining length.
        let mut st = DVector::from_fn(lam.len(), |k, _| if top[k] { 0.0 } else { gt[k] / (lmax - lam[k]) });
        let k = top.iter().position(|&t| t).unwrap_or(0);
        st[k] = (1.0 - rest_at_pole).max(0.0).sqrt();
        let s = &eig.eigenvectors * st;
        return evaluate(&s).max(evaluate(&-s));
    }
    let psi = |mu: f64| (0..lam.len()).map(|k| (gt[k] / (mu - lam[k])).powi(2)).sum::<f64>();
    let (mut lo, mut hi) = (lmax, lmax + gnorm);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let st = DVector::from_fn(lam.len(), |k, _| gt[k] / (hi - lam[k]));
    let s = &eig.eigenvectors * st;
    let s = &s / s.norm().max(1.0);
    // The upper bracket end gives ‖s‖ ≤ 1; both s and s/‖s‖ are feasible.
    evaluate(&(&s / s.norm())).max(evaluate(&s))
}
