//! Convex keep-out sets `{x | q(x) ≤ 0}`, Euclidean projection onto them,
//! supporting halfspaces, intersection tests and ellipsoidal covers.

mod ellipsoid;
mod intersect;
mod lp;
mod mvee;
mod polytope;
mod sampling;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ellipsoid::Ellipsoid;
pub use intersect::intersects;
pub use mvee::{mvee_cover, MveeOptions};
pub use polytope::Polytope;
pub use sampling::unit_sphere_points;

/// Tolerance for deciding that a point lies on a set boundary, applied to
/// the signed-distance estimate.
pub const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: set has dimension {expected}, point has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { method: &'static str, iterations: usize, residual: f64 },
    #[error("nearest boundary point is not unique at {point:?}; perturb the query point")]
    AmbiguousProjection { point: Vec<f64> },
    #[error("point {point:?} lies strictly inside the keep-out set; no supporting cut through it exists, run infeasible initialization first")]
    InteriorPoint { point: Vec<f64> },
    #[error("union of sets is flat along direction {direction:?}; no bounded-volume cover exists")]
    DegenerateUnion { direction: Vec<f64> },
    #[error("set is unbounded")]
    Unbounded,
    #[error("linear program failed: {0}")]
    Lp(String),
}

/// One convex keep-out set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSet {
    /// `xᵀAx + 2bᵀx + c ≤ 0`.
    Ellipsoid(Ellipsoid),
    /// `a_kᵀx + b_k ≤ 0` for every face.
    Polytope(Polytope),
    /// `‖x − center‖ ≤ radius`.
    Ball { center: DVector<f64>, radius: f64 },
    /// `aᵀx + b ≤ 0`.
    Halfspace { a: DVector<f64>, b: f64 },
}

/// Result of projecting a point onto a set (or onto its boundary).
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult {
    pub projection: DVector<f64>,
    pub distance: f64,
    /// Outward unit normal at `projection`, parallel to `z − projection`
    /// when the query point is outside. `None` for interior points.
    pub normal: Option<DVector<f64>>,
    pub on_boundary: bool,
}

/// The halfspace `aᵀy + b ≥ 0` with `‖a‖ = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceCut {
    pub a: DVector<f64>,
    pub b: f64,
}

impl HalfspaceCut {
    pub fn new(a: DVector<f64>, b: f64) -> Result<Self, GeometryError> {
        let norm = a.norm();
        if !(norm > 0.0 && norm.is_finite() && b.is_finite()) {
            return Err(GeometryError::InvalidSet("cut normal must be finite and nonzero".into()));
        }
        Ok(Self { a: a / norm, b: b / norm })
    }

    /// `aᵀy + b`; nonnegative on the kept side.
    pub fn slack(&self, y: &DVector<f64>) -> f64 {
        self.a.dot(y) + self.b
    }
}

impl ConvexSet {
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidSet(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn halfspace(a: DVector<f64>, b: f64) -> Result<Self, GeometryError> {
        if a.norm() == 0.0 {
            return Err(GeometryError::InvalidSet("halfspace normal must be nonzero".into()));
        }
        Ok(Self::Halfspace { a, b })
    }

    /// Axis-aligned box `lo ≤ x ≤ hi` as a polytope.
    pub fn aabb(lo: &DVector<f64>, hi: &DVector<f64>) -> Result<Self, GeometryError> {
        Polytope::aabb(lo, hi).map(Self::Polytope)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Ellipsoid(e) => e.dim(),
            Self::Polytope(p) => p.dim(),
            Self::Ball { center, .. } => center.len(),
            Self::Halfspace { a, .. } => a.len(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Self::Halfspace { .. })
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<(), GeometryError> {
        if x.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    /// The scalar row `q(x)`: negative inside, zero on the boundary,
    /// positive outside.
    pub fn membership_value(&self, x: &DVector<f64>) -> Result<f64, GeometryError> {
        self.check_dim(x)?;
        Ok(match self {
            Self::Ellipsoid(e) => e.value(x),
            Self::Polytope(p) => p.value(x),
            Self::Ball { center, radius } => (x - center).norm() - radius,
            Self::Halfspace { a, b } => a.dot(x) + b,
        })
    }

    /// A (sub)gradient of `q` at `x`. At kinks the smallest-index active
    /// piece is used; at a ball center the zero subgradient is returned.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        self.check_dim(x)?;
        Ok(match self {
            Self::Ellipsoid(e) => e.gradient(x),
            Self::Polytope(p) => p.gradient(x),
            Self::Ball { center, .. } => {
                let d = x - center;
                let n = d.norm();
                if n == 0.0 {
                    d
                } else {
                    d / n
                }
            }
            Self::Halfspace { a, .. } => a.clone(),
        })
    }

    /// Signed distance to the boundary where cheap, otherwise the first-order
    /// estimate `q/‖∇q‖`. Used for boundary tolerances only.
    pub fn signed_distance_estimate(&self, x: &DVector<f64>) -> Result<f64, GeometryError> {
        self.check_dim(x)?;
        Ok(match self {
            Self::Ellipsoid(e) => e.signed_distance_estimate(x),
            Self::Polytope(p) => p.normalized_value(x),
            Self::Ball { center, radius } => (x - center).norm() - radius,
            Self::Halfspace { a, b } => (a.dot(x) + b) / a.norm(),
        })
    }

    /// Characteristic length used to scale boundary tolerances.
    fn scale(&self) -> f64 {
        match self {
            Self::Ellipsoid(e) => e.max_semi_axis(),
            Self::Polytope(p) => p.inradius(),
            Self::Ball { radius, .. } => *radius,
            Self::Halfspace { .. } => 1.0,
        }
        .max(1.0)
    }

    fn boundary_normal(&self, x: &DVector<f64>) -> Result<Option<DVector<f64>>, GeometryError> {
        Ok(match self {
            Self::Polytope(p) => Some(p.boundary_normal(x, BOUNDARY_TOL * self.scale())),
            _ => {
                let g = self.gradient(x)?;
                let n = g.norm();
                (n > 0.0).then(|| g / n)
            }
        })
    }

    /// Euclidean projection onto `{q ≤ 0}`. Interior points project to
    /// themselves; boundary points carry the outward normal.
    pub fn project(&self, z: &DVector<f64>) -> Result<ProjectionResult, GeometryError> {
        let sd = self.signed_distance_estimate(z)?;
        let tol = BOUNDARY_TOL * self.scale();
        if sd <= tol {
            let on_boundary = sd.abs() <= tol;
            let normal = if on_boundary { self.boundary_normal(z)? } else { None };
            return Ok(ProjectionResult { projection: z.clone(), distance: 0.0, normal, on_boundary });
        }
        let projection = match self {
            Self::Ellipsoid(e) => e.project_outside(z)?,
            Self::Polytope(p) => p.project_outside(z)?,
            Self::Ball { center, radius } => {
                let d = z - center;
                let n = d.norm();
                center + d * (*radius / n)
            }
            Self::Halfspace { a, b } => z - a * ((a.dot(z) + b) / a.norm_squared()),
        };
        let diff = z - &projection;
        let distance = diff.norm();
        Ok(ProjectionResult { projection, distance, normal: Some(diff / distance), on_boundary: true })
    }

    /// Nearest point of the boundary. Outside points give the projection;
    /// interior points give the closest boundary point together with its
    /// outward normal, so `distance` is the depth of penetration.
    pub fn nearest_boundary(&self, z: &DVector<f64>) -> Result<ProjectionResult, GeometryError> {
        let sd = self.signed_distance_estimate(z)?;
        if sd >= -BOUNDARY_TOL * self.scale() {
            return self.project(z);
        }
        let (projection, normal) = match self {
            Self::Ellipsoid(e) => e.nearest_boundary_inside(z)?,
            Self::Polytope(p) => p.nearest_boundary_inside(z),
            Self::Ball { center, radius } => {
                let d = z - center;
                let n = d.norm();
                if n == 0.0 {
                    return Err(GeometryError::AmbiguousProjection { point: z.iter().copied().collect() });
                }
                let u = d / n;
                (center + &u * *radius, u)
            }
            Self::Halfspace { a, b } => {
                let p = z - a * ((a.dot(z) + b) / a.norm_squared());
                (p, a / a.norm())
            }
        };
        let distance = (z - &projection).norm();
        Ok(ProjectionResult { projection, distance, normal: Some(normal), on_boundary: true })
    }

    /// Points on the boundary used as a surrogate of the set (surface samples
    /// for curved sets, vertices for polytopes).
    pub fn surrogate_points(&self, samples: usize) -> Result<Vec<DVector<f64>>, GeometryError> {
        match self {
            Self::Ellipsoid(e) => Ok(unit_sphere_points(e.dim(), samples).iter().map(|s| e.from_unit(s)).collect()),
            Self::Ball { center, radius } => {
                Ok(unit_sphere_points(center.len(), samples).iter().map(|s| center + s * *radius).collect())
            }
            Self::Polytope(p) => Ok(p.vertices().to_vec()),
            Self::Halfspace { .. } => Err(GeometryError::Unbounded),
        }
    }

    /// A point strictly inside the set (center or Chebyshev center).
    pub fn interior_point(&self) -> DVector<f64> {
        match self {
            Self::Ellipsoid(e) => e.center().clone(),
            Self::Polytope(p) => p.chebyshev_center().clone(),
            Self::Ball { center, .. } => center.clone(),
            Self::Halfspace { a, b } => -a * ((b + 1.0) / a.norm_squared()),
        }
    }
}

/// Supporting halfspace through `result.projection` with normal
/// `result.normal`; every point of the set satisfies `aᵀy + b ≤ 0`.
pub fn supporting_cut(result: &ProjectionResult) -> Result<HalfspaceCut, GeometryError> {
    let normal = result
        .normal
        .as_ref()
        .ok_or_else(|| GeometryError::InteriorPoint { point: result.projection.iter().copied().collect() })?;
    let b = -normal.dot(&result.projection);
    HalfspaceCut::new(normal.clone(), b)
}
