use super::{ConvexSet, GeometryError};

const GAP_TOL: f64 = 1e-7;
const LOOSE_GAP_TOL: f64 = 1e-5;
const MAX_ITER: usize = 20_000;

/// Whether two keep-out sets share a point.
///
/// Cheap certificates first (one set's interior point or vertex inside the
/// other), then alternating projections, whose gap converges to the
/// distance between the sets. A run that hits the iteration cap with a
/// gap below `1e-5` is reported as intersecting.
pub fn intersects(a: &ConvexSet, b: &ConvexSet) -> Result<bool, GeometryError> {
    if a.dim() != b.dim() {
        return Err(GeometryError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    for (s, t) in [(a, b), (b, a)] {
        if t.membership_value(&s.interior_point())? <= 0.0 {
            return Ok(true);
        }
        if let ConvexSet::Polytope(p) = s {
            for v in p.vertices() {
                if t.membership_value(v)? <= 0.0 {
                    return Ok(true);
                }
            }
        }
    }

    let mut x = a.interior_point();
    let mut prev_gap = f64::INFINITY;
    let mut gap = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let y = b.project(&x)?.projection;
        let x_next = a.project(&y)?.projection;
        gap = (&x_next - &y).norm();
        if gap <= GAP_TOL {
            return Ok(true);
        }
        // The gap is non-increasing; a stalled gap is the set distance.
        if prev_gap - gap <= 1e-13 * prev_gap.max(1.0) && (&x_next - &x).norm() <= 1e-12 * gap.max(1.0) {
            return Ok(false);
        }
        prev_gap = gap;
        x = x_next;
    }
    Ok(gap < LOOSE_GAP_TOL)
}
