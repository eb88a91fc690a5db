use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lp::{self, LpOutcome};
use super::GeometryError;

const FEAS_TOL: f64 = 1e-10;

/// `{x | a_kᵀx + b_k ≤ 0 ∀k}`, bounded and full-dimensional.
///
/// Projections work with the row-normalized system `Gx ≤ h`,
/// `G_k = a_k/‖a_k‖`; [`Polytope::value`] keeps the raw rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolytope", into = "RawPolytope")]
pub struct Polytope {
    faces: Vec<(DVector<f64>, f64)>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    vertices: Vec<DVector<f64>>,
    chebyshev_center: DVector<f64>,
    inradius: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPolytope {
    faces: Vec<(DVector<f64>, f64)>,
}

impl TryFrom<RawPolytope> for Polytope {
    type Error = GeometryError;
    fn try_from(raw: RawPolytope) -> Result<Self, Self::Error> {
        Polytope::new(raw.faces)
    }
}

impl From<Polytope> for RawPolytope {
    fn from(p: Polytope) -> Self {
        RawPolytope { faces: p.faces }
    }
}

impl Polytope {
    pub fn new(faces: Vec<(DVector<f64>, f64)>) -> Result<Self, GeometryError> {
        let d = faces.first().map(|(a, _)| a.len()).unwrap_or(0);
        if d == 0 || faces.len() <= d {
            return Err(GeometryError::InvalidSet(format!(
                "a bounded polytope in {d} dimensions needs at least {} faces, got {}",
                d + 1,
                faces.len()
            )));
        }
        let mut g = DMatrix::zeros(faces.len(), d);
        let mut h = DVector::zeros(faces.len());
        for (k, (a, b)) in faces.iter().enumerate() {
            let n = a.norm();
            if a.len() != d || !(n > 0.0) || !n.is_finite() || !b.is_finite() {
                return Err(GeometryError::InvalidSet(format!("face {k} is malformed")));
            }
            g.row_mut(k).copy_from(&(a / n).transpose());
            h[k] = -b / n;
        }

        for j in 0..d {
            for sign in [1.0, -1.0] {
                let c = DVector::from_fn(d, |i, _| if i == j { -sign } else { 0.0 });
                match lp::minimize(&c, &g, &h)? {
                    LpOutcome::Optimal(_) => {}
                    LpOutcome::Unbounded => return Err(GeometryError::Unbounded),
                    LpOutcome::Infeasible => return Err(GeometryError::InvalidSet("polytope is empty".into())),
                }
            }
        }

        // Chebyshev center: max r s.t. G_k x + r ≤ h_k.
        let mut gc = DMatrix::zeros(faces.len() + 1, d + 1);
        gc.view_mut((0, 0), (faces.len(), d)).copy_from(&g);
        gc.view_mut((0, d), (faces.len(), 1)).fill(1.0);
        gc[(faces.len(), d)] = -1.0;
        let mut hc = DVector::zeros(faces.len() + 1);
        hc.rows_mut(0, faces.len()).copy_from(&h);
        let mut c = DVector::zeros(d + 1);
        c[d] = -1.0;
        let (center, inradius) = match lp::minimize(&c, &gc, &hc)? {
            LpOutcome::Optimal(x) => (x.rows(0, d).into_owned(), x[d]),
            _ => return Err(GeometryError::InvalidSet("Chebyshev-center LP failed".into())),
        };
        let extent = h.amax().max(1.0);
        if !(inradius > 1e-9 * extent) {
            return Err(GeometryError::InvalidSet(format!("polytope is not full-dimensional (inradius {inradius:e})")));
        }

        let vertices = enumerate_vertices(&g, &h);
        Ok(Self { faces, g, h, vertices, chebyshev_center: center, inradius })
    }

    pub fn aabb(lo: &DVector<f64>, hi: &DVector<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() || lo.iter().zip(hi.iter()).any(|(l, u)| !(l < u)) {
            return Err(GeometryError::InvalidSet("box bounds must satisfy lo < hi componentwise".into()));
        }
        let d = lo.len();
        let mut faces = Vec::with_capacity(2 * d);
        for i in 0..d {
            let e = DVector::from_fn(d, |k, _| if k == i { 1.0 } else { 0.0 });
            faces.push((e.clone(), -hi[i]));
            faces.push((-e, lo[i]));
        }
        Self::new(faces)
    }

    pub fn dim(&self) -> usize {
        self.g.ncols()
    }

    pub fn faces(&self) -> &[(DVector<f64>, f64)] {
        &self.faces
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn chebyshev_center(&self) -> &DVector<f64> {
        &self.chebyshev_center
    }

    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    pub(crate) fn value(&self, x: &DVector<f64>) -> f64 {
        self.faces.iter().map(|(a, b)| a.dot(x) + b).fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn normalized_value(&self, x: &DVector<f64>) -> f64 {
        (&self.g * x - &self.h).max()
    }

    pub(crate) fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, (a, b)) in self.faces.iter().enumerate() {
            let v = a.dot(x) + b;
            if v > best.0 {
                best = (v, k);
            }
        }
        self.faces[best.1].0.clone()
    }

    /// Renormalized mean of the unit normals of faces active at `x`.
    pub(crate) fn boundary_normal(&self, x: &DVector<f64>, tol: f64) -> DVector<f64> {
        let r = &self.g * x - &self.h;
        let mut n = DVector::zeros(self.dim());
        for k in 0..self.g.nrows() {
            if r[k] >= -tol {
                n += self.g.row(k).transpose();
            }
        }
        let norm = n.norm();
        if norm > 0.0 {
            n / norm
        } else {
            let k = r.imax();
            self.g.row(k).transpose()
        }
    }

    pub(crate) fn nearest_boundary_inside(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let r = &self.g * z - &self.h;
        let k = first_argmax(&r);
        let n = self.g.row(k).transpose();
        (z - &n * r[k], n)
    }

    pub(crate) fn project_outside(&self, z: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        match self.active_set_projection(z) {
            Some(x) => Ok(x),
            None => self.enumerated_projection(z),
        }
    }

    /// Primal active-set method for `min ½‖x − z‖²` s.t. `Gx ≤ h`, started
    /// from the Chebyshev center with an empty working set. Ties are broken
    /// by smallest face index. `None` if the iteration budget runs out.
    pub fn active_set_projection(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        let (m, d) = self.g.shape();
        let mut x = self.chebyshev_center.clone();
        let mut working: Vec<usize> = Vec::new();
        let scale = z.amax().max(self.h.amax()).max(1.0);
        for _ in 0..(50 * (m + d)) {
            let gw = self.rows(&working);
            let (p, mu) = if working.is_empty() {
                (z - &x, DVector::zeros(0))
            } else {
                let gram = &gw * gw.transpose();
                let chol = gram.cholesky()?;
                let mu = chol.solve(&(&gw * (z - &x)));
                (z - &x - gw.transpose() * &mu, mu)
            };
            if p.norm() <= 1e-13 * scale {
                let mut drop: Option<(f64, usize)> = None;
                for (i, &mi) in mu.iter().enumerate() {
                    if mi < -1e-14 * scale && drop.is_none_or(|(best, _)| mi < best) {
                        drop = Some((mi, i));
                    }
                }
                match drop {
                    None => return Some(x),
                    Some((_, i)) => {
                        working.remove(i);
                        continue;
                    }
                }
            }
            let gp = &self.g * &p;
            let gx = &self.g * &x;
            let mut alpha = 1.0;
            let mut blocking = None;
            for k in 0..m {
                if working.contains(&k) || gp[k] <= 1e-15 {
                    continue;
                }
                let step = ((self.h[k] - gx[k]) / gp[k]).max(0.0);
                if step < alpha {
                    alpha = step;
                    blocking = Some(k);
                }
            }
            x += &p * alpha;
            if let Some(k) = blocking {
                let pos = working.partition_point(|&w| w < k);
                working.insert(pos, k);
            }
        }
        None
    }

    /// Exhaustive search over every face subset of size ≤ d. Exponential in
    /// the face count; used as a fallback and as a test oracle.
    pub fn enumerated_projection(&self, z: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        let (m, d) = self.g.shape();
        let tol = FEAS_TOL * z.amax().max(self.h.amax()).max(1.0);
        let mut best: Option<(f64, DVector<f64>)> = None;
        for size in 0..=d.min(m) {
            for subset in combinations(m, size) {
                let candidate = if subset.is_empty() {
                    z.clone()
                } else {
                    let gs = self.rows(&subset);
                    let Some(chol) = (&gs * gs.transpose()).cholesky() else { continue };
                    let hs = DVector::from_iterator(size, subset.iter().map(|&k| self.h[k]));
                    let mu = chol.solve(&(&gs * z - hs));
                    z - gs.transpose() * mu
                };
                if (&self.g * &candidate - &self.h).max() > tol {
                    continue;
                }
                let dist = (z - &candidate).norm();
                if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
                    best = Some((dist, candidate));
                }
            }
        }
        best.map(|(_, x)| x).ok_or(GeometryError::NonConvergence {
            method: "polytope face enumeration",
            iterations: 0,
            residual: f64::INFINITY,
        })
    }

    fn rows(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), self.dim(), |i, j| self.g[(idx[i], j)])
    }
}

fn first_argmax(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for k in 1..v.len() {
        if v[k] > v[best] {
            best = k;
        }
    }
    best
}

fn enumerate_vertices(g: &DMatrix<f64>, h: &DVector<f64>) -> Vec<DVector<f64>> {
    let (m, d) = g.shape();
    let tol = 1e-9 * h.amax().max(1.0);
    let mut out: Vec<DVector<f64>> = Vec::new();
    for subset in combinations(m, d) {
        let gs = DMatrix::from_fn(d, d, |i, j| g[(subset[i], j)]);
        let hs = DVector::from_iterator(d, subset.iter().map(|&k| h[k]));
        let Some(x) = gs.lu().solve(&hs) else { continue };
        if !x.iter().all(|v| v.is_finite()) || (g * &x - h).max() > tol {
            continue;
        }
        if out.iter().all(|v| (v - &x).amax() > tol) {
            out.push(x);
        }
    }
    out
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { return out };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
