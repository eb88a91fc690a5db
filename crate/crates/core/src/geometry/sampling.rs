use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `count` deterministic, roughly uniform points on the unit sphere in
/// `dim` dimensions: equally spaced angles on the circle, a Fibonacci
/// lattice on the 2-sphere, seeded Gaussian directions otherwise.
pub fn unit_sphere_points(dim: usize, count: usize) -> Vec<DVector<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..count)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / count as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    DVector::from_vec(vec![rho * t.cos(), rho * t.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(dim as u64);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                // Box–Muller pairs.
                let v = DVector::from_fn(dim, |_, _| {
                    let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(f64::MIN_POSITIVE), rng.gen());
                    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                });
                let n = v.norm();
                if n > 1e-12 {
                    out.push(v / n);
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_are_unit_and_balanced() {
        for dim in 2..=4 {
            let pts = unit_sphere_points(dim, 512);
            assert_eq!(pts.len(), 512);
            let mean: DVector<f64> = pts.iter().fold(DVector::zeros(dim), |acc, p| acc + p) / 512.0;
            for p in &pts {
                assert!((p.norm() - 1.0).abs() < 1e-12);
            }
            let bound = if dim <= 3 { 1e-2 } else { 0.15 };
            assert!(mean.norm() < bound, "dim {dim}: mean {}", mean.norm());
        }
    }
}
