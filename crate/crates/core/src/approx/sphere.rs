//! Monte Carlo checks of integrals over the unit sphere against surface measure.

use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal};

use crate::constants::sphere_area;
use crate::error::{invalid, Result};
use crate::features::sample_unit_sphere;
use crate::rng;

/// A Monte Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl McEstimate {
    /// Whether `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// `integral f(z) mu(dz)` over the sphere in `R^n`, `mu` of total mass `A_{n-1}`.
pub fn sphere_integral<F: FnMut(&[f64]) -> f64>(n: usize, samples: usize, seed: u64, mut f: F) -> Result<McEstimate> {
    if samples < 2 {
        return Err(invalid("need at least two samples"));
    }
    let area = sphere_area(n)?;
    let mut g = rng::seeded(seed);
    let mut z = vec![0.0; n];
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 1..=samples {
        sample_unit_sphere(&mut g, &mut z);
        let v = f(&z);
        let d = v - mean;
        mean += d / k as f64;
        m2 += d * (v - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(McEstimate { mean: area * mean, std_error: area * (var / samples as f64).sqrt() })
}

/// Estimate of `integral |z_1| mu(dz)`.
pub fn abs_coordinate_integral(n: usize, samples: usize, seed: u64) -> Result<McEstimate> {
    sphere_integral(n, samples, seed, |z| z[0].abs())
}

/// Estimate of `integral z_i sign(z_1) mu(dz)` for `i != 0` (zero by symmetry).
pub fn sign_orthogonal_integral(n: usize, i: usize, samples: usize, seed: u64) -> Result<McEstimate> {
    if i == 0 || i >= n {
        return Err(invalid(format!("coordinate {i} must lie in 1..{n}")));
    }
    sphere_integral(n, samples, seed, |z| z[i] * z[0].signum())
}

/// Haar-distributed orthogonal matrix (row-major) via Gram-Schmidt on a
/// Gaussian matrix.
pub fn random_orthogonal<G: Rng + ?Sized>(n: usize, rng: &mut G) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    let mut i = 0;
    while i < n {
        let mut row: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        // Two passes keep the rows orthogonal to rounding.
        for _ in 0..2 {
            for j in 0..i {
                let prev = &q[j * n..(j + 1) * n];
                let d: f64 = row.iter().zip(prev).map(|(a, b)| a * b).sum();
                row.iter_mut().zip(prev).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        q[i * n..(i + 1) * n].iter_mut().zip(&row).for_each(|(o, v)| *o = v / norm);
        i += 1;
    }
    q
}

/// Independent estimates of `integral f(w) mu(dw)` and `integral f(U w) mu(dw)`.
pub fn rotation_pair<F: Fn(&[f64]) -> f64>(n: usize, u: &[f64], f: F, samples: usize, seed: u64) -> Result<(McEstimate, McEstimate)> {
    if u.len() != n * n {
        return Err(invalid("rotation must be n x n"));
    }
    let plain = sphere_integral(n, samples, rng::derive_seed(seed, &[1]), &f)?;
    let mut uw = vec![0.0; n];
    let rotated = sphere_integral(n, samples, rng::derive_seed(seed, &[2]), |w| {
        for (r, o) in uw.iter_mut().enumerate() {
            *o = u[r * n..(r + 1) * n].iter().zip(w).map(|(a, b)| a * b).sum();
        }
        f(&uw)
    })?;
    Ok((plain, rotated))
}
