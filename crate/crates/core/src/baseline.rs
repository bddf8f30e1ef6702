//! k-nearest-neighbour KL divergence estimator.
//!
//! `D(P || Q) ~ (n / N) sum_i ln(nu_k(i) / rho_k(i)) + ln(M / (N - 1))`, where
//! `rho_k(i)` is the distance from `x_i` to its k-th nearest neighbour among
//! the other P samples and `nu_k(i)` the distance to its k-th nearest Q sample.

use log::warn;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::Samples;

/// Distances below this are raised to it before taking logs.
pub const DISTANCE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnEstimate {
    pub kl_hat: f64,
    /// Number of neighbour distances that were raised to the floor.
    pub floored: usize,
}

/// Squared distance to the k-th nearest row of `set`, skipping row `skip`.
fn kth_distance2(x: &[f64], set: &Samples, k: usize, skip: Option<usize>) -> f64 {
    // Sorted list of the k smallest squared distances; ties keep index order.
    let mut best: Vec<f64> = Vec::with_capacity(k + 1);
    for (j, y) in set.rows().enumerate() {
        if Some(j) == skip {
            continue;
        }
        let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.len() == k && d >= best[k - 1] {
            continue;
        }
        let pos = best.partition_point(|v| *v <= d);
        best.insert(pos, d);
        best.truncate(k);
    }
    best[k - 1]
}

/// Brute-force estimate from `p` (N points) and `q` (M points).
pub fn knn_kl(p: &Samples, q: &Samples, k: usize) -> Result<KnnEstimate> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    if p.len() <= k {
        return Err(Error::InsufficientSamples { needed: k, got: p.len() });
    }
    if q.len() <= k {
        return Err(Error::InsufficientSamples { needed: k, got: q.len() });
    }
    let n = p.dim() as f64;
    let (big_n, big_m) = (p.len(), q.len());
    let rows: Vec<(usize, &[f64])> = p.rows().enumerate().collect();
    let terms: Vec<(f64, usize)> = rows
        .par_iter()
        .map(|&(i, x)| {
            let rho = kth_distance2(x, p, k, Some(i)).sqrt();
            let nu = kth_distance2(x, q, k, None).sqrt();
            let floored = usize::from(rho < DISTANCE_FLOOR) + usize::from(nu < DISTANCE_FLOOR);
            ((nu.max(DISTANCE_FLOOR) / rho.max(DISTANCE_FLOOR)).ln(), floored)
        })
        .collect();
    let floored = terms.iter().map(|t| t.1).sum();
    if floored > 0 {
        warn!("{floored} zero nearest-neighbour distances raised to {DISTANCE_FLOOR:e}");
    }
    let sum: f64 = terms.iter().map(|t| t.0).sum();
    let kl_hat = n / big_n as f64 * sum + (big_m as f64 / (big_n as f64 - 1.0)).ln();
    Ok(KnnEstimate { kl_hat, floored })
}
