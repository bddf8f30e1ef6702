//! Frozen random ReLU features.

use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal, Uniform};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, StreamRng};

/// A single hidden layer `phi_i(x) = max(0, w_i . x + b_i)` with unit-norm
/// weights and biases in `[-R, R]`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    n: usize,
    m: usize,
    radius: f64,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

/// Draw a point uniformly from the unit sphere in `R^n` by normalizing a
/// standard Gaussian vector.
pub fn sample_unit_sphere<G: Rng + ?Sized>(rng: &mut G, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            *v = StandardNormal.sample(rng);
            norm2 += *v * *v;
        }
        if norm2 > 0.0 {
            let inv = 1.0 / norm2.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

impl FeatureMap {
    /// Sample `m` features in dimension `n` from a 64-bit seed.
    pub fn sample(n: usize, m: usize, radius: f64, seed: u64) -> Result<Self> {
        Self::sample_with_rng(n, m, radius, &mut rng::seeded(seed))
    }

    pub fn sample_with_rng(n: usize, m: usize, radius: f64, rng: &mut StreamRng) -> Result<Self> {
        check_shape(n, m, radius)?;
        let mut weights = vec![0.0; n * m];
        let bias_dist = Uniform::new_inclusive(-radius, radius).map_err(|e| invalid(e.to_string()))?;
        let mut biases = Vec::with_capacity(m);
        for w in weights.chunks_exact_mut(n) {
            sample_unit_sphere(rng, w);
            biases.push(bias_dist.sample(rng));
        }
        Ok(Self { n, m, radius, weights, biases })
    }

    /// Build from explicit weights (row-major, `m x n`) and biases.
    pub fn from_parts(n: usize, radius: f64, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        let m = biases.len();
        check_shape(n, m, radius)?;
        if weights.len() != n * m {
            return Err(Error::DimensionMismatch { expected: n * m, got: weights.len() });
        }
        for (i, w) in weights.chunks_exact(n).enumerate() {
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("weight {i} has norm {norm}, expected 1")));
            }
        }
        if let Some((i, b)) = biases.iter().enumerate().find(|(_, b)| !(b.abs() <= radius)) {
            return Err(invalid(format!("bias {i} = {b} lies outside [-{radius}, {radius}]")));
        }
        Ok(Self { n, m, radius, weights, biases })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn neurons(&self) -> usize {
        self.m
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weight(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn weights(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.weights.chunks_exact(self.n)
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    /// Write `phi(x)` into `out` (length `m`).
    pub fn phi_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_point(x)?;
        if out.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: out.len() });
        }
        self.phi_unchecked(x, out);
        Ok(())
    }

    pub(crate) fn phi_unchecked(&self, x: &[f64], out: &mut [f64]) {
        for ((o, w), b) in out.iter_mut().zip(self.weights.chunks_exact(self.n)).zip(&self.biases) {
            let pre = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b;
            *o = pre.max(0.0);
        }
    }

    pub fn phi(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.m];
        self.phi_into(x, &mut out)?;
        Ok(out)
    }

    /// The network output `phi(x)^T theta`.
    pub fn psi(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        if theta.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: theta.len() });
        }
        Ok(self.psi_unchecked(x, theta))
    }

    pub(crate) fn psi_unchecked(&self, x: &[f64], theta: &[f64]) -> f64 {
        self.weights
            .chunks_exact(self.n)
            .zip(&self.biases)
            .zip(theta)
            .map(|((w, b), t)| {
                let pre = w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b;
                pre.max(0.0) * t
            })
            .sum()
    }
}

fn check_shape(n: usize, m: usize, radius: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("dimension n must be at least 1"));
    }
    if m == 0 {
        return Err(invalid("neuron count m must be at least 1"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid(format!("radius must be positive and finite, got {radius}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_weights_are_signs() {
        let fm = FeatureMap::sample(1, 3, 2.0, 11).unwrap();
        for w in fm.weights() {
            assert!(w[0] == 1.0 || w[0] == -1.0, "{w:?}");
        }
    }

    #[test]
    fn full_sized_map_respects_bounds() {
        let fm = FeatureMap::sample(2, 50, 2.0, 3).unwrap();
        assert_eq!(fm.neurons(), 50);
        assert!(fm.biases().iter().all(|b| (-2.0..=2.0).contains(b)));
        for w in fm.weights() {
            let norm = (w[0] * w[0] + w[1] * w[1]).sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_mean_is_near_zero() {
        let fm = FeatureMap::sample(2, 10_000, 2.0, 5).unwrap();
        let mut mean = [0.0; 2];
        for w in fm.weights() {
            mean[0] += w[0];
            mean[1] += w[1];
        }
        let norm = (mean[0] * mean[0] + mean[1] * mean[1]).sqrt() / 10_000.0;
        assert!(norm < 0.05, "{norm}");
    }

    #[test]
    fn angles_pass_chi_square() {
        // 15 degrees of freedom, upper 1% point.
        const CRITICAL: f64 = 30.578;
        let fm = FeatureMap::sample(2, 10_000, 1.0, 17).unwrap();
        let mut bins = [0usize; 16];
        for w in fm.weights() {
            let angle = w[1].atan2(w[0]).rem_euclid(std::f64::consts::TAU);
            let idx = ((angle / std::f64::consts::TAU) * 16.0) as usize;
            bins[idx.min(15)] += 1;
        }
        let expected = 10_000.0 / 16.0;
        let chi2: f64 = bins.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < CRITICAL, "chi2 = {chi2}");
    }

    #[test]
    fn same_seed_same_map() {
        let a = FeatureMap::sample(3, 40, 1.5, 99).unwrap();
        let b = FeatureMap::sample(3, 40, 1.5, 99).unwrap();
        assert_eq!(a, b);
        let c = FeatureMap::sample(3, 40, 1.5, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(FeatureMap::sample(0, 1, 1.0, 0).is_err());
        assert!(FeatureMap::sample(1, 0, 1.0, 0).is_err());
        assert!(FeatureMap::sample(1, 1, 0.0, 0).is_err());
        assert!(FeatureMap::sample(1, 1, -1.0, 0).is_err());
        assert!(FeatureMap::from_parts(2, 1.0, vec![1.0, 1.0], vec![0.0]).is_err());
        assert!(FeatureMap::from_parts(2, 1.0, vec![1.0, 0.0], vec![1.5]).is_err());
    }

    #[test]
    fn phi_examples() {
        let fm = FeatureMap::from_parts(2, 2.0, vec![1.0, 0.0, 0.0, -1.0], vec![-1.0, 0.5]).unwrap();
        assert_eq!(fm.phi(&[0.0, 0.0]).unwrap(), vec![0.0, 0.5]);
        assert_eq!(fm.phi(&[2.0, 0.0]).unwrap()[0], 1.0);
        assert_eq!(fm.psi(&[2.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(fm.psi(&[2.0, 1.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(fm.phi(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(fm.psi(&[1.0, 0.0], &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    proptest! {
        #[test]
        fn phi_is_lipschitz_and_bounded(seed in any::<u64>(), a in prop::array::uniform3(-1.0f64..1.0), b in prop::array::uniform3(-1.0f64..1.0)) {
            let r = 2.0;
            let fm = FeatureMap::sample(3, 16, r, seed).unwrap();
            let scale = |v: [f64; 3]| {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1.0 { v.map(|x| x * r / norm) } else { v.map(|x| x * r) }
            };
            let (x, y) = (scale(a), scale(b));
            let dist = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let px = fm.phi(&x).unwrap();
            let py = fm.phi(&y).unwrap();
            for (u, v) in px.iter().zip(&py) {
                prop_assert!((u - v).abs() <= dist + 1e-12);
                prop_assert!(*u >= 0.0 && *u <= 2.0 * r + 1e-12);
            }
            let norm = px.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm <= 2.0 * r * (16f64).sqrt() + 1e-12);
        }
    }
}
