//! Constructive random-feature approximation of smooth functions.
//!
//! A function `g` with a rapidly decaying Fourier transform `G` is written on
//! the ball `B_R` as a superposition of ReLUs,
//!
//! ```text
//! g(x) = integral over the sphere and [-R, R] of ell(w, b) relu(w . x + b) db mu(dw),
//! ```
//!
//! with `ell = xi + zeta + p`. Sampling `(w_i, b_i)` uniformly and setting
//! `c_i = 2 R A ell(w_i, b_i) / m` gives an unbiased random-feature network.
//! The transform convention is `G(omega) = integral g(x) exp(-2 pi i omega . x) dx`.

mod measure;
mod representation;
pub mod sphere;
mod verify;

pub use measure::{ball_grid, linf_error_certified, measure_linf_error, LinfMeasurement};
pub use representation::{
    build_representation, reproduce_constant, reproduce_linear, sample_coefficients, RepresentationDensity,
};
pub use verify::{approx_trial, log_log_slope, median, ApproxTrial, CERTIFY_SLACK};

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::constants::{dimension_factor, sphere_area};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{adaptive_with, AdaptiveOptions};

/// Absolute tolerance of the radial integrals.
pub const RADIAL_TOL: f64 = 1e-9;

/// `|G(omega)| <= scale * exp(-pi * rate * |omega|^2)` for every `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianEnvelope {
    pub scale: f64,
    pub rate: f64,
}

/// A test function with a closed-form Fourier transform.
pub trait SpectralFunction: Sync {
    fn dim(&self) -> usize;

    /// `g(x)`.
    fn value(&self, x: &[f64]) -> f64;

    /// `G(omega)`.
    fn transform(&self, omega: &[f64]) -> Complex64;

    /// `G(s alpha)` for unit `alpha` when the transform is real and radial.
    fn radial_profile(&self, _s: f64) -> Option<f64> {
        None
    }

    fn envelope(&self) -> GaussianEnvelope;

    /// A Lipschitz constant of `g` on all of `R^n`.
    fn lipschitz(&self) -> f64;

    fn magnitude(&self, omega: &[f64]) -> f64 {
        self.transform(omega).norm()
    }

    /// Phase of `G` in cycles, so that `G = |G| exp(2 pi i phase)`.
    fn phase(&self, omega: &[f64]) -> f64 {
        self.transform(omega).arg() / (2.0 * PI)
    }
}

/// `g(x) = amplitude * exp(-pi |x|^2)`, its own transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBump {
    pub n: usize,
    pub amplitude: f64,
}

impl GaussianBump {
    pub fn new(n: usize, amplitude: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !amplitude.is_finite() {
            return Err(invalid("amplitude must be finite"));
        }
        Ok(Self { n, amplitude })
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

impl SpectralFunction for GaussianBump {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.amplitude * (-PI * norm2(x)).exp()
    }

    fn transform(&self, omega: &[f64]) -> Complex64 {
        Complex64::new(self.amplitude * (-PI * norm2(omega)).exp(), 0.0)
    }

    fn radial_profile(&self, s: f64) -> Option<f64> {
        Some(self.amplitude * (-PI * s * s).exp())
    }

    fn envelope(&self) -> GaussianEnvelope {
        GaussianEnvelope { scale: self.amplitude.abs(), rate: 1.0 }
    }

    fn lipschitz(&self) -> f64 {
        // max of 2 pi s exp(-pi s^2), attained at s = 1 / sqrt(2 pi)
        self.amplitude.abs() * (2.0 * PI).sqrt() * (-0.5f64).exp()
    }
}

/// `g(x) = sum_k weight_k exp(-pi |x - center_k|^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    n: usize,
    weights: Vec<f64>,
    centers: Vec<Vec<f64>>,
}

impl GaussianMixture {
    pub fn new(components: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let n = components.first().map(|c| c.1.len()).ok_or_else(|| invalid("mixture needs a component"))?;
        if n == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if components.iter().any(|c| c.1.len() != n) {
            return Err(invalid("mixture centers must share a dimension"));
        }
        let (weights, centers) = components.into_iter().unzip();
        Ok(Self { n, weights, centers })
    }
}

impl SpectralFunction for GaussianMixture {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.centers)
            .map(|(w, c)| w * (-PI * x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).exp())
            .sum()
    }

    fn transform(&self, omega: &[f64]) -> Complex64 {
        let env = (-PI * norm2(omega)).exp();
        self.weights
            .iter()
            .zip(&self.centers)
            .map(|(w, c)| {
                let t: f64 = omega.iter().zip(c).map(|(a, b)| a * b).sum();
                Complex64::from_polar(w * env, -2.0 * PI * t)
            })
            .sum()
    }

    fn envelope(&self) -> GaussianEnvelope {
        GaussianEnvelope { scale: self.weights.iter().map(|w| w.abs()).sum(), rate: 1.0 }
    }

    fn lipschitz(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum::<f64>() * (2.0 * PI).sqrt() * (-0.5f64).exp()
    }
}

/// Smallest `S` (on a 1/4 grid) with
/// `coeff * scale * integral_S^inf s^k exp(-pi rate s^2) ds < tol`.
pub(crate) fn tail_cutoff(env: GaussianEnvelope, coeff: f64, k: f64, tol: f64) -> f64 {
    let a = PI * env.rate;
    let mut s: f64 = 1.0;
    loop {
        let denom = 2.0 * a * s - k / s;
        if denom > 0.0 {
            let tail = coeff * env.scale * s.powf(k) * (-a * s * s).exp() / denom;
            if tail < tol {
                return s;
            }
        }
        s += 0.25;
    }
}

/// `integral_0^S f(s) ds` by adaptive Gauss-Kronrod with break points every 1/2.
pub(crate) fn radial_quad<F: FnMut(f64) -> f64>(f: F, upper: f64, tol: f64) -> Result<f64> {
    let pieces = (upper / 0.5).ceil() as usize;
    let breaks: Vec<f64> = (0..=pieces).map(|i| (i as f64 * 0.5).min(upper)).collect();
    Ok(adaptive_with(f, &breaks, AdaptiveOptions { abs_tol: tol, rel_tol: 0.0, max_intervals: 20_000 })?.value)
}

/// Number of equispaced angles for periodic trapezoid rules in the plane.
pub(crate) const ANGLES: usize = 256;

/// `integral over R^n of F(omega) d omega` for `n <= 2`, or for radial `F`
/// in any dimension when `radial` gives `F` as a function of `|omega|`.
///
/// `bound_k` and `bound_coeff` describe the growth of `|F| / envelope` so the
/// radial range can be truncated with an analytic tail bound.
pub(crate) fn spectral_integral<F>(n: usize, env: GaussianEnvelope, bound_coeff: f64, bound_k: f64, f: F) -> Result<f64>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let upper = tail_cutoff(env, bound_coeff, bound_k + n as f64 - 1.0, RADIAL_TOL * 1e-2);
    match n {
        1 => radial_quad(|s| f(s, &[1.0]) + f(s, &[-1.0]), upper, RADIAL_TOL),
        2 => {
            let h = 2.0 * PI / ANGLES as f64;
            let mut total = 0.0;
            for k in 0..ANGLES {
                let phi = k as f64 * h;
                let dir = [phi.cos(), phi.sin()];
                total += radial_quad(|s| s * f(s, &dir), upper, RADIAL_TOL / ANGLES as f64 * 2.0 * PI)?;
            }
            Ok(total * h)
        }
        _ => Err(Error::DimensionTooHigh(n)),
    }
}

/// `|| g ||_F = sup |G(omega)| (1 + (2 pi |omega|)^{n+3})`, from the radial
/// envelope (exact when the transform is radial): dense grid, golden-section
/// refinement and an analytic bound on the tail.
pub fn f_norm<S: SpectralFunction + ?Sized>(spec: &S) -> Result<f64> {
    let n = spec.dim();
    let k = (n + 3) as i32;
    let env = spec.envelope();
    if !(env.scale > 0.0) {
        return Err(Error::NonIntegrableSpectrum("transform vanishes identically".into()));
    }
    if !(env.rate > 0.0) || !env.scale.is_finite() {
        return Err(Error::NonIntegrableSpectrum("transform lacks a Gaussian envelope".into()));
    }
    let mag = |s: f64| match spec.radial_profile(s) {
        Some(v) => v.abs(),
        None => env.scale * (-PI * env.rate * s * s).exp(),
    };
    let h = |s: f64| mag(s) * (1.0 + (2.0 * PI * s).powi(k));
    // Beyond s_star = sqrt(k / (2 pi rate)) the envelope times the weight is
    // decreasing, so its value at the grid end bounds the tail.
    let s_star = (k as f64 / (2.0 * PI * env.rate)).sqrt();
    let upper = 2.0 * s_star + 2.0;
    let steps = 20_000;
    let dx = upper / steps as f64;
    let (mut best_i, mut best) = (0, h(0.0));
    for i in 1..=steps {
        let v = h(i as f64 * dx);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = ((best_i as f64 - 1.0).max(0.0) * dx, (best_i as f64 + 1.0).min(steps as f64) * dx);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-12 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if h(a) < h(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    best = best.max(h(0.5 * (lo + hi)));
    let tail = env.scale * (-PI * env.rate * upper * upper).exp() * (1.0 + (2.0 * PI * upper).powi(k));
    if tail > best {
        return Err(Error::NonIntegrableSpectrum("tail bound exceeds the interior maximum".into()));
    }
    Ok(best)
}

/// `integral |G(omega)| |2 pi omega|^i d omega` by radial quadrature.
pub fn spectral_moment<S: SpectralFunction + ?Sized>(spec: &S, i: u32) -> Result<f64> {
    let n = spec.dim();
    let env = spec.envelope();
    let w = |s: f64| (2.0 * PI * s).powi(i as i32);
    if spec.radial_profile(0.0).is_some() {
        let upper = tail_cutoff(env, (2.0 * PI).powi(i as i32), (i + n as u32 - 1) as f64, RADIAL_TOL * 1e-2);
        let area = sphere_area(n)?;
        return Ok(area * radial_quad(|s| s.powi(n as i32 - 1) * w(s) * spec.radial_profile(s).unwrap().abs(), upper, RADIAL_TOL)?);
    }
    spectral_integral(n, env, (2.0 * PI).powi(i as i32), i as f64, |s, dir| {
        let om: Vec<f64> = dir.iter().map(|d| d * s).collect();
        w(s) * spec.magnitude(&om)
    })
}

/// The common bound `(2 A / (2 pi)^n) f_norm` on the low spectral moments.
pub fn moment_bound<S: SpectralFunction + ?Sized>(spec: &S) -> Result<f64> {
    Ok(dimension_factor(spec.dim())? * f_norm(spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Independent golden-section maximizer of exp(-pi s^2) (1 + (2 pi s)^5).
    fn oracle_f_norm_2d() -> f64 {
        let h = |s: f64| (-PI * s * s).exp() * (1.0 + (2.0 * PI * s).powi(5));
        let (mut lo, mut hi) = (0.5, 1.5);
        let g = 0.618_033_988_749_894_9;
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if h(a) < h(b) {
                lo = a
            } else {
                hi = b
            }
        }
        h(0.5 * (lo + hi))
    }

    #[test]
    fn gaussian_norm_matches_oracle() {
        let f = f_norm(&GaussianBump::new(2, 1.0).unwrap()).unwrap();
        assert!((f - oracle_f_norm_2d()).abs() < 1e-10 * f, "{f}");
        assert!(f > 400.0 && f < 500.0);
        let f3 = f_norm(&GaussianBump::new(2, 3.0).unwrap()).unwrap();
        assert_relative_eq!(f3, 3.0 * f, max_relative = 1e-12);
        assert!(matches!(f_norm(&GaussianBump::new(2, 0.0).unwrap()), Err(Error::NonIntegrableSpectrum(_))));
    }

    #[test]
    fn norm_dominates_sampled_spectrum() {
        let mix = GaussianMixture::new(vec![(1.0, vec![0.3, 0.0]), (-0.5, vec![-0.2, 0.4])]).unwrap();
        let f = f_norm(&mix).unwrap();
        let mut g = crate::rng::seeded(3);
        for _ in 0..2000 {
            use rand::Rng;
            let om = [g.random_range(-3.0..3.0), g.random_range(-3.0..3.0)];
            let s = norm2(&om).sqrt();
            assert!(mix.magnitude(&om) * (1.0 + (2.0 * PI * s).powi(5)) <= f * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mixture_transform_is_consistent() {
        let mix = GaussianMixture::new(vec![(1.0, vec![0.3, 0.0]), (-0.5, vec![-0.2, 0.4])]).unwrap();
        // Inverse transform at a point by the planar quadrature.
        let x = [0.2, -0.1];
        let v = spectral_integral(2, mix.envelope(), 1.0, 0.0, |s, dir| {
            let om = [s * dir[0], s * dir[1]];
            let ph = 2.0 * PI * (om[0] * x[0] + om[1] * x[1]);
            (mix.transform(&om) * Complex64::from_polar(1.0, ph)).re
        })
        .unwrap();
        assert!((v - mix.value(&x)).abs() < 1e-8, "{v} vs {}", mix.value(&x));
        assert!((mix.phase(&[0.0, 0.0])).abs() < 1e-15);
    }

    #[test]
    fn low_moments_obey_common_bound() {
        for n in [1, 2, 3] {
            let g = GaussianBump::new(n, 1.0).unwrap();
            let bound = moment_bound(&g).unwrap();
            for i in 0..=2 {
                let m = spectral_moment(&g, i).unwrap();
                assert!(m <= bound, "n={n} i={i}: {m} > {bound}");
            }
            // Zeroth moment is g(0) = 1 for the self-dual bump.
            assert!((spectral_moment(&g, 0).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn lipschitz_constants_hold() {
        let g = GaussianBump::new(2, 1.0).unwrap();
        let l = g.lipschitz();
        for i in 0..200 {
            let s = i as f64 / 100.0;
            let d = (g.value(&[s + 1e-6, 0.0]) - g.value(&[s, 0.0])).abs() / 1e-6;
            assert!(d <= l * (1.0 + 1e-5));
        }
    }
}
