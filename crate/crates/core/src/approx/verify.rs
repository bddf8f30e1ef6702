//! Trials of the sampled network against its target, for rate studies.

use serde::Serialize;

use super::measure::{linf_error_certified, LinfMeasurement};
use super::representation::{sample_coefficients, RepresentationDensity};
use super::SpectralFunction;
use crate::constants::approximation_bound;
use crate::error::{invalid, Error, Result};
use crate::features::FeatureMap;
use crate::rng::{self, purpose};

/// Relative gap allowed between the observed and certified sup-norm.
pub const CERTIFY_SLACK: f64 = 0.1;
const INITIAL_SPACING: f64 = 0.1;
const MAX_EVALUATIONS: usize = 20_000_000;

/// One sampled network and its measured error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxTrial {
    pub m: usize,
    pub trial: usize,
    pub linf_error: f64,
    /// Certified upper bound on the true sup-norm error.
    pub linf_upper: f64,
    pub prop1_bound: f64,
    pub converged: bool,
}

/// Sample `m` features from `seed`, set the coefficients from `rep` and
/// measure the sup-norm error over the ball.
pub fn approx_trial<S: SpectralFunction + ?Sized>(
    rep: &RepresentationDensity<'_, S>,
    m: usize,
    trial: usize,
    seed: u64,
    delta: f64,
) -> Result<ApproxTrial> {
    let n = rep.dim();
    let radius = rep.radius();
    let map = FeatureMap::sample_with_rng(n, m, radius, &mut rng::stream(seed, &[purpose::FEATURES]))?;
    let coeffs = sample_coefficients(rep, &map)?;
    let spec = rep.spec();
    // Each feature is 1-Lipschitz, so the network is sum |c_i|-Lipschitz.
    let lipschitz = spec.lipschitz() + coeffs.iter().map(|c| c.abs()).sum::<f64>();
    let meas: LinfMeasurement = linf_error_certified(
        |x| map.psi(x, &coeffs).expect("point has the map's dimension") - spec.value(x),
        n,
        radius,
        lipschitz,
        CERTIFY_SLACK,
        INITIAL_SPACING * radius,
        MAX_EVALUATIONS,
    )?;
    Ok(ApproxTrial {
        m,
        trial,
        linf_error: meas.value,
        linf_upper: meas.upper,
        prop1_bound: approximation_bound(n, m, radius, rep.f_norm, delta)?,
        converged: meas.converged,
    })
}

/// Median of a nonempty slice.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySampleSet("median input"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("slope needs two or more matched points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(invalid("log-log slope needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("slope needs at least two distinct x values"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{build_representation, GaussianBump};

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() + 0.5).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_err());
        assert!(log_log_slope(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn trial_is_certified_and_below_bound() {
        let g = GaussianBump::new(2, 1.0).unwrap();
        let rep = build_representation(&g, 1.0).unwrap();
        let t = approx_trial(&rep, 256, 0, 5, 0.1).unwrap();
        assert!(t.converged);
        assert!(t.linf_error <= t.linf_upper && t.linf_upper <= 1.1 * t.linf_error + 1e-12);
        assert!(t.linf_error < t.prop1_bound);
        assert_eq!(t, approx_trial(&rep, 256, 0, 5, 0.1).unwrap());
    }
}
