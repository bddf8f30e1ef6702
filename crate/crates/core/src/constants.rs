//! Closed-form constants, error bounds and step-size schedules.
//!
//! Every exponential of the form `exp(c * R * C_theta)` goes through
//! [`guarded_exp`], which refuses exponents above [`EXP_CEILING`]. A bound
//! whose evaluation would overflow is reported as [`TheoremBound::Vacuous`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};

/// Largest exponent passed to `exp` before a bound is declared vacuous.
pub const EXP_CEILING: f64 = 700.0;

/// `exp(x)` for `x <= EXP_CEILING`, otherwise [`Error::Overflow`].
pub fn guarded_exp(x: f64) -> Result<f64> {
    if x.is_nan() || x > EXP_CEILING {
        return Err(Error::Overflow { exponent: x, ceiling: EXP_CEILING });
    }
    Ok(x.exp())
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("dimension n must be at least 1"));
    }
    Ok(())
}

/// Surface area `A_{n-1} = 2 pi^{n/2} / Gamma(n/2)` of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> Result<f64> {
    check_dim(n)?;
    let h = n as f64 / 2.0;
    Ok(2.0 * PI.powf(h) / gamma(h))
}

/// `H_{n-1} = 2 pi^{(n-1)/2} / Gamma((n+1)/2)`, the integral of `|z_1|` over
/// the unit sphere against surface measure.
pub fn half_integral_constant(n: usize) -> Result<f64> {
    check_dim(n)?;
    let nf = n as f64;
    Ok(2.0 * PI.powf((nf - 1.0) / 2.0) / gamma((nf + 1.0) / 2.0))
}

/// The recurring factor `2 A_{n-1} / (2 pi)^n`.
pub fn dimension_factor(n: usize) -> Result<f64> {
    Ok(2.0 * sphere_area(n)? / (2.0 * PI).powi(n as i32))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Approximation-error factor `kappa`.
pub fn kappa(n: usize, radius: f64, rho: f64) -> Result<f64> {
    check_positive("R", radius)?;
    check_positive("rho", rho)?;
    let r = radius;
    let poly = 16.0 * r * r + 32.0 * r + 21.0 * (n as f64).sqrt() * r + 36.0;
    Ok(poly * dimension_factor(n)? * rho)
}

/// Coefficient-scale constant `C_theta`; the box is `|theta_i| <= C_theta / m`.
pub fn c_theta(n: usize, radius: f64, rho: f64) -> Result<f64> {
    check_positive("R", radius)?;
    check_positive("rho", rho)?;
    let r = radius;
    let poly = 2.0 * r + 4.0 + 3.0 * (n as f64).sqrt() + 4.0 / r;
    Ok(poly * dimension_factor(n)? * rho)
}

/// Dimension-level constants for a problem with smoothness bound `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConstants {
    pub n: usize,
    pub radius: f64,
    pub rho: f64,
    pub sphere_area: f64,
    pub half_integral: f64,
    pub c_theta: f64,
    pub kappa: f64,
}

impl ProblemConstants {
    pub fn new(n: usize, radius: f64, rho: f64) -> Result<Self> {
        Ok(Self {
            n,
            radius,
            rho,
            sphere_area: sphere_area(n)?,
            half_integral: half_integral_constant(n)?,
            c_theta: c_theta(n, radius, rho)?,
            kappa: kappa(n, radius, rho)?,
        })
    }

    /// `R * C_theta`, the quantity every exponential is taken in.
    pub fn rc(&self) -> f64 {
        self.radius * self.c_theta
    }

    /// Per-coordinate box half-width `C_theta / m`.
    pub fn box_bound(&self, m: usize) -> f64 {
        self.c_theta / m as f64
    }

    /// The interval `[exp(-2 R C), exp(2 R C)]` the tracker `z` lives in.
    pub fn z_interval(&self) -> Result<(f64, f64)> {
        let hi = guarded_exp(2.0 * self.rc())?;
        Ok(((-2.0 * self.rc()).exp(), hi))
    }
}

/// Diameters, Lipschitz and variance constants for the recursion at width `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerConstants {
    pub d_theta: f64,
    pub d_z: f64,
    pub l_z: f64,
    pub g: f64,
    pub l_f: f64,
    pub nu: f64,
}

impl OptimizerConstants {
    pub fn new(pc: &ProblemConstants, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        let rc = pc.rc();
        let r = pc.radius;
        let sm = (m as f64).sqrt();
        let e2 = guarded_exp(2.0 * rc)?;
        let e4 = guarded_exp(4.0 * rc)?;
        let e6 = guarded_exp(6.0 * rc)?;
        Ok(Self {
            d_theta: 2.0 * pc.c_theta / sm,
            d_z: e2,
            l_z: 2.0 * r * sm * e2,
            g: 2.0 * r * sm * (1.0 + e4),
            l_f: 2.0 * r * sm * e6,
            nu: e2,
        })
    }
}

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// Rate-optimal `alpha` and `r` from the error bound.
    Theorem,
    /// `alpha = T^{-2/3}`, `r = 1/m`.
    #[default]
    Experiment,
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScheduleKind::Theorem => "theorem",
            ScheduleKind::Experiment => "experiment",
        })
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem" => Ok(Self::Theorem),
            "experiment" => Ok(Self::Experiment),
            other => Err(invalid(format!("unknown schedule {other:?}, expected theorem or experiment"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub alpha: f64,
    pub r: f64,
}

/// The intermediate constants `b1..b4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateConstants {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl RateConstants {
    pub fn new(pc: &ProblemConstants) -> Result<Self> {
        let c = pc.c_theta;
        let r = pc.radius;
        let rc = pc.rc();
        let e4 = guarded_exp(4.0 * rc)?;
        let e8 = guarded_exp(8.0 * rc)?;
        let e10 = guarded_exp(10.0 * rc)?;
        let e12 = guarded_exp(12.0 * rc)?;
        let b1 = 2.0 * rc * e8;
        let b2 = c * c / 2.0;
        let b3 = 8.0 * r.powi(3) * c * (e8 + e12) + 2.0 * r * r * (1.0 + e4).powi(2);
        let b4 = 2.0 * rc * e10;
        let beta1 = (2f64.powf(-2.0 / 3.0) + 2f64.powf(1.0 / 3.0)) * b1.cbrt() * b4.powf(2.0 / 3.0);
        let beta2 = 2.0 * (b2 * b3).sqrt();
        let out = Self { b1, b2, b3, b4, beta1, beta2 };
        if [b1, b2, b3, b4, beta1, beta2].iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow { exponent: 12.0 * rc, ceiling: EXP_CEILING });
        }
        Ok(out)
    }
}

/// The theorem step size `(2/T)^{2/3}` exceeds one below `T = 2`.
fn check_horizon(t: u64, m: usize, min_t: u64) -> Result<()> {
    if t < min_t {
        return Err(invalid(format!("T must be at least {min_t}, got {t}")));
    }
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    Ok(())
}

/// Step size and gradient scale for `T` iterations at width `m`.
pub fn schedule(kind: ScheduleKind, t: u64, m: usize, pc: &ProblemConstants) -> Result<Schedule> {
    check_horizon(t, m, if kind == ScheduleKind::Theorem { 2 } else { 1 })?;
    let tf = t as f64;
    match kind {
        ScheduleKind::Experiment => Ok(Schedule { alpha: tf.powf(-2.0 / 3.0), r: 1.0 / m as f64 }),
        ScheduleKind::Theorem => {
            let rc = RateConstants::new(pc)?;
            Ok(Schedule {
                alpha: 2f64.powf(2.0 / 3.0) * tf.powf(-2.0 / 3.0),
                r: tf.powf(1.0 / 6.0) * 2f64.powf(-2.0 / 3.0) * (rc.b2 / rc.b3).sqrt() / m as f64,
            })
        }
    }
}

/// Everything the error bound depends on, for one `(n, m, T, R, rho, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub m: usize,
    pub t: u64,
    pub radius: f64,
    pub rho: f64,
    pub delta: f64,
    pub c_theta: f64,
    pub kappa: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub alpha: f64,
    pub r: f64,
    pub approx_term: f64,
    pub opt_term: f64,
    pub total: f64,
}

/// Outcome of evaluating the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum TheoremBound {
    Finite(BoundReport),
    /// Some exponential exceeded [`EXP_CEILING`]; the bound carries no information.
    Vacuous { c_theta: f64, kappa: f64, exponent: f64 },
}

impl TheoremBound {
    pub fn report(&self) -> Option<&BoundReport> {
        match self {
            TheoremBound::Finite(r) => Some(r),
            TheoremBound::Vacuous { .. } => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            TheoremBound::Finite(_) => "ok",
            TheoremBound::Vacuous { .. } => "vacuous",
        }
    }
}

/// `(sqrt(n) + sqrt(log(1/delta))) / sqrt(m)`, shared by the approximation terms.
fn confidence_factor(n: usize, m: usize, delta: f64) -> f64 {
    ((n as f64).sqrt() + (1.0 / delta).ln().sqrt()) / (m as f64).sqrt()
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Evaluate the full estimation-error bound with the rate-optimal schedule.
pub fn theorem_bound(n: usize, m: usize, t: u64, radius: f64, rho: f64, delta: f64) -> Result<TheoremBound> {
    check_horizon(t, m, 2)?;
    check_delta(delta)?;
    let pc = ProblemConstants::new(n, radius, rho)?;
    let rates = match RateConstants::new(&pc) {
        Ok(r) => r,
        Err(Error::Overflow { exponent, .. }) => {
            return Ok(TheoremBound::Vacuous { c_theta: pc.c_theta, kappa: pc.kappa, exponent: exponent.max(12.0 * pc.rc()) })
        }
        Err(e) => return Err(e),
    };
    let sched = schedule(ScheduleKind::Theorem, t, m, &pc)?;
    let tf = t as f64;
    let approx_term = 2.0 * pc.kappa * confidence_factor(n, m, delta);
    let opt_term = rates.beta1 * tf.powf(-1.0 / 3.0) + rates.beta2 * tf.powf(-0.5);
    let total = approx_term + opt_term;
    if !total.is_finite() {
        return Ok(TheoremBound::Vacuous { c_theta: pc.c_theta, kappa: pc.kappa, exponent: 12.0 * pc.rc() });
    }
    Ok(TheoremBound::Finite(BoundReport {
        n,
        m,
        t,
        radius,
        rho,
        delta,
        c_theta: pc.c_theta,
        kappa: pc.kappa,
        b1: rates.b1,
        b2: rates.b2,
        b3: rates.b3,
        b4: rates.b4,
        beta1: rates.beta1,
        beta2: rates.beta2,
        alpha: sched.alpha,
        r: sched.r,
        approx_term,
        opt_term,
        total,
    }))
}

/// High-probability sup-norm error of the random-feature approximation of a
/// function with smoothness norm `f_norm`, at confidence `1 - delta`.
pub fn approximation_bound(n: usize, m: usize, radius: f64, f_norm: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    Ok(kappa(n, radius, f_norm)? * confidence_factor(n, m, delta))
}

/// One row of the constants table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub n: usize,
    pub rho: f64,
    pub kappa: f64,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub status: &'static str,
}

/// `kappa`, `beta1`, `beta2` over the product of `n_values` and `rho_values`.
pub fn constants_grid(n_values: &[usize], rho_values: &[f64], radius: f64) -> Result<Vec<GridRow>> {
    if n_values.is_empty() || rho_values.is_empty() {
        return Err(invalid("constants grid needs at least one n and one rho"));
    }
    let mut rows = Vec::with_capacity(n_values.len() * rho_values.len());
    for &n in n_values {
        for &rho in rho_values {
            let pc = ProblemConstants::new(n, radius, rho)?;
            let row = match RateConstants::new(&pc) {
                Ok(rc) => GridRow { n, rho, kappa: pc.kappa, beta1: Some(rc.beta1), beta2: Some(rc.beta2), status: "ok" },
                Err(Error::Overflow { .. }) => GridRow { n, rho, kappa: pc.kappa, beta1: None, beta2: None, status: "vacuous" },
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}
