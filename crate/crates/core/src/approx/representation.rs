use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::{radial_quad, spectral_integral, spectral_moment, tail_cutoff, SpectralFunction, RADIAL_TOL};
use crate::constants::{dimension_factor, half_integral_constant, sphere_area};
use crate::error::{invalid, Error, Result};
use crate::features::FeatureMap;
use crate::quadrature::{adaptive_with, AdaptiveOptions};

/// Barycentric interpolant on Chebyshev points of the first kind.
#[derive(Debug, Clone)]
struct Chebyshev {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Chebyshev {
    fn fit<F: FnMut(f64) -> Result<f64>>(lo: f64, hi: f64, size: usize, mut f: F) -> Result<Self> {
        let mut nodes = Vec::with_capacity(size);
        let mut values = Vec::with_capacity(size);
        let mut weights = Vec::with_capacity(size);
        for k in 0..size {
            let angle = PI * (k as f64 + 0.5) / size as f64;
            let x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * angle.cos();
            nodes.push(x);
            values.push(f(x)?);
            weights.push(if k % 2 == 0 { angle.sin() } else { -angle.sin() });
        }
        Ok(Self { lo, hi, nodes, values, weights })
    }

    fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.lo, self.hi);
        let (mut num, mut den) = (0.0, 0.0);
        for ((xk, fk), wk) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let d = x - xk;
            if d == 0.0 {
                return *fk;
            }
            let t = wk / d;
            num += t * fk;
            den += t;
        }
        num / den
    }
}

/// The density `ell = xi + zeta + p` over `(w, b)` and the quantities it is built from.
pub struct RepresentationDensity<'a, S: SpectralFunction + ?Sized> {
    spec: &'a S,
    n: usize,
    radius: f64,
    area: f64,
    half: f64,
    /// Constant term of the expansion around `w . x = -R`.
    pub r_const: f64,
    /// Linear-term vector.
    pub v: Vec<f64>,
    /// `Z = integral |G(omega)| |2 pi omega|^2 d omega`.
    pub z_norm: f64,
    pub f_norm: f64,
    xi_upper: f64,
    xi_table: Option<Chebyshev>,
}

impl<S: SpectralFunction + ?Sized> std::fmt::Debug for RepresentationDensity<'_, S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RepresentationDensity")
            .field("n", &self.n)
            .field("radius", &self.radius)
            .field("r_const", &self.r_const)
            .field("v", &self.v)
            .field("z_norm", &self.z_norm)
            .field("f_norm", &self.f_norm)
            .finish()
    }
}

/// Compute `r_const`, `v`, `Z` and, for radial transforms, a table of `xi`.
pub fn build_representation<S: SpectralFunction + ?Sized>(spec: &S, radius: f64) -> Result<RepresentationDensity<'_, S>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    let n = spec.dim();
    let area = sphere_area(n)?;
    let half = half_integral_constant(n)?;
    let env = spec.envelope();
    let f_norm = super::f_norm(spec)?;
    let theta = |s: f64| 2.0 * PI * s * radius;
    let radial = spec.radial_profile(0.0).is_some();

    let (r_const, v) = if radial {
        let upper = tail_cutoff(env, 1.0 + 2.0 * PI * radius, n as f64, RADIAL_TOL * 1e-2);
        let r = area
            * radial_quad(
                |s| {
                    let t = theta(s);
                    s.powi(n as i32 - 1) * spec.radial_profile(s).unwrap() * (t.cos() + t * t.sin())
                },
                upper,
                RADIAL_TOL,
            )?;
        // Odd symmetry of the direction integral.
        (r, vec![0.0; n])
    } else {
        let shift = |s: f64| Complex64::from_polar(1.0, -theta(s));
        let r = spectral_integral(n, env, 1.0 + 2.0 * PI * radius, 1.0, |s, dir| {
            let om: Vec<f64> = dir.iter().map(|d| d * s).collect();
            (spec.transform(&om) * shift(s) * Complex64::new(1.0, theta(s))).re
        })?;
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            v.push(spectral_integral(n, env, 2.0 * PI, 1.0, |s, dir| {
                let om: Vec<f64> = dir.iter().map(|d| d * s).collect();
                (spec.transform(&om) * Complex64::new(0.0, 2.0 * PI * s) * shift(s)).re * dir[i]
            })?);
        }
        (r, v)
    };
    let z_norm = spectral_moment(spec, 2)?;
    let xi_upper = tail_cutoff(env, (2.0 * PI).powi(2), (n + 1) as f64, RADIAL_TOL * 1e-2);
    let mut rep = RepresentationDensity { spec, n, radius, area, half, r_const, v, z_norm, f_norm, xi_upper, xi_table: None };
    if radial {
        rep.xi_table = Some(rep.fit_xi_table()?);
    }
    Ok(rep)
}

impl<'a, S: SpectralFunction + ?Sized> RepresentationDensity<'a, S> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &'a S {
        self.spec
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `xi(alpha, b) = -integral_0^inf (2 pi s)^2 s^{n-1} Re(G(s alpha) exp(-2 pi i s b)) ds`
    /// by adaptive quadrature.
    pub fn xi_direct(&self, alpha: &[f64], b: f64) -> Result<f64> {
        if alpha.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: alpha.len() });
        }
        let n = self.n as i32;
        let mut om = vec![0.0; self.n];
        radial_quad(
            |s| {
                om.iter_mut().zip(alpha).for_each(|(o, a)| *o = s * a);
                let g = match self.spec.radial_profile(s) {
                    Some(v) => Complex64::new(v, 0.0),
                    None => self.spec.transform(&om),
                };
                -(2.0 * PI * s).powi(2) * s.powi(n - 1) * (g * Complex64::from_polar(1.0, -2.0 * PI * s * b)).re
            },
            self.xi_upper,
            RADIAL_TOL,
        )
    }

    fn fit_xi_table(&self) -> Result<Chebyshev> {
        let alpha: Vec<f64> = std::iter::once(1.0).chain(std::iter::repeat(0.0)).take(self.n).collect();
        let r = self.radius;
        let mut size = 32;
        let mut table = Chebyshev::fit(-r, r, size, |b| self.xi_direct(&alpha, b))?;
        loop {
            let next = Chebyshev::fit(-r, r, 2 * size, |b| self.xi_direct(&alpha, b))?;
            let scale = next.values.iter().fold(1e-300f64, |a, v| a.max(v.abs()));
            let diff = (0..64)
                .map(|i| -r + 2.0 * r * (i as f64 + 0.37) / 64.0)
                .map(|b| (table.eval(b) - next.eval(b)).abs())
                .fold(0.0f64, f64::max);
            table = next;
            size *= 2;
            if diff < 1e-11 * scale.max(1.0) {
                return Ok(table);
            }
            if size > 1024 {
                return Err(Error::QuadratureFailure("xi interpolant did not converge".into()));
            }
        }
    }

    /// `xi(alpha, b)`; tabulated in `b` when the transform is radial.
    pub fn xi(&self, alpha: &[f64], b: f64) -> Result<f64> {
        match &self.xi_table {
            Some(t) => {
                if alpha.len() != self.n {
                    return Err(Error::DimensionMismatch { expected: self.n, got: alpha.len() });
                }
                Ok(t.eval(b))
            }
            None => self.xi_direct(alpha, b),
        }
    }

    /// `zeta(b) = 2 r sign(b) / (A R^2)`; reproduces the constant `r`.
    pub fn zeta(&self, b: f64) -> f64 {
        constant_density(self.r_const, self.radius, self.area, b)
    }

    /// `p(w) = |v| sign(v . w) / (H R)`; reproduces `v . x`.
    pub fn p_lin(&self, w: &[f64]) -> f64 {
        linear_density(&self.v, self.radius, self.half, w)
    }

    pub fn ell(&self, w: &[f64], b: f64) -> Result<f64> {
        Ok(self.xi(w, b)? + self.zeta(b) + self.p_lin(w))
    }

    /// `(1 + 2(1+R)/R^2 + sqrt(n pi / 2)/R) (2 / (2 pi)^n) f_norm`.
    pub fn ell_bound(&self) -> f64 {
        let r = self.radius;
        let nf = self.n as f64;
        (1.0 + 2.0 * (1.0 + r) / (r * r) + (nf * PI / 2.0).sqrt() / r) * 2.0 / (2.0 * PI).powi(self.n as i32) * self.f_norm
    }

    /// `(2 A / (2 pi)^n) f_norm`, which bounds `|v|`.
    pub fn v_bound(&self) -> f64 {
        dimension_factor(self.n).expect("n >= 1") * self.f_norm
    }

    /// `(R + 1) (2 A / (2 pi)^n) f_norm`, which bounds `|r|`.
    pub fn r_bound(&self) -> f64 {
        (self.radius + 1.0) * self.v_bound()
    }

    /// Evaluate the full superposition at `x` by planar quadrature (`n = 2`).
    pub fn reproduce(&self, x: &[f64]) -> Result<f64> {
        if self.n != 2 {
            return Err(Error::DimensionTooHigh(self.n));
        }
        let mut kinks = vec![x[1].atan2(x[0]) + 0.5 * PI, x[1].atan2(x[0]) - 0.5 * PI];
        if self.v.iter().any(|c| *c != 0.0) {
            kinks.push(self.v[1].atan2(self.v[0]) + 0.5 * PI);
            kinks.push(self.v[1].atan2(self.v[0]) - 0.5 * PI);
        }
        superpose_2d(|w, b| self.ell(w, b).unwrap_or(f64::NAN), self.radius, x, &kinks)
    }
}

fn constant_density(r_const: f64, radius: f64, area: f64, b: f64) -> f64 {
    let sign = if b > 0.0 {
        1.0
    } else if b < 0.0 {
        -1.0
    } else {
        0.0
    };
    2.0 * r_const * sign / (area * radius * radius)
}

fn linear_density(v: &[f64], radius: f64, half: f64, w: &[f64]) -> f64 {
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let d: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
    if norm == 0.0 || d == 0.0 {
        return 0.0;
    }
    norm * d.signum() / (half * radius)
}

/// `integral_0^{2 pi} integral_{-R}^{R} density(w, b) relu(w . x + b) db d phi`
/// with `w = (cos phi, sin phi)`; `angle_kinks` are angles where the
/// integrand in `phi` is not smooth.
fn superpose_2d<D: Fn(&[f64], f64) -> f64>(density: D, radius: f64, x: &[f64], angle_kinks: &[f64]) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: x.len() });
    }
    let opts = AdaptiveOptions { abs_tol: 1e-12, rel_tol: 0.0, max_intervals: 4000 };
    let inner = |phi: f64| -> f64 {
        let w = [phi.cos(), phi.sin()];
        let t = w[0] * x[0] + w[1] * x[1];
        let mut breaks = vec![-radius, radius, 0.0];
        if -t > -radius && -t < radius {
            breaks.push(-t);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        adaptive_with(|b| density(&w, b) * (t + b).max(0.0), &breaks, opts).map(|r| r.value).unwrap_or(f64::NAN)
    };
    let mut breaks: Vec<f64> = angle_kinks.iter().map(|k| k.rem_euclid(TAU)).collect();
    breaks.extend([0.0, TAU]);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let out = adaptive_with(inner, &breaks, AdaptiveOptions { abs_tol: 1e-10, rel_tol: 0.0, max_intervals: 4000 })?.value;
    if !out.is_finite() {
        return Err(Error::QuadratureFailure("inner integral failed".into()));
    }
    Ok(out)
}

/// Planar check that `zeta` reproduces the constant `r_const` at `x` in `B_R`.
pub fn reproduce_constant(r_const: f64, radius: f64, x: &[f64]) -> Result<f64> {
    let area = sphere_area(2)?;
    let kinks = [x[1].atan2(x[0]) + 0.5 * PI, x[1].atan2(x[0]) - 0.5 * PI];
    superpose_2d(|_, b| constant_density(r_const, radius, area, b), radius, x, &kinks)
}

/// Planar check that `p` reproduces `v . x` at `x` in `B_R`.
pub fn reproduce_linear(v: &[f64], radius: f64, x: &[f64]) -> Result<f64> {
    if v.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: v.len() });
    }
    let half = half_integral_constant(2)?;
    let kinks = [
        v[1].atan2(v[0]) + 0.5 * PI,
        v[1].atan2(v[0]) - 0.5 * PI,
        x[1].atan2(x[0]) + 0.5 * PI,
        x[1].atan2(x[0]) - 0.5 * PI,
    ];
    superpose_2d(|w, _| linear_density(v, radius, half, w), radius, x, &kinks)
}

/// Network coefficients `c_i = 2 R A ell(w_i, b_i) / m`.
pub fn sample_coefficients<S: SpectralFunction + ?Sized>(rep: &RepresentationDensity<'_, S>, map: &FeatureMap) -> Result<Vec<f64>> {
    if map.dim() != rep.n {
        return Err(Error::DimensionMismatch { expected: rep.n, got: map.dim() });
    }
    if (map.radius() - rep.radius).abs() > 1e-12 * rep.radius {
        return Err(invalid(format!("feature radius {} differs from representation radius {}", map.radius(), rep.radius)));
    }
    let scale = 2.0 * rep.radius * rep.area / map.neurons() as f64;
    map.weights().zip(map.biases()).map(|(w, &b)| Ok(scale * rep.ell(w, b)?)).collect()
}
