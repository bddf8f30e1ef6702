//! Box-supported test distributions and quadrature KL oracles.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{adaptive, GaussLegendre};
use crate::rng::{self, StreamRng};
use crate::Samples;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

fn ln_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * PI).ln()
}

fn check_shape(n: usize, a: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("half-width must be positive and finite, got {a}")));
    }
    Ok(())
}

/// Density proportional to `exp(-|x|^2 / 2)` on `[-a, a]^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGaussianBox {
    n: usize,
    a: f64,
    lower_cdf: f64,
    mass: f64,
}

impl TruncatedGaussianBox {
    pub fn new(n: usize, a: f64) -> Result<Self> {
        check_shape(n, a)?;
        let lower_cdf = normal_cdf(-a);
        // 2 Phi(a) - 1 written without cancellation.
        let mass = 1.0 - 2.0 * lower_cdf;
        Ok(Self { n, a, lower_cdf, mass })
    }

    /// Per-coordinate normalization `2 Phi(a) - 1`.
    pub fn coordinate_mass(&self) -> f64 {
        self.mass
    }

    /// Inverse-CDF draw of one coordinate from `u` in `[0, 1)`.
    pub fn coordinate_from_uniform(&self, u: f64) -> f64 {
        normal_quantile(self.lower_cdf + u * self.mass).clamp(-self.a, self.a)
    }

    pub fn ln_coordinate_density(&self, t: f64) -> f64 {
        if t.abs() > self.a {
            return f64::NEG_INFINITY;
        }
        ln_normal_pdf(t) - self.mass.ln()
    }
}

/// Density `(2a)^{-n}` on `[-a, a]^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformBox {
    n: usize,
    a: f64,
}

impl UniformBox {
    pub fn new(n: usize, a: f64) -> Result<Self> {
        check_shape(n, a)?;
        Ok(Self { n, a })
    }
}

/// Bivariate standard normal with correlation `corr`, truncated to `[-a, a]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatedGaussianBox {
    corr: f64,
    a: f64,
    ln_mass: f64,
}

impl CorrelatedGaussianBox {
    pub fn new(corr: f64, a: f64) -> Result<Self> {
        check_shape(2, a)?;
        if !(corr.abs() < 1.0) {
            return Err(invalid(format!("correlation must lie in (-1, 1), got {corr}")));
        }
        let s = (1.0 - corr * corr).sqrt();
        let mass = adaptive(
            |x| ln_normal_pdf(x).exp() * (normal_cdf((a - corr * x) / s) - normal_cdf((-a - corr * x) / s)),
            -a,
            a,
            1e-14,
        )?
        .value;
        Ok(Self { corr, a, ln_mass: mass.ln() })
    }

    pub fn correlation(&self) -> f64 {
        self.corr
    }

    pub fn ln_density(&self, x: &[f64]) -> f64 {
        if x[0].abs() > self.a || x[1].abs() > self.a {
            return f64::NEG_INFINITY;
        }
        let c = self.corr;
        let det = 1.0 - c * c;
        let q = (x[0] * x[0] - 2.0 * c * x[0] * x[1] + x[1] * x[1]) / det;
        -0.5 * q - (2.0 * PI).ln() - 0.5 * det.ln() - self.ln_mass
    }

    /// Log-density of either coordinate (the law is exchangeable).
    pub fn ln_marginal(&self, t: f64) -> f64 {
        if t.abs() > self.a {
            return f64::NEG_INFINITY;
        }
        let c = self.corr;
        let s = (1.0 - c * c).sqrt();
        let inner = normal_cdf((self.a - c * t) / s) - normal_cdf((-self.a - c * t) / s);
        ln_normal_pdf(t) + inner.ln() - self.ln_mass
    }

    /// Mutual information between the two coordinates, by tensor
    /// Gauss-Legendre quadrature refined until doubling the nodes moves
    /// the value by less than `1e-8`.
    pub fn mutual_information(&self) -> Result<f64> {
        tensor_converged(2, self.a, |x| {
            let lp = self.ln_density(x);
            lp.exp() * (lp - self.ln_marginal(x[0]) - self.ln_marginal(x[1]))
        })
    }

    fn sample_into<G: Rng + ?Sized>(&self, rng: &mut G, out: &mut [f64]) {
        let s = (1.0 - self.corr * self.corr).sqrt();
        loop {
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            let x2 = self.corr * z1 + s * z2;
            if z1.abs() <= self.a && x2.abs() <= self.a {
                out[0] = z1;
                out[1] = x2;
                return;
            }
        }
    }
}

/// A distribution supported on an axis-aligned box `[-a, a]^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    TruncatedGaussian(TruncatedGaussianBox),
    Uniform(UniformBox),
    CorrelatedGaussian(CorrelatedGaussianBox),
}

/// Config-file description of a distribution; the dimension comes from context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    TruncGauss { a: f64 },
    Uniform { a: f64 },
    CorrGauss { a: f64, corr: f64 },
}

impl DistributionSpec {
    pub fn half_width(&self) -> f64 {
        match *self {
            DistributionSpec::TruncGauss { a } | DistributionSpec::Uniform { a } | DistributionSpec::CorrGauss { a, .. } => a,
        }
    }

    pub fn build(&self, n: usize) -> Result<Distribution> {
        match *self {
            DistributionSpec::TruncGauss { a } => Distribution::truncated_gaussian_box(n, a),
            DistributionSpec::Uniform { a } => Distribution::uniform_box(n, a),
            DistributionSpec::CorrGauss { a, corr } => {
                if n != 2 {
                    return Err(invalid(format!("corr_gauss is two-dimensional, got dimension {n}")));
                }
                Ok(Distribution::CorrelatedGaussian(CorrelatedGaussianBox::new(corr, a)?))
            }
        }
    }
}

impl Distribution {
    pub fn truncated_gaussian_box(n: usize, a: f64) -> Result<Self> {
        Ok(Self::TruncatedGaussian(TruncatedGaussianBox::new(n, a)?))
    }

    pub fn uniform_box(n: usize, a: f64) -> Result<Self> {
        Ok(Self::Uniform(UniformBox::new(n, a)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            Distribution::TruncatedGaussian(d) => d.n,
            Distribution::Uniform(d) => d.n,
            Distribution::CorrelatedGaussian(_) => 2,
        }
    }

    pub fn half_width(&self) -> f64 {
        match self {
            Distribution::TruncatedGaussian(d) => d.a,
            Distribution::Uniform(d) => d.a,
            Distribution::CorrelatedGaussian(d) => d.a,
        }
    }

    /// Radius `a sqrt(n)` of the smallest ball containing the support.
    pub fn circumradius(&self) -> f64 {
        self.half_width() * (self.dim() as f64).sqrt()
    }

    pub fn is_product(&self) -> bool {
        !matches!(self, Distribution::CorrelatedGaussian(_))
    }

    /// Log-density of one coordinate, for product-form laws.
    pub fn ln_coordinate_density(&self, t: f64) -> Option<f64> {
        match self {
            Distribution::TruncatedGaussian(d) => Some(d.ln_coordinate_density(t)),
            Distribution::Uniform(d) => Some(if t.abs() > d.a { f64::NEG_INFINITY } else { -(2.0 * d.a).ln() }),
            Distribution::CorrelatedGaussian(_) => None,
        }
    }

    /// Log-density; `-inf` off the support.
    pub fn ln_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(match self {
            Distribution::CorrelatedGaussian(d) => d.ln_density(x),
            _ => x.iter().map(|&t| self.ln_coordinate_density(t).expect("product form")).sum(),
        })
    }

    pub fn sample_into<G: Rng + ?Sized>(&self, rng: &mut G, out: &mut [f64]) {
        match self {
            Distribution::TruncatedGaussian(d) => {
                for v in out.iter_mut() {
                    *v = d.coordinate_from_uniform(rng.random::<f64>());
                }
            }
            Distribution::Uniform(d) => {
                for v in out.iter_mut() {
                    *v = rng.random_range(-d.a..=d.a);
                }
            }
            Distribution::CorrelatedGaussian(d) => d.sample_into(rng, out),
        }
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G, count: usize) -> Samples {
        let n = self.dim();
        let mut data = vec![0.0; n * count];
        for row in data.chunks_exact_mut(n) {
            self.sample_into(rng, row);
        }
        Samples::new(n, data).expect("dimension is positive")
    }

    pub fn sample_seeded(&self, seed: u64, count: usize) -> Samples {
        self.sample(&mut rng::seeded(seed), count)
    }
}

/// How the feature radius `R` is derived from the support box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiusConvention {
    /// `R = a`, the box half-width.
    #[default]
    Box,
    /// `R = a sqrt(n)`, so the ball contains the whole box.
    Circumradius,
}

impl std::fmt::Display for RadiusConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RadiusConvention::Box => "box",
            RadiusConvention::Circumradius => "circumradius",
        })
    }
}

impl std::str::FromStr for RadiusConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(Self::Box),
            "circumradius" => Ok(Self::Circumradius),
            other => Err(invalid(format!("unknown radius convention {other:?}, expected box or circumradius"))),
        }
    }
}

/// The pair `(P, Q)` whose divergence `KL(P || Q)` is estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionPair {
    pub p: Distribution,
    pub q: Distribution,
}

/// A ground-truth divergence and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlValue {
    pub value: f64,
    /// Standard error of a Monte Carlo value; `None` for quadrature.
    pub std_error: Option<f64>,
    pub method: &'static str,
}

impl DistributionPair {
    pub fn new(p: Distribution, q: Distribution) -> Result<Self> {
        if p.dim() != q.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
        }
        Ok(Self { p, q })
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    /// Largest half-width of the two supports.
    pub fn half_width(&self) -> f64 {
        self.p.half_width().max(self.q.half_width())
    }

    /// Radius of a ball containing both supports.
    pub fn circumradius(&self) -> f64 {
        self.p.circumradius().max(self.q.circumradius())
    }

    /// Feature radius under `convention`.
    pub fn feature_radius(&self, convention: RadiusConvention) -> f64 {
        match convention {
            RadiusConvention::Box => self.half_width(),
            RadiusConvention::Circumradius => self.circumradius(),
        }
    }

    fn check_support(&self) -> Result<()> {
        if self.p.half_width() > self.q.half_width() {
            return Err(invalid("P puts mass outside the support of Q, so the divergence is infinite"));
        }
        Ok(())
    }

    /// `KL(P || Q)` by quadrature, falling back to Monte Carlo with
    /// `mc_samples` draws for non-product laws above three dimensions.
    pub fn exact_kl(&self, mc_samples: usize, seed: u64) -> Result<KlValue> {
        self.check_support()?;
        if self.p.is_product() && self.q.is_product() {
            return Ok(KlValue { value: self.product_kl()?, std_error: None, method: "product_1d" });
        }
        if self.dim() <= 3 {
            return Ok(KlValue { value: self.tensor_kl()?, std_error: None, method: "tensor_gauss_legendre" });
        }
        if mc_samples < 2 {
            return Err(Error::DimensionTooHigh(self.dim()));
        }
        self.monte_carlo_kl(mc_samples, seed)
    }

    /// Sum of one-dimensional divergences, each by adaptive quadrature to `1e-10`.
    pub fn product_kl(&self) -> Result<f64> {
        self.check_support()?;
        let lp = |t: f64| self.p.ln_coordinate_density(t);
        let lq = |t: f64| self.q.ln_coordinate_density(t);
        if lp(0.0).is_none() || lq(0.0).is_none() {
            return Err(invalid("product quadrature needs product-form densities"));
        }
        let a = self.p.half_width();
        let one = adaptive(
            |t| {
                let p = lp(t).unwrap();
                p.exp() * (p - lq(t).unwrap())
            },
            -a,
            a,
            1e-10 / self.dim() as f64,
        )?
        .value;
        Ok(one * self.dim() as f64)
    }

    /// Tensor Gauss-Legendre over P's support, doubled until stable to `1e-8`.
    pub fn tensor_kl(&self) -> Result<f64> {
        self.check_support()?;
        let n = self.dim();
        if n > 3 {
            return Err(Error::DimensionTooHigh(n));
        }
        tensor_converged(n, self.p.half_width(), |x| {
            let lp = self.p.ln_density(x).expect("dimension checked");
            if lp == f64::NEG_INFINITY {
                return 0.0;
            }
            lp.exp() * (lp - self.q.ln_density(x).expect("dimension checked"))
        })
    }

    /// Plain Monte Carlo average of `ln p - ln q` under P.
    pub fn monte_carlo_kl(&self, samples: usize, seed: u64) -> Result<KlValue> {
        self.check_support()?;
        if samples < 2 {
            return Err(Error::InsufficientSamples { needed: 1, got: samples });
        }
        let mut g: StreamRng = rng::seeded(seed);
        let mut x = vec![0.0; self.dim()];
        let (mut mean, mut m2) = (0.0, 0.0);
        for k in 1..=samples {
            self.p.sample_into(&mut g, &mut x);
            let v = self.p.ln_density(&x)? - self.q.ln_density(&x)?;
            let d = v - mean;
            mean += d / k as f64;
            m2 += d * (v - mean);
        }
        let var = m2 / (samples - 1) as f64;
        Ok(KlValue { value: mean, std_error: Some((var / samples as f64).sqrt()), method: "monte_carlo" })
    }
}

/// Integrate `f` over `[-a, a]^n` with tensor Gauss-Legendre, doubling the
/// per-axis node count from 32 until successive values differ by < 1e-8.
pub fn tensor_converged<F: Fn(&[f64]) -> f64>(n: usize, a: f64, f: F) -> Result<f64> {
    let max_nodes = match n {
        1 => 1 << 14,
        2 => 1024,
        3 => 128,
        _ => return Err(Error::DimensionTooHigh(n)),
    };
    let eval = |k: usize| -> f64 {
        let (x, w) = GaussLegendre::new(k).on_interval(-a, a);
        let mut idx = vec![0usize; n];
        let mut pt = vec![0.0; n];
        let mut total = 0.0;
        for _ in 0..k.pow(n as u32) {
            let mut wt = 1.0;
            for (d, &i) in idx.iter().enumerate() {
                pt[d] = x[i];
                wt *= w[i];
            }
            total += wt * f(&pt);
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < k {
                    break;
                }
                *slot = 0;
            }
        }
        total
    };
    let mut k = 32;
    let mut prev = eval(k);
    while k < max_nodes {
        k *= 2;
        let next = eval(k);
        if (next - prev).abs() < 1e-8 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureFailure(format!("tensor rule did not settle by {max_nodes} nodes per axis")))
}
