//! One-dimensional and tensor-product quadrature.
//!
//! [`adaptive`] is a globally adaptive Gauss-Kronrod (7/15) integrator in the
//! style of QUADPACK's QAG: the interval with the largest error estimate is
//! bisected until the summed estimate drops below the absolute tolerance.
//! [`GaussLegendre`] provides fixed rules for smooth integrands and tensor
//! grids over boxes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{invalid, Error, Result};
use crate::Samples;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

/// Options for [`adaptive_with`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 0.0, max_intervals: 4000 }
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

#[derive(Debug)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn adaptive<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<Integral> {
    adaptive_with(f, &[a, b], AdaptiveOptions { abs_tol, ..Default::default() })
}

/// Integrate over consecutive intervals delimited by `breaks` (sorted,
/// at least two entries); kinks and discontinuities should sit on breaks.
pub fn adaptive_with<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    opts: AdaptiveOptions,
) -> Result<Integral> {
    if breaks.len() < 2 {
        return Err(invalid("adaptive quadrature needs at least two break points"));
    }
    if breaks.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(invalid("break points must be finite and sorted"));
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (value, err) = kronrod15(&mut f, w[0], w[1]);
        evaluations += 15;
        total += value;
        total_err += err;
        heap.push(Piece { a: w[0], b: w[1], value, err });
    }
    loop {
        if total_err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            // The running sums can absorb a huge early estimate; confirm.
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.err).sum();
            if total_err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
                break;
            }
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::QuadratureFailure(format!(
                "no convergence after {} subintervals (error estimate {total_err:.3e})",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is non-empty while error is positive");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::QuadratureFailure("interval collapsed below machine resolution".into()));
        }
        let (v1, e1) = kronrod15(&mut f, worst.a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2 });
    }
    // Re-sum to shed the drift of the incremental updates.
    let value = heap.iter().map(|p| p.value).sum();
    let abs_error = heap.iter().map(|p| p.err).sum();
    if !f64::is_finite(value) {
        return Err(Error::QuadratureFailure("integrand produced a non-finite value".into()));
    }
    Ok(Integral { value, abs_error, evaluations })
}

/// An `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes from Newton iteration on the three-term Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 1..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
                }
                dp = nf * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let x = self.nodes.iter().map(|t| c + h * t).collect();
        let w = self.weights.iter().map(|w| w * h).collect();
        (x, w)
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(|(t, w)| w * f(c + h * t)).sum::<f64>() * h
    }
}

/// A discrete measure: points with nonnegative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoints {
    pub points: Samples,
    pub weights: Vec<f64>,
}

impl WeightedPoints {
    pub fn new(points: Samples, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(invalid(format!("{} points but {} weights", points.len(), weights.len())));
        }
        if points.is_empty() {
            return Err(Error::EmptySampleSet("weighted points"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        Ok(Self { points, weights })
    }

    /// Equal weights `1/N` on each sample.
    pub fn empirical(points: Samples) -> Result<Self> {
        let n = points.len();
        WeightedPoints::new(points, vec![1.0 / n as f64; n])
    }

    /// Tensor Gauss-Legendre grid on `[-a, a]^dim` with `per_axis` nodes,
    /// weighted by `density` (which need not be normalized; weights are
    /// rescaled to sum to one).
    pub fn tensor_box<F: Fn(&[f64]) -> f64>(dim: usize, a: f64, per_axis: usize, density: F) -> Result<Self> {
        let (x, w) = GaussLegendre::new(per_axis).on_interval(-a, a);
        let total = per_axis.checked_pow(dim as u32).ok_or(Error::DimensionTooHigh(dim))?;
        if total > 50_000_000 {
            return Err(Error::DimensionTooHigh(dim));
        }
        let mut points = Samples::with_capacity(dim, total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        let mut pt = vec![0.0; dim];
        for _ in 0..total {
            let mut wt = 1.0;
            for (d, &i) in idx.iter().enumerate() {
                pt[d] = x[i];
                wt *= w[i];
            }
            let dens = density(&pt);
            points.push(&pt);
            weights.push(wt * dens);
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < per_axis {
                    break;
                }
                *slot = 0;
            }
        }
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::QuadratureFailure("density integrates to a non-positive value".into()));
        }
        weights.iter_mut().for_each(|w| *w /= s);
        WeightedPoints::new(points, weights)
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}
