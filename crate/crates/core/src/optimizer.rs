//! Projected stochastic recursion for the Donsker-Varadhan objective.
//!
//! Each step draws `x ~ P`, `y ~ Q` and updates
//!
//! ```text
//! theta+ = Proj(theta + alpha r (phi(x) - exp(psi(y)) phi(y) / z))
//! z+     = z + alpha (exp(psi(y)) - z)
//! ```
//!
//! where `psi(y)` uses the pre-update `theta` in both lines and `Proj` clamps
//! each coordinate to `[-C/m, C/m]`. The returned estimate is the mean of the
//! pre-update iterates `theta_0 .. theta_{T-1}`.

use log::warn;
use rand::Rng;
use rand_distr::{Distribution as _, Uniform};

use crate::error::{invalid, Error, Result};
use crate::features::FeatureMap;
use crate::quadrature::WeightedPoints;
use crate::rng;

/// Euclidean projection onto the box `[-bound, bound]^m`, in place.
pub fn project_box(theta: &mut [f64], bound: f64) {
    debug_assert!(bound > 0.0);
    theta.iter_mut().for_each(|t| *t = t.clamp(-bound, bound));
}

/// What to do with a sample outside the ball the features were built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfDomain {
    /// Skip the pair and count it.
    #[default]
    Reject,
    /// Scale the sample radially onto the sphere of the ball.
    Clip,
}

/// Coefficients, normalizer tracker and running sum of iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    pub theta: Vec<f64>,
    pub z: f64,
    pub k: u64,
    pub theta_sum: Vec<f64>,
}

impl ParamState {
    pub fn new(theta: Vec<f64>, z: f64) -> Self {
        let m = theta.len();
        Self { theta, z, k: 0, theta_sum: vec![0.0; m] }
    }

    /// Mean of the iterates summed so far, or the current iterate if none.
    pub fn average(&self) -> Vec<f64> {
        if self.k == 0 {
            return self.theta.clone();
        }
        let inv = 1.0 / self.k as f64;
        self.theta_sum.iter().map(|s| s * inv).collect()
    }
}

/// Initial coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Theta0 {
    #[default]
    Zero,
    Given(Vec<f64>),
    /// I.i.d. uniform on `[-half_width, half_width]`, then projected onto the box.
    Uniform { half_width: f64, seed: u64 },
}

impl Theta0 {
    pub fn materialize(&self, m: usize, bound: f64) -> Result<Vec<f64>> {
        let mut theta = match self {
            Theta0::Zero => vec![0.0; m],
            Theta0::Given(v) => {
                if v.len() != m {
                    return Err(Error::DimensionMismatch { expected: m, got: v.len() });
                }
                if v.iter().any(|t| t.abs() > bound) {
                    return Err(invalid(format!("initial coefficients leave the box of half-width {bound}")));
                }
                v.clone()
            }
            Theta0::Uniform { half_width, seed } => {
                if !(*half_width >= 0.0) || !half_width.is_finite() {
                    return Err(invalid(format!("theta0 half-width must be finite and nonnegative, got {half_width}")));
                }
                if *half_width == 0.0 {
                    vec![0.0; m]
                } else {
                    let dist = Uniform::new_inclusive(-half_width, *half_width).map_err(|e| invalid(e.to_string()))?;
                    let mut g = rng::seeded(*seed);
                    let v: Vec<f64> = (0..m).map(|_| dist.sample(&mut g)).collect();
                    if v.iter().any(|t| t.abs() > bound) {
                        warn!("theta0 half-width {half_width} exceeds the box half-width {bound}; projecting");
                    }
                    v
                }
            }
        };
        project_box(&mut theta, bound);
        Ok(theta)
    }
}

/// Everything a run needs besides the feature map and the sample stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    pub r: f64,
    pub iterations: u64,
    pub theta0: Theta0,
    pub z0: f64,
    /// Box half-width `C_theta / m`.
    pub bound: f64,
    /// Samples must satisfy `|x| <= domain_radius`.
    pub domain_radius: f64,
    pub out_of_domain: OutOfDomain,
    /// Record a trace point every `trace_stride` steps; `None` disables tracing.
    pub trace_stride: Option<u64>,
    /// Check the box and tracker invariants after every step.
    pub check_invariants: bool,
    /// Interval the tracker must stay in when invariants are checked.
    pub z_interval: Option<(f64, f64)>,
}

impl TrainConfig {
    /// Defaults: zero start, `z0 = 1`, rejection of out-of-domain samples.
    pub fn new(alpha: f64, r: f64, iterations: u64, bound: f64, domain_radius: f64) -> Self {
        Self {
            alpha,
            r,
            iterations,
            theta0: Theta0::Zero,
            z0: 1.0,
            bound,
            domain_radius,
            out_of_domain: OutOfDomain::Reject,
            trace_stride: None,
            check_invariants: false,
            z_interval: None,
        }
    }

    /// `max(1, T / 1000)`.
    pub fn default_stride(iterations: u64) -> u64 {
        (iterations / 1000).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(invalid(format!("r must be positive, got {}", self.r)));
        }
        if self.iterations == 0 {
            return Err(invalid("T must be at least 1"));
        }
        if !(self.bound > 0.0) || !self.bound.is_finite() {
            return Err(invalid(format!("box half-width must be positive, got {}", self.bound)));
        }
        if !(self.domain_radius > 0.0) {
            return Err(invalid(format!("domain radius must be positive, got {}", self.domain_radius)));
        }
        if !(self.z0 > 0.0) || !self.z0.is_finite() {
            return Err(invalid(format!("z0 must be positive, got {}", self.z0)));
        }
        if let Some((lo, hi)) = self.z_interval {
            if !(lo <= self.z0 && self.z0 <= hi) {
                return Err(invalid(format!("z0 = {} lies outside [{lo}, {hi}]", self.z0)));
            }
        }
        if self.trace_stride == Some(0) {
            return Err(invalid("trace stride must be positive"));
        }
        Ok(())
    }
}

/// Step parameters shared by every iteration of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub alpha: f64,
    pub r: f64,
    pub bound: f64,
    pub domain_radius: f64,
    pub out_of_domain: OutOfDomain,
}

impl From<&TrainConfig> for StepParams {
    fn from(c: &TrainConfig) -> Self {
        Self { alpha: c.alpha, r: c.r, bound: c.bound, domain_radius: c.domain_radius, out_of_domain: c.out_of_domain }
    }
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    phi_x: Vec<f64>,
    phi_y: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Workspace {
    pub fn new(map: &FeatureMap) -> Self {
        let (n, m) = (map.dim(), map.neurons());
        Self { phi_x: vec![0.0; m], phi_y: vec![0.0; m], x: vec![0.0; n], y: vec![0.0; n] }
    }
}

/// Quantities from one step, for tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// `psi(x)` at the pre-update coefficients.
    pub psi_x: f64,
    /// `psi(y)` at the pre-update coefficients.
    pub psi_y: f64,
}

fn admit(point: &mut [f64], radius: f64, policy: OutOfDomain) -> Result<()> {
    let norm = point.iter().map(|v| v * v).sum::<f64>().sqrt();
    // Allow for rounding in samplers that land exactly on the sphere.
    if norm <= radius * (1.0 + 1e-12) {
        return Ok(());
    }
    match policy {
        OutOfDomain::Reject => Err(Error::DomainViolation { norm, radius }),
        OutOfDomain::Clip => {
            let s = radius / norm;
            point.iter_mut().for_each(|v| *v *= s);
            Ok(())
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The stochastic direction `phi(x) - exp(psi(y)) phi(y) / z`.
pub fn update_direction(map: &FeatureMap, theta: &[f64], z: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let px = map.phi(x)?;
    let py = map.phi(y)?;
    if theta.len() != map.neurons() {
        return Err(Error::DimensionMismatch { expected: map.neurons(), got: theta.len() });
    }
    let e = dot(&py, theta).exp();
    Ok(px.iter().zip(&py).map(|(a, b)| a - e * b / z).collect())
}

/// One projected step on the pair `(x, y)`.
pub fn step(
    state: &mut ParamState,
    map: &FeatureMap,
    x: &[f64],
    y: &[f64],
    params: &StepParams,
    ws: &mut Workspace,
) -> Result<StepInfo> {
    let n = map.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: if x.len() != n { x.len() } else { y.len() } });
    }
    if state.theta.len() != map.neurons() {
        return Err(Error::DimensionMismatch { expected: map.neurons(), got: state.theta.len() });
    }
    ws.x.copy_from_slice(x);
    ws.y.copy_from_slice(y);
    admit(&mut ws.x, params.domain_radius, params.out_of_domain)?;
    admit(&mut ws.y, params.domain_radius, params.out_of_domain)?;
    map.phi_unchecked(&ws.x, &mut ws.phi_x);
    map.phi_unchecked(&ws.y, &mut ws.phi_y);
    let psi_x = dot(&ws.phi_x, &state.theta);
    let psi_y = dot(&ws.phi_y, &state.theta);
    let e = psi_y.exp();
    if !e.is_finite() {
        return Err(Error::NonFinite(format!("exp(psi(y)) overflowed at step {} (psi = {psi_y})", state.k)));
    }
    let scale = params.alpha * params.r;
    let ratio = e / state.z;
    for (((t, s), px), py) in state.theta.iter_mut().zip(state.theta_sum.iter_mut()).zip(&ws.phi_x).zip(&ws.phi_y) {
        *s += *t;
        *t = (*t + scale * (px - ratio * py)).clamp(-params.bound, params.bound);
    }
    state.z += params.alpha * (e - state.z);
    state.k += 1;
    Ok(StepInfo { psi_x, psi_y })
}

/// A source of `(x, y)` pairs with `x ~ P` and `y ~ Q`.
pub trait PairStream {
    fn next_pair(&mut self, x: &mut [f64], y: &mut [f64]) -> Result<()>;
}

/// Two independent point samplers combined into a pair stream.
pub struct IndependentPairs<F, G> {
    pub p: F,
    pub q: G,
}

impl<F, G> PairStream for IndependentPairs<F, G>
where
    F: FnMut(&mut [f64]),
    G: FnMut(&mut [f64]),
{
    fn next_pair(&mut self, x: &mut [f64], y: &mut [f64]) -> Result<()> {
        (self.p)(x);
        (self.q)(y);
        Ok(())
    }
}

/// Diagnostics recorded every `trace_stride` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub k: u64,
    pub z: f64,
    pub theta_inf: f64,
    /// Mean of `psi(x)` over the last stride minus `ln z`.
    pub running_dv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub theta_bar: Vec<f64>,
    pub final_state: ParamState,
    pub trace: Vec<TracePoint>,
    /// Pairs skipped because a sample fell outside the domain ball.
    pub rejected: u64,
    /// Steps after which an iterate left the box or the tracker left its interval.
    pub invariant_violations: u64,
}

/// Run `T` accepted steps and return the averaged iterate.
pub fn run<S: PairStream + ?Sized>(config: &TrainConfig, map: &FeatureMap, stream: &mut S) -> Result<RunOutput> {
    config.validate()?;
    let m = map.neurons();
    let theta0 = config.theta0.materialize(m, config.bound)?;
    let mut state = ParamState::new(theta0, config.z0);
    let params = StepParams::from(config);
    let mut ws = Workspace::new(map);
    let n = map.dim();
    let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
    let mut trace = Vec::new();
    let mut window = 0.0;
    let mut window_len = 0u64;
    let mut rejected = 0u64;
    let mut violations = 0u64;
    let bound_tol = config.bound * (1.0 + 1e-12);
    while state.k < config.iterations {
        stream.next_pair(&mut x, &mut y)?;
        let info = match step(&mut state, map, &x, &y, &params, &mut ws) {
            Ok(info) => info,
            Err(Error::DomainViolation { .. }) => {
                rejected += 1;
                if rejected > config.iterations.max(1000) {
                    return Err(invalid(format!(
                        "more than {rejected} samples fell outside the ball of radius {}",
                        config.domain_radius
                    )));
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        if config.check_invariants {
            let in_box = state.theta.iter().all(|t| t.abs() <= bound_tol);
            let z_ok = config.z_interval.map_or(true, |(lo, hi)| lo <= state.z && state.z <= hi);
            if !(in_box && z_ok) {
                violations += 1;
            }
        }
        if let Some(stride) = config.trace_stride {
            window += info.psi_x;
            window_len += 1;
            if state.k % stride == 0 || state.k == config.iterations {
                trace.push(TracePoint {
                    k: state.k,
                    z: state.z,
                    theta_inf: state.theta.iter().fold(0.0f64, |a, t| a.max(t.abs())),
                    running_dv: window / window_len as f64 - state.z.ln(),
                });
                window = 0.0;
                window_len = 0;
            }
        }
    }
    if rejected > 0 {
        warn!("{rejected} sample pairs rejected for lying outside radius {}", config.domain_radius);
    }
    Ok(RunOutput { theta_bar: state.average(), final_state: state, trace, rejected, invariant_violations: violations })
}

/// Expectations of features against two discrete measures, used for exact
/// objective, gradient and Hessian evaluation.
#[derive(Debug, Clone)]
pub struct FeatureMoments {
    m: usize,
    p_features: Vec<f64>,
    p_weights: Vec<f64>,
    q_features: Vec<f64>,
    q_weights: Vec<f64>,
}

impl FeatureMoments {
    pub fn new(map: &FeatureMap, p: &WeightedPoints, q: &WeightedPoints) -> Result<Self> {
        let m = map.neurons();
        let table = |wp: &WeightedPoints| -> Result<Vec<f64>> {
            let mut out = vec![0.0; wp.len() * m];
            for (row, x) in out.chunks_exact_mut(m).zip(wp.points.rows()) {
                map.phi_into(x, row)?;
            }
            Ok(out)
        };
        let normalize = |w: &[f64]| {
            let s: f64 = w.iter().sum();
            w.iter().map(|v| v / s).collect::<Vec<_>>()
        };
        Ok(Self {
            m,
            p_features: table(p)?,
            p_weights: normalize(&p.weights),
            q_features: table(q)?,
            q_weights: normalize(&q.weights),
        })
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: theta.len() });
        }
        Ok(())
    }

    /// Tilted weights `w_j exp(psi_j) / sum` and `ln sum w_j exp(psi_j)`.
    fn tilted(&self, theta: &[f64]) -> (Vec<f64>, f64) {
        let psi: Vec<f64> = self.q_features.chunks_exact(self.m).map(|f| dot(f, theta)).collect();
        let mx = psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = psi.iter().zip(&self.q_weights).map(|(p, w)| w * (p - mx).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        (w, mx + s.ln())
    }

    /// `z*(theta) = E_Q[exp(psi)]`.
    pub fn normalizer(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        Ok(self.tilted(theta).1.exp())
    }

    /// `f(theta) = -E_P[psi] + ln E_Q[exp(psi)]`.
    pub fn objective(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        let mean_p: f64 = self.p_features.chunks_exact(self.m).zip(&self.p_weights).map(|(f, w)| w * dot(f, theta)).sum();
        Ok(-mean_p + self.tilted(theta).1)
    }

    /// `-E_P[phi] + E_{Q_theta}[phi]`.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        let (tw, _) = self.tilted(theta);
        let mut g = vec![0.0; self.m];
        for (f, w) in self.p_features.chunks_exact(self.m).zip(&self.p_weights) {
            g.iter_mut().zip(f).for_each(|(g, f)| *g -= w * f);
        }
        for (f, w) in self.q_features.chunks_exact(self.m).zip(&tw) {
            g.iter_mut().zip(f).for_each(|(g, f)| *g += w * f);
        }
        Ok(g)
    }

    /// Covariance of `phi` under the tilted measure, row-major `m x m`.
    pub fn hessian(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        let m = self.m;
        let (tw, _) = self.tilted(theta);
        let mut mean = vec![0.0; m];
        for (f, w) in self.q_features.chunks_exact(m).zip(&tw) {
            mean.iter_mut().zip(f).for_each(|(a, f)| *a += w * f);
        }
        let mut h = vec![0.0; m * m];
        for (f, w) in self.q_features.chunks_exact(m).zip(&tw) {
            for i in 0..m {
                let di = f[i] - mean[i];
                if di == 0.0 {
                    continue;
                }
                for j in 0..m {
                    h[i * m + j] += w * di * (f[j] - mean[j]);
                }
            }
        }
        Ok(h)
    }
}

/// Exact objective under discrete measures for `P` and `Q`.
pub fn objective(map: &FeatureMap, theta: &[f64], p: &WeightedPoints, q: &WeightedPoints) -> Result<f64> {
    FeatureMoments::new(map, p, q)?.objective(theta)
}

/// Exact gradient under discrete measures for `P` and `Q`.
pub fn exact_gradient(map: &FeatureMap, theta: &[f64], p: &WeightedPoints, q: &WeightedPoints) -> Result<Vec<f64>> {
    FeatureMoments::new(map, p, q)?.gradient(theta)
}

/// Exact Hessian under discrete measures for `P` and `Q`.
pub fn hessian(map: &FeatureMap, theta: &[f64], p: &WeightedPoints, q: &WeightedPoints) -> Result<Vec<f64>> {
    FeatureMoments::new(map, p, q)?.hessian(theta)
}

/// Uniform draw from the box `[-bound, bound]^m`.
pub fn random_in_box<G: Rng + ?Sized>(rng: &mut G, m: usize, bound: f64) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(-bound..=bound)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Samples;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn toy_map() -> FeatureMap {
        FeatureMap::sample(2, 6, 1.5, 21).unwrap()
    }

    #[test]
    fn projection_examples() {
        let mut t = vec![5.0, -5.0, 0.25];
        project_box(&mut t, 1.0);
        assert_eq!(t, vec![1.0, -1.0, 0.25]);
        let before = t.clone();
        project_box(&mut t, 1.0);
        assert_eq!(t, before);
    }

    #[test]
    fn projection_is_non_expansive() {
        let mut g = rng::seeded(4);
        for _ in 0..1000 {
            let u = random_in_box(&mut g, 7, 3.0);
            let v = random_in_box(&mut g, 7, 3.0);
            let d0: f64 = u.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
            let (mut pu, mut pv) = (u.clone(), v.clone());
            project_box(&mut pu, 1.0);
            project_box(&mut pv, 1.0);
            let d1: f64 = pu.iter().zip(&pv).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(d1 <= d0 + 1e-15);
        }
    }

    #[test]
    fn zero_state_step() {
        let map = toy_map();
        let mut st = ParamState::new(vec![0.0; 6], 1.0);
        let params = StepParams { alpha: 0.1, r: 0.5, bound: 10.0, domain_radius: 1.5, out_of_domain: OutOfDomain::Reject };
        let mut ws = Workspace::new(&map);
        let (x, y) = ([0.3, -0.2], [-0.5, 0.4]);
        step(&mut st, &map, &x, &y, &params, &mut ws).unwrap();
        assert_eq!(st.z, 1.0);
        assert_eq!(st.k, 1);
        assert_eq!(st.theta_sum, vec![0.0; 6]);
        let px = map.phi(&x).unwrap();
        let py = map.phi(&y).unwrap();
        for i in 0..6 {
            assert_relative_eq!(st.theta[i], 0.05 * (px[i] - py[i]), max_relative = 1e-14);
        }
    }

    #[test]
    fn step_rejects_or_clips() {
        let map = toy_map();
        let mut st = ParamState::new(vec![0.0; 6], 1.0);
        let mut params = StepParams { alpha: 0.1, r: 0.5, bound: 1.0, domain_radius: 1.0, out_of_domain: OutOfDomain::Reject };
        let mut ws = Workspace::new(&map);
        let err = step(&mut st, &map, &[2.0, 0.0], &[0.0, 0.0], &params, &mut ws).unwrap_err();
        assert!(matches!(err, Error::DomainViolation { .. }));
        assert_eq!(st.k, 0);
        params.out_of_domain = OutOfDomain::Clip;
        step(&mut st, &map, &[2.0, 0.0], &[0.0, 0.0], &params, &mut ws).unwrap();
        let mut clipped = ParamState::new(vec![0.0; 6], 1.0);
        step(&mut clipped, &map, &[1.0, 0.0], &[0.0, 0.0], &params, &mut ws).unwrap();
        assert_eq!(st, clipped);
    }

    #[test]
    fn direction_norm_is_bounded() {
        let map = toy_map();
        let c = 3.0f64;
        let bound = c / 6.0;
        let g_bound = 2.0 * 1.5 * 6f64.sqrt() * (1.0 + (4.0 * 1.5 * c).exp());
        let z_lo = (-2.0 * 1.5 * c).exp();
        let mut g = rng::seeded(8);
        for _ in 0..200 {
            let theta = random_in_box(&mut g, 6, bound);
            let mut x = [0.0; 2];
            let mut y = [0.0; 2];
            crate::features::sample_unit_sphere(&mut g, &mut x);
            crate::features::sample_unit_sphere(&mut g, &mut y);
            let s: f64 = g.random_range(0.0..1.5);
            x.iter_mut().for_each(|v| *v *= s);
            let d = update_direction(&map, &theta, z_lo, &x, &y).unwrap();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= g_bound);
        }
    }

    struct Fixed {
        x: Vec<f64>,
        y: Vec<f64>,
    }
    impl PairStream for Fixed {
        fn next_pair(&mut self, x: &mut [f64], y: &mut [f64]) -> Result<()> {
            x.copy_from_slice(&self.x);
            y.copy_from_slice(&self.y);
            Ok(())
        }
    }

    #[test]
    fn single_iteration_returns_theta0() {
        let map = toy_map();
        let mut cfg = TrainConfig::new(0.5, 1.0, 1, 0.5, 1.5);
        cfg.theta0 = Theta0::Given(vec![0.1, -0.1, 0.0, 0.2, 0.0, 0.0]);
        let mut s = Fixed { x: vec![0.1, 0.2], y: vec![-0.3, 0.0] };
        let out = run(&cfg, &map, &mut s).unwrap();
        assert_eq!(out.theta_bar, vec![0.1, -0.1, 0.0, 0.2, 0.0, 0.0]);
        assert_eq!(out.final_state.k, 1);
    }

    #[test]
    fn average_matches_manual_mean_and_stays_in_box() {
        let map = toy_map();
        let mut cfg = TrainConfig::new(0.3, 2.0, 50, 0.05, 1.5);
        cfg.check_invariants = true;
        cfg.trace_stride = Some(10);
        let mut g = rng::seeded(1);
        let mut stream = IndependentPairs {
            p: |x: &mut [f64]| x.iter_mut().for_each(|v| *v = 0.5),
            q: move |y: &mut [f64]| y.iter_mut().for_each(|v| *v = g.random_range(-1.0..1.0)),
        };
        let out = run(&cfg, &map, &mut stream).unwrap();
        assert!(out.theta_bar.iter().all(|t| t.abs() <= 0.05));
        assert_eq!(out.invariant_violations, 0);
        assert_eq!(out.trace.len(), 5);
        assert_eq!(out.trace.last().unwrap().k, 50);

        // Replay by hand.
        let mut g = rng::seeded(1);
        let mut st = ParamState::new(vec![0.0; 6], 1.0);
        let params = StepParams::from(&cfg);
        let mut ws = Workspace::new(&map);
        let mut iterates = Vec::new();
        for _ in 0..50 {
            iterates.push(st.theta.clone());
            let y = [g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)];
            step(&mut st, &map, &[0.5, 0.5], &y, &params, &mut ws).unwrap();
        }
        for i in 0..6 {
            let mean = iterates.iter().map(|t| t[i]).sum::<f64>() / 50.0;
            assert_relative_eq!(out.theta_bar[i], mean, max_relative = 1e-12, epsilon = 1e-15);
        }
        assert_eq!(st, out.final_state);
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::new(0.5, 1.0, 10, 1.0, 1.0);
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { alpha: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { alpha: 1.5, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { r: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { iterations: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { z_interval: Some((2.0, 3.0)), ..ok.clone() }.validate().is_err());
        assert!(Theta0::Given(vec![2.0]).materialize(1, 1.0).is_err());
        let t = Theta0::Uniform { half_width: 5.0, seed: 1 }.materialize(10, 1.0).unwrap();
        assert!(t.iter().all(|v| v.abs() <= 1.0));
    }

    fn grid_measure(density: impl Fn(&[f64]) -> f64) -> WeightedPoints {
        WeightedPoints::tensor_box(2, 1.0, 24, density).unwrap()
    }

    #[test]
    fn gradient_vanishes_when_p_equals_q_at_zero() {
        let map = toy_map();
        let p = grid_measure(|x| (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp());
        let g = exact_gradient(&map, &[0.0; 6], &p, &p).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14), "{g:?}");
    }

    #[test]
    fn objective_matches_definition() {
        let map = toy_map();
        let p = WeightedPoints::empirical(Samples::from_rows(&[[0.1, 0.2], [0.5, -0.3]]).unwrap()).unwrap();
        let q = WeightedPoints::empirical(Samples::from_rows(&[[-0.4, 0.0], [0.2, 0.9], [0.0, 0.0]]).unwrap()).unwrap();
        let theta = [0.3, -0.2, 0.1, 0.0, 0.5, -0.4];
        let f = objective(&map, &theta, &p, &q).unwrap();
        let mean_p = (map.psi(&[0.1, 0.2], &theta).unwrap() + map.psi(&[0.5, -0.3], &theta).unwrap()) / 2.0;
        let mgf = [[-0.4, 0.0], [0.2, 0.9], [0.0, 0.0]].iter().map(|y| map.psi(y, &theta).unwrap().exp()).sum::<f64>() / 3.0;
        assert_relative_eq!(f, -mean_p + mgf.ln(), max_relative = 1e-13);
        let fm = FeatureMoments::new(&map, &p, &q).unwrap();
        assert_relative_eq!(fm.normalizer(&theta).unwrap(), mgf, max_relative = 1e-13);
    }

    proptest! {
        #[test]
        fn z_update_is_convex_combination(alpha in 0.001f64..1.0, z in 0.5f64..2.0, seed in any::<u64>()) {
            let map = FeatureMap::sample(2, 4, 1.0, seed).unwrap();
            let mut g = rng::seeded(seed ^ 1);
            let theta = random_in_box(&mut g, 4, 0.1);
            let e = map.psi(&[0.2, 0.1], &theta).unwrap().exp();
            let mut st = ParamState::new(theta, z);
            let params = StepParams { alpha, r: 1.0, bound: 0.1, domain_radius: 1.0, out_of_domain: OutOfDomain::Reject };
            step(&mut st, &map, &[0.0, 0.0], &[0.2, 0.1], &params, &mut Workspace::new(&map)).unwrap();
            let lo = z.min(e) - 1e-12;
            let hi = z.max(e) + 1e-12;
            prop_assert!(lo <= st.z && st.z <= hi);
            prop_assert!(st.theta.iter().all(|t| t.abs() <= 0.1));
        }
    }
}
