//! Donsker-Varadhan evaluation of a trained network and mutual information.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{schedule, ProblemConstants, ScheduleKind};
use crate::distributions::{Distribution, DistributionPair, RadiusConvention};
use crate::error::{invalid, Error, Result};
use crate::features::FeatureMap;
use crate::optimizer::{self, IndependentPairs, OutOfDomain, PairStream, RunOutput, Theta0, TrainConfig};
use crate::rng::{self, purpose, StreamRng};
use crate::{PairedSamples, Samples};

/// `kl_hat = mean_term - log_mgf_term` on held-out samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DvEstimate {
    pub kl_hat: f64,
    pub mean_term: f64,
    pub log_mgf_term: f64,
    pub n_eval: usize,
}

/// Pairwise (cascade) summation; the reduction tree depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if v.len() <= LEAF {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `ln((1/M) sum exp(v_j))` via the max shift.
pub fn log_mean_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptySampleSet("log-mean-exp input"));
    }
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return Err(Error::NonFinite(format!("network output {mx}")));
    }
    let shifted: Vec<f64> = v.iter().map(|x| (x - mx).exp()).collect();
    Ok(mx + (pairwise_sum(&shifted) / v.len() as f64).ln())
}

fn psi_all(map: &FeatureMap, theta: &[f64], xs: &Samples) -> Result<Vec<f64>> {
    if xs.dim() != map.dim() {
        return Err(Error::DimensionMismatch { expected: map.dim(), got: xs.dim() });
    }
    if theta.len() != map.neurons() {
        return Err(Error::DimensionMismatch { expected: map.neurons(), got: theta.len() });
    }
    let rows: Vec<&[f64]> = xs.rows().collect();
    Ok(rows.par_iter().map(|x| map.psi_unchecked(x, theta)).collect())
}

/// Evaluate the bound at `theta` with `x ~ P` and `y ~ Q`.
pub fn dv_estimate(map: &FeatureMap, theta: &[f64], xs: &Samples, ys: &Samples) -> Result<DvEstimate> {
    if xs.is_empty() {
        return Err(Error::EmptySampleSet("P evaluation samples"));
    }
    if ys.is_empty() {
        return Err(Error::EmptySampleSet("Q evaluation samples"));
    }
    let px = psi_all(map, theta, xs)?;
    let py = psi_all(map, theta, ys)?;
    let mean_term = pairwise_sum(&px) / px.len() as f64;
    let log_mgf_term = log_mean_exp(&py)?;
    Ok(DvEstimate { kl_hat: mean_term - log_mgf_term, mean_term, log_mgf_term, n_eval: xs.len() })
}

/// The empirical objective `-mean_term + log_mgf_term`.
pub fn negative_objective(map: &FeatureMap, theta: &[f64], xs: &Samples, ys: &Samples) -> Result<f64> {
    Ok(-dv_estimate(map, theta, xs, ys)?.kl_hat)
}

/// Training settings for mutual information mode.
#[derive(Debug, Clone, PartialEq)]
pub struct MiConfig {
    pub alpha: f64,
    pub r: f64,
    pub iterations: u64,
    /// Box half-width `C_theta / m`.
    pub bound: f64,
    pub domain_radius: f64,
    pub theta0: Theta0,
    /// Number of pairs held out for evaluation.
    pub eval_pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiOutput {
    pub estimate: DvEstimate,
    pub run: RunOutput,
    pub n_train: usize,
}

/// Epochs over the training pairs: each epoch draws a fresh order for the
/// joint samples and an independent permutation for the product samples.
struct ShuffledPairs<'a> {
    data: &'a PairedSamples,
    train: Vec<usize>,
    order: Vec<usize>,
    partner: Vec<usize>,
    pos: usize,
    rng: StreamRng,
}

impl<'a> ShuffledPairs<'a> {
    fn new(data: &'a PairedSamples, train: Vec<usize>, rng: StreamRng) -> Self {
        let len = train.len();
        let mut s = Self { data, train, order: (0..len).collect(), partner: (0..len).collect(), pos: len, rng };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.partner.shuffle(&mut self.rng);
        self.pos = 0;
    }
}

impl PairStream for ShuffledPairs<'_> {
    fn next_pair(&mut self, x: &mut [f64], y: &mut [f64]) -> Result<()> {
        if self.pos == self.train.len() {
            self.reshuffle();
        }
        let i = self.train[self.order[self.pos]];
        let j = self.train[self.partner[self.pos]];
        x.copy_from_slice(self.data.joint().row(i));
        self.data.write_mixed(i, j, y);
        self.pos += 1;
        Ok(())
    }
}

/// Estimate `I(a; b)` as the divergence between the joint law and the
/// product of marginals, with product samples formed by permuting `b`.
pub fn mi_estimate(map: &FeatureMap, data: &PairedSamples, config: &MiConfig) -> Result<MiOutput> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 1, got: n });
    }
    if data.dim() != map.dim() {
        return Err(Error::DimensionMismatch { expected: map.dim(), got: data.dim() });
    }
    if config.eval_pairs == 0 || config.eval_pairs >= n {
        return Err(invalid(format!("held-out pairs must lie in 1..{n}, got {}", config.eval_pairs)));
    }
    let n_eval = config.eval_pairs;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(config.seed, &[purpose::PERMUTATION, 0]));
    let (eval, train) = idx.split_at(n_eval);

    let mut tc = TrainConfig::new(config.alpha, config.r, config.iterations, config.bound, config.domain_radius);
    tc.theta0 = config.theta0.clone();
    let mut stream = ShuffledPairs::new(data, train.to_vec(), rng::stream(config.seed, &[purpose::PERMUTATION, 1]));
    let run = optimizer::run(&tc, map, &mut stream)?;

    let mut partner = eval.to_vec();
    partner.shuffle(&mut rng::stream(config.seed, &[purpose::PERMUTATION, 2]));
    let mut xs = Samples::with_capacity(data.dim(), n_eval);
    let mut ys = Samples::with_capacity(data.dim(), n_eval);
    let mut buf = vec![0.0; data.dim()];
    for (&i, &j) in eval.iter().zip(&partner) {
        xs.push(data.joint().row(i));
        data.write_mixed(i, j, &mut buf);
        ys.push(&buf);
    }
    let estimate = dv_estimate(map, &run.theta_bar, &xs, &ys)?;
    Ok(MiOutput { estimate, run, n_train: train.len() })
}

/// Settings for one KL run on a [`DistributionPair`].
#[derive(Debug, Clone, PartialEq)]
pub struct KlConfig {
    pub m: usize,
    pub iterations: u64,
    pub schedule: ScheduleKind,
    /// Smoothness bound used for `C_theta` and the theorem schedule.
    pub rho: f64,
    pub convention: RadiusConvention,
    pub eval_samples: usize,
    /// Half-width of a uniform random start; `None` starts from zero.
    pub theta0_scale: Option<f64>,
    pub out_of_domain: OutOfDomain,
    pub check_invariants: bool,
    pub trace_stride: Option<u64>,
}

impl KlConfig {
    /// Zero start, rejection of out-of-domain samples, no trace.
    pub fn new(m: usize, iterations: u64, schedule: ScheduleKind, rho: f64, convention: RadiusConvention, eval_samples: usize) -> Self {
        Self {
            m,
            iterations,
            schedule,
            rho,
            convention,
            eval_samples,
            theta0_scale: None,
            out_of_domain: OutOfDomain::Reject,
            check_invariants: false,
            trace_stride: None,
        }
    }
}

/// Quantities fixed by a [`KlConfig`] before any sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlSetup {
    pub feature_radius: f64,
    /// Radius of the ball samples are checked against; the support's circumradius.
    pub domain_radius: f64,
    pub constants: ProblemConstants,
    pub bound: f64,
    pub alpha: f64,
    pub r: f64,
}

impl KlSetup {
    pub fn new(pair: &DistributionPair, config: &KlConfig) -> Result<Self> {
        if config.m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        if config.eval_samples == 0 {
            return Err(Error::EmptySampleSet("evaluation samples"));
        }
        let feature_radius = pair.feature_radius(config.convention);
        let constants = ProblemConstants::new(pair.dim(), feature_radius, config.rho)?;
        let sched = schedule(config.schedule, config.iterations, config.m, &constants)?;
        Ok(Self {
            feature_radius,
            domain_radius: pair.circumradius(),
            constants,
            bound: constants.box_bound(config.m),
            alpha: sched.alpha,
            r: sched.r,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlOutput {
    pub estimate: DvEstimate,
    pub setup: KlSetup,
    pub run: RunOutput,
}

/// Sample features, train on fresh pairs, evaluate on fresh held-out draws.
///
/// Every random stream is derived from `seed` and a purpose label, so the
/// result depends on nothing but the inputs.
pub fn estimate_kl(pair: &DistributionPair, config: &KlConfig, seed: u64) -> Result<KlOutput> {
    let setup = KlSetup::new(pair, config)?;
    let n = pair.dim();
    let map = FeatureMap::sample_with_rng(n, config.m, setup.feature_radius, &mut rng::stream(seed, &[purpose::FEATURES]))?;
    let mut tc = TrainConfig::new(setup.alpha, setup.r, config.iterations, setup.bound, setup.domain_radius);
    tc.out_of_domain = config.out_of_domain;
    tc.trace_stride = config.trace_stride;
    tc.check_invariants = config.check_invariants;
    if config.check_invariants {
        tc.z_interval = Some(setup.constants.z_interval()?);
    }
    if let Some(half_width) = config.theta0_scale {
        tc.theta0 = Theta0::Uniform { half_width, seed: rng::derive_seed(seed, &[purpose::THETA0]) };
    }
    let (mut gp, mut gq) = (rng::stream(seed, &[purpose::P_TRAIN]), rng::stream(seed, &[purpose::Q_TRAIN]));
    let mut stream = IndependentPairs { p: |x: &mut [f64]| pair.p.sample_into(&mut gp, x), q: |y: &mut [f64]| pair.q.sample_into(&mut gq, y) };
    let run = optimizer::run(&tc, &map, &mut stream)?;
    let xs = pair.p.sample(&mut rng::stream(seed, &[purpose::P_EVAL]), config.eval_samples);
    let ys = pair.q.sample(&mut rng::stream(seed, &[purpose::Q_EVAL]), config.eval_samples);
    let estimate = dv_estimate(&map, &run.theta_bar, &xs, &ys)?;
    if !estimate.kl_hat.is_finite() {
        return Err(Error::NonFinite(format!("estimate {}", estimate.kl_hat)));
    }
    Ok(KlOutput { estimate, setup, run })
}

/// Draw `pairs` joint samples from `joint`, split the coordinates after
/// `a_dim`, and estimate the mutual information with `config.eval_samples`
/// pairs held out.
pub fn estimate_mi(joint: &Distribution, a_dim: usize, pairs: usize, config: &KlConfig, seed: u64) -> Result<(MiOutput, KlSetup)> {
    let n = joint.dim();
    if a_dim == 0 || a_dim >= n {
        return Err(invalid(format!("the first block must have between 1 and {} coordinates, got {a_dim}", n - 1)));
    }
    let pair = DistributionPair::new(*joint, *joint)?;
    let setup = KlSetup::new(&pair, config)?;
    let data = PairedSamples::new(a_dim, joint.sample(&mut rng::stream(seed, &[purpose::DATA]), pairs))?;
    let map = FeatureMap::sample_with_rng(n, config.m, setup.feature_radius, &mut rng::stream(seed, &[purpose::FEATURES]))?;
    let mc = MiConfig {
        alpha: setup.alpha,
        r: setup.r,
        iterations: config.iterations,
        bound: setup.bound,
        domain_radius: setup.domain_radius,
        theta0: match config.theta0_scale {
            Some(half_width) => Theta0::Uniform { half_width, seed: rng::derive_seed(seed, &[purpose::THETA0]) },
            None => Theta0::Zero,
        },
        eval_pairs: config.eval_samples,
        seed,
    };
    Ok((mi_estimate(&map, &data, &mc)?, setup))
}
