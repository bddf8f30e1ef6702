//! Config file schema, command-line overrides and their resolution.
//!
//! Precedence: command-line flag, then config file, then built-in default.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use rfkl::distributions::DistributionSpec;
use rfkl::{Distribution, DistributionPair, RadiusConvention, ScheduleKind};

use crate::error::{config_err, CliError, CliResult};

/// Top level of the TOML config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dim: Option<usize>,
    pub half_width: Option<f64>,
    pub m: Option<usize>,
    #[serde(rename = "T")]
    pub t: Option<u64>,
    pub trials: Option<usize>,
    pub eval_samples: Option<usize>,
    pub schedule: Option<ScheduleKind>,
    pub rho: Option<f64>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub radius_convention: Option<RadiusConvention>,
    pub theta0_scale: Option<f64>,
    pub p: Option<DistributionSpec>,
    pub q: Option<DistributionSpec>,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub mi: MiSection,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub verify_approx: VerifySection,
    #[serde(default)]
    pub baseline: BaselineSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum SweepParam {
    #[serde(rename = "m")]
    #[value(name = "m")]
    M,
    #[serde(rename = "T")]
    #[value(name = "T")]
    T,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: Option<SweepParam>,
    pub values: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiSection {
    pub pairs: Option<usize>,
    pub a_dim: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub dims: Option<Vec<usize>>,
    pub rhos: Option<Vec<f64>>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    /// `exp(-pi |x|^2)`, any dimension.
    Gaussian,
    /// Two-centre Gaussian mixture, two dimensions.
    Mixture,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub ms: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub radius: Option<f64>,
    pub function: Option<TestFunction>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub k: Option<usize>,
    pub samples: Option<usize>,
}

/// A parsed config file and its source text, for locating keys in errors.
#[derive(Debug, Clone, Default)]
pub struct LoadedConfig {
    pub path: Option<PathBuf>,
    pub text: String,
    pub file: FileConfig,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigFile { path: path.into(), message: e.to_string() })?;
        Self::parse(&text, Some(path))
    }

    pub fn parse(text: &str, path: Option<&Path>) -> CliResult<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| CliError::ConfigFile {
            path: path.map_or_else(|| PathBuf::from("<config>"), Path::to_path_buf),
            message: e.to_string().trim_end().to_string(),
        })?;
        Ok(Self { path: path.map(Path::to_path_buf), text: text.to_string(), file })
    }

    /// 1-based line of the first `key = ...` assignment in the file.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.text.lines().position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
    }

    /// Error for a bad value: names the flag, or the file line the key came from.
    pub fn bad_value(&self, key: &str, from_flag: bool, message: impl std::fmt::Display) -> CliError {
        if from_flag {
            return config_err(format!("--{}: {message}", key.replace('_', "-")));
        }
        match (&self.path, self.line_of(key)) {
            (Some(p), Some(line)) => CliError::ConfigFile { path: p.clone(), message: format!("line {line}: {key}: {message}") },
            _ => config_err(format!("{key}: {message}")),
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Ambient dimension n.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Half-width a of the support box [-a, a]^n, applied to both P and Q.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Number of random features.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of SGD iterations.
    #[arg(long = "T", value_name = "T")]
    pub t: Option<u64>,
    /// Independent trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Held-out samples per distribution for the final estimate.
    #[arg(long)]
    pub eval_samples: Option<usize>,
    /// Step-size rule.
    #[arg(long, value_parser = parse_schedule)]
    pub schedule: Option<ScheduleKind>,
    /// Smoothness bound; sets the coefficient box (default 1, an arbitrary choice).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Confidence parameter of the reported bound.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Master seed; every trial derives its own streams from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for trials (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output CSV path; side files are written next to it.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Feature radius: the box half-width a, or the circumradius a sqrt(n).
    #[arg(long, value_parser = parse_convention)]
    pub radius_convention: Option<RadiusConvention>,
    /// Start from theta0 uniform on [-s, s]^m (projected onto the box) instead of zero.
    #[arg(long, value_name = "S")]
    pub theta0_scale: Option<f64>,
}

fn parse_schedule(s: &str) -> Result<ScheduleKind, String> {
    s.parse().map_err(|e: rfkl::Error| e.to_string())
}

fn parse_convention(s: &str) -> Result<RadiusConvention, String> {
    s.parse().map_err(|e: rfkl::Error| e.to_string())
}

/// Fully resolved shared settings; serialized into every artifact header.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub dim: usize,
    pub m: usize,
    #[serde(rename = "T")]
    pub t: u64,
    pub trials: usize,
    pub eval_samples: usize,
    pub schedule: ScheduleKind,
    pub rho: f64,
    /// Whether rho was set explicitly; the bound is reported only then.
    pub rho_given: bool,
    pub delta: f64,
    pub seed: u64,
    pub radius_convention: RadiusConvention,
    pub theta0_scale: Option<f64>,
    pub p: DistributionSpec,
    pub q: DistributionSpec,
    #[serde(skip)]
    pub jobs: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

pub const DEFAULT_HALF_WIDTH: f64 = 2.0;

fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> (T, bool) {
    match (flag, file) {
        (Some(v), _) => (v.clone(), true),
        (None, Some(v)) => (v.clone(), false),
        (None, None) => (default, true),
    }
}

fn with_half_width(spec: DistributionSpec, a: f64) -> DistributionSpec {
    match spec {
        DistributionSpec::TruncGauss { .. } => DistributionSpec::TruncGauss { a },
        DistributionSpec::Uniform { .. } => DistributionSpec::Uniform { a },
        DistributionSpec::CorrGauss { corr, .. } => DistributionSpec::CorrGauss { a, corr },
    }
}

impl Settings {
    pub fn resolve(args: &CommonArgs, cfg: &LoadedConfig) -> CliResult<Self> {
        let f = &cfg.file;
        let positive = |key: &str, v: usize, flag: bool| -> CliResult<usize> {
            if v == 0 {
                return Err(cfg.bad_value(key, flag, "must be at least 1"));
            }
            Ok(v)
        };
        let (dim, fl) = pick(&args.dim, &f.dim, 2);
        let dim = positive("dim", dim, fl)?;
        let (m, fl) = pick(&args.m, &f.m, 50);
        let m = positive("m", m, fl)?;
        let (t, fl) = pick(&args.t, &f.t, 500_000);
        if t == 0 {
            return Err(cfg.bad_value("T", fl, "must be at least 1"));
        }
        let (trials, fl) = pick(&args.trials, &f.trials, 10);
        let trials = positive("trials", trials, fl)?;
        let (eval_samples, fl) = pick(&args.eval_samples, &f.eval_samples, 5000);
        let eval_samples = positive("eval_samples", eval_samples, fl)?;
        let (schedule, _) = pick(&args.schedule, &f.schedule, ScheduleKind::Experiment);
        let rho_given = args.rho.is_some() || f.rho.is_some();
        let (rho, fl) = pick(&args.rho, &f.rho, 1.0);
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(cfg.bad_value("rho", fl, format!("must be positive and finite, got {rho}")));
        }
        let (delta, fl) = pick(&args.delta, &f.delta, 0.1);
        if !(delta > 0.0 && delta < 1.0) {
            return Err(cfg.bad_value("delta", fl, format!("must lie in (0, 1), got {delta}")));
        }
        let (seed, _) = pick(&args.seed, &f.seed, 0);
        let (jobs, _) = pick(&args.jobs, &f.jobs, 1);
        let out = args.out.clone().or_else(|| f.out.clone());
        let (radius_convention, _) = pick(&args.radius_convention, &f.radius_convention, RadiusConvention::Box);
        let theta0_scale = args.theta0_scale.or(f.theta0_scale);
        if let Some(s) = theta0_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(cfg.bad_value("theta0_scale", args.theta0_scale.is_some(), format!("must be finite and nonnegative, got {s}")));
            }
        }
        let half_width = args.half_width.or(f.half_width);
        if let Some(a) = half_width {
            if !(a > 0.0 && a.is_finite()) {
                return Err(cfg.bad_value("half_width", args.half_width.is_some(), format!("must be positive, got {a}")));
            }
        }
        let a = half_width.unwrap_or(DEFAULT_HALF_WIDTH);
        let mut p = f.p.unwrap_or(DistributionSpec::TruncGauss { a });
        let mut q = f.q.unwrap_or(DistributionSpec::Uniform { a });
        if half_width.is_some() {
            p = with_half_width(p, a);
            q = with_half_width(q, a);
        }
        let s = Self {
            dim,
            m,
            t,
            trials,
            eval_samples,
            schedule,
            rho,
            rho_given,
            delta,
            seed,
            radius_convention,
            theta0_scale,
            p,
            q,
            jobs,
            out,
        };
        s.p_law().map_err(|e| cfg.bad_value("p", false, e))?;
        s.q_law().map_err(|e| cfg.bad_value("q", false, e))?;
        Ok(s)
    }

    pub fn p_law(&self) -> rfkl::Result<Distribution> {
        self.p.build(self.dim)
    }

    pub fn q_law(&self) -> rfkl::Result<Distribution> {
        self.q.build(self.dim)
    }

    pub fn pair(&self) -> rfkl::Result<DistributionPair> {
        DistributionPair::new(self.p_law()?, self.q_law()?)
    }
}
