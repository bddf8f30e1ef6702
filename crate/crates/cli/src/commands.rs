//! The six subcommands.

use std::path::Path;
use std::time::Instant;

use clap::{Args, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use rfkl::approx::{approx_trial, build_representation, log_log_slope, median, ApproxTrial, GaussianBump, GaussianMixture, SpectralFunction};
use rfkl::baseline::knn_kl;
use rfkl::constants::{constants_grid, theorem_bound, GridRow};
use rfkl::distributions::KlValue;
use rfkl::estimator::{estimate_kl, estimate_mi};
use rfkl::optimizer::{OutOfDomain, TracePoint};
use rfkl::rng::{derive_seed, purpose, stream};
use rfkl::{Distribution, DistributionPair, KlConfig, RadiusConvention};

use crate::config::{CommonArgs, LoadedConfig, Settings, SweepParam, TestFunction};
use crate::error::{config_err, CliResult};
use crate::harness::run_indexed;
use crate::output::{header_line, print_stdout, sibling, write_file, write_json, Table};
use crate::records::{RunRecord, SweepSummary, MI_COLUMNS, RUN_COLUMNS, SUMMARY_COLUMNS};

/// Seed label of the Monte Carlo ground truth, when quadrature is unavailable.
const TRUTH_STREAM: u64 = 99;
const TRUTH_MC_SAMPLES: usize = 1_000_000;
/// First seed label of a trial, by command: estimate/baseline/mi, m-sweep, T-sweep, verify-approx.
const TRIAL_STREAM: u64 = 0;
const VERIFY_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DomainPolicy {
    /// Skip pairs with a sample outside the domain ball and count them.
    #[default]
    Reject,
    /// Scale such samples back onto the ball.
    Clip,
}

impl From<DomainPolicy> for OutOfDomain {
    fn from(p: DomainPolicy) -> Self {
        match p {
            DomainPolicy::Reject => OutOfDomain::Reject,
            DomainPolicy::Clip => OutOfDomain::Clip,
        }
    }
}

/// Optimizer switches shared by `estimate`, `sweep` and `mi`.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct RunArgs {
    /// Record the tracker and running objective every K steps (written to <out>.trace.csv).
    #[arg(long, value_name = "K")]
    pub trace_stride: Option<u64>,
    /// Check the box and tracker invariants after every step.
    #[arg(long)]
    pub check_invariants: bool,
    /// Handling of samples outside the domain ball.
    #[arg(long, value_enum, default_value_t)]
    pub out_of_domain: DomainPolicy,
}

#[derive(Serialize)]
struct Resolved<'a, E: Serialize> {
    #[serde(flatten)]
    settings: &'a Settings,
    #[serde(flatten)]
    extra: E,
}

fn header<E: Serialize>(command: &str, s: &Settings, extra: E) -> CliResult<String> {
    header_line(command, &Resolved { settings: s, extra })
}

fn load(common: &CommonArgs) -> CliResult<(LoadedConfig, Settings)> {
    let cfg = LoadedConfig::load(common.config.as_deref())?;
    let s = Settings::resolve(common, &cfg)?;
    Ok((cfg, s))
}

/// Print `table` and write it to `out` when given.
fn emit(table: Table, out: Option<&Path>) -> CliResult<()> {
    let text = table.render()?;
    if let Some(path) = out {
        write_file(path, &text)?;
        info!("wrote {}", path.display());
    }
    print_stdout(&text)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn kl_config(s: &Settings, run: &RunArgs) -> KlConfig {
    let mut c = KlConfig::new(s.m, s.t, s.schedule, s.rho, s.radius_convention, s.eval_samples);
    c.theta0_scale = s.theta0_scale;
    c.out_of_domain = run.out_of_domain.into();
    c.check_invariants = run.check_invariants;
    c.trace_stride = run.trace_stride;
    c
}

fn kl_truth(pair: &DistributionPair, seed: u64) -> CliResult<KlValue> {
    Ok(pair.exact_kl(TRUTH_MC_SAMPLES, derive_seed(seed, &[TRUTH_STREAM]))?)
}

#[derive(Debug, Clone, Serialize)]
struct Diagnostics {
    trial: usize,
    rejected: u64,
    invariant_violations: u64,
    mean_term: f64,
    log_mgf_term: f64,
    final_z: f64,
}

struct Outcome {
    record: RunRecord,
    diag: Diagnostics,
    trace: Vec<TracePoint>,
}

fn kl_trials(pair: &DistributionPair, truth: f64, cfg: &KlConfig, jobs: usize, seeds: &[u64]) -> CliResult<Vec<Outcome>> {
    let schedule = cfg.schedule.to_string();
    run_indexed(jobs, seeds.len(), |trial| {
        let start = Instant::now();
        let out = estimate_kl(pair, cfg, seeds[trial])?;
        let ms = elapsed_ms(start);
        if out.run.rejected > 0 {
            warn!("trial {trial}: {} sample pairs fell outside the domain ball and were skipped", out.run.rejected);
        }
        if out.run.invariant_violations > 0 {
            warn!("trial {trial}: {} invariant violations", out.run.invariant_violations);
        }
        Ok(Outcome {
            record: RunRecord::new(trial, pair.dim(), Some(cfg.m), Some(cfg.iterations), seeds[trial], out.estimate.kl_hat, truth, ms, schedule.as_str()),
            diag: Diagnostics {
                trial,
                rejected: out.run.rejected,
                invariant_violations: out.run.invariant_violations,
                mean_term: out.estimate.mean_term,
                log_mgf_term: out.estimate.log_mgf_term,
                final_z: out.run.final_state.z,
            },
            trace: out.run.trace,
        })
    })
}

fn write_trace(path: &Path, header: String, outcomes: &[Outcome]) -> CliResult<()> {
    let mut t = Table::new(header, &["trial", "k", "z", "theta_inf", "running_dv"])?;
    for o in outcomes {
        for p in &o.trace {
            t.row(vec![o.record.trial.into(), p.k.into(), p.z.into(), p.theta_inf.into(), p.running_dv.into()])?;
        }
    }
    write_file(path, &t.render()?)
}

fn bound_json(s: &Settings, pair: &DistributionPair) -> CliResult<serde_json::Value> {
    let radius = pair.feature_radius(s.radius_convention);
    Ok(match theorem_bound(s.dim, s.m, s.t, radius, s.rho, s.delta) {
        Ok(b) => serde_json::to_value(b)?,
        Err(e) => serde_json::json!({ "status": "unavailable", "reason": e.to_string() }),
    })
}

#[derive(Debug, Clone, Default, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

pub fn estimate(args: &EstimateArgs) -> CliResult<()> {
    let (_, s) = load(&args.common)?;
    let pair = s.pair()?;
    let truth = kl_truth(&pair, s.seed)?;
    let cfg = kl_config(&s, &args.run);
    let seeds: Vec<u64> = (0..s.trials).map(|i| derive_seed(s.seed, &[TRIAL_STREAM, i as u64])).collect();
    let outcomes = kl_trials(&pair, truth.value, &cfg, s.jobs, &seeds)?;
    let head = header("estimate", &s, &args.run)?;
    let mut table = Table::new(head.clone(), &RUN_COLUMNS)?;
    for o in &outcomes {
        table.row(o.record.cells())?;
    }
    if let Some(out) = &s.out {
        let setup = rfkl::estimator::KlSetup::new(&pair, &cfg)?;
        let report = serde_json::json!({
            "truth": truth,
            "setup": setup,
            "bound": if s.rho_given { Some(bound_json(&s, &pair)?) } else { None },
            "records": outcomes.iter().map(|o| &o.record).collect::<Vec<_>>(),
            "diagnostics": outcomes.iter().map(|o| &o.diag).collect::<Vec<_>>(),
        });
        write_json(&sibling(out, "", "json"), &head, &report)?;
        if args.run.trace_stride.is_some() {
            write_trace(&sibling(out, "trace", "csv"), head.clone(), &outcomes)?;
        }
    }
    emit(table, s.out.as_deref())
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Parameter to vary.
    #[arg(long, value_enum)]
    pub param: Option<SweepParam>,
    /// Comma-separated values of the parameter.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub values: Option<Vec<u64>>,
}

#[derive(Serialize)]
struct SweepExtra<'a> {
    #[serde(flatten)]
    run: &'a RunArgs,
    param: SweepParam,
    values: &'a [u64],
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let (cfg, s) = load(&args.common)?;
    let param = args.param.or(cfg.file.sweep.param).ok_or_else(|| config_err("sweep needs --param m|T"))?;
    let mut values = args.values.clone().or_else(|| cfg.file.sweep.values.clone()).ok_or_else(|| config_err("sweep needs --values"))?;
    values.sort_unstable();
    values.dedup();
    if values.len() < 2 {
        return Err(cfg.bad_value("values", args.values.is_some(), "a sweep needs at least two distinct values"));
    }
    if values.contains(&0) {
        return Err(cfg.bad_value("values", args.values.is_some(), "values must be at least 1"));
    }
    let pair = s.pair()?;
    let truth = kl_truth(&pair, s.seed)?;
    let (name, code) = match param {
        SweepParam::M => ("m", 1),
        SweepParam::T => ("T", 2),
    };
    let head = header("sweep", &s, SweepExtra { run: &args.run, param, values: &values })?;
    let mut long = Table::new(head.clone(), &RUN_COLUMNS)?;
    let mut summary = Table::new(head.clone(), &SUMMARY_COLUMNS)?;
    let mut all = Vec::new();
    let mut summaries = Vec::new();
    for &v in &values {
        let mut vs = s.clone();
        match param {
            SweepParam::M => vs.m = usize::try_from(v).map_err(|_| config_err(format!("m = {v} is too large")))?,
            SweepParam::T => vs.t = v,
        }
        let kc = kl_config(&vs, &args.run);
        let seeds: Vec<u64> = (0..s.trials).map(|i| derive_seed(s.seed, &[code, v, i as u64])).collect();
        let outcomes = kl_trials(&pair, truth.value, &kc, s.jobs, &seeds)?;
        let errors: Vec<f64> = outcomes.iter().map(|o| o.record.abs_err).collect();
        let sm = SweepSummary::from_errors(name, v, &errors)?;
        info!("{name} = {v}: median error {}", sm.median_err);
        for o in &outcomes {
            long.row(o.record.cells())?;
        }
        summary.row(sm.cells())?;
        summaries.push(sm);
        all.extend(outcomes);
    }
    let summary = summary.render()?;
    if let Some(out) = &s.out {
        write_file(out, &long.render()?)?;
        write_file(&sibling(out, "summary", "csv"), &summary)?;
        let report = serde_json::json!({
            "truth": truth,
            "summary": summaries,
            "records": all.iter().map(|o| &o.record).collect::<Vec<_>>(),
            "diagnostics": all.iter().map(|o| &o.diag).collect::<Vec<_>>(),
        });
        write_json(&sibling(out, "", "json"), &head, &report)?;
        if args.run.trace_stride.is_some() {
            write_trace(&sibling(out, "trace", "csv"), head, &all)?;
        }
        print_stdout(&summary)
    } else {
        print_stdout(&long.render()?)?;
        print_stdout(&summary)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct MiArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of coordinates in the first block (default: half the dimension).
    #[arg(long)]
    pub a_dim: Option<usize>,
    /// Joint samples drawn per trial; `--eval-samples` of them are held out.
    #[arg(long)]
    pub pairs: Option<usize>,
}

#[derive(Serialize)]
struct MiExtra<'a> {
    #[serde(flatten)]
    run: &'a RunArgs,
    a_dim: usize,
    pairs: usize,
}

/// Mutual information of the two coordinate blocks of `joint`.
pub fn mi_truth(joint: &Distribution) -> CliResult<f64> {
    match joint {
        Distribution::CorrelatedGaussian(c) => Ok(c.mutual_information()?),
        d if d.is_product() => Ok(0.0),
        _ => Err(config_err("no reference value for this joint law")),
    }
}

pub fn mi(args: &MiArgs) -> CliResult<()> {
    let (cfg, s) = load(&args.common)?;
    let joint = s.p_law()?;
    let a_dim = args.a_dim.or(cfg.file.mi.a_dim).unwrap_or((s.dim / 2).max(1));
    let pairs = args.pairs.or(cfg.file.mi.pairs).unwrap_or(20_000);
    let truth = mi_truth(&joint)?;
    let kc = kl_config(&s, &args.run);
    let head = header("mi", &s, MiExtra { run: &args.run, a_dim, pairs })?;
    let schedule = s.schedule.to_string();
    let records = run_indexed(s.jobs, s.trials, |trial| {
        let seed = derive_seed(s.seed, &[TRIAL_STREAM, trial as u64]);
        let start = Instant::now();
        let (out, _) = estimate_mi(&joint, a_dim, pairs, &kc, seed)?;
        if !out.estimate.kl_hat.is_finite() {
            return Err(rfkl::Error::NonFinite(format!("estimate {}", out.estimate.kl_hat)).into());
        }
        Ok(RunRecord::new(trial, s.dim, Some(s.m), Some(s.t), seed, out.estimate.kl_hat, truth, elapsed_ms(start), schedule.as_str()))
    })?;
    let mut table = Table::new(head.clone(), &MI_COLUMNS)?;
    for r in &records {
        table.row(r.cells())?;
    }
    if let Some(out) = &s.out {
        write_json(&sibling(out, "", "json"), &head, &serde_json::json!({ "mi_true": truth, "records": records }))?;
    }
    emit(table, s.out.as_deref())
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConstantsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dimensions (default 1..10).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub dims: Option<Vec<usize>>,
    /// Smoothness values (default 0.1,1,10).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub rhos: Option<Vec<f64>>,
    /// Feature radius for every row; by default it follows the half-width and radius convention.
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Serialize)]
struct ConstantsExtra<'a> {
    dims: &'a [usize],
    rhos: &'a [f64],
    radius: Option<f64>,
}

pub fn constants(args: &ConstantsArgs) -> CliResult<()> {
    let (cfg, s) = load(&args.common)?;
    let f = &cfg.file.constants;
    let dims = args.dims.clone().or_else(|| f.dims.clone()).unwrap_or_else(|| (1..=10).collect());
    let rhos = args.rhos.clone().or_else(|| f.rhos.clone()).unwrap_or_else(|| vec![0.1, 1.0, 10.0]);
    let radius = args.radius.or(f.radius);
    if dims.is_empty() || dims.contains(&0) {
        return Err(cfg.bad_value("dims", args.dims.is_some(), "dimensions must be at least 1"));
    }
    if rhos.is_empty() || rhos.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(cfg.bad_value("rhos", args.rhos.is_some(), "smoothness values must be positive"));
    }
    if let Some(r) = radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(cfg.bad_value("radius", args.radius.is_some(), "must be positive"));
        }
    }
    let a = s.p.half_width().max(s.q.half_width());
    let mut rows: Vec<GridRow> = Vec::with_capacity(dims.len() * rhos.len());
    for &n in &dims {
        let r = radius.unwrap_or(match s.radius_convention {
            RadiusConvention::Box => a,
            RadiusConvention::Circumradius => a * (n as f64).sqrt(),
        });
        rows.extend(constants_grid(&[n], &rhos, r)?);
    }
    let head = header("constants", &s, ConstantsExtra { dims: &dims, rhos: &rhos, radius })?;
    let mut table = Table::new(head, &["n", "rho", "kappa", "beta1", "beta2", "status"])?;
    for r in &rows {
        table.row(vec![r.n.into(), r.rho.into(), r.kappa.into(), r.beta1.into(), r.beta2.into(), r.status.into()])?;
    }
    emit(table, s.out.as_deref())
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Network widths (default 64,128,...,4096).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub ms: Option<Vec<usize>>,
    /// Radius of the ball the error is measured on.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Target function.
    #[arg(long, value_enum)]
    pub function: Option<TestFunction>,
}

#[derive(Serialize)]
struct VerifyExtra<'a> {
    ms: &'a [usize],
    approx_trials: usize,
    radius: f64,
    function: TestFunction,
}

#[derive(Debug, Clone, Serialize)]
pub struct WidthSummary {
    pub m: usize,
    pub median_linf: f64,
    /// Fraction of trials whose observed error is within the bound.
    pub coverage: f64,
    /// Fraction whose certified upper bound is within the bound.
    pub certified_coverage: f64,
    pub all_converged: bool,
}

/// Fixed two-centre mixture with a non-radial transform.
pub fn mixture() -> GaussianMixture {
    GaussianMixture::new(vec![(1.0, vec![0.25, 0.0]), (-0.6, vec![-0.1, 0.3])]).expect("valid mixture")
}

pub fn verify_approx(args: &VerifyArgs) -> CliResult<()> {
    let (cfg, s) = load(&args.common)?;
    let f = &cfg.file.verify_approx;
    let ms = args.ms.clone().or_else(|| f.ms.clone()).unwrap_or_else(|| (6..=12).map(|k| 1usize << k).collect());
    if ms.is_empty() || ms.contains(&0) {
        return Err(cfg.bad_value("ms", args.ms.is_some(), "widths must be at least 1"));
    }
    let trials = args.common.trials.or(f.trials).unwrap_or(30);
    if trials == 0 {
        return Err(cfg.bad_value("trials", args.common.trials.is_some(), "must be at least 1"));
    }
    let radius = args.radius.or(f.radius).unwrap_or(1.0);
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(cfg.bad_value("radius", args.radius.is_some(), "must be positive"));
    }
    let function = args.function.or(f.function).unwrap_or(TestFunction::Gaussian);
    let target: Box<dyn SpectralFunction> = match function {
        TestFunction::Gaussian => Box::new(GaussianBump::new(s.dim, 1.0)?),
        TestFunction::Mixture if s.dim == 2 => Box::new(mixture()),
        TestFunction::Mixture => return Err(config_err(format!("the mixture target is two-dimensional, got --dim {}", s.dim))),
    };
    let rep = build_representation(target.as_ref(), radius)?;
    let jobs: Vec<(usize, usize)> = ms.iter().flat_map(|&m| (0..trials).map(move |t| (m, t))).collect();
    let results: Vec<ApproxTrial> = run_indexed(s.jobs, jobs.len(), |i| {
        let (m, t) = jobs[i];
        Ok(approx_trial(&rep, m, t, derive_seed(s.seed, &[VERIFY_STREAM, m as u64, t as u64]), s.delta)?)
    })?;
    if results.iter().any(|r| !r.converged) {
        warn!("some sup-norm measurements hit the evaluation budget; see linf_upper in the JSON report");
    }
    let head = header("verify-approx", &s, VerifyExtra { ms: &ms, approx_trials: trials, radius, function })?;
    let mut table = Table::new(head.clone(), &["m", "trial", "linf_error", "prop1_bound"])?;
    for r in &results {
        table.row(vec![r.m.into(), r.trial.into(), r.linf_error.into(), r.prop1_bound.into()])?;
    }
    let summaries: Vec<WidthSummary> = results
        .chunks(trials)
        .map(|c| {
            let errs: Vec<f64> = c.iter().map(|r| r.linf_error).collect();
            let frac = |ok: &dyn Fn(&ApproxTrial) -> bool| c.iter().filter(|r| ok(r)).count() as f64 / c.len() as f64;
            Ok(WidthSummary {
                m: c[0].m,
                median_linf: median(&errs)?,
                coverage: frac(&|r| r.linf_error <= r.prop1_bound),
                certified_coverage: frac(&|r| r.linf_upper <= r.prop1_bound),
                all_converged: c.iter().all(|r| r.converged),
            })
        })
        .collect::<CliResult<_>>()?;
    let slope = if summaries.len() >= 2 {
        let xs: Vec<f64> = summaries.iter().map(|w| w.m as f64).collect();
        let ys: Vec<f64> = summaries.iter().map(|w| w.median_linf).collect();
        log_log_slope(&xs, &ys).ok()
    } else {
        None
    };
    if let Some(out) = &s.out {
        let report = serde_json::json!({ "f_norm": rep.f_norm, "slope": slope, "widths": summaries, "trials": results });
        write_json(&sibling(out, "", "json"), &head, &report)?;
    }
    emit(table, s.out.as_deref())
}

#[derive(Debug, Clone, Default, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Neighbour index.
    #[arg(long)]
    pub k: Option<usize>,
    /// Samples drawn from each distribution per trial.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Serialize)]
struct BaselineExtra {
    k: usize,
    samples: usize,
}

pub fn baseline(args: &BaselineArgs) -> CliResult<()> {
    let (cfg, s) = load(&args.common)?;
    let k = args.k.or(cfg.file.baseline.k).unwrap_or(1);
    let samples = args.samples.or(cfg.file.baseline.samples).unwrap_or(10_000);
    let pair = s.pair()?;
    let truth = kl_truth(&pair, s.seed)?;
    let records = run_indexed(s.jobs, s.trials, |trial| {
        let seed = derive_seed(s.seed, &[TRIAL_STREAM, trial as u64]);
        let start = Instant::now();
        let xs = pair.p.sample(&mut stream(seed, &[purpose::P_TRAIN]), samples);
        let ys = pair.q.sample(&mut stream(seed, &[purpose::Q_TRAIN]), samples);
        let est = knn_kl(&xs, &ys, k)?;
        Ok(RunRecord::new(trial, s.dim, None, None, seed, est.kl_hat, truth.value, elapsed_ms(start), "knn"))
    })?;
    let head = header("baseline", &s, BaselineExtra { k, samples })?;
    let mut table = Table::new(head.clone(), &RUN_COLUMNS)?;
    for r in &records {
        table.row(r.cells())?;
    }
    if let Some(out) = &s.out {
        write_json(&sibling(out, "", "json"), &head, &serde_json::json!({ "truth": truth, "records": records }))?;
    }
    emit(table, s.out.as_deref())
}
