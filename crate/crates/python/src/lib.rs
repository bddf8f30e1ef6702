//! Python bindings: feature maps, constants and bounds, KL and mutual
//! information estimation, the k-NN baseline and approximation trials.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rfkl::approx::{approx_trial as core_approx_trial, build_representation, GaussianBump};
use rfkl::constants::{self, TheoremBound};
use rfkl::distributions::DistributionSpec;
use rfkl::estimator::{estimate_kl as core_estimate_kl, estimate_mi as core_estimate_mi};
use rfkl::{DistributionPair, KlConfig, Samples};

fn to_py(e: rfkl::Error) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

fn spec(kind: &str, a: f64, corr: f64) -> PyResult<DistributionSpec> {
    match kind {
        "trunc_gauss" => Ok(DistributionSpec::TruncGauss { a }),
        "uniform" => Ok(DistributionSpec::Uniform { a }),
        "corr_gauss" => Ok(DistributionSpec::CorrGauss { a, corr }),
        other => Err(PyValueError::new_err(format!("unknown distribution kind {other:?}"))),
    }
}

fn pair(dim: usize, p: &str, q: &str, a: f64) -> PyResult<DistributionPair> {
    let p = spec(p, a, 0.0)?.build(dim).map_err(to_py)?;
    let q = spec(q, a, 0.0)?.build(dim).map_err(to_py)?;
    DistributionPair::new(p, q).map_err(to_py)
}

fn samples(rows: &[Vec<f64>]) -> PyResult<Samples> {
    Samples::from_rows(rows).map_err(to_py)
}

/// Frozen random ReLU features `phi_i(x) = relu(w_i . x + b_i)`.
#[pyclass(name = "FeatureMap", frozen)]
struct PyFeatureMap(rfkl::FeatureMap);

#[pymethods]
impl PyFeatureMap {
    #[new]
    #[pyo3(signature = (dim, m, radius, seed=0))]
    fn new(dim: usize, m: usize, radius: f64, seed: u64) -> PyResult<Self> {
        Ok(Self(rfkl::FeatureMap::sample(dim, m, radius, seed).map_err(to_py)?))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.neurons()
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.0.radius()
    }

    fn weights(&self) -> Vec<Vec<f64>> {
        self.0.weights().map(<[f64]>::to_vec).collect()
    }

    fn biases(&self) -> Vec<f64> {
        self.0.biases().to_vec()
    }

    fn phi(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.phi(&x).map_err(to_py)
    }

    fn psi(&self, x: Vec<f64>, theta: Vec<f64>) -> PyResult<f64> {
        self.0.psi(&x, &theta).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("FeatureMap(dim={}, m={}, radius={})", self.0.dim(), self.0.neurons(), self.0.radius())
    }
}

#[pyfunction]
fn kappa(n: usize, radius: f64, rho: f64) -> PyResult<f64> {
    constants::kappa(n, radius, rho).map_err(to_py)
}

#[pyfunction]
fn c_theta(n: usize, radius: f64, rho: f64) -> PyResult<f64> {
    constants::c_theta(n, radius, rho).map_err(to_py)
}

/// The full error bound as a dict; `status` is `"finite"` or `"vacuous"`.
#[pyfunction]
#[pyo3(signature = (n, m, t, radius, rho, delta=0.1))]
fn theorem_bound<'py>(py: Python<'py>, n: usize, m: usize, t: u64, radius: f64, rho: f64, delta: f64) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    match constants::theorem_bound(n, m, t, radius, rho, delta).map_err(to_py)? {
        TheoremBound::Finite(b) => {
            d.set_item("status", "finite")?;
            for (k, v) in [
                ("c_theta", b.c_theta),
                ("kappa", b.kappa),
                ("b1", b.b1),
                ("b2", b.b2),
                ("b3", b.b3),
                ("b4", b.b4),
                ("beta1", b.beta1),
                ("beta2", b.beta2),
                ("alpha", b.alpha),
                ("r", b.r),
                ("approx_term", b.approx_term),
                ("opt_term", b.opt_term),
                ("total", b.total),
            ] {
                d.set_item(k, v)?;
            }
        }
        TheoremBound::Vacuous { c_theta, kappa, exponent } => {
            d.set_item("status", "vacuous")?;
            d.set_item("c_theta", c_theta)?;
            d.set_item("kappa", kappa)?;
            d.set_item("exponent", exponent)?;
        }
    }
    Ok(d)
}

/// Rows `(n, rho, kappa, beta1, beta2, status)`; betas are `None` when vacuous.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn constants_grid(dims: Vec<usize>, rhos: Vec<f64>, radius: f64) -> PyResult<Vec<(usize, f64, f64, Option<f64>, Option<f64>, &'static str)>> {
    let rows = constants::constants_grid(&dims, &rhos, radius).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.n, r.rho, r.kappa, r.beta1, r.beta2, r.status)).collect())
}

/// Exact `KL(P || Q)` for box-supported laws of half-width `a`.
#[pyfunction]
#[pyo3(signature = (dim, a=2.0, p="trunc_gauss", q="uniform"))]
fn exact_kl(dim: usize, a: f64, p: &str, q: &str) -> PyResult<f64> {
    Ok(pair(dim, p, q, a)?.exact_kl(1_000_000, 0).map_err(to_py)?.value)
}

/// One KL estimate; returns the estimate, its two terms and the step sizes.
#[pyfunction]
#[pyo3(signature = (dim=2, m=50, t=500_000, seed=0, a=2.0, p="trunc_gauss", q="uniform", schedule="experiment", rho=1.0, radius_convention="box", eval_samples=5000, theta0_scale=None))]
#[allow(clippy::too_many_arguments)]
fn estimate_kl<'py>(
    py: Python<'py>,
    dim: usize,
    m: usize,
    t: u64,
    seed: u64,
    a: f64,
    p: &str,
    q: &str,
    schedule: &str,
    rho: f64,
    radius_convention: &str,
    eval_samples: usize,
    theta0_scale: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let pr = pair(dim, p, q, a)?;
    let mut cfg = KlConfig::new(m, t, schedule.parse().map_err(to_py)?, rho, radius_convention.parse().map_err(to_py)?, eval_samples);
    cfg.theta0_scale = theta0_scale;
    let out = py.detach(|| core_estimate_kl(&pr, &cfg, seed)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("kl_hat", out.estimate.kl_hat)?;
    d.set_item("mean_term", out.estimate.mean_term)?;
    d.set_item("log_mgf_term", out.estimate.log_mgf_term)?;
    d.set_item("alpha", out.setup.alpha)?;
    d.set_item("r", out.setup.r)?;
    d.set_item("bound", out.setup.bound)?;
    d.set_item("rejected", out.run.rejected)?;
    d.set_item("theta_bar", out.run.theta_bar)?;
    Ok(d)
}

/// Mutual information between the coordinates of a truncated bivariate
/// Gaussian; returns `(estimate, exact value)`.
#[pyfunction]
#[pyo3(signature = (corr, a=2.0, m=50, t=200_000, pairs=20_000, eval_pairs=5000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn estimate_mi(py: Python<'_>, corr: f64, a: f64, m: usize, t: u64, pairs: usize, eval_pairs: usize, seed: u64) -> PyResult<(f64, f64)> {
    let joint = spec("corr_gauss", a, corr)?.build(2).map_err(to_py)?;
    let truth = match joint {
        rfkl::Distribution::CorrelatedGaussian(c) => c.mutual_information().map_err(to_py)?,
        _ => unreachable!("built from a corr_gauss spec"),
    };
    let cfg = KlConfig::new(m, t, rfkl::ScheduleKind::Experiment, 1.0, rfkl::RadiusConvention::Box, eval_pairs);
    let (out, _) = py.detach(|| core_estimate_mi(&joint, 1, pairs, &cfg, seed)).map_err(to_py)?;
    Ok((out.estimate.kl_hat, truth))
}

/// k-nearest-neighbour estimate from two lists of points.
#[pyfunction]
#[pyo3(signature = (p, q, k=1))]
fn knn_kl(py: Python<'_>, p: Vec<Vec<f64>>, q: Vec<Vec<f64>>, k: usize) -> PyResult<f64> {
    let (xs, ys) = (samples(&p)?, samples(&q)?);
    Ok(py.detach(|| rfkl::baseline::knn_kl(&xs, &ys, k)).map_err(to_py)?.kl_hat)
}

/// Sup-norm error of one sampled network for `exp(-pi |x|^2)` on the ball.
#[pyfunction]
#[pyo3(signature = (dim, m, seed=0, radius=1.0, delta=0.1))]
fn approx_trial<'py>(py: Python<'py>, dim: usize, m: usize, seed: u64, radius: f64, delta: f64) -> PyResult<Bound<'py, PyDict>> {
    let g = GaussianBump::new(dim, 1.0).map_err(to_py)?;
    let trial = py
        .detach(|| build_representation(&g, radius).and_then(|rep| core_approx_trial(&rep, m, 0, seed, delta)))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("linf_error", trial.linf_error)?;
    d.set_item("linf_upper", trial.linf_upper)?;
    d.set_item("prop1_bound", trial.prop1_bound)?;
    d.set_item("converged", trial.converged)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "rfkl")]
fn rfkl_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyFeatureMap>()?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(c_theta, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_bound, m)?)?;
    m.add_function(wrap_pyfunction!(constants_grid, m)?)?;
    m.add_function(wrap_pyfunction!(exact_kl, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_kl, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mi, m)?)?;
    m.add_function(wrap_pyfunction!(knn_kl, m)?)?;
    m.add_function(wrap_pyfunction!(approx_trial, m)?)?;
    Ok(())
}
