//! Python bindings for the pricing and hedging engine.
//!
//! Build with `cargo build -p netopt-py`, then rename the produced
//! cdylib to `netopt_py.so` (see python/smoke_test.py).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use netopt::hedging;
use netopt::network;
use netopt::pricing;
use netopt::sde::{CorrelationMatrix, GbmParams, MeanRevParams};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A Monte Carlo estimate: value, standard error, and provenance.
#[pyclass(get_all, frozen, skip_from_py_object)]
#[derive(Clone)]
struct Estimate {
    value: f64,
    stderr: f64,
    n_samples: u64,
    seed: u64,
}

#[pymethods]
impl Estimate {
    fn __repr__(&self) -> String {
        format!(
            "Estimate(value={}, stderr={}, n_samples={}, seed={})",
            self.value, self.stderr, self.n_samples, self.seed
        )
    }
}

impl From<pricing::McEstimate> for Estimate {
    fn from(e: pricing::McEstimate) -> Self {
        Self { value: e.value, stderr: e.stderr, n_samples: e.n_samples, seed: e.seed }
    }
}

/// A call option on the cheapest of several resource bundles.
#[pyclass]
struct NetworkOption {
    contract: pricing::NetworkOptionContract,
}

#[pymethods]
impl NetworkOption {
    /// s0/sigma: per-resource initial prices and volatilities.
    /// rho: N x N correlation matrix. v: M x N share amounts per
    /// candidate path. strike is paid at t1 for usage over [t1, t2].
    #[new]
    fn new(
        s0: Vec<f64>,
        sigma: Vec<f64>,
        rho: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        strike: f64,
        t1: f64,
        t2: f64,
        rate: f64,
    ) -> PyResult<Self> {
        if s0.len() != sigma.len() {
            return Err(value_err("s0 and sigma must have the same length"));
        }
        let resources: Result<Vec<GbmParams>, _> = s0
            .iter()
            .zip(&sigma)
            .map(|(&s, &sig)| GbmParams::new(s, rate, sig))
            .collect();
        let labels = (0..v.len()).map(|i| vec![format!("path{i}")]).collect();
        let contract = pricing::NetworkOptionContract::new(
            resources.map_err(value_err)?,
            CorrelationMatrix::new(&rho).map_err(value_err)?,
            network::IncidenceMatrix::from_rows(v, labels).map_err(value_err)?,
            strike,
            t1,
            t2,
            rate,
        )
        .map_err(value_err)?;
        Ok(Self { contract })
    }

    #[pyo3(signature = (n_samples=1_000_000, seed=0))]
    fn price_direct(&self, n_samples: u64, seed: u64) -> PyResult<Estimate> {
        let mc = pricing::McConfig::new(n_samples, seed);
        pricing::price_network_option_direct(&self.contract, &mc)
            .map(Into::into)
            .map_err(value_err)
    }

    #[pyo3(signature = (n_samples=1_000_000, seed=0))]
    fn price_girsanov(&self, n_samples: u64, seed: u64) -> PyResult<Estimate> {
        let mc = pricing::McConfig::new(n_samples, seed);
        pricing::price_network_option_girsanov(&self.contract, &mc)
            .map(Into::into)
            .map_err(value_err)
    }

    /// Delta with respect to resource n's initial price.
    #[pyo3(signature = (n, n_samples=1_000_000, seed=0))]
    fn delta(&self, n: usize, n_samples: u64, seed: u64) -> PyResult<Estimate> {
        let mc = pricing::McConfig::new(n_samples, seed);
        pricing::network_option_delta(&self.contract, n, &mc)
            .map(Into::into)
            .map_err(value_err)
    }

    /// Price of the contingent bundle future (zero in theory).
    #[pyo3(signature = (n_samples=1_000_000, seed=0))]
    fn bundle_future(&self, n_samples: u64, seed: u64) -> PyResult<Estimate> {
        let mc = pricing::McConfig::new(n_samples, seed);
        pricing::price_bundle_future(&self.contract, &mc)
            .map(Into::into)
            .map_err(value_err)
    }
}

#[pyfunction]
fn bs_call(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    pricing::bs_call(s0, k, r, sigma, t)
}

#[pyfunction]
fn bs_call_delta(s0: f64, k: f64, r: f64, sigma: f64, tau: f64) -> f64 {
    hedging::bs_call_delta(s0, k, r, sigma, tau)
}

#[pyfunction]
fn asian_zero_strike(s0: f64, r: f64, t: f64) -> f64 {
    pricing::asian_zero_strike(s0, r, t)
}

#[pyfunction]
fn time_carry(r: f64, t1: f64, t2: f64) -> f64 {
    pricing::time_carry(r, t1, t2)
}

#[pyfunction]
fn adjusted_sigma(sigma: f64, alpha: f64, dt: f64) -> f64 {
    hedging::adjusted_sigma(sigma, alpha, dt)
}

/// All simple paths from src to dst with at most max_hops links.
/// Returns (share_rows, node_sequences).
#[pyfunction]
#[pyo3(signature = (nodes, links, src, dst, max_hops=8))]
fn enumerate_paths(
    nodes: Vec<String>,
    links: Vec<(String, String)>,
    src: String,
    dst: String,
    max_hops: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<String>>)> {
    let topo = network::Topology::new(nodes, &links).map_err(value_err)?;
    let q = network::RouteQuery { src, dst, max_hops };
    let m = network::enumerate_paths(&topo, &q).map_err(value_err)?;
    Ok((m.v, m.path_labels))
}

/// Hedged-portfolio experiment on a single-asset call. Set alpha and mu
/// for mean-reverting dynamics; otherwise the asset follows GBM with
/// drift mu. Returns a dict of times, mean_value, std_value, and
/// excluded_paths.
#[pyfunction]
#[pyo3(signature = (
    s0, strike, sigma, maturity, rate, rebalance_dt, sim_dt, n_paths,
    seed=0, mu=0.0, alpha=None, use_adjusted_sigma=false
))]
#[allow(clippy::too_many_arguments)]
fn simulate_hedge(
    py: Python<'_>,
    s0: f64,
    strike: f64,
    sigma: f64,
    maturity: f64,
    rate: f64,
    rebalance_dt: f64,
    sim_dt: f64,
    n_paths: u64,
    seed: u64,
    mu: f64,
    alpha: Option<f64>,
    use_adjusted_sigma: bool,
) -> PyResult<Py<PyAny>> {
    let process = match alpha {
        Some(a) => {
            hedging::HedgeProcess::MeanRev(MeanRevParams::new(s0, a, mu, sigma).map_err(value_err)?)
        }
        None => hedging::HedgeProcess::Gbm(GbmParams::new(s0, mu, sigma).map_err(value_err)?),
    };
    let cfg = hedging::HedgeConfig {
        process,
        strike,
        maturity,
        rate,
        rebalance_dt,
        sim_dt,
        use_adjusted_sigma,
        n_paths,
        seed,
    };
    let stats = hedging::simulate_hedged_portfolio(&cfg).map_err(value_err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("times", stats.times)?;
    out.set_item("mean_value", stats.mean_value)?;
    out.set_item("std_value", stats.std_value)?;
    out.set_item("excluded_paths", stats.excluded_paths)?;
    Ok(out.into_any().unbind())
}

#[pymodule]
fn netopt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Estimate>()?;
    m.add_class::<NetworkOption>()?;
    m.add_function(wrap_pyfunction!(bs_call, m)?)?;
    m.add_function(wrap_pyfunction!(bs_call_delta, m)?)?;
    m.add_function(wrap_pyfunction!(asian_zero_strike, m)?)?;
    m.add_function(wrap_pyfunction!(time_carry, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_paths, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_hedge, m)?)?;
    Ok(())
}
