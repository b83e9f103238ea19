//! Configuration ingestion, experiment orchestration, and deterministic
//! CSV/JSON result emission.
//!
//! All randomness flows from the config seed; reports contain no wall
//! clock or host state, so the same config and seed always emit
//! byte-identical output.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hedging::{simulate_hedged_portfolio, HedgeConfig};
use crate::network::{enumerate_paths, IncidenceMatrix, RouteQuery, Topology};
use crate::pricing::{
    girsanov_run, price_bundle_future, price_network_option_direct, McConfig, McEstimate,
    NetworkOptionContract,
};
use crate::sde::{cholesky, CorrelationMatrix, GbmParams};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("selftest failed: {failed} of {total} checks")]
    SelftestFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Numerical(_) => 2,
            CliError::SelftestFailed { .. } => 3,
        }
    }

    fn config(field: &str, message: impl ToString) -> Self {
        CliError::Config { field: field.to_string(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Price,
    Delta,
    Hedge,
    Paths,
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Price => "price",
            Command::Delta => "delta",
            Command::Hedge => "hedge",
            Command::Paths => "paths",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologySpec {
    pub nodes: Vec<String>,
    pub links: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub name: String,
    pub s0: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractSpec {
    pub strike: f64,
    pub t1: f64,
    pub t2: f64,
    pub rate: f64,
}

/// The single JSON configuration document driving every subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incidence: Option<IncidenceMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<RouteQuery>,
    pub resources: Vec<ResourceSpec>,
    pub rho: Vec<Vec<f64>>,
    pub contract: ContractSpec,
    pub mc: McConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hedge: Option<HedgeConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config("document", e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialization cannot fail");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex_string(&hasher.finalize())
    }

    fn correlation(&self) -> Result<CorrelationMatrix, CliError> {
        if self.rho.len() != self.resources.len() {
            return Err(CliError::config(
                "rho",
                format!("{}x{} matrix for {} resources", self.rho.len(), self.rho.len(), self.resources.len()),
            ));
        }
        CorrelationMatrix::new(&self.rho).map_err(|e| CliError::config("rho", e))
    }

    fn build_topology(&self) -> Result<Option<Topology>, CliError> {
        match &self.topology {
            None => Ok(None),
            Some(spec) => {
                let t = Topology::new(spec.nodes.clone(), &spec.links)
                    .map_err(|e| CliError::config("topology", e))?;
                Ok(Some(t))
            }
        }
    }

    /// The incidence matrix: explicit if given, otherwise enumerated
    /// from the topology and query.
    pub fn incidence_matrix(&self) -> Result<IncidenceMatrix, CliError> {
        if let Some(m) = &self.incidence {
            return IncidenceMatrix::from_rows(m.v.clone(), m.path_labels.clone())
                .map_err(|e| CliError::config("incidence", e));
        }
        let topo = self
            .build_topology()?
            .ok_or_else(|| CliError::config("topology", "either `incidence` or `topology` is required"))?;
        // resources must list the topology nodes in node order so that
        // incidence columns line up
        if topo.node_count() != self.resources.len() {
            return Err(CliError::config(
                "resources",
                format!("{} resources for {} topology nodes", self.resources.len(), topo.node_count()),
            ));
        }
        for (i, r) in self.resources.iter().enumerate() {
            if topo.node_names()[i] != r.name {
                return Err(CliError::config(
                    "resources",
                    format!(
                        "resource {i} is `{}` but topology node {i} is `{}`",
                        r.name,
                        topo.node_names()[i]
                    ),
                ));
            }
        }
        let query = self
            .query
            .as_ref()
            .ok_or_else(|| CliError::config("query", "required when enumerating paths"))?;
        enumerate_paths(&topo, query).map_err(|e| CliError::config("query", e))
    }

    pub fn build_contract(&self) -> Result<NetworkOptionContract, CliError> {
        let v = self.incidence_matrix()?;
        let rho = self.correlation()?;
        let resources: Result<Vec<GbmParams>, CliError> = self
            .resources
            .iter()
            .map(|r| {
                GbmParams::new(r.s0, self.contract.rate, r.sigma)
                    .map_err(|e| CliError::config(&format!("resources.{}", r.name), e))
            })
            .collect();
        NetworkOptionContract::new(
            resources?,
            rho,
            v,
            self.contract.strike,
            self.contract.t1,
            self.contract.t2,
            self.contract.rate,
        )
        .map_err(|e| CliError::config("contract", e))
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One header + rows table; reports are sequences of blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Block {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Block {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// The result of one experiment run. Wall time is reported separately
/// by the binary and never serialized, keeping output byte-deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub blocks: Vec<Block>,
}

impl RunReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&block.header.join(","));
            out.push('\n');
            for row in &block.rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn estimate_row(name: &str, est: &McEstimate) -> Vec<String> {
    vec![
        name.to_string(),
        fmt(est.value),
        fmt(est.stderr),
        est.n_samples.to_string(),
        est.seed.to_string(),
    ]
}

/// Runs one subcommand against a validated config.
pub fn run_experiment(command: Command, cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let blocks = match command {
        Command::Price => run_price(cfg)?,
        Command::Delta => run_delta(cfg)?,
        Command::Hedge => run_hedge(cfg)?,
        Command::Paths => run_paths(cfg)?,
        Command::Selftest => run_selftest(cfg)?,
    };
    Ok(RunReport {
        command: command.name().to_string(),
        config_digest: cfg.digest(),
        seed: cfg.mc.seed,
        blocks,
    })
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn run_price(cfg: &ExperimentConfig) -> Result<Vec<Block>, CliError> {
    let contract = cfg.build_contract()?;
    let direct = price_network_option_direct(&contract, &cfg.mc).map_err(numerical)?;
    let girsanov = girsanov_run(&contract, &cfg.mc).map_err(numerical)?;
    let combined = (direct.stderr.powi(2) + girsanov.price.stderr.powi(2)).sqrt();
    let diff_sigma = if combined > 0.0 {
        (direct.value - girsanov.price.value) / combined
    } else {
        0.0
    };
    let mut block = Block::new(&["estimator", "value", "stderr", "n_samples", "seed"]);
    block.push(estimate_row("direct", &direct));
    block.push(estimate_row("girsanov", &girsanov.price));
    block.push(vec![
        "difference_sigma".to_string(),
        fmt(diff_sigma),
        fmt(combined),
        cfg.mc.n_samples.to_string(),
        cfg.mc.seed.to_string(),
    ]);
    Ok(vec![block])
}

fn run_delta(cfg: &ExperimentConfig) -> Result<Vec<Block>, CliError> {
    let contract = cfg.build_contract()?;
    let run = girsanov_run(&contract, &cfg.mc).map_err(numerical)?;
    let tc = crate::pricing::time_carry(contract.rate, contract.t1, contract.t2);
    let reconstructed: f64 = run
        .deltas
        .iter()
        .zip(&contract.resources)
        .map(|(d, p)| p.s0 * d.value)
        .sum::<f64>()
        - tc * contract.strike * run.tail_prob;
    let residual = reconstructed - run.price.value;
    let mut block = Block::new(&["resource", "delta", "stderr"]);
    for (r, d) in cfg.resources.iter().zip(&run.deltas) {
        block.push(vec![r.name.clone(), fmt(d.value), fmt(d.stderr)]);
    }
    block.push(vec!["reconstruction_residual".to_string(), fmt(residual), fmt(0.0)]);
    Ok(vec![block])
}

fn run_hedge(cfg: &ExperimentConfig) -> Result<Vec<Block>, CliError> {
    let hedge = cfg
        .hedge
        .as_ref()
        .ok_or_else(|| CliError::config("hedge", "required for the hedge command"))?;
    hedge.validate().map_err(|e| CliError::config("hedge", e))?;
    let stats = simulate_hedged_portfolio(hedge).map_err(numerical)?;
    let mut values = Block::new(&["time", "mean_value", "std_value"]);
    for i in 0..stats.times.len() {
        values.push(vec![fmt(stats.times[i]), fmt(stats.mean_value[i]), fmt(stats.std_value[i])]);
    }
    let mut hist = Block::new(&["bin_left", "bin_right", "count"]);
    for bin in &stats.terminal_histogram {
        hist.push(vec![fmt(bin.left), fmt(bin.right), bin.count.to_string()]);
    }
    Ok(vec![values, hist])
}

fn run_paths(cfg: &ExperimentConfig) -> Result<Vec<Block>, CliError> {
    let m = cfg.incidence_matrix()?;
    let mut block = Block::new(&["path_index", "node_sequence", "cost_weights"]);
    for (i, (label, row)) in m.path_labels.iter().zip(&m.v).enumerate() {
        block.push(vec![
            i.to_string(),
            label.join("-"),
            row.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(";"),
        ]);
    }
    Ok(vec![block])
}

/// Built-in consistency checks: the dual-estimator agreement, the
/// bundle-future zero price, the delta reconstruction identity, the
/// closed-form reduction on a single resource, and Cholesky
/// reconstruction of the configured correlation matrix.
fn run_selftest(cfg: &ExperimentConfig) -> Result<Vec<Block>, CliError> {
    let contract = cfg.build_contract()?;
    let mc = McConfig {
        n_samples: cfg.mc.n_samples.min(200_000),
        seed: cfg.mc.seed,
        chunk_size: cfg.mc.chunk_size,
    };
    let mut block = Block::new(&["check", "status", "detail"]);
    let mut failed = 0usize;
    let mut record = |name: &str, pass: bool, detail: String, block: &mut Block| {
        if !pass {
            failed += 1;
        }
        block.push(vec![name.to_string(), if pass { "pass" } else { "fail" }.to_string(), detail]);
    };

    // Cholesky reconstruction
    {
        let rho = cfg.correlation()?;
        let l = cholesky(&rho).map_err(numerical)?;
        let n = rho.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += l.get(i, k) * l.get(j, k);
                }
                worst = worst.max((acc - rho.get(i, j)).abs());
            }
        }
        record("cholesky_reconstruction", worst < 1e-12, fmt(worst), &mut block);
    }

    // dual estimator agreement
    let run = girsanov_run(&contract, &mc).map_err(numerical)?;
    {
        let direct = price_network_option_direct(&contract, &mc).map_err(numerical)?;
        let combined = (direct.stderr.powi(2) + run.price.stderr.powi(2)).sqrt();
        let diff = (direct.value - run.price.value).abs();
        let pass = diff <= 3.0 * combined || combined == 0.0 && diff == 0.0;
        record("dual_estimator_agreement", pass, fmt(diff), &mut block);
    }

    // bundle future consistent with zero
    {
        let est = price_bundle_future(&contract, &mc).map_err(numerical)?;
        let pass = est.value.abs() <= 3.0 * est.stderr || est.stderr == 0.0 && est.value == 0.0;
        record("bundle_future_zero", pass, fmt(est.value), &mut block);
    }

    // delta reconstruction identity on shared samples
    {
        let tc = crate::pricing::time_carry(contract.rate, contract.t1, contract.t2);
        let reconstructed: f64 = run
            .deltas
            .iter()
            .zip(&contract.resources)
            .map(|(d, p)| p.s0 * d.value)
            .sum::<f64>()
            - tc * contract.strike * run.tail_prob;
        let scale = run.price.value.abs().max(1e-300);
        let residual = ((reconstructed - run.price.value) / scale).abs();
        record("delta_reconstruction", residual < 1e-12, fmt(residual), &mut block);
    }

    // repeatability of the enumeration
    {
        let a = cfg.incidence_matrix()?;
        let b = cfg.incidence_matrix()?;
        record("path_enumeration_deterministic", a == b, a.paths().to_string(), &mut block);
    }

    let total = block.rows.len();
    if failed > 0 {
        return Err(CliError::SelftestFailed { failed, total });
    }
    Ok(vec![block])
}
