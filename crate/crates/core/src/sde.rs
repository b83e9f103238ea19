//! Stochastic process models, correlated normal generation via Cholesky
//! factorization, exact risk-neutral terminal sampling, and Euler-Maruyama
//! path simulation.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::norm_ppf;

/// State floor for Euler steps of multiplicative-noise processes.
pub const PRICE_FLOOR: f64 = 1e-12;

/// Pivots below this are treated as a degenerate correlation input.
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SdeError {
    #[error("correlation matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),
    #[error("invalid process parameters: {0}")]
    InvalidParams(String),
}

/// Geometric Brownian motion: dS = mu S dt + sigma S dW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl GbmParams {
    pub fn new(s0: f64, mu: f64, sigma: f64) -> Result<Self, SdeError> {
        if !(s0 > 0.0) {
            return Err(SdeError::InvalidParams(format!("s0 must be > 0, got {s0}")));
        }
        if !(sigma >= 0.0) {
            return Err(SdeError::InvalidParams(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { s0, mu, sigma })
    }
}

/// Mean reversion with multiplicative noise: dS = alpha (mu - S) dt + sigma S dW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanRevParams {
    pub s0: f64,
    pub alpha: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl MeanRevParams {
    pub fn new(s0: f64, alpha: f64, mu: f64, sigma: f64) -> Result<Self, SdeError> {
        if !(s0 > 0.0) || !(mu > 0.0) {
            return Err(SdeError::InvalidParams(format!(
                "s0 and mu must be > 0, got s0={s0}, mu={mu}"
            )));
        }
        if !(alpha >= 0.0) || !(sigma >= 0.0) {
            return Err(SdeError::InvalidParams(format!(
                "alpha and sigma must be >= 0, got alpha={alpha}, sigma={sigma}"
            )));
        }
        Ok(Self { s0, alpha, mu, sigma })
    }
}

/// Ornstein-Uhlenbeck: dS = alpha (mu - S) dt + sigma dW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub s0: f64,
    pub alpha: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl OuParams {
    pub fn new(s0: f64, alpha: f64, mu: f64, sigma: f64) -> Result<Self, SdeError> {
        if !(alpha >= 0.0) || !(sigma >= 0.0) {
            return Err(SdeError::InvalidParams(format!(
                "alpha and sigma must be >= 0, got alpha={alpha}, sigma={sigma}"
            )));
        }
        Ok(Self { s0, alpha, mu, sigma })
    }
}

/// One of the supported price processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Process {
    Gbm(GbmParams),
    MeanRev(MeanRevParams),
    Ou(OuParams),
}

impl Process {
    pub fn s0(&self) -> f64 {
        match self {
            Process::Gbm(p) => p.s0,
            Process::MeanRev(p) => p.s0,
            Process::Ou(p) => p.s0,
        }
    }

    fn drift(&self, s: f64) -> f64 {
        match self {
            Process::Gbm(p) => p.mu * s,
            Process::MeanRev(p) => p.alpha * (p.mu - s),
            Process::Ou(p) => p.alpha * (p.mu - s),
        }
    }

    fn diffusion(&self, s: f64) -> f64 {
        match self {
            Process::Gbm(p) => p.sigma * s,
            Process::MeanRev(p) => p.sigma * s,
            Process::Ou(p) => p.sigma,
        }
    }

    /// Multiplicative-noise processes are clamped at a positive floor.
    fn has_multiplicative_noise(&self) -> bool {
        matches!(self, Process::Gbm(_) | Process::MeanRev(_))
    }
}

/// Symmetric unit-diagonal correlation matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, SdeError> {
        let n = rows.len();
        if n == 0 {
            return Err(SdeError::InvalidCorrelation("empty matrix".into()));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SdeError::InvalidCorrelation(format!(
                    "row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        for i in 0..n {
            if (entries[i * n + i] - 1.0).abs() > 1e-12 {
                return Err(SdeError::InvalidCorrelation(format!(
                    "diagonal entry ({i},{i}) = {} is not 1",
                    entries[i * n + i]
                )));
            }
            for j in 0..i {
                let a = entries[i * n + j];
                let b = entries[j * n + i];
                if (a - b).abs() > 1e-12 {
                    return Err(SdeError::InvalidCorrelation(format!(
                        "entries ({i},{j}) = {a} and ({j},{i}) = {b} are not symmetric"
                    )));
                }
                if a.abs() > 1.0 {
                    return Err(SdeError::InvalidCorrelation(format!(
                        "|rho_{i}{j}| = {} exceeds 1",
                        a.abs()
                    )));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    /// All off-diagonal entries set to `rho`.
    pub fn uniform(n: usize, rho: f64) -> Result<Self, SdeError> {
        let mut rows = vec![vec![rho; n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self::new(&rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

/// Lower-triangular factor L with L * L^T reconstructing the source matrix.
///
/// The correlated draw is x = L y for i.i.d. standard normal y. (Written
/// with an upper-triangular P and P^T P = D this is the same factor, only
/// the transpose bookkeeping differs.)
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    n: usize,
    entries: Vec<f64>, // row-major, upper part zero
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// x = L y.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n);
        let mut x = vec![0.0; self.n];
        self.apply_into(y, &mut x);
        x
    }

    pub fn apply_into(&self, y: &[f64], x: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.entries[i * self.n + j] * y[j];
            }
            x[i] = acc;
        }
    }
}

/// Standard Cholesky factorization of a correlation matrix.
pub fn cholesky(d: &CorrelationMatrix) -> Result<CholeskyFactor, SdeError> {
    let n = d.dim();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = d.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= PIVOT_TOL {
                    return Err(SdeError::NotPositiveDefinite { index: i, pivot: sum });
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(CholeskyFactor { n, entries: l })
}

/// A reproducible stream of standard normals.
///
/// Streams are keyed by (seed, stream_id); the same key always yields the
/// same sequence, and distinct stream_ids are statistically independent.
/// Normals come from the inverse-CDF transform of the generator's uniform
/// output, so draws depend only on their position within the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn source(&self) -> NormalSource {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        NormalSource { rng }
    }
}

/// Draws standard normals from a counter-based generator substream.
pub struct NormalSource {
    rng: ChaCha12Rng,
}

impl NormalSource {
    pub fn next_normal(&mut self) -> f64 {
        // 53-bit uniform strictly inside (0, 1)
        let u = ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        norm_ppf(u)
    }

    pub fn fill_normals(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.next_normal();
        }
    }
}

/// Draws `draws` rows of correlated standard normals with correlation
/// L * L^T. Each row is L applied to a vector of i.i.d. normals.
pub fn correlated_normals(l: &CholeskyFactor, stream: RngStream, draws: usize) -> Vec<Vec<f64>> {
    let mut src = stream.source();
    let n = l.dim();
    let mut y = vec![0.0; n];
    (0..draws)
        .map(|_| {
            src.fill_normals(&mut y);
            l.apply(&y)
        })
        .collect()
}

/// Exact risk-neutral terminal price of a GBM resource:
/// s0 * exp((r - sigma^2/2) T + sigma sqrt(T) z).
pub fn gbm_terminal_q(p: &GbmParams, r: f64, t: f64, z: f64) -> f64 {
    p.s0 * ((r - 0.5 * p.sigma * p.sigma) * t + p.sigma * t.sqrt() * z).exp()
}

/// An Euler-Maruyama trajectory. `clamped` counts steps where a
/// multiplicative-noise state hit the positivity floor.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub values: Vec<f64>,
    pub clamped: u64,
}

/// Single-asset Euler-Maruyama path: trajectory[0] = s0, then
/// S_{k+1} = S_k + a(S_k) dt + b(S_k) sqrt(dt) z_k.
pub fn euler_path(process: &Process, dt: f64, steps: usize, stream: RngStream) -> Path {
    assert!(dt > 0.0 && steps >= 1);
    let mut src = stream.source();
    let mut values = Vec::with_capacity(steps + 1);
    let mut clamped = 0u64;
    let sqrt_dt = dt.sqrt();
    let mut s = process.s0();
    values.push(s);
    for _ in 0..steps {
        let z = src.next_normal();
        s += process.drift(s) * dt + process.diffusion(s) * sqrt_dt * z;
        if process.has_multiplicative_noise() && s < PRICE_FLOOR {
            s = PRICE_FLOOR;
            clamped += 1;
        }
        values.push(s);
    }
    Path { values, clamped }
}

/// Correlated multi-asset Euler-Maruyama paths; one row of correlated
/// normals is consumed per step.
pub fn euler_paths_correlated(
    processes: &[Process],
    l: &CholeskyFactor,
    dt: f64,
    steps: usize,
    stream: RngStream,
) -> Vec<Path> {
    assert!(dt > 0.0 && steps >= 1);
    assert_eq!(processes.len(), l.dim());
    let n = processes.len();
    let mut src = stream.source();
    let sqrt_dt = dt.sqrt();
    let mut states: Vec<f64> = processes.iter().map(|p| p.s0()).collect();
    let mut paths: Vec<Path> = states
        .iter()
        .map(|&s| Path { values: { let mut v = Vec::with_capacity(steps + 1); v.push(s); v }, clamped: 0 })
        .collect();
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    for _ in 0..steps {
        src.fill_normals(&mut y);
        l.apply_into(&y, &mut z);
        for i in 0..n {
            let p = &processes[i];
            let s = &mut states[i];
            *s += p.drift(*s) * dt + p.diffusion(*s) * sqrt_dt * z[i];
            if p.has_multiplicative_noise() && *s < PRICE_FLOOR {
                *s = PRICE_FLOOR;
                paths[i].clamped += 1;
            }
            paths[i].values.push(*s);
        }
    }
    paths
}
