//! Closed-form prices, the n-dimensional Girsanov adjustment, and Monte
//! Carlo pricers for the bundle future and the network call option.
//!
//! The network call option pays TC * max(min_i C_i - K, 0) where C_i is
//! the cost at T1 of the resource shares on candidate path i. Two
//! estimators are provided: the direct payoff average, and the
//! Girsanov decomposition into per-resource argmin probabilities with
//! costs adjusted by the xi multipliers. Both consume the same
//! terminal-sample stream, so their difference is a tight self-test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::norm_cdf;
use crate::network::IncidenceMatrix;
use crate::sde::{cholesky, CholeskyFactor, CorrelationMatrix, GbmParams, RngStream, SdeError};

/// Below this value of |r * interval| the closed forms switch to their
/// r -> 0 limits.
const SMALL_R: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("contract has no candidate paths")]
    EmptyPathSet,
    #[error("resource index {index} out of range for {n} resources")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid contract: {0}")]
    InvalidContract(String),
    #[error(transparent)]
    Sde(#[from] SdeError),
}

/// The full pricing problem for a network call option: the right to use
/// one of M candidate paths over N resources from T1 to T2 against the
/// fee K paid at T1. Resource drift is irrelevant under the risk-neutral
/// measure; only s0 and sigma of each resource are used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkOptionContract {
    pub resources: Vec<GbmParams>,
    pub rho: CorrelationMatrix,
    pub v: IncidenceMatrix,
    pub strike: f64,
    pub t1: f64,
    pub t2: f64,
    pub rate: f64,
}

impl NetworkOptionContract {
    pub fn new(
        resources: Vec<GbmParams>,
        rho: CorrelationMatrix,
        v: IncidenceMatrix,
        strike: f64,
        t1: f64,
        t2: f64,
        rate: f64,
    ) -> Result<Self, PricingError> {
        let n = resources.len();
        if n == 0 {
            return Err(PricingError::InvalidContract("no resources".into()));
        }
        if rho.dim() != n {
            return Err(PricingError::InvalidContract(format!(
                "correlation matrix is {}x{} but there are {n} resources",
                rho.dim(),
                rho.dim()
            )));
        }
        if !v.is_empty() && v.resources() != n {
            return Err(PricingError::InvalidContract(format!(
                "incidence matrix has {} resource columns, expected {n}",
                v.resources()
            )));
        }
        if !(strike >= 0.0) {
            return Err(PricingError::InvalidContract(format!("strike {strike} < 0")));
        }
        if !(0.0 <= t1 && t1 < t2) {
            return Err(PricingError::InvalidContract(format!(
                "need 0 <= T1 < T2, got T1={t1}, T2={t2}"
            )));
        }
        Ok(Self { resources, rho, v, strike, t1, t2, rate })
    }

    pub fn n_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn n_paths(&self) -> usize {
        self.v.paths()
    }

    /// Same contract with resource n's initial price bumped by `ds`.
    pub fn with_bumped_s0(&self, n: usize, ds: f64) -> Result<Self, PricingError> {
        let mut c = self.clone();
        let p = c
            .resources
            .get_mut(n)
            .ok_or(PricingError::IndexOutOfRange { index: n, n: self.resources.len() })?;
        *p = GbmParams::new(p.s0 + ds, p.mu, p.sigma)?;
        Ok(c)
    }
}

/// Monte Carlo run parameters. Samples are partitioned into chunks of
/// `chunk_size`; chunk k draws from substream k of `seed`, and partial
/// sums are reduced in ascending chunk order, so results do not depend
/// on the worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub chunk_size: u64,
}

impl McConfig {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        Self { n_samples, seed, chunk_size: 1 << 16 }
    }

    fn chunks(&self) -> Vec<(u64, u64)> {
        assert!(self.n_samples >= 1 && self.chunk_size >= 1);
        let mut out = Vec::new();
        let mut remaining = self.n_samples;
        let mut id = 0u64;
        while remaining > 0 {
            let len = remaining.min(self.chunk_size);
            out.push((id, len));
            remaining -= len;
            id += 1;
        }
        out
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_samples: 1_000_000, seed: 0, chunk_size: 1 << 16 }
    }
}

/// A Monte Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl McEstimate {
    fn from_sums(sum: f64, sumsq: f64, n: u64, seed: u64, scale: f64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sumsq - sum * sum / nf) / (nf - 1.0)).max(0.0) } else { 0.0 };
        Self {
            value: scale * mean,
            stderr: scale.abs() * (var / nf).sqrt(),
            n_samples: n,
            seed,
        }
    }

    fn exact(value: f64, n: u64, seed: u64) -> Self {
        Self { value, stderr: 0.0, n_samples: n, seed }
    }
}

/// Girsanov multipliers xi[m][i] = exp(sigma_i sigma_m rho_im T1).
#[derive(Debug, Clone, PartialEq)]
pub struct XiMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl XiMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, m: usize, i: usize) -> f64 {
        self.entries[m * self.n + i]
    }
}

pub fn xi_matrix(c: &NetworkOptionContract) -> XiMatrix {
    let n = c.n_resources();
    let mut entries = vec![0.0; n * n];
    for m in 0..n {
        for i in 0..n {
            let s_i = c.resources[i].sigma;
            let s_m = c.resources[m].sigma;
            entries[m * n + i] = (s_i * s_m * c.rho.get(i, m) * c.t1).exp();
        }
    }
    XiMatrix { n, entries }
}

/// European call value under Black-Scholes:
/// S0 N(d1 + sigma sqrt(T)) - K e^{-rT} N(d1) with
/// d1 = (log(S0/K) - sigma^2 T / 2) / (sigma sqrt(T)).
pub fn bs_call(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    assert!(s0 > 0.0 && k >= 0.0 && sigma >= 0.0 && t >= 0.0);
    if k == 0.0 {
        return s0;
    }
    let vol = sigma * t.sqrt();
    let disc = (-r * t).exp();
    if vol == 0.0 {
        // deterministic limit
        return if s0 > k * disc { s0 - k * disc } else { 0.0 };
    }
    let d1 = ((s0 / k).ln() - 0.5 * vol * vol) / vol + r * t / vol;
    s0 * norm_cdf(d1 + vol) - k * disc * norm_cdf(d1)
}

/// Zero-strike arithmetic-average (Asian) call: s0 (1 - e^{-rT}) / r,
/// with limit s0 T as r -> 0.
pub fn asian_zero_strike(s0: f64, r: f64, t: f64) -> f64 {
    assert!(s0 > 0.0 && t >= 0.0);
    if (r * t).abs() < SMALL_R {
        s0 * t
    } else {
        s0 * (-f64::exp_m1(-r * t)) / r
    }
}

/// Time-carry factor TC = (e^{-r T1} - e^{-r T2}) / r, the discounted
/// value of paying a unit rate continuously over [T1, T2]; limit
/// T2 - T1 as r -> 0.
pub fn time_carry(r: f64, t1: f64, t2: f64) -> f64 {
    assert!(0.0 <= t1 && t1 <= t2);
    let span = t2 - t1;
    let head = (-r * t1).exp();
    if (r * span).abs() < SMALL_R {
        head * span
    } else {
        head * (-f64::exp_m1(-r * span)) / r
    }
}

fn all_deterministic(c: &NetworkOptionContract) -> bool {
    c.resources.iter().all(|p| p.sigma == 0.0)
}

/// Forward prices s0_m e^{r T1} of every resource.
fn forward_prices(c: &NetworkOptionContract) -> Vec<f64> {
    let growth = (c.rate * c.t1).exp();
    c.resources.iter().map(|p| p.s0 * growth).collect()
}

fn path_cost(row: &[f64], prices: &[f64]) -> f64 {
    row.iter().zip(prices).map(|(a, p)| a * p).sum()
}

/// Index of the cheapest path; ties go to the lowest index.
fn argmin_cost(costs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in costs.iter().enumerate().skip(1) {
        if c < costs[best] {
            best = i;
        }
    }
    best
}

/// Shared infrastructure for the chunked, seed-reproducible sampling of
/// correlated risk-neutral terminals S(T1). `normals_per_sample` extra
/// draws can be requested per sample (the bundle future needs a second
/// correlated increment).
pub struct TerminalSampler {
    chol: CholeskyFactor,
    drifts: Vec<f64>,   // (r - sigma^2/2) * t per resource
    vols: Vec<f64>,     // sigma * sqrt(t) per resource
    s0: Vec<f64>,
    seed: u64,
}

impl TerminalSampler {
    pub fn new(c: &NetworkOptionContract, seed: u64) -> Result<Self, PricingError> {
        let chol = cholesky(&c.rho)?;
        let t = c.t1;
        Ok(Self {
            drifts: c
                .resources
                .iter()
                .map(|p| (c.rate - 0.5 * p.sigma * p.sigma) * t)
                .collect(),
            vols: c.resources.iter().map(|p| p.sigma * t.sqrt()).collect(),
            s0: c.resources.iter().map(|p| p.s0).collect(),
            chol,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.s0.len()
    }

    /// Visits `len` terminal samples of chunk `chunk_id`, passing each
    /// sample's S(T1) vector to the closure.
    pub fn for_each_terminal(&self, chunk_id: u64, len: u64, mut f: impl FnMut(&[f64])) {
        let n = self.dim();
        let mut src = RngStream::new(self.seed, chunk_id).source();
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut s = vec![0.0; n];
        for _ in 0..len {
            src.fill_normals(&mut y);
            self.chol.apply_into(&y, &mut z);
            for i in 0..n {
                s[i] = self.s0[i] * (self.drifts[i] + self.vols[i] * z[i]).exp();
            }
            f(&s);
        }
    }
}

/// Runs `per_chunk` over every chunk (possibly in parallel) and folds
/// the partial accumulators in ascending chunk order.
fn reduce_chunks<A, F>(mc: &McConfig, per_chunk: F, combine: impl Fn(A, A) -> A, zero: A) -> A
where
    A: Send,
    F: Fn(u64, u64) -> A + Sync,
{
    mc.chunks()
        .into_par_iter()
        .map(|(id, len)| per_chunk(id, len))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(zero, combine)
}

/// Direct Monte Carlo price of the network call option:
/// TC * E[max(min_i C_i - K, 0)] under exact risk-neutral terminal
/// sampling at T1. All-deterministic contracts are priced without
/// sampling noise.
pub fn price_network_option_direct(
    c: &NetworkOptionContract,
    mc: &McConfig,
) -> Result<McEstimate, PricingError> {
    if c.n_paths() == 0 {
        return Err(PricingError::EmptyPathSet);
    }
    let tc = time_carry(c.rate, c.t1, c.t2);
    if all_deterministic(c) {
        let prices = forward_prices(c);
        let costs: Vec<f64> = c.v.v.iter().map(|row| path_cost(row, &prices)).collect();
        let min_c = costs[argmin_cost(&costs)];
        return Ok(McEstimate::exact(tc * (min_c - c.strike).max(0.0), mc.n_samples, mc.seed));
    }

    let sampler = TerminalSampler::new(c, mc.seed)?;
    let k = c.strike;
    let rows = &c.v.v;
    let (sum, sumsq) = reduce_chunks(
        mc,
        |id, len| {
            let (mut s1, mut s2) = (0.0f64, 0.0f64);
            sampler.for_each_terminal(id, len, |s| {
                let min_c = rows
                    .iter()
                    .map(|row| path_cost(row, s))
                    .fold(f64::INFINITY, f64::min);
                let payoff = (min_c - k).max(0.0);
                s1 += payoff;
                s2 += payoff * payoff;
            });
            (s1, s2)
        },
        |(a1, a2), (b1, b2)| (a1 + b1, a2 + b2),
        (0.0, 0.0),
    );
    Ok(McEstimate::from_sums(sum, sumsq, mc.n_samples, mc.seed, tc))
}

/// Joint output of the Girsanov-decomposed estimator: the option price,
/// every resource delta, and the tail probability Q[min_j C_j > K], all
/// evaluated on one common set of terminal samples so that
/// sum_m s0_m delta_m - TC K Q = price holds up to rounding.
#[derive(Debug, Clone)]
pub struct GirsanovRun {
    pub price: McEstimate,
    pub deltas: Vec<McEstimate>,
    pub tail_prob: f64,
}

/// Evaluates the Girsanov decomposition of the network option price:
/// TC e^{rT1} sum_m S_{m,0} sum_i v_im Q[i = argmin_j C^_jm and C^_im > K]
///   - TC K Q[min_j C_j > K]
/// where C^_im = sum_k v_ik xi_mk(T1) S_k(T1) is the cost of path i
/// after the change of measure eliminating resource m.
pub fn girsanov_run(c: &NetworkOptionContract, mc: &McConfig) -> Result<GirsanovRun, PricingError> {
    let m_paths = c.n_paths();
    if m_paths == 0 {
        return Err(PricingError::EmptyPathSet);
    }
    let n = c.n_resources();
    let tc = time_carry(c.rate, c.t1, c.t2);
    let growth = (c.rate * c.t1).exp();
    let k = c.strike;
    let xi = xi_matrix(c);

    // adjusted incidence weights per eliminated resource m:
    // w[m][i][k] = v_ik * xi_mk
    let adjusted: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|m| {
            c.v.v
                .iter()
                .map(|row| row.iter().enumerate().map(|(kk, &v)| v * xi.get(m, kk)).collect())
                .collect()
        })
        .collect();

    if all_deterministic(c) {
        // xi = 1, so adjusted and raw costs coincide
        let prices = forward_prices(c);
        let costs: Vec<f64> = c.v.v.iter().map(|row| path_cost(row, &prices)).collect();
        let i_star = argmin_cost(&costs);
        let in_money = costs[i_star] > k;
        let tail = if in_money { 1.0 } else { 0.0 };
        let deltas: Vec<McEstimate> = (0..n)
            .map(|res| {
                let a = if in_money { c.v.v[i_star][res] } else { 0.0 };
                McEstimate::exact(tc * growth * a, mc.n_samples, mc.seed)
            })
            .collect();
        let price = deltas
            .iter()
            .zip(&c.resources)
            .map(|(d, p)| p.s0 * d.value)
            .sum::<f64>()
            - tc * k * tail;
        return Ok(GirsanovRun {
            price: McEstimate::exact(price, mc.n_samples, mc.seed),
            deltas,
            tail_prob: tail,
        });
    }

    let sampler = TerminalSampler::new(c, mc.seed)?;
    let s0: Vec<f64> = c.resources.iter().map(|p| p.s0).collect();

    #[derive(Clone)]
    struct Acc {
        sum_g: f64,
        sumsq_g: f64,
        sum_a: Vec<f64>,
        sumsq_a: Vec<f64>,
        sum_tail: f64,
    }
    let zero = Acc {
        sum_g: 0.0,
        sumsq_g: 0.0,
        sum_a: vec![0.0; n],
        sumsq_a: vec![0.0; n],
        sum_tail: 0.0,
    };

    let acc = reduce_chunks(
        mc,
        |id, len| {
            let mut a = zero.clone();
            let mut adj_costs = vec![0.0; m_paths];
            sampler.for_each_terminal(id, len, |s| {
                let raw_min = c
                    .v
                    .v
                    .iter()
                    .map(|row| path_cost(row, s))
                    .fold(f64::INFINITY, f64::min);
                let tail = if raw_min > k { 1.0 } else { 0.0 };
                a.sum_tail += tail;
                let mut weighted = 0.0;
                for m in 0..n {
                    for (i, row) in adjusted[m].iter().enumerate() {
                        adj_costs[i] = path_cost(row, s);
                    }
                    let i_star = argmin_cost(&adj_costs);
                    let am = if adj_costs[i_star] > k { c.v.v[i_star][m] } else { 0.0 };
                    a.sum_a[m] += am;
                    a.sumsq_a[m] += am * am;
                    weighted += s0[m] * am;
                }
                let g = growth * weighted - k * tail;
                a.sum_g += g;
                a.sumsq_g += g * g;
            });
            a
        },
        |mut x, y| {
            x.sum_g += y.sum_g;
            x.sumsq_g += y.sumsq_g;
            x.sum_tail += y.sum_tail;
            for i in 0..n {
                x.sum_a[i] += y.sum_a[i];
                x.sumsq_a[i] += y.sumsq_a[i];
            }
            x
        },
        zero.clone(),
    );

    let nf = mc.n_samples as f64;
    let deltas: Vec<McEstimate> = (0..n)
        .map(|m| McEstimate::from_sums(acc.sum_a[m], acc.sumsq_a[m], mc.n_samples, mc.seed, tc * growth))
        .collect();
    let tail_prob = acc.sum_tail / nf;

    // Price from the component means so the reconstruction identity
    // sum_m s0_m delta_m - TC K Q[min C > K] holds to rounding; the
    // stderr comes from the per-sample combined scalar.
    let value = (0..n).map(|m| s0[m] * deltas[m].value).sum::<f64>() - tc * k * tail_prob;
    let g_est = McEstimate::from_sums(acc.sum_g, acc.sumsq_g, mc.n_samples, mc.seed, tc);
    let price = McEstimate { value, stderr: g_est.stderr, n_samples: mc.n_samples, seed: mc.seed };

    Ok(GirsanovRun { price, deltas, tail_prob })
}

/// Girsanov-decomposed price of the network call option.
pub fn price_network_option_girsanov(
    c: &NetworkOptionContract,
    mc: &McConfig,
) -> Result<McEstimate, PricingError> {
    Ok(girsanov_run(c, mc)?.price)
}

/// Delta of the network option with respect to resource n's initial
/// price, per the Girsanov decomposition:
/// TC e^{rT1} sum_i v_in Q[C^_in = min_j C^_jn and C^_in > K].
pub fn network_option_delta(
    c: &NetworkOptionContract,
    n: usize,
    mc: &McConfig,
) -> Result<McEstimate, PricingError> {
    if n >= c.n_resources() {
        return Err(PricingError::IndexOutOfRange { index: n, n: c.n_resources() });
    }
    Ok(girsanov_run(c, mc)?.deltas[n].clone())
}

/// Monte Carlo estimate of the bundle future: the discounted expected
/// resale gain e^{-rT2} E[sum_j v_ij A_j 1{path i cheapest at T1}] with
/// A_j = S_j(T2) - e^{r(T2-T1)} S_j(T1). Each A_j has zero expectation
/// under Q and is independent of the T1 event, so the true price is
/// zero; the estimate must be statistically consistent with that.
pub fn price_bundle_future(
    c: &NetworkOptionContract,
    mc: &McConfig,
) -> Result<McEstimate, PricingError> {
    if c.n_paths() == 0 {
        return Err(PricingError::EmptyPathSet);
    }
    let n = c.n_resources();
    if all_deterministic(c) {
        // every A_j vanishes identically
        return Ok(McEstimate::exact(0.0, mc.n_samples, mc.seed));
    }
    let chol = cholesky(&c.rho)?;
    let dt2 = c.t2 - c.t1;
    let drift1: Vec<f64> = c
        .resources
        .iter()
        .map(|p| (c.rate - 0.5 * p.sigma * p.sigma) * c.t1)
        .collect();
    let vol1: Vec<f64> = c.resources.iter().map(|p| p.sigma * c.t1.sqrt()).collect();
    let drift2: Vec<f64> = c
        .resources
        .iter()
        .map(|p| (c.rate - 0.5 * p.sigma * p.sigma) * dt2)
        .collect();
    let vol2: Vec<f64> = c.resources.iter().map(|p| p.sigma * dt2.sqrt()).collect();
    let resale_growth = (c.rate * dt2).exp();
    let disc = (-c.rate * c.t2).exp();
    let rows = &c.v.v;

    let (sum, sumsq) = reduce_chunks(
        mc,
        |id, len| {
            let mut src = RngStream::new(mc.seed, id).source();
            let mut y = vec![0.0; n];
            let mut z = vec![0.0; n];
            let mut s1 = vec![0.0; n];
            let mut s2 = vec![0.0; n];
            let (mut acc, mut accsq) = (0.0f64, 0.0f64);
            for _ in 0..len {
                src.fill_normals(&mut y);
                chol.apply_into(&y, &mut z);
                for i in 0..n {
                    s1[i] = c.resources[i].s0 * (drift1[i] + vol1[i] * z[i]).exp();
                }
                src.fill_normals(&mut y);
                chol.apply_into(&y, &mut z);
                for i in 0..n {
                    s2[i] = s1[i] * (drift2[i] + vol2[i] * z[i]).exp();
                }
                let costs: Vec<f64> = rows.iter().map(|row| path_cost(row, &s1)).collect();
                let i_star = argmin_cost(&costs);
                let payoff: f64 = rows[i_star]
                    .iter()
                    .enumerate()
                    .map(|(j, &vij)| vij * (s2[j] - resale_growth * s1[j]))
                    .sum();
                acc += payoff;
                accsq += payoff * payoff;
            }
            (acc, accsq)
        },
        |(a1, a2), (b1, b2)| (a1 + b1, a2 + b2),
        (0.0, 0.0),
    );
    Ok(McEstimate::from_sums(sum, sumsq, mc.n_samples, mc.seed, disc))
}

/// N(d1) and N(d1 + sigma sqrt(T)) terms of the single-asset call, used
/// by tests to check the Girsanov Q-terms against the closed form.
pub fn bs_call_probabilities(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> (f64, f64) {
    let vol = sigma * t.sqrt();
    let d1 = ((s0 / k).ln() - 0.5 * vol * vol) / vol + r * t / vol;
    (norm_cdf(d1), norm_cdf(d1 + vol))
}
