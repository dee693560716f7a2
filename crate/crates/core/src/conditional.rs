//! Conditional sampling of `n` individuals sharing an ancestor shallower than ε.
//!
//! *Quenched*: given the population (a Kingman comb), `n` uniforms conditioned
//! to fall into a common depth-ε block; block `i` is hit with probability
//! proportional to `l_i^n`. *Averaged*: the `n`-Kingman coalescent conditioned
//! on `T_2 < ε`.

use std::fmt::Debug;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Exp1, Open01};
use serde::Serialize;

use crate::comb::Comb;
use crate::cpp::{exact_interval_sups, sample_gamma_rate2};
use crate::error::{Error, Result};
use crate::intensity::brownian_capped_unit;
use crate::kingman::{blocks_at_depth, thin_levels, LevelSampler};
use crate::registry::{Named, Registry};
use crate::rng::ReplicateRng;

pub const DEFAULT_REJECTION_BUDGET: u64 = 100_000_000;
pub const AVERAGED_BUDGET_CAP: u64 = 10_000_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct QuenchedSample {
    #[serde(skip)]
    pub block_comb: Comb,
    pub block_length: f64,
    pub eps: f64,
    pub order: usize,
    /// `H_i^ε`: coalescence times of consecutive sampled points, left to right.
    pub coalescence_times: Vec<f64>,
}

/// The block length and coalescence times of a quenched sample, without its comb.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuenchedTimes {
    pub block_length: f64,
    pub eps: f64,
    pub order: usize,
    pub coalescence_times: Vec<f64>,
}

impl QuenchedTimes {
    /// `l_{n,ε}/ε`.
    pub fn scaled_length(&self) -> f64 {
        self.block_length / self.eps
    }

    pub fn scaled_times(&self) -> Vec<f64> {
        self.coalescence_times.iter().map(|h| h / self.eps).collect()
    }

    pub fn sorted_scaled_times(&self) -> Vec<f64> {
        let mut t = self.scaled_times();
        t.sort_by(f64::total_cmp);
        t
    }
}

impl QuenchedSample {
    pub fn times(&self) -> QuenchedTimes {
        QuenchedTimes {
            block_length: self.block_length,
            eps: self.eps,
            order: self.order,
            coalescence_times: self.coalescence_times.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuenchedConfig {
    pub n: usize,
    pub eps: f64,
    /// Levels below `floor` are not generated; `floor ≤ 0.01 ε` keeps the
    /// scaled coalescence times exact above 0.01.
    pub floor: f64,
    pub levels: LevelSampler,
    /// Proposal cap for the literal rejection scheme.
    pub rejection_budget: u64,
}

impl QuenchedConfig {
    pub fn new(n: usize, eps: f64) -> Self {
        QuenchedConfig {
            n,
            eps,
            floor: 0.01 * eps,
            levels: LevelSampler::default(),
            rejection_budget: DEFAULT_REJECTION_BUDGET,
        }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn with_levels(mut self, levels: LevelSampler) -> Self {
        self.levels = levels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::invalid("sample size n must be at least 1"));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::invalid(format!("eps {} must be positive", self.eps)));
        }
        if !(self.floor > 0.0 && self.floor <= self.eps) {
            return Err(Error::invalid(format!(
                "floor {} must lie in (0, eps = {}]",
                self.floor, self.eps
            )));
        }
        Ok(())
    }
}

/// A way of producing the quenched sample; all registered schemes share one law.
pub trait QuenchedScheme: Named + Debug + Send + Sync {
    fn sample(&self, cfg: &QuenchedConfig, rng: &mut ReplicateRng) -> Result<QuenchedSample>;
}

/// Block drawn by its `l^n` weight; only the atoms landing in that block are
/// ever given positions.
#[derive(Debug, Clone, Copy, Default)]
pub struct Roulette;

/// Whole comb to the floor, partitioned, then a block drawn by its `l^n` weight.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullComb;

/// One comb, then `n` uniforms on `(0, 1)` redrawn until they share a block.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rejection;

impl Named for Roulette {
    fn name(&self) -> &'static str {
        "roulette"
    }
}

impl Named for FullComb {
    fn name(&self) -> &'static str {
        "full-comb"
    }
}

impl Named for Rejection {
    fn name(&self) -> &'static str {
        "rejection"
    }
}

impl QuenchedScheme for Roulette {
    fn sample(&self, cfg: &QuenchedConfig, rng: &mut ReplicateRng) -> Result<QuenchedSample> {
        quenched_roulette(cfg, rng)
    }
}

impl QuenchedScheme for FullComb {
    fn sample(&self, cfg: &QuenchedConfig, rng: &mut ReplicateRng) -> Result<QuenchedSample> {
        quenched_full_comb(cfg, rng)
    }
}

impl QuenchedScheme for Rejection {
    fn sample(&self, cfg: &QuenchedConfig, rng: &mut ReplicateRng) -> Result<QuenchedSample> {
        quenched_rejection(cfg, rng)
    }
}

pub fn quenched_registry() -> Registry<dyn QuenchedScheme> {
    let mut r: Registry<dyn QuenchedScheme> = Registry::new("quenched scheme");
    r.register(Arc::new(Roulette))
        .register(Arc::new(FullComb))
        .register(Arc::new(Rejection));
    r
}

fn sorted_open_uniforms<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..count).map(|_| rng.sample(Open01)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[0] < w[1]) {
            return v;
        }
    }
}

/// Index `i` drawn with probability `l_i^n / Σ_j l_j^n`.
fn roulette_block<R: Rng + ?Sized>(lengths: &[f64], n: usize, rng: &mut R) -> usize {
    let weights: Vec<f64> = lengths.iter().map(|l| l.powi(n as i32)).collect();
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// `n` ordered uniforms on the block and the comb distances of consecutive pairs.
fn coalescence_times<R: Rng + ?Sized>(block: &Comb, n: usize, length: f64, rng: &mut R) -> Result<Vec<f64>> {
    loop {
        let pts: Vec<f64> = sorted_open_uniforms(n, rng).into_iter().map(|u| u * length).collect();
        if pts.windows(2).any(|w| w[0] >= w[1]) {
            continue;
        }
        match pts
            .windows(2)
            .map(|w| block.metric(w[0], w[1]))
            .collect::<Result<Vec<_>>>()
        {
            Ok(h) => return Ok(h),
            Err(Error::AtAtomPosition(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

fn block_boundaries(positions: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut boundaries = Vec::with_capacity(positions.len() + 2);
    boundaries.push(0.0);
    boundaries.extend_from_slice(positions);
    boundaries.push(1.0);
    let lengths = boundaries.windows(2).map(|b| b[1] - b[0]).collect();
    (boundaries, lengths)
}

pub fn quenched_roulette<R: Rng + ?Sized>(cfg: &QuenchedConfig, rng: &mut R) -> Result<QuenchedSample> {
    cfg.validate()?;
    let levels = cfg.levels.sample(cfg.floor, rng)?;
    // atoms higher than ε delimit the blocks
    let shallow = levels.partition_point(|&t| t > cfg.eps);
    let (_, lengths) = block_boundaries(&sorted_open_uniforms(shallow, rng));
    let i = roulette_block(&lengths, cfg.n, rng);
    let l = lengths[i];
    let deep = &levels[shallow..];
    let block_comb = loop {
        let mut atoms = Vec::new();
        thin_levels(deep, l, rng, |t, rng| {
            let u: f64 = rng.sample(Open01);
            atoms.push((u * l, t));
        });
        match Comb::from_unsorted(Some(l), cfg.floor, atoms) {
            Err(Error::InvalidComb(_)) => continue,
            other => break other?,
        }
    };
    let coalescence_times = coalescence_times(&block_comb, cfg.n, l, rng)?;
    Ok(QuenchedSample {
        block_comb,
        block_length: l,
        eps: cfg.eps,
        order: cfg.n,
        coalescence_times,
    })
}

pub fn quenched_full_comb<R: Rng + ?Sized>(cfg: &QuenchedConfig, rng: &mut R) -> Result<QuenchedSample> {
    cfg.validate()?;
    let kc = cfg.levels.kingman_comb(cfg.floor, rng)?;
    let blocks = blocks_at_depth(&kc, cfg.eps)?;
    let i = roulette_block(&blocks.lengths, cfg.n, rng);
    let l = blocks.lengths[i];
    let block_comb = blocks.block_combs[i].clone();
    let coalescence_times = coalescence_times(&block_comb, cfg.n, l, rng)?;
    Ok(QuenchedSample {
        block_comb,
        block_length: l,
        eps: cfg.eps,
        order: cfg.n,
        coalescence_times,
    })
}

pub fn quenched_rejection<R: Rng + ?Sized>(cfg: &QuenchedConfig, rng: &mut R) -> Result<QuenchedSample> {
    cfg.validate()?;
    let kc = cfg.levels.kingman_comb(cfg.floor, rng)?;
    let blocks = blocks_at_depth(&kc, cfg.eps)?;
    let inner = &blocks.boundaries[1..blocks.boundaries.len() - 1];
    for _ in 0..cfg.rejection_budget {
        let pts = sorted_open_uniforms(cfg.n, rng);
        let first = inner.partition_point(|&b| b < pts[0]);
        let last = inner.partition_point(|&b| b < pts[cfg.n - 1]);
        if first != last || inner.get(first) == Some(&pts[cfg.n - 1]) {
            continue;
        }
        let start = blocks.boundaries[first];
        let block_comb = &blocks.block_combs[first];
        let h = pts
            .windows(2)
            .map(|w| block_comb.metric(w[0] - start, w[1] - start))
            .collect::<Result<Vec<_>>>();
        match h {
            Ok(coalescence_times) => {
                return Ok(QuenchedSample {
                    block_comb: block_comb.clone(),
                    block_length: blocks.lengths[first],
                    eps: cfg.eps,
                    order: cfg.n,
                    coalescence_times,
                })
            }
            Err(Error::AtAtomPosition(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::BudgetExhausted {
        budget: cfg.rejection_budget,
        hint: "uniforms rarely share a block; use a larger eps or the roulette scheme".into(),
    })
}

/// `(1/N) Σ (2 l_i / ε)^n` over the blocks of a partition.
pub fn block_moment_of_lengths(lengths: &[f64], n: usize, eps: f64) -> f64 {
    let m = lengths.len() as f64;
    lengths.iter().map(|l| (2.0 * l / eps).powi(n as i32)).sum::<f64>() / m
}

/// One draw of `Z_{n,ε} = (1/N̄_ε) Σ_k (2 ξ_k / (ε S))^n`, equal in law to `X_{n,ε}`.
pub fn block_moment_statistic<R: Rng + ?Sized>(n: usize, eps: f64, rng: &mut R) -> Result<f64> {
    block_moment_statistic_with(&LevelSampler::default(), n, eps, rng)
}

pub fn block_moment_statistic_with<R: Rng + ?Sized>(
    levels: &LevelSampler,
    n: usize,
    eps: f64,
    rng: &mut R,
) -> Result<f64> {
    if n < 1 {
        return Err(Error::invalid("moment order n must be at least 1"));
    }
    let m = levels.block_count(eps, rng)?;
    let xi: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = xi.iter().sum();
    let scale = 2.0 / (eps * s);
    Ok(xi.iter().map(|x| (x * scale).powi(n as i32)).sum::<f64>() / m as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct AveragedSample {
    /// `(T_n, …, T_2)/ε`, increasing, all in `(0, 1)`.
    pub ranked_times: Vec<f64>,
    pub eps: f64,
    pub order: usize,
    /// Proposals used, including the accepted one.
    pub proposals: u64,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Small-ε asymptotic of `P(T_2 < ε)`: `ε^{n-1} Π a_i / (n-1)!`.
pub fn averaged_acceptance_asymptotic(n: usize, eps: f64) -> f64 {
    let prod_a: f64 = (2..=n).map(|i| (i * (i - 1)) as f64 / 2.0).product();
    eps.powi(n as i32 - 1) * prod_a / factorial(n - 1)
}

/// `50 / p` proposals with `p` the asymptotic acceptance rate, capped.
pub fn averaged_default_budget(n: usize, eps: f64) -> u64 {
    let b = 50.0 / averaged_acceptance_asymptotic(n, eps);
    if b.is_finite() && b < AVERAGED_BUDGET_CAP as f64 {
        b.ceil() as u64
    } else {
        AVERAGED_BUDGET_CAP
    }
}

pub fn averaged_conditional_sample<R: Rng + ?Sized>(n: usize, eps: f64, rng: &mut R) -> Result<AveragedSample> {
    averaged_conditional_sample_with_budget(n, eps, averaged_default_budget(n, eps), rng)
}

pub fn averaged_conditional_sample_with_budget<R: Rng + ?Sized>(
    n: usize,
    eps: f64,
    budget: u64,
    rng: &mut R,
) -> Result<AveragedSample> {
    if n < 2 {
        return Err(Error::invalid("averaged sampling needs n ≥ 2"));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid(format!("eps {eps} must be positive")));
    }
    // holding[i - 2] ~ Exp(i(i-1)/2), the time spent with i lineages
    let mut holding = vec![0.0; n - 1];
    'proposal: for proposal in 1..=budget {
        let mut total = 0.0;
        for i in 2..=n {
            let e: f64 = rng.sample(Exp1);
            let h = e * 2.0 / (i * (i - 1)) as f64;
            total += h;
            if total >= eps {
                continue 'proposal;
            }
            holding[i - 2] = h;
        }
        // T_n = h_n, T_{n-1} = h_n + h_{n-1}, …, T_2 = Σ h_i
        let mut ranked_times = Vec::with_capacity(n - 1);
        let mut t = 0.0;
        for i in (2..=n).rev() {
            t += holding[i - 2];
            ranked_times.push(t / eps);
        }
        return Ok(AveragedSample {
            ranked_times,
            eps,
            order: n,
            proposals: proposal,
        });
    }
    Err(Error::BudgetExhausted {
        budget,
        hint: format!(
            "P(T_2 < {eps}) ≈ {:.3e}; use a larger eps or the limit sampler",
            averaged_acceptance_asymptotic(n, eps)
        ),
    })
}

/// `n - 1` i.i.d. `U(0, 1)`, sorted ascending.
pub fn limit_order_statistics<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("order statistics need n ≥ 2"));
    }
    let mut v: Vec<f64> = (0..n - 1).map(|_| rng.random::<f64>()).collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitQuenchedSample {
    /// `ℒ_n ~ Gamma(n+1, rate 2)`.
    pub kill_length: f64,
    /// The `n + 1` gaps cut out of `[0, ℒ_n]` by the ordered uniforms.
    pub spacings: Vec<f64>,
    /// `ℋ_1, …, ℋ_{n-1}`, sups over the interior gaps.
    pub sups: Vec<f64>,
    pub order: usize,
}

impl LimitQuenchedSample {
    pub fn sorted_sups(&self) -> Vec<f64> {
        let mut s = self.sups.clone();
        s.sort_by(f64::total_cmp);
        s
    }
}

pub fn limit_quenched_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<LimitQuenchedSample> {
    if n < 1 {
        return Err(Error::invalid("sample size n must be at least 1"));
    }
    let capped = brownian_capped_unit();
    loop {
        let kill_length = sample_gamma_rate2(n, rng);
        let pts: Vec<f64> = sorted_open_uniforms(n, rng).into_iter().map(|u| u * kill_length).collect();
        let mut spacings = Vec::with_capacity(n + 1);
        let mut prev = 0.0;
        for &p in pts.iter().chain(std::iter::once(&kill_length)) {
            spacings.push(p - prev);
            prev = p;
        }
        if spacings.iter().any(|&s| s <= 0.0) {
            continue;
        }
        let sups = exact_interval_sups(&spacings[1..n], &capped, rng)?;
        return Ok(LimitQuenchedSample {
            kill_length,
            spacings,
            sups,
            order: n,
        });
    }
}
