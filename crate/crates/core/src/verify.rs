//! Named Monte-Carlo verification experiments.
//!
//! Each [`Experiment`] samples with fixed seeds and returns [`TestReport`]s
//! whose thresholds are the declared acceptance bounds.

use std::sync::Arc;

use rand::Rng;
use rand_distr::Open01;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

use crate::cannings::{pair_coalescence_lazy, BridgeFlow, WrightFisher};
use crate::comb::Comb;
use crate::conditional::{
    averaged_acceptance_asymptotic, averaged_conditional_sample, block_moment_statistic_with,
    limit_quenched_sample, quenched_registry, LimitQuenchedSample, QuenchedConfig, QuenchedScheme,
    QuenchedTimes,
};
use crate::diffusion::{cpp_sup_sample, default_dt, feller_hit_time, hit_time_cdf, DEFAULT_MAX_STEPS};
use crate::error::{Error, Result};
use crate::kingman::{blocks_at_depth, LevelSampler};
use crate::registry::{Named, Registry};
use crate::rng::{derive_seed, run_replicates};
use crate::stats::{
    exponential_cdf, ks_one_sample, ks_two_sample, mean_in_range, mean_within_se, pearson_correlation,
    sample_variance, uniform_cdf, TestReport, Threshold,
};

/// Overrides for an experiment's defaults.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ExperimentParams {
    pub n: Option<usize>,
    pub eps: Option<f64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub floor: Option<f64>,
    pub tail_mode: Option<String>,
    pub scheme: Option<String>,
}

impl ExperimentParams {
    fn levels(&self) -> Result<LevelSampler> {
        match &self.tail_mode {
            Some(name) => LevelSampler::by_name(name),
            None => Ok(LevelSampler::default()),
        }
    }

    fn scheme(&self) -> Result<Arc<dyn QuenchedScheme>> {
        quenched_registry().get(self.scheme.as_deref().unwrap_or("roulette"))
    }
}

pub trait Experiment: Named + Send + Sync {
    fn summary(&self) -> &'static str;
    fn default_seed(&self) -> u64;
    fn run(&self, params: &ExperimentParams) -> Result<Vec<TestReport>>;
}

fn zero_violations(name: &str, checked: usize, violations: usize) -> TestReport {
    TestReport::new(name, checked, violations as f64, Threshold::Within { lower: 0.0, upper: 0.0 })
}

fn stamp(reports: Vec<TestReport>, seed: u64) -> Vec<TestReport> {
    reports.into_iter().map(|r| r.with_seed(seed)).collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn gamma_rate2_cdf(n: usize) -> impl Fn(f64) -> f64 {
    let g = GammaDist::new(n as f64 + 1.0, 2.0).expect("valid gamma");
    move |x| if x <= 0.0 { 0.0 } else { g.cdf(x) }
}

fn open_point<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

// ---------------------------------------------------------------- kingman

pub struct KingmanLaw;

impl Named for KingmanLaw {
    fn name(&self) -> &'static str {
        "kingman"
    }
}

impl Experiment for KingmanLaw {
    fn summary(&self) -> &'static str {
        "pair coalescence time of two uniform points in the Kingman comb vs Exp(1)"
    }

    fn default_seed(&self) -> u64 {
        20261001
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let reps = p.reps.unwrap_or(10_000);
        let depth = p.eps.unwrap_or(1e-3);
        let levels = p.levels()?;
        let draws = run_replicates(reps, seed, |rng, _| {
            let kc = levels.kingman_comb(depth, rng)?;
            loop {
                let (x, y) = (open_point(rng), open_point(rng));
                match kc.comb.metric(x, y) {
                    Ok(d) => return Ok((d, d == kc.coalescence_time_naive(x, y))),
                    Err(Error::AtAtomPosition(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
        })?;
        let times: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let mismatches = draws.iter().filter(|d| !d.1).count();
        Ok(stamp(
            vec![
                ks_one_sample("kingman: pair coalescence time vs Exp(1)", &times, exponential_cdf(1.0))?
                    .with_threshold(Threshold::Below { bound: 0.02 })
                    .with_param("depth_cut", depth),
                zero_violations("kingman: comb metric vs (V_j, T_j) scan", reps, mismatches),
            ],
            seed,
        ))
    }
}

// ---------------------------------------------------------------- block count

pub struct BlockCount;

impl Named for BlockCount {
    fn name(&self) -> &'static str {
        "block-count"
    }
}

impl Experiment for BlockCount {
    fn summary(&self) -> &'static str {
        "eps * (number of depth-eps blocks) concentrates at 2"
    }

    fn default_seed(&self) -> u64 {
        20261002
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let reps = p.reps.unwrap_or(10_000);
        let grid = match p.eps {
            Some(e) => vec![e],
            None => vec![1e-2, 1e-3],
        };
        let levels = p.levels()?;
        let mut reports = Vec::new();
        let mut sds = Vec::new();
        for &eps in &grid {
            let s = derive_seed(seed, &format!("eps={eps}"));
            let scaled = run_replicates(reps, s, |rng, _| Ok(eps * levels.block_count(eps, rng)? as f64))?;
            sds.push(sample_variance(&scaled)?.sqrt());
            reports.push(
                mean_in_range(&format!("block-count: mean of eps*N at eps={eps}"), &scaled, 1.9, 2.1)?
                    .with_param("eps", eps)
                    .with_seed(s),
            );
        }
        if sds.len() > 1 {
            let worst = sds.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
            reports.push(
                TestReport::new(
                    "block-count: sd of eps*N decreases with eps (max ratio)",
                    reps * grid.len(),
                    worst,
                    Threshold::Below { bound: 1.0 },
                )
                .with_param("sd", sds.clone())
                .with_seed(seed),
            );
        }
        Ok(reports)
    }
}

// ---------------------------------------------------------------- cvc2

pub struct RescaledKingman;

impl Named for RescaledKingman {
    fn name(&self) -> &'static str {
        "cvc2"
    }
}

/// `ε⁻¹ d(εx, εx')` on the Kingman comb for `(x, x') = (1, 2)` and `(2, 3)`.
pub fn rescaled_sup_pairs(levels: &LevelSampler, eps: f64, reps: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    run_replicates(reps, seed, |rng, _| loop {
        let killed = levels.killed_kingman_comb(0.1 * eps, 3.5 * eps, rng)?;
        let c = killed.dilate(1.0 / eps)?;
        match (c.metric(1.0, 2.0), c.metric(2.0, 3.0)) {
            (Ok(a), Ok(b)) => return Ok((a, b)),
            (Err(Error::AtAtomPosition(_)), _) | (_, Err(Error::AtAtomPosition(_))) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    })
}

impl Experiment for RescaledKingman {
    fn summary(&self) -> &'static str {
        "rescaled Kingman comb interval sups vs the Brownian CPP law exp(-2(x'-x)/t)"
    }

    fn default_seed(&self) -> u64 {
        20261003
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let reps = p.reps.unwrap_or(10_000);
        let eps = p.eps.unwrap_or(1e-3);
        let pairs = rescaled_sup_pairs(&p.levels()?, eps, reps, seed)?;
        let first: Vec<f64> = pairs.iter().map(|q| q.0).collect();
        let rho = pearson_correlation(&pairs)?;
        Ok(stamp(
            vec![
                ks_one_sample("cvc2: sup over (1,2) vs exp(-2/t)", &first, |t| hit_time_cdf(1.0, t))?
                    .with_threshold(Threshold::Below { bound: 0.03 })
                    .with_param("eps", eps),
                TestReport::new(
                    "cvc2: |corr| of sups over (1,2) and (2,3)",
                    reps,
                    rho.abs(),
                    Threshold::Below { bound: 0.05 },
                )
                .with_param("rho", rho),
            ],
            seed,
        ))
    }
}

// ---------------------------------------------------------------- cvc

pub struct BlockLength;

impl Named for BlockLength {
    fn name(&self) -> &'static str {
        "cvc"
    }
}

impl Experiment for BlockLength {
    fn summary(&self) -> &'static str {
        "size-biased block length l_{n,eps}/eps vs Gamma(n+1, rate 2)"
    }

    fn default_seed(&self) -> u64 {
        20261004
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let reps = p.reps.unwrap_or(10_000);
        let eps = p.eps.unwrap_or(1e-3);
        let orders = match p.n {
            Some(n) => vec![n],
            None => vec![1, 2, 3],
        };
        let scheme = p.scheme()?;
        let mut reports = Vec::new();
        for n in orders {
            // only the block lengths are needed, so levels below ε are skipped
            let cfg = QuenchedConfig::new(n, eps)
                .with_floor(p.floor.unwrap_or(eps))
                .with_levels(p.levels()?);
            let s = derive_seed(seed, &format!("n={n}"));
            let lengths = run_replicates(reps, s, |rng, _| Ok(scheme.sample(&cfg, rng)?.times().scaled_length()))?;
            reports.push(
                ks_one_sample(&format!("cvc: l/eps vs Gamma({}, 2), n={n}", n + 1), &lengths, gamma_rate2_cdf(n))?
                    .with_threshold(Threshold::Below { bound: 0.03 })
                    .with_param("n", n)
                    .with_param("eps", eps)
                    .with_seed(s),
            );
        }
        Ok(reports)
    }
}

// ---------------------------------------------------------------- ui

pub struct BlockMoments;

impl Named for BlockMoments {
    fn name(&self) -> &'static str {
        "ui"
    }
}

impl Experiment for BlockMoments {
    fn summary(&self) -> &'static str {
        "Z_{n,eps} has mean n! and shrinking variance as eps -> 0"
    }

    fn default_seed(&self) -> u64 {
        20261005
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let reps = p.reps.unwrap_or(10_000);
        let eps = p.eps.unwrap_or(1e-3);
        let levels = p.levels()?;
        let orders = match p.n {
            Some(n) => vec![n],
            None => vec![1, 2, 3],
        };
        let mut reports = Vec::new();
        for n in orders {
            let s = derive_seed(seed, &format!("n={n}"));
            let z = run_replicates(reps, s, |rng, _| block_moment_statistic_with(&levels, n, eps, rng))?;
            reports.push(
                mean_within_se(&format!("ui: mean of Z_{n} within 3 SE of {n}!"), &z, factorial(n), 3.0)?
                    .with_param("n", n)
                    .with_param("eps", eps)
                    .with_seed(s),
            );
        }
        if p.eps.is_none() {
            let grid = [1e-2, 3e-3, 1e-3];
            let mut vars = Vec::new();
            for e in grid {
                let s = derive_seed(seed, &format!("var eps={e}"));
                let z = run_replicates(reps, s, |rng, _| block_moment_statistic_with(&levels, 2, e, rng))?;
                vars.push(sample_variance(&z)?);
            }
            let worst = vars.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
            reports.push(
                TestReport::new(
                    "ui: variance of Z_2 decreases along eps grid (max ratio)",
                    reps * grid.len(),
                    worst,
                    Threshold::Below { bound: 1.0 },
                )
                .with_param("variances", vars)
                .with_seed(seed),
            );
        }
        Ok(reports)
    }
}

// ---------------------------------------------------------------- quenched batches

pub fn quenched_batch(
    scheme: &dyn QuenchedScheme,
    cfg: &QuenchedConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<QuenchedTimes>> {
    run_replicates(reps, seed, |rng, _| Ok(scheme.sample(cfg, rng)?.times()))
}

pub fn limit_batch(n: usize, reps: usize, seed: u64) -> Result<Vec<LimitQuenchedSample>> {
    run_replicates(reps, seed, |rng, _| limit_quenched_sample(n, rng))
}

fn column(rows: &[Vec<f64>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i]).collect()
}

/// Per-coordinate uniformity and pairwise decorrelation of `H_i^ε/ε`.
pub fn teo1_reports(samples: &[QuenchedTimes]) -> Result<Vec<TestReport>> {
    let rows: Vec<Vec<f64>> = samples.iter().map(QuenchedTimes::scaled_times).collect();
    let k = rows.first().map_or(0, Vec::len);
    let mut reports = Vec::new();
    let above = samples
        .iter()
        .filter(|s| s.coalescence_times.iter().any(|&h| h > s.eps))
        .count();
    reports.push(zero_violations("teo1: H_i <= eps", samples.len(), above));
    for i in 0..k {
        reports.push(
            ks_one_sample(&format!("teo1: H_{}/eps vs U(0,1)", i + 1), &column(&rows, i), uniform_cdf)?
                .with_threshold(Threshold::Below { bound: 0.03 }),
        );
    }
    for i in 0..k {
        for j in i + 1..k {
            let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r[i], r[j])).collect();
            let rho = pearson_correlation(&pairs)?;
            reports.push(
                TestReport::new(
                    format!("teo1: |corr(H_{}, H_{})|", i + 1, j + 1),
                    pairs.len(),
                    rho.abs(),
                    Threshold::Below { bound: 0.05 },
                )
                .with_param("rho", rho),
            );
        }
    }
    Ok(reports)
}

const GRID: [f64; 3] = [0.25, 0.5, 0.75];

/// Uniform sups, product-form joint law of the first two, Exp(2) spacings.
pub fn cor_final_reports(samples: &[LimitQuenchedSample]) -> Result<Vec<TestReport>> {
    let mut reports = Vec::new();
    let k = samples.first().map_or(0, |s| s.sups.len());
    let sups: Vec<Vec<f64>> = samples.iter().map(|s| s.sups.clone()).collect();
    for i in 0..k {
        reports.push(
            ks_one_sample(&format!("cor-final: sup_{} vs U(0,1)", i + 1), &column(&sups, i), uniform_cdf)?
                .with_threshold(Threshold::Below { bound: 0.03 }),
        );
    }
    if k >= 2 {
        let n = samples.len() as f64;
        let mut worst = 0.0f64;
        for &s1 in &GRID {
            for &s2 in &GRID {
                let hits = sups.iter().filter(|h| h[0] <= s1 && h[1] <= s2).count() as f64;
                worst = worst.max((hits / n - s1 * s2).abs());
            }
        }
        reports.push(TestReport::new(
            "cor-final: max |P(H1<=s1, H2<=s2) - s1*s2| on 3x3 grid",
            samples.len(),
            worst,
            Threshold::Below { bound: 0.02 },
        ));
    }
    let spacings: Vec<Vec<f64>> = samples.iter().map(|s| s.spacings.clone()).collect();
    let m = spacings.first().map_or(0, Vec::len);
    for i in 0..m {
        reports.push(
            ks_one_sample(&format!("cor-final: spacing_{} vs Exp(2)", i), &column(&spacings, i), exponential_cdf(2.0))?
                .with_threshold(Threshold::Below { bound: 0.02 }),
        );
    }
    Ok(reports)
}

/// Rank-wise two-sample KS between sorted quenched times and sorted limit sups.
pub fn cvh_reports(quenched: &[QuenchedTimes], limit: &[LimitQuenchedSample]) -> Result<Vec<TestReport>> {
    let q: Vec<Vec<f64>> = quenched.iter().map(QuenchedTimes::sorted_scaled_times).collect();
    let l: Vec<Vec<f64>> = limit.iter().map(LimitQuenchedSample::sorted_sups).collect();
    let k = q.first().map_or(0, Vec::len);
    (0..k)
        .map(|i| {
            Ok(ks_two_sample(&format!("cvh: rank {} quenched vs limit", i + 1), &column(&q, i), &column(&l, i))?
                .with_threshold(Threshold::Below { bound: 0.05 }))
        })
        .collect()
}

fn quenched_from_params(p: &ExperimentParams, seed: u64, default_eps: f64) -> Result<(QuenchedConfig, Vec<QuenchedTimes>)> {
    let n = p.n.unwrap_or(3);
    let eps = p.eps.unwrap_or(default_eps);
    let mut cfg = QuenchedConfig::new(n, eps).with_levels(p.levels()?);
    if let Some(f) = p.floor {
        cfg = cfg.with_floor(f);
    }
    let reps = p.reps.unwrap_or(10_000);
    let batch = quenched_batch(p.scheme()?.as_ref(), &cfg, reps, derive_seed(seed, "quenched"))?;
    Ok((cfg, batch))
}

pub struct QuenchedUniform;

impl Named for QuenchedUniform {
    fn name(&self) -> &'static str {
        "teo1"
    }
}

impl Experiment for QuenchedUniform {
    fn summary(&self) -> &'static str {
        "quenched coalescence times H_i/eps are asymptotically i.i.d. U(0,1)"
    }

    fn default_seed(&self) -> u64 {
        20261006
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let (cfg, batch) = quenched_from_params(p, seed, 1e-3)?;
        let reports = teo1_reports(&batch)?
            .into_iter()
            .map(|r| r.with_param("n", cfg.n).with_param("eps", cfg.eps).with_param("floor", cfg.floor))
            .collect();
        Ok(stamp(reports, seed))
    }
}

pub struct LimitSups;

impl Named for LimitSups {
    fn name(&self) -> &'static str {
        "cor-final"
    }
}

impl Experiment for LimitSups {
    fn summary(&self) -> &'static str {
        "limit sampler: i.i.d. U(0,1) interval sups and Exp(2) spacings"
    }

    fn default_seed(&self) -> u64 {
        20261016
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let n = p.n.unwrap_or(3);
        let batch = limit_batch(n, p.reps.unwrap_or(10_000), derive_seed(seed, "limit"))?;
        let reports = cor_final_reports(&batch)?.into_iter().map(|r| r.with_param("n", n)).collect();
        Ok(stamp(reports, seed))
    }
}

pub struct RouteEquivalence;

impl Named for RouteEquivalence {
    fn name(&self) -> &'static str {
        "cvh"
    }
}

impl Experiment for RouteEquivalence {
    fn summary(&self) -> &'static str {
        "sorted quenched times at small eps vs sorted limit-sampler sups"
    }

    fn default_seed(&self) -> u64 {
        20261007
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let (cfg, batch) = quenched_from_params(p, seed, 1e-3)?;
        let limit = limit_batch(cfg.n, p.reps.unwrap_or(10_000), derive_seed(seed, "limit"))?;
        let reports = cvh_reports(&batch, &limit)?
            .into_iter()
            .map(|r| r.with_param("n", cfg.n).with_param("eps", cfg.eps))
            .collect();
        Ok(stamp(reports, seed))
    }
}

// ---------------------------------------------------------------- averaged

pub struct AveragedUniform;

impl Named for AveragedUniform {
    fn name(&self) -> &'static str {
        "petit-calcul"
    }
}

impl Experiment for AveragedUniform {
    fn summary(&self) -> &'static str {
        "averaged conditioning: pooled scaled times vs U(0,1) and acceptance rate"
    }

    fn default_seed(&self) -> u64 {
        20261008
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let n = p.n.unwrap_or(3);
        let eps = p.eps.unwrap_or(0.01);
        let reps = p.reps.unwrap_or(10_000);
        let samples = run_replicates(reps, seed, |rng, _| averaged_conditional_sample(n, eps, rng))?;
        let pooled: Vec<f64> = samples.iter().flat_map(|s| s.ranked_times.iter().copied()).collect();
        let proposals: u64 = samples.iter().map(|s| s.proposals).sum();
        let rate = reps as f64 / proposals as f64;
        let target = averaged_acceptance_asymptotic(n, eps);
        Ok(stamp(
            vec![
                ks_one_sample("petit-calcul: pooled averaged times vs U(0,1)", &pooled, uniform_cdf)?
                    .with_threshold(Threshold::Below { bound: 0.03 }),
                TestReport::new(
                    "petit-calcul: acceptance frequency within 20% of asymptotic",
                    proposals as usize,
                    rate,
                    Threshold::Within {
                        lower: 0.8 * target,
                        upper: 1.2 * target,
                    },
                )
                .with_param("asymptotic", target),
            ]
            .into_iter()
            .map(|r| r.with_param("n", n).with_param("eps", eps))
            .collect(),
            seed,
        ))
    }
}

pub struct Indistinguishable;

impl Named for Indistinguishable {
    fn name(&self) -> &'static str {
        "indistinguishable"
    }
}

impl Experiment for Indistinguishable {
    fn summary(&self) -> &'static str {
        "sorted quenched times vs averaged times at the same eps, rank by rank"
    }

    fn default_seed(&self) -> u64 {
        20261012
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let p = ExperimentParams {
            reps: Some(p.reps.unwrap_or(5_000)),
            ..p.clone()
        };
        let (cfg, batch) = quenched_from_params(&p, seed, 1e-2)?;
        let averaged = run_replicates(p.reps.unwrap_or(5_000), derive_seed(seed, "averaged"), |rng, _| {
            averaged_conditional_sample(cfg.n, cfg.eps, rng)
        })?;
        let q: Vec<Vec<f64>> = batch.iter().map(QuenchedTimes::sorted_scaled_times).collect();
        let a: Vec<Vec<f64>> = averaged.iter().map(|s| s.ranked_times.clone()).collect();
        let reports = (0..cfg.n.saturating_sub(1))
            .map(|i| {
                Ok(ks_two_sample(&format!("indistinguishable: rank {} quenched vs averaged", i + 1), &column(&q, i), &column(&a, i))?
                    .with_threshold(Threshold::Below { bound: 0.05 })
                    .with_param("n", cfg.n)
                    .with_param("eps", cfg.eps))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(stamp(reports, seed))
    }
}

// ---------------------------------------------------------------- feller

pub struct FellerIdentity;

impl Named for FellerIdentity {
    fn name(&self) -> &'static str {
        "id"
    }
}

impl Experiment for FellerIdentity {
    fn summary(&self) -> &'static str {
        "Euler-Maruyama Feller hitting time of 0 vs the Brownian CPP sup law"
    }

    fn default_seed(&self) -> u64 {
        20261009
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let reps = p.reps.unwrap_or(10_000);
        let x = 1.0;
        let dt = p.eps.unwrap_or(default_dt(x));
        let hits = run_replicates(reps, derive_seed(seed, "feller"), |rng, _| {
            feller_hit_time(x, dt, DEFAULT_MAX_STEPS, rng)
        })?;
        let exact = run_replicates(reps, derive_seed(seed, "exact"), |rng, _| cpp_sup_sample(x, rng))?;
        // censored paths count as +∞
        let times: Vec<f64> = hits
            .iter()
            .map(|h| if h.censored { f64::INFINITY } else { h.time })
            .collect();
        let censored = hits.iter().filter(|h| h.censored).count() as f64 / reps as f64;
        Ok(stamp(
            vec![
                ks_two_sample("id: Feller hitting times vs exact CPP sups", &times, &exact)?
                    .with_threshold(Threshold::Below { bound: 0.03 }),
                ks_one_sample("id: Feller hitting times vs exp(-2x/t)", &times, |t| hit_time_cdf(x, t))?
                    .with_threshold(Threshold::Below { bound: 0.03 }),
                TestReport::new("id: censored fraction", reps, censored, Threshold::Below { bound: 0.01 }),
            ]
            .into_iter()
            .map(|r| r.with_param("x", x).with_param("dt", dt))
            .collect(),
            seed,
        ))
    }
}

// ---------------------------------------------------------------- cannings

pub struct CanningsFlows;

impl Named for CanningsFlows {
    fn name(&self) -> &'static str {
        "cannings"
    }
}

#[derive(Default)]
struct FlowViolations {
    cocycle: usize,
    backward: usize,
    planar: usize,
    merged: usize,
}

fn check_flow<R: Rng + ?Sized>(flow: &BridgeFlow, rng: &mut R) -> Result<FlowViolations> {
    let t = flow.len();
    let size = flow.size();
    let mut v = FlowViolations::default();
    let mut idx = [rng.random_range(0..=t), rng.random_range(0..=t), rng.random_range(0..=t)];
    idx.sort_unstable();
    let [k, m, n] = idx;
    let (bkm, bmn, bkn) = (flow.compose(k, m)?, flow.compose(m, n)?, flow.compose(k, n)?);
    if bkn != bkm.then(&bmn)? {
        v.cocycle += 1;
    }
    for x in 1..=size {
        if bkn.inverse(x)? != bkm.inverse(bmn.inverse(x)?)? || flow.ancestor(k, n, x)? != bkn.inverse(x)? {
            v.backward += 1;
        }
    }
    let lineages = (1..=size).map(|x| flow.lineage(t, x)).collect::<Result<Vec<_>>>()?;
    for w in lineages.windows(2) {
        if w[0].iter().zip(&w[1]).any(|(a, b)| a > b) {
            v.planar += 1;
        }
        if let Some(meet) = w[0].iter().zip(&w[1]).position(|(a, b)| a == b) {
            if w[0][meet..] != w[1][meet..] {
                v.merged += 1;
            }
        }
    }
    Ok(v)
}

impl Experiment for CanningsFlows {
    fn summary(&self) -> &'static str {
        "exact flow identities and Kingman pair coalescence of Wright-Fisher lineages"
    }

    fn default_seed(&self) -> u64 {
        20261010
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let flows = 100;
        let checks = run_replicates(flows, derive_seed(seed, "flows"), |rng, _| {
            let flow = BridgeFlow::sample(50, 100, &WrightFisher, rng)?;
            check_flow(&flow, rng)
        })?;
        let total = |f: fn(&FlowViolations) -> usize| checks.iter().map(f).sum::<usize>();
        let mut reports = vec![
            zero_violations("cannings: cocycle B_kn = B_mn o B_km", flows, total(|v| v.cocycle)),
            zero_violations("cannings: backward phi_kn = phi_km o phi_mn", flows * 50, total(|v| v.backward)),
            zero_violations("cannings: ancestor labels never cross", flows * 49, total(|v| v.planar)),
            zero_violations("cannings: merged lineages stay merged", flows * 49, total(|v| v.merged)),
        ];

        let size = p.n.unwrap_or(200);
        let reps = p.reps.unwrap_or(5_000);
        let wf = run_replicates(reps, derive_seed(seed, "wright-fisher"), |rng, _| {
            let x = rng.random_range(1..=size);
            let mut y = rng.random_range(1..size);
            if y >= x {
                y += 1;
            }
            let g = pair_coalescence_lazy(size, &WrightFisher, x, y, u64::MAX, rng)?;
            Ok(g.expect("unbounded search") as f64 / size as f64)
        })?;
        reports.push(
            ks_one_sample("cannings: Wright-Fisher pair coalescence / N vs Exp(1)", &wf, exponential_cdf(1.0))?
                .with_threshold(Threshold::Below { bound: 0.05 })
                .with_param("N", size),
        );

        Ok(stamp(reports, seed))
    }
}

// ---------------------------------------------------------------- comb invariants

pub struct CoreInvariants;

impl Named for CoreInvariants {
    fn name(&self) -> &'static str {
        "core-invariants"
    }
}

fn random_comb<R: Rng + ?Sized>(rng: &mut R) -> Result<Comb> {
    let k = rng.random_range(0..60);
    let atoms = (0..k)
        .map(|_| {
            let h = if rng.random_bool(0.3) {
                [1.0, 2.0, 3.0][rng.random_range(0..3)]
            } else {
                rng.random_range(0.01..10.0)
            };
            (rng.random::<f64>(), h)
        })
        .collect::<Vec<_>>();
    let mut atoms = atoms;
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    atoms.dedup_by(|a, b| a.0 == b.0);
    Comb::from_sorted(Some(1.0), 0.0, atoms)
}

fn free_point<R: Rng + ?Sized>(c: &Comb, rng: &mut R) -> f64 {
    loop {
        let x: f64 = rng.random();
        if c.positions().binary_search_by(|p| p.total_cmp(&x)).is_err() {
            return x;
        }
    }
}

fn naive_metric(c: &Comb, x: f64, y: f64) -> f64 {
    let (a, b) = (x.min(y), x.max(y));
    c.atoms().filter(|&(p, _)| a < p && p < b).map(|(_, h)| h).fold(0.0, f64::max)
}

#[derive(Default)]
struct CombViolations {
    ultrametric: usize,
    symmetry: usize,
    range_max: usize,
    kill: usize,
    first_exceed: usize,
}

fn check_comb<R: Rng + ?Sized>(c: &Comb, rng: &mut R) -> Result<CombViolations> {
    let mut v = CombViolations::default();
    for _ in 0..20 {
        let mut pts = [free_point(c, rng), free_point(c, rng), free_point(c, rng)];
        pts.sort_by(f64::total_cmp);
        let [x, y, z] = pts;
        if c.metric(x, z)? != c.metric(x, y)?.max(c.metric(y, z)?) {
            v.ultrametric += 1;
        }
        if c.metric(x, y)? != c.metric(y, x)? {
            v.symmetry += 1;
        }
        if c.metric(x, z)? != naive_metric(c, x, z) || c.metric(y, x)? != naive_metric(c, x, y) {
            v.range_max += 1;
        }
    }
    let t = rng.random_range(0.01..1.5);
    let a = rng.random_range(0.1..10.0);
    let x = rng.random_range(0.01..10.0);
    if c.kill(t)?.scale(a)? != c.scale(a)?.kill(a * t)? {
        v.kill += 1;
    }
    if c.kill_at_first_exceed(x)?.scale(a)? != c.scale(a)?.kill_at_first_exceed(x / a)? {
        v.first_exceed += 1;
    }
    Ok(v)
}

impl Experiment for CoreInvariants {
    fn summary(&self) -> &'static str {
        "ultrametric, symmetry, range-max oracle and scale/kill commutation on random combs"
    }

    fn default_seed(&self) -> u64 {
        20261011
    }

    fn run(&self, p: &ExperimentParams) -> Result<Vec<TestReport>> {
        let seed = p.seed.unwrap_or(self.default_seed());
        let combs = p.reps.unwrap_or(1_000);
        let checks = run_replicates(combs, seed, |rng, _| {
            let c = random_comb(rng)?;
            check_comb(&c, rng)
        })?;
        let total = |f: fn(&CombViolations) -> usize| checks.iter().map(f).sum::<usize>();
        Ok(stamp(
            vec![
                zero_violations("core: ultrametric d(x,z) = max(d(x,y), d(y,z))", combs * 20, total(|v| v.ultrametric)),
                zero_violations("core: symmetry d(x,y) = d(y,x)", combs * 20, total(|v| v.symmetry)),
                zero_violations("core: range-max vs linear scan", combs * 40, total(|v| v.range_max)),
                zero_violations("core: scale(kill(c,t),a) = kill(scale(c,a),a*t)", combs, total(|v| v.kill)),
                zero_violations(
                    "core: scale(l_x kill, a) = l_{x/a} kill of scale(c,a)",
                    combs,
                    total(|v| v.first_exceed),
                ),
            ],
            seed,
        ))
    }
}

pub fn experiment_registry() -> Registry<dyn Experiment> {
    let mut r: Registry<dyn Experiment> = Registry::new("experiment");
    r.register(Arc::new(KingmanLaw))
        .register(Arc::new(BlockCount))
        .register(Arc::new(RescaledKingman))
        .register(Arc::new(BlockLength))
        .register(Arc::new(BlockMoments))
        .register(Arc::new(QuenchedUniform))
        .register(Arc::new(LimitSups))
        .register(Arc::new(RouteEquivalence))
        .register(Arc::new(AveragedUniform))
        .register(Arc::new(FellerIdentity))
        .register(Arc::new(CanningsFlows))
        .register(Arc::new(CoreInvariants))
        .register(Arc::new(Indistinguishable));
    r
}

/// Checks that a consistent block count comes out of the pure-death
/// sampler and of a partitioned comb cut deeper.
pub fn block_count_consistency(eps: f64, cut: f64, reps: usize, seed: u64) -> Result<TestReport> {
    let levels = LevelSampler::default();
    let direct = run_replicates(reps, derive_seed(seed, "direct"), |rng, _| {
        Ok(levels.block_count(eps, rng)? as u64)
    })?;
    let via_comb = run_replicates(reps, derive_seed(seed, "comb"), |rng, _| {
        let kc = levels.kingman_comb(cut, rng)?;
        Ok(blocks_at_depth(&kc, eps)?.block_count() as u64)
    })?;
    Ok(crate::stats::chi_square_homogeneity("block count: pure-death vs partition", &direct, &via_comb)?
        .with_param("eps", eps)
        .with_param("cut", cut)
        .with_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_all_ids() {
        let r = experiment_registry();
        for id in [
            "cvc2", "cvc", "teo1", "petit-calcul", "ui", "id", "cor-final", "block-count", "kingman", "cvh",
            "cannings", "core-invariants", "indistinguishable",
        ] {
            assert!(r.get(id).is_ok(), "{id}");
        }
        assert!(r.get("nope").is_err());
    }

    #[test]
    fn small_runs_produce_reports() {
        let r = experiment_registry();
        let p = ExperimentParams {
            reps: Some(200),
            ..Default::default()
        };
        let reports = r.get("core-invariants").unwrap().run(&p).unwrap();
        assert!(reports.iter().all(|r| r.pass && r.seed.is_some()));
        let reports = r.get("cor-final").unwrap().run(&p).unwrap();
        assert_eq!(reports.len(), 2 + 1 + 4);
    }

    #[test]
    fn core_invariant_checker_catches_a_broken_comparison() {
        assert!(!zero_violations("x", 1, 1).pass);
        assert!(zero_violations("x", 1, 0).pass);
    }
}
