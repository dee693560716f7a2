//! Kingman comb, pure-death block counts and depth-ε block partitions.
//!
//! The levels `T_j = Σ_{k≥j+1} e_k`, with `e_k ~ Exp(k(k-1)/2)`, are built
//! downward from a start index `K = ⌈8/cut⌉`. The unsampled remainder
//! `Σ_{k>K} e_k` is supplied by a [`TailRemainder`] strategy. If the deepest
//! level still reaches the cut, the start index doubles and the sampled
//! levels are shifted by the newly resolved part of the remainder.

use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, Gamma, Open01};
use serde::Serialize;

use crate::comb::Comb;
use crate::error::{Error, Result};
use crate::registry::{Named, Registry};

pub const DEFAULT_START_FACTOR: f64 = 8.0;
pub const DEFAULT_MAX_LEVELS: usize = 10_000_000;

/// Surrogate for the tail `Σ_{k>K} e_k`, whose mean is `2/K`.
pub trait TailRemainder: Named + Debug + Send + Sync {
    fn remainder(&self, k: usize, rng: &mut dyn RngCore) -> f64;
}

/// The mean `2/K`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanTail;

impl Named for MeanTail {
    fn name(&self) -> &'static str {
        "mean"
    }
}

impl TailRemainder for MeanTail {
    fn remainder(&self, k: usize, _rng: &mut dyn RngCore) -> f64 {
        2.0 / k as f64
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroTail;

impl Named for ZeroTail {
    fn name(&self) -> &'static str {
        "zero"
    }
}

impl TailRemainder for ZeroTail {
    fn remainder(&self, _k: usize, _rng: &mut dyn RngCore) -> f64 {
        0.0
    }
}

/// Gamma draw matching the mean `2/K` and variance `≈ 4/(3K³)` of the tail.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampledGammaTail;

impl Named for SampledGammaTail {
    fn name(&self) -> &'static str {
        "sampled-gamma"
    }
}

impl TailRemainder for SampledGammaTail {
    fn remainder(&self, k: usize, rng: &mut dyn RngCore) -> f64 {
        let k = k as f64;
        Gamma::new(3.0 * k, 2.0 / (3.0 * k * k))
            .expect("positive gamma parameters")
            .sample(rng)
    }
}

pub fn tail_registry() -> Registry<dyn TailRemainder> {
    let mut r: Registry<dyn TailRemainder> = Registry::new("tail mode");
    r.register(Arc::new(MeanTail))
        .register(Arc::new(ZeroTail))
        .register(Arc::new(SampledGammaTail));
    r
}

#[inline]
fn exp_with_rate<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / rate
}

/// `T_{j}` step: `e_{j+1}` has rate `(j+1)j/2`.
#[inline]
fn level_rate(j: usize) -> f64 {
    let j = j as f64;
    0.5 * (j + 1.0) * j
}

/// Draws the decreasing level sequence of the pure-death process from ∞.
#[derive(Debug, Clone)]
pub struct LevelSampler {
    tail: Arc<dyn TailRemainder>,
    start_factor: f64,
    max_levels: usize,
}

impl Default for LevelSampler {
    fn default() -> Self {
        LevelSampler::new(Arc::new(MeanTail))
    }
}

impl LevelSampler {
    pub fn new(tail: Arc<dyn TailRemainder>) -> Self {
        LevelSampler {
            tail,
            start_factor: DEFAULT_START_FACTOR,
            max_levels: DEFAULT_MAX_LEVELS,
        }
    }

    pub fn by_name(tail_mode: &str) -> Result<Self> {
        Ok(LevelSampler::new(tail_registry().get(tail_mode)?))
    }

    pub fn with_max_levels(mut self, max_levels: usize) -> Self {
        self.max_levels = max_levels;
        self
    }

    pub fn tail_mode(&self) -> &'static str {
        self.tail.name()
    }

    fn start_index(&self, cut: f64) -> Result<usize> {
        let k = (self.start_factor / cut).ceil().max(2.0);
        self.check_cap(k)?;
        Ok(k as usize)
    }

    fn check_cap(&self, k: f64) -> Result<()> {
        if k > self.max_levels as f64 {
            return Err(Error::ResourceCap(format!(
                "{k} levels requested, cap is {}",
                self.max_levels
            )));
        }
        Ok(())
    }

    /// All levels `T_1 > T_2 > … ≥ cut` (closed at the cut).
    pub fn sample<R: Rng + ?Sized>(&self, cut: f64, rng: &mut R) -> Result<Vec<f64>> {
        if !(cut.is_finite() && cut > 0.0) {
            return Err(Error::invalid(format!("depth cut {cut} must be positive")));
        }
        let mut k = self.start_index(cut)?;
        let mut rem = self.tail.remainder(k, &mut &mut *rng);
        // levels[j - 1] = T_j for j = 1..k-1
        let mut levels = vec![0.0; k - 1];
        let mut acc = rem;
        for j in (1..k).rev() {
            acc += exp_with_rate(rng, level_rate(j));
            levels[j - 1] = acc;
        }
        while levels.last().is_some_and(|&t| t >= cut) {
            let k2 = 2 * k;
            self.check_cap(k2 as f64)?;
            let new_rem = self.tail.remainder(k2, &mut &mut *rng);
            let mut deep = vec![0.0; k2 - k];
            let mut acc = new_rem;
            for j in (k..k2).rev() {
                acc += exp_with_rate(rng, level_rate(j));
                deep[j - k] = acc;
            }
            // the old remainder stood for T_k
            let delta = deep[0] - rem;
            for t in levels.iter_mut() {
                *t += delta;
            }
            levels.extend_from_slice(&deep);
            k = k2;
            rem = new_rem;
        }
        let m = levels.partition_point(|&t| t >= cut);
        levels.truncate(m);
        Ok(levels)
    }

    /// `N̄_ε = inf{n : Σ_{k≥n} e_k < ε} = 1 + #{j : T_j ≥ ε}`.
    pub fn block_count<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> Result<usize> {
        Ok(1 + self.sample(eps, rng)?.len())
    }

    pub fn kingman_comb<R: Rng + ?Sized>(&self, depth_cut: f64, rng: &mut R) -> Result<KingmanComb> {
        let levels = self.sample(depth_cut, rng)?;
        loop {
            let positions: Vec<f64> = (0..levels.len()).map(|_| rng.sample(Open01)).collect();
            let atoms = positions.iter().copied().zip(levels.iter().copied()).collect();
            match Comb::from_unsorted(Some(1.0), depth_cut, atoms) {
                Ok(comb) => {
                    return Ok(KingmanComb {
                        comb,
                        levels,
                        positions,
                        depth_cut,
                    })
                }
                // duplicate position: probability zero, redraw
                Err(Error::InvalidComb(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }

    /// `k_t(C)` with only the atoms of `[0, t)` ever given positions.
    pub fn killed_kingman_comb<R: Rng + ?Sized>(
        &self,
        depth_cut: f64,
        kill_at: f64,
        rng: &mut R,
    ) -> Result<Comb> {
        if !(kill_at > 0.0 && kill_at <= 1.0) {
            return Err(Error::invalid(format!("kill point {kill_at} must lie in (0, 1]")));
        }
        let levels = self.sample(depth_cut, rng)?;
        loop {
            let mut atoms = Vec::new();
            thin_levels(&levels, kill_at, rng, |t, rng| {
                let u: f64 = rng.sample(Open01);
                atoms.push((u * kill_at, t));
            });
            match Comb::from_unsorted(Some(kill_at), depth_cut, atoms) {
                Err(Error::InvalidComb(_)) => continue,
                other => return other,
            }
        }
    }
}

/// Calls `keep` on each level independently with probability `p`,
/// jumping between kept levels with geometric skips.
pub(crate) fn thin_levels<R, F>(levels: &[f64], p: f64, rng: &mut R, mut keep: F)
where
    R: Rng + ?Sized,
    F: FnMut(f64, &mut R),
{
    if p >= 1.0 {
        for &t in levels {
            keep(t, rng);
        }
        return;
    }
    if p <= 0.0 {
        return;
    }
    let log_q = (-p).ln_1p();
    let mut i = 0usize;
    loop {
        let u: f64 = rng.sample(Open01);
        let skip = (u.ln() / log_q).floor();
        if skip >= (levels.len() - i) as f64 {
            return;
        }
        i += skip as usize;
        keep(levels[i], rng);
        i += 1;
        if i >= levels.len() {
            return;
        }
    }
}

/// The Kingman comb `C = Σ_j T_j 1_{V_j}` on `[0, 1)`, truncated at `depth_cut`.
#[derive(Debug, Clone)]
pub struct KingmanComb {
    pub comb: Comb,
    /// `T_1 > T_2 > …`, all `≥ depth_cut`.
    pub levels: Vec<f64>,
    /// `V_j`, index-matched with `levels`.
    pub positions: Vec<f64>,
    pub depth_cut: f64,
}

impl KingmanComb {
    /// Coalescence time of `x` and `y`: the largest `T_j` with `V_j` strictly between them.
    pub fn coalescence_time_naive(&self, x: f64, y: f64) -> f64 {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        self.positions
            .iter()
            .zip(&self.levels)
            .filter(|(&v, _)| v > lo && v < hi)
            .map(|(_, &t)| t)
            .fold(0.0, f64::max)
    }
}

pub fn sample_kingman_comb<R: Rng + ?Sized>(depth_cut: f64, rng: &mut R) -> Result<KingmanComb> {
    LevelSampler::default().kingman_comb(depth_cut, rng)
}

pub fn sample_block_count<R: Rng + ?Sized>(eps: f64, rng: &mut R) -> Result<usize> {
    LevelSampler::default().block_count(eps, rng)
}

/// Blocks of a comb at depth ε: the intervals cut out by atoms higher than ε.
#[derive(Debug, Clone, Serialize)]
pub struct BlockPartition {
    pub depth: f64,
    pub boundaries: Vec<f64>,
    pub lengths: Vec<f64>,
    #[serde(skip)]
    pub block_combs: Vec<Comb>,
}

impl BlockPartition {
    /// Partition of a windowed comb; the window edges act as infinitely high atoms.
    pub fn of_comb(comb: &Comb, eps: f64) -> Result<Self> {
        let w = comb
            .window()
            .ok_or_else(|| Error::invalid("block partition needs a bounded window"))?;
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid(format!("depth {eps} must be positive")));
        }
        if eps < comb.floor() {
            return Err(Error::BelowFloor {
                level: eps,
                floor: comb.floor(),
            });
        }
        let mut boundaries = vec![0.0];
        boundaries.extend(comb.atoms().filter(|&(_, h)| h > eps).map(|(p, _)| p));
        boundaries.push(w);
        let lengths: Vec<f64> = boundaries.windows(2).map(|b| b[1] - b[0]).collect();
        let block_combs = boundaries
            .windows(2)
            .map(|b| comb.segment(b[0], b[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockPartition {
            depth: eps,
            boundaries,
            lengths,
            block_combs,
        })
    }

    pub fn block_count(&self) -> usize {
        self.lengths.len()
    }
}

pub fn blocks_at_depth(kc: &KingmanComb, eps: f64) -> Result<BlockPartition> {
    if eps < kc.depth_cut {
        return Err(Error::BelowFloor {
            level: eps,
            floor: kc.depth_cut,
        });
    }
    BlockPartition::of_comb(&kc.comb, eps)
}

/// `m` i.i.d. `Exp(1)` normalized by their sum: uniform on the simplex.
pub fn sample_dirichlet_lengths<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Vec<f64>> {
    if m < 1 {
        return Err(Error::invalid("Dirichlet dimension must be at least 1"));
    }
    let xi: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = xi.iter().sum();
    Ok(xi.into_iter().map(|x| x / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::rng::replicate_rng;
    use proptest::prelude::*;

    #[test]
    fn levels_strictly_decrease_and_respect_cut() {
        let mut rng = replicate_rng(1, 0);
        for &cut in &[0.5, 0.05, 0.003] {
            let levels = LevelSampler::default().sample(cut, &mut rng).unwrap();
            assert!(levels.windows(2).all(|w| w[0] > w[1]));
            assert!(levels.iter().all(|&t| t >= cut));
        }
    }

    #[test]
    fn first_level_has_mean_two() {
        // E[T_1] = Σ_{k≥2} 2/(k(k-1)) = 2, Var[T_1] = Σ 4/(k(k-1))² = 4π²/3 - 12
        let var = 4.0 * std::f64::consts::PI.powi(2) / 3.0 - 12.0;
        let reps = 10_000;
        let mut rng = replicate_rng(2, 0);
        let s = LevelSampler::default();
        let mean = (0..reps).map(|_| s.sample(0.01, &mut rng).unwrap()[0]).sum::<f64>() / reps as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn tail_modes_by_name() {
        let r = tail_registry();
        assert_eq!(r.names(), vec!["mean", "zero", "sampled-gamma"]);
        let mut rng = replicate_rng(3, 0);
        assert_eq!(r.get("mean").unwrap().remainder(8, &mut rng), 0.25);
        assert_eq!(r.get("zero").unwrap().remainder(8, &mut rng), 0.0);
        let g = r.get("sampled-gamma").unwrap();
        let mean = (0..20_000).map(|_| g.remainder(100, &mut rng)).sum::<f64>() / 20_000.0;
        assert!((mean - 0.02).abs() < 1e-4);
        assert!(LevelSampler::by_name("median").is_err());
    }

    #[test]
    fn extension_kicks_in_for_large_cut() {
        // start index 2 with the remainder forced to zero: T_1 = e_2 alone
        // until extension, which must resolve deeper levels when T_1 ≥ cut.
        let s = LevelSampler::new(Arc::new(ZeroTail));
        let mut rng = replicate_rng(4, 0);
        for _ in 0..200 {
            let levels = s.sample(4.0, &mut rng).unwrap();
            assert!(levels.iter().all(|&t| t >= 4.0));
        }
    }

    #[test]
    fn resource_cap_is_a_hard_error() {
        let s = LevelSampler::default().with_max_levels(1000);
        let mut rng = replicate_rng(5, 0);
        let err = s.sample(1e-3, &mut rng).unwrap_err();
        assert!(err.is_resource_limit());
        assert!(s.sample(0.0, &mut rng).is_err());
    }

    #[test]
    fn comb_atoms_are_levels_above_cut() {
        let mut rng = replicate_rng(6, 0);
        let kc = sample_kingman_comb(0.01, &mut rng).unwrap();
        assert_eq!(kc.comb.len(), kc.levels.len());
        let mut from_pairs: Vec<(f64, f64)> =
            kc.positions.iter().copied().zip(kc.levels.iter().copied()).collect();
        from_pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(kc.comb.to_point_measure(), from_pairs);
        assert_eq!(kc.comb.floor(), 0.01);
        for _ in 0..100 {
            let x: f64 = rng.sample(Open01);
            let y: f64 = rng.sample(Open01);
            assert_eq!(kc.comb.metric(x, y).unwrap(), kc.coalescence_time_naive(x, y));
        }
    }

    #[test]
    fn killed_comb_has_only_early_atoms() {
        let mut rng = replicate_rng(7, 0);
        let c = LevelSampler::default().killed_kingman_comb(1e-3, 0.01, &mut rng).unwrap();
        assert_eq!(c.window(), Some(0.01));
        assert!(c.positions().iter().all(|&p| p < 0.01));
        // about 0.01 · 2/1e-3 = 20 atoms
        assert!(c.len() < 80);
    }

    #[test]
    fn thinning_frequency() {
        let levels = vec![1.0; 100_000];
        let mut rng = replicate_rng(8, 0);
        let mut kept = 0usize;
        thin_levels(&levels, 0.03, &mut rng, |_, _| kept += 1);
        // binomial(1e5, 0.03): sd ≈ 54
        assert!((kept as f64 - 3000.0).abs() < 270.0, "kept {kept}");
        let mut all = 0;
        thin_levels(&levels[..10], 1.0, &mut rng, |_, _| all += 1);
        assert_eq!(all, 10);
    }

    fn fixed_kc() -> KingmanComb {
        KingmanComb {
            comb: Comb::from_sorted(Some(1.0), 0.0, vec![(0.3, 2.0), (0.7, 5.0)]).unwrap(),
            levels: vec![5.0, 2.0],
            positions: vec![0.7, 0.3],
            depth_cut: 0.0,
        }
    }

    #[test]
    fn block_partition_examples() {
        let kc = fixed_kc();
        let b = blocks_at_depth(&kc, 1.0).unwrap();
        assert_eq!(b.boundaries, vec![0.0, 0.3, 0.7, 1.0]);
        assert_eq!(b.block_count(), 3);
        let expect = [0.3, 0.4, 0.3];
        for (l, e) in b.lengths.iter().zip(expect) {
            assert!((l - e).abs() < 1e-12);
        }
        let b = blocks_at_depth(&kc, 3.0).unwrap();
        assert_eq!(b.boundaries, vec![0.0, 0.7, 1.0]);
        assert_eq!(b.block_combs[0].to_point_measure(), vec![(0.3, 2.0)]);
        assert!(b.block_combs[1].is_empty());
    }

    #[test]
    fn blocks_below_cut_are_rejected() {
        let mut rng = replicate_rng(9, 0);
        let kc = sample_kingman_comb(0.1, &mut rng).unwrap();
        assert!(blocks_at_depth(&kc, 0.05).is_err());
        let b = blocks_at_depth(&kc, 0.1).unwrap();
        assert!((b.lengths.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(b.lengths.iter().all(|&l| l > 0.0));
        assert_eq!(b.block_count(), 1 + kc.levels.iter().filter(|&&t| t > 0.1).count());
        for bc in &b.block_combs {
            assert!(bc.heights().iter().all(|&h| h <= 0.1));
        }
    }

    #[test]
    fn dirichlet_examples() {
        let mut rng = replicate_rng(10, 0);
        assert_eq!(sample_dirichlet_lengths(1, &mut rng).unwrap(), vec![1.0]);
        assert!(sample_dirichlet_lengths(0, &mut rng).is_err());
        let v = sample_dirichlet_lengths(17, &mut rng).unwrap();
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn block_count_matches_partition(seed in any::<u64>(), eps in 0.02f64..2.0) {
            let mut rng = replicate_rng(seed, 0);
            let kc = sample_kingman_comb(eps, &mut rng).unwrap();
            let b = blocks_at_depth(&kc, eps).unwrap();
            // ties T_j = ε have probability zero
            prop_assert_eq!(b.block_count(), 1 + kc.levels.len());
        }
    }
}
