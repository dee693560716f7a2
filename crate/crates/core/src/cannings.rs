//! Discrete Cannings model as a flow of bridges.
//!
//! Individuals of each generation are labelled `1..=N` in planar order. The
//! bridge `B_{r,r+1}(x) = Σ_{k≤x} ν_r^k` counts the generation-`r+1`
//! descendants of the first `x` parents; its generalized inverse
//! `φ(x) = inf{y ≥ 1 : B(y) ≥ x}` maps a child to its parent.

use std::fmt::Debug;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::registry::{Named, Registry};
use crate::rng::ReplicateRng;

/// Non-decreasing map of `{0, …, N}` onto itself fixing 0 and `N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscreteBridge {
    values: Vec<u32>,
}

impl DiscreteBridge {
    pub fn identity(size: usize) -> Self {
        DiscreteBridge {
            values: (0..=size as u32).collect(),
        }
    }

    /// Bridge of cumulative offspring counts.
    pub fn from_offspring(offspring: &[u32]) -> Result<Self> {
        if offspring.is_empty() {
            return Err(Error::invalid("offspring vector is empty"));
        }
        let mut values = Vec::with_capacity(offspring.len() + 1);
        values.push(0u32);
        let mut acc = 0u32;
        for &k in offspring {
            acc += k;
            values.push(acc);
        }
        if acc as usize != offspring.len() {
            return Err(Error::invalid(format!(
                "offspring counts sum to {acc}, expected {}",
                offspring.len()
            )));
        }
        Ok(DiscreteBridge { values })
    }

    pub fn from_values(values: Vec<u32>) -> Result<Self> {
        let n = values.len().saturating_sub(1);
        if n == 0 || values[0] != 0 || values[n] as usize != n {
            return Err(Error::invalid("bridge must map 0 to 0 and N to N"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("bridge must be non-decreasing"));
        }
        Ok(DiscreteBridge { values })
    }

    pub fn size(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn value(&self, x: usize) -> u32 {
        self.values[x]
    }

    /// `self` followed by `next`: `x ↦ next(self(x))`.
    pub fn then(&self, next: &DiscreteBridge) -> Result<DiscreteBridge> {
        if self.size() != next.size() {
            return Err(Error::invalid("bridges of different sizes"));
        }
        Ok(DiscreteBridge {
            values: self.values.iter().map(|&v| next.values[v as usize]).collect(),
        })
    }

    /// `φ(x) = inf{y ∈ {1, …, N} : B(y) ≥ x}`.
    pub fn inverse(&self, x: usize) -> Result<usize> {
        let n = self.size();
        if x < 1 || x > n {
            return Err(Error::invalid(format!("individual {x} outside 1..={n}")));
        }
        Ok(1 + self.values[1..].partition_point(|&v| (v as usize) < x))
    }
}

pub fn inverse_flow(b: &DiscreteBridge, x: usize) -> Result<usize> {
    b.inverse(x)
}

/// Exchangeable offspring vectors of a fixed population size.
pub trait OffspringLaw: Named + Debug + Send + Sync {
    fn offspring(&self, size: usize, rng: &mut ReplicateRng) -> Vec<u32>;
}

/// Each child picks its parent uniformly: multinomial `(N; 1/N, …, 1/N)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct WrightFisher;

/// One uniformly chosen parent has two children, another none.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moran;

impl Named for WrightFisher {
    fn name(&self) -> &'static str {
        "wright-fisher"
    }
}

impl Named for Moran {
    fn name(&self) -> &'static str {
        "moran"
    }
}

impl OffspringLaw for WrightFisher {
    fn offspring(&self, size: usize, rng: &mut ReplicateRng) -> Vec<u32> {
        let mut counts = vec![0u32; size];
        for _ in 0..size {
            counts[rng.random_range(0..size)] += 1;
        }
        counts
    }
}

impl OffspringLaw for Moran {
    fn offspring(&self, size: usize, rng: &mut ReplicateRng) -> Vec<u32> {
        let mut counts = vec![1u32; size];
        let birth = rng.random_range(0..size);
        let mut death = rng.random_range(0..size - 1);
        if death >= birth {
            death += 1;
        }
        counts[birth] = 2;
        counts[death] = 0;
        counts
    }
}

pub fn offspring_registry() -> Registry<dyn OffspringLaw> {
    let mut r: Registry<dyn OffspringLaw> = Registry::new("offspring law");
    r.register(Arc::new(WrightFisher)).register(Arc::new(Moran));
    r
}

pub fn sample_offspring_bridge(size: usize, law: &dyn OffspringLaw, rng: &mut ReplicateRng) -> Result<DiscreteBridge> {
    if size < 2 {
        return Err(Error::invalid(format!("population size {size} must be at least 2")));
    }
    DiscreteBridge::from_offspring(&law.offspring(size, rng))
}

/// `B_{r,r+1}` for `r = 0, …, T-1`.
#[derive(Debug, Clone, Serialize)]
pub struct BridgeFlow {
    size: usize,
    generations: Vec<DiscreteBridge>,
}

impl BridgeFlow {
    pub fn sample(size: usize, generations: usize, law: &dyn OffspringLaw, rng: &mut ReplicateRng) -> Result<Self> {
        let generations = (0..generations)
            .map(|_| sample_offspring_bridge(size, law, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(BridgeFlow { size, generations })
    }

    pub fn from_bridges(generations: Vec<DiscreteBridge>) -> Result<Self> {
        let size = generations
            .first()
            .map(DiscreteBridge::size)
            .ok_or_else(|| Error::invalid("flow needs at least one generation"))?;
        if generations.iter().any(|b| b.size() != size) {
            return Err(Error::invalid("bridges of different sizes"));
        }
        Ok(BridgeFlow { size, generations })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.generations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generations.is_empty()
    }

    pub fn bridge(&self, r: usize) -> &DiscreteBridge {
        &self.generations[r]
    }

    fn check_range(&self, m: usize, n: usize) -> Result<()> {
        if m > n || n > self.len() {
            return Err(Error::invalid(format!(
                "generation range {m}..{n} outside 0..={}",
                self.len()
            )));
        }
        Ok(())
    }

    fn check_individual(&self, x: usize) -> Result<()> {
        if x < 1 || x > self.size {
            return Err(Error::invalid(format!("individual {x} outside 1..={}", self.size)));
        }
        Ok(())
    }

    /// `B_{m,n} = B_{n-1,n} ∘ ⋯ ∘ B_{m,m+1}`; identity when `m = n`.
    pub fn compose(&self, m: usize, n: usize) -> Result<DiscreteBridge> {
        self.check_range(m, n)?;
        let mut b = DiscreteBridge::identity(self.size);
        for g in &self.generations[m..n] {
            b = b.then(g)?;
        }
        Ok(b)
    }

    /// `φ_{m,n}(x)`: ancestor at generation `m` of individual `x` of generation `n`,
    /// stepping back one generation at a time.
    pub fn ancestor(&self, m: usize, n: usize, x: usize) -> Result<usize> {
        self.check_range(m, n)?;
        self.check_individual(x)?;
        let mut a = x;
        for g in self.generations[m..n].iter().rev() {
            a = g.inverse(a)?;
        }
        Ok(a)
    }

    /// `k ↦ φ_{n-k,n}(x)` for `k = 0, …, n`.
    pub fn lineage(&self, n: usize, x: usize) -> Result<Vec<usize>> {
        self.check_range(0, n)?;
        let mut out = Vec::with_capacity(n + 1);
        self.check_individual(x)?;
        let mut a = x;
        out.push(a);
        for g in self.generations[..n].iter().rev() {
            a = g.inverse(a)?;
            out.push(a);
        }
        Ok(out)
    }

    /// Smallest `k` with `φ_{T-k,T}(x) = φ_{T-k,T}(y)`, looking back from the last generation.
    pub fn pair_coalescence_generation(&self, x: usize, y: usize) -> Result<Option<usize>> {
        if x == y {
            return Err(Error::invalid("pair coalescence needs two distinct individuals"));
        }
        self.check_individual(x)?;
        self.check_individual(y)?;
        let (mut a, mut b) = (x, y);
        for (k, g) in self.generations.iter().rev().enumerate() {
            a = g.inverse(a)?;
            b = g.inverse(b)?;
            if a == b {
                return Ok(Some(k + 1));
            }
        }
        Ok(None)
    }
}

/// Pair coalescence generation with fresh bridges drawn one generation back at a time.
pub fn pair_coalescence_lazy(
    size: usize,
    law: &dyn OffspringLaw,
    x: usize,
    y: usize,
    max_generations: u64,
    rng: &mut ReplicateRng,
) -> Result<Option<u64>> {
    if x == y {
        return Err(Error::invalid("pair coalescence needs two distinct individuals"));
    }
    if x < 1 || y < 1 || x > size || y > size {
        return Err(Error::invalid(format!("individuals {x}, {y} outside 1..={size}")));
    }
    let (mut a, mut b) = (x, y);
    for k in 1..=max_generations {
        let g = sample_offspring_bridge(size, law, rng)?;
        a = g.inverse(a)?;
        b = g.inverse(b)?;
        if a == b {
            return Ok(Some(k));
        }
    }
    Ok(None)
}
