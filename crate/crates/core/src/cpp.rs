//! Coalescent point processes.
//!
//! A CPP with intensity `ν` is a Poisson point process of `(position, height)`
//! atoms with intensity `dt ⊗ ν(dx)`. Heights accumulate at 0 for the Brownian
//! intensity, so every sample is cut at a generation floor `δ > 0`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, Gamma, Open01, Poisson};
use serde::Serialize;

use crate::comb::Comb;
use crate::error::{Error, Result};
use crate::intensity::{brownian_capped_unit, IntensityMeasure};

#[derive(Debug, Clone)]
pub struct CppSample {
    pub comb: Comb,
    pub intensity: IntensityMeasure,
    pub generation_floor: f64,
}

/// `k_L(ℳ)` with `L ~ Gamma(n+1, rate 2)` and `ℳ` the Brownian CPP capped at height 1.
#[derive(Debug, Clone)]
pub struct SizeBiasedKilledCpp {
    pub comb: Comb,
    pub kill_length: f64,
    pub order: usize,
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<usize> {
    if mean == 0.0 {
        return Ok(0);
    }
    let p = Poisson::new(mean).map_err(|e| Error::invalid(format!("Poisson mean {mean}: {e}")))?;
    let k: f64 = p.sample(rng);
    Ok(k as usize)
}

pub fn sample_cpp<R: Rng + ?Sized>(
    intensity: &IntensityMeasure,
    window_length: f64,
    floor: f64,
    rng: &mut R,
) -> Result<CppSample> {
    if !(window_length.is_finite() && window_length > 0.0) {
        return Err(Error::invalid(format!("window length {window_length} must be positive")));
    }
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::invalid(format!("generation floor {floor} must be positive")));
    }
    let mass = intensity.tail(floor);
    if !mass.is_finite() {
        return Err(Error::invalid(format!("intensity tail at floor {floor} is not finite")));
    }
    let count = poisson_count(window_length * mass, rng)?;
    let heights: Vec<f64> = (0..count)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            intensity.tail_inverse(u * mass).max(floor)
        })
        .collect();
    loop {
        let atoms = heights
            .iter()
            .map(|&h| (rng.random::<f64>() * window_length, h))
            .collect();
        match Comb::from_unsorted(Some(window_length), floor, atoms) {
            Ok(comb) => {
                return Ok(CppSample {
                    comb,
                    intensity: intensity.clone(),
                    generation_floor: floor,
                })
            }
            Err(Error::InvalidComb(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// `k_{l_1}(𝒞)`: `l_1 ~ Exp(2)` is the first position of an atom higher than 1,
/// and the atoms before it form a CPP capped at height 1.
pub fn sample_killed_brownian_cpp<R: Rng + ?Sized>(floor: f64, rng: &mut R) -> Result<(CppSample, f64)> {
    if !(floor > 0.0 && floor < 1.0) {
        return Err(Error::invalid(format!("floor {floor} must lie in (0, 1)")));
    }
    let l1 = Exp::new(2.0).expect("rate 2").sample(rng);
    let sample = sample_cpp(&brownian_capped_unit(), l1, floor, rng)?;
    Ok((sample, l1))
}

pub fn sample_size_biased_killed_cpp<R: Rng + ?Sized>(
    n: usize,
    floor: f64,
    rng: &mut R,
) -> Result<SizeBiasedKilledCpp> {
    if !(floor > 0.0 && floor < 1.0) {
        return Err(Error::invalid(format!("floor {floor} must lie in (0, 1)")));
    }
    let kill_length = sample_gamma_rate2(n, rng);
    let sample = sample_cpp(&brownian_capped_unit(), kill_length, floor, rng)?;
    Ok(SizeBiasedKilledCpp {
        comb: sample.comb,
        kill_length,
        order: n,
    })
}

/// `Gamma(n+1, rate 2)`, density `∝ x^n e^{-2x}`.
pub fn sample_gamma_rate2<R: Rng + ?Sized>(n: usize, rng: &mut R) -> f64 {
    Gamma::new(n as f64 + 1.0, 0.5).expect("positive shape").sample(rng)
}

/// Independent sups of a CPP over consecutive disjoint intervals of the given
/// lengths: `P(S ≤ σ) = exp(-Δ Λ(σ))`, drawn as `Λ⁻¹(E/Δ)` with `E ~ Exp(1)`.
pub fn exact_interval_sups<R: Rng + ?Sized>(
    spacings: &[f64],
    intensity: &IntensityMeasure,
    rng: &mut R,
) -> Result<Vec<f64>> {
    spacings
        .iter()
        .map(|&d| {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid(format!("spacing {d} must be positive")));
            }
            let e: f64 = rng.sample(Exp1);
            Ok(intensity.tail_inverse(e / d))
        })
        .collect()
}

/// Summary of a CPP draw, for record output.
#[derive(Debug, Clone, Serialize)]
pub struct CppSummary {
    pub intensity: String,
    pub window: f64,
    pub floor: f64,
    pub atoms: usize,
    pub max_height: f64,
}

impl CppSample {
    pub fn summary(&self) -> CppSummary {
        CppSummary {
            intensity: self.intensity.name(),
            window: self.comb.window().unwrap_or(f64::INFINITY),
            floor: self.generation_floor,
            atoms: self.comb.len(),
            max_height: self.comb.max_height(),
        }
    }
}
