//! Hitting time of 0 by the Feller diffusion `dz = √z dw`.
//!
//! The Euler–Maruyama path is checked against the exact law
//! `P(σ_x ≤ t) = exp(-2x/t)` of the sup of the Brownian CPP over `[0, x]`.

use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

/// Default step `1e-4 · x`.
pub fn default_dt(x: f64) -> f64 {
    1e-4 * x
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffusionPath {
    pub initial: f64,
    pub step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<f64>>,
    /// `None` when the step budget ran out before absorption.
    pub hit_time: Option<f64>,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitTime {
    /// Elapsed time; the budget horizon when censored.
    pub time: f64,
    pub censored: bool,
}

fn validate(x: f64, dt: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::invalid(format!("initial state {x} must be positive")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("time step {dt} must be positive")));
    }
    Ok(())
}

/// `z ← max(0, z + √(z dt) N)` until absorption at 0.
pub fn feller_hit_time<R: Rng + ?Sized>(x: f64, dt: f64, max_steps: u64, rng: &mut R) -> Result<HitTime> {
    validate(x, dt)?;
    let sdt = dt.sqrt();
    let mut z = x;
    let mut steps = 0u64;
    while z > 0.0 {
        if steps == max_steps {
            return Ok(HitTime {
                time: steps as f64 * dt,
                censored: true,
            });
        }
        let n: f64 = rng.sample(StandardNormal);
        z += (z.sqrt() * sdt) * n;
        if z < 0.0 {
            z = 0.0;
        }
        steps += 1;
    }
    Ok(HitTime {
        time: steps as f64 * dt,
        censored: false,
    })
}

/// Same scheme, optionally recording every state.
pub fn simulate_feller_path<R: Rng + ?Sized>(
    x: f64,
    dt: f64,
    max_steps: u64,
    record: bool,
    rng: &mut R,
) -> Result<DiffusionPath> {
    validate(x, dt)?;
    let sdt = dt.sqrt();
    let mut z = x;
    let mut steps = 0u64;
    let mut trajectory = record.then(|| vec![x]);
    while z > 0.0 && steps < max_steps {
        let n: f64 = rng.sample(StandardNormal);
        z = (z + (z.sqrt() * sdt) * n).max(0.0);
        steps += 1;
        if let Some(t) = trajectory.as_mut() {
            t.push(z);
        }
    }
    Ok(DiffusionPath {
        initial: x,
        step: dt,
        trajectory,
        hit_time: (z == 0.0).then_some(steps as f64 * dt),
        steps,
    })
}

/// `σ_x = sup_{[0,x]} 𝒞` by inversion: `2x / ln(1/U)`.
pub fn cpp_sup_sample<R: Rng + ?Sized>(x: f64, rng: &mut R) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::invalid(format!("interval length {x} must be positive")));
    }
    let u: f64 = rng.sample(Open01);
    Ok(2.0 * x / -u.ln())
}

/// `P(σ_x ≤ t) = exp(-2x/t)`.
pub fn hit_time_cdf(x: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-2.0 * x / t).exp()
    }
}
