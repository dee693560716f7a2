//! Comb representation of exchangeable genealogies.
//!
//! A *comb* is a finite set of `(position, height)` atoms on a window `[0, W)`.
//! The sup of the heights strictly between two points is their coalescence
//! time, which makes the comb an ultrametric encoding of a genealogy.
//!
//! The crate provides:
//!
//! - [`comb`]: the immutable [`Comb`] type, its metric (answered with a sparse
//!   table), and the kill / scale / first-exceedance operators.
//! - [`intensity`]: tail functions `Λ(t) = ν([t, ∞))` of coalescent point
//!   process intensities, registered by name.
//! - [`kingman`]: exact samplers for the Kingman comb, the pure-death block
//!   count and Dirichlet block lengths, plus the depth-ε block partition.
//! - [`cpp`]: coalescent point process samplers (generic, Brownian, killed,
//!   size-biased killed) and exact interval-sup sampling.
//! - [`conditional`]: quenched and averaged conditional sampling of `n`
//!   individuals whose common ancestor is shallower than ε, and their limits.
//! - [`diffusion`]: Euler–Maruyama hitting times of the Feller diffusion and
//!   the exact CPP-sup sampler they should agree with.
//! - [`cannings`]: discrete flows of bridges and ancestral lineages.
//! - [`stats`]: the KS / chi-square / correlation battery producing
//!   [`TestReport`]s.
//! - [`verify`]: named Monte-Carlo verification experiments.
//! - [`registry`]: the name-keyed table behind every runtime-selectable strategy.

#![forbid(unsafe_code)]

pub mod cannings;
pub mod comb;
pub mod conditional;
pub mod cpp;
pub mod diffusion;
pub mod error;
pub mod intensity;
pub mod kingman;
pub mod record;
pub mod registry;
pub mod rng;
pub mod stats;
pub mod verify;

pub use comb::Comb;
pub use error::{Error, Result};
pub use intensity::{Intensity, IntensityMeasure};
pub use stats::TestReport;
