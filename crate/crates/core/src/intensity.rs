//! CPP intensity measures described by their tail `Λ(t) = ν([t, ∞))`.
//!
//! Implementations are selected at runtime by name through [`IntensityRegistry`].

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};

pub trait Intensity: Debug + Send + Sync {
    fn name(&self) -> String;

    /// `Λ(t)` for `t > 0`; non-increasing, finite for every `t > 0`.
    fn tail(&self, t: f64) -> f64;

    /// Generalized inverse of the tail: the `t` with `Λ(t) = y`.
    fn tail_inverse(&self, y: f64) -> f64;

    /// Heights are restricted to `(0, u)` when this is `Some(u)`.
    fn support_upper(&self) -> Option<f64> {
        None
    }
}

pub type IntensityMeasure = Arc<dyn Intensity>;

/// `ν(dx) = 2 dx / x²`, so `Λ(t) = 2/t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Brownian;

impl Intensity for Brownian {
    fn name(&self) -> String {
        "brownian".into()
    }

    fn tail(&self, t: f64) -> f64 {
        2.0 / t
    }

    fn tail_inverse(&self, y: f64) -> f64 {
        2.0 / y
    }
}

/// Brownian intensity restricted to heights below `cap`: `Λ(t) = 2/t - 2/cap` on `(0, cap)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CappedBrownian {
    cap: f64,
}

impl CappedBrownian {
    pub fn new(cap: f64) -> Result<Self> {
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::invalid(format!("intensity cap {cap} must be positive")));
        }
        Ok(CappedBrownian { cap })
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }
}

impl Intensity for CappedBrownian {
    fn name(&self) -> String {
        if self.cap == 1.0 {
            "brownian-capped-1".into()
        } else {
            format!("brownian-capped(cap={})", self.cap)
        }
    }

    fn tail(&self, t: f64) -> f64 {
        if t >= self.cap {
            0.0
        } else {
            2.0 / t - 2.0 / self.cap
        }
    }

    fn tail_inverse(&self, y: f64) -> f64 {
        2.0 / (y + 2.0 / self.cap)
    }

    fn support_upper(&self) -> Option<f64> {
        Some(self.cap)
    }
}

pub fn brownian() -> IntensityMeasure {
    Arc::new(Brownian)
}

/// The Brownian intensity capped at 1, `ν(dl) 1_{l<1}`.
pub fn brownian_capped_unit() -> IntensityMeasure {
    Arc::new(CappedBrownian { cap: 1.0 })
}

type Constructor = fn(Option<f64>) -> Result<IntensityMeasure>;

/// Name → constructor table. The optional numeric parameter is the cap.
pub struct IntensityRegistry {
    entries: Vec<(&'static str, Constructor)>,
}

impl Default for IntensityRegistry {
    fn default() -> Self {
        let mut r = IntensityRegistry { entries: Vec::new() };
        r.register("brownian", |_| Ok(brownian()));
        r.register("brownian-capped-1", |_| Ok(brownian_capped_unit()));
        r.register("brownian-capped", |cap| {
            let cap = cap.ok_or_else(|| Error::invalid("brownian-capped needs a cap parameter"))?;
            Ok(Arc::new(CappedBrownian::new(cap)?))
        });
        r
    }
}

impl IntensityRegistry {
    pub fn register(&mut self, name: &'static str, ctor: Constructor) {
        self.entries.retain(|(n, _)| *n != name);
        self.entries.push((name, ctor));
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn build(&self, name: &str, param: Option<f64>) -> Result<IntensityMeasure> {
        let (_, ctor) = self
            .entries
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "intensity",
                name: name.into(),
                known: self.names().join(", "),
            })?;
        ctor(param)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_tail_and_inverse() {
        let b = Brownian;
        assert_eq!(b.tail(0.5), 4.0);
        assert_eq!(b.tail(1.0), 2.0);
        assert_eq!(b.tail_inverse(4.0), 0.5);
        assert_eq!(b.support_upper(), None);
    }

    #[test]
    fn capped_tail_vanishes_above_cap() {
        let c = CappedBrownian::new(1.0).unwrap();
        assert_eq!(c.tail(1.0), 0.0);
        assert_eq!(c.tail(3.0), 0.0);
        assert!((c.tail(0.5) - 2.0).abs() < 1e-15);
        for &t in &[0.01, 0.2, 0.5, 0.9] {
            assert!((c.tail_inverse(c.tail(t)) - t).abs() < 1e-12);
        }
        assert_eq!(c.tail_inverse(0.0), 1.0);
        assert!(CappedBrownian::new(0.0).is_err());
    }

    #[test]
    fn tails_are_non_increasing() {
        let r = IntensityRegistry::default();
        for name in ["brownian", "brownian-capped-1"] {
            let m = r.build(name, None).unwrap();
            let mut prev = f64::INFINITY;
            for i in 1..200 {
                let v = m.tail(i as f64 * 0.01);
                assert!(v <= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn registry_lookup() {
        let r = IntensityRegistry::default();
        assert_eq!(r.build("brownian", None).unwrap().name(), "brownian");
        assert_eq!(r.build("brownian-capped", Some(2.0)).unwrap().support_upper(), Some(2.0));
        assert!(r.build("brownian-capped", None).is_err());
        assert!(matches!(r.build("levy", None), Err(Error::UnknownStrategy { .. })));
    }
}
