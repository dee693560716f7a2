//! Immutable combs and the comb metric.
//!
//! A [`Comb`] stores its atoms sorted by position together with a sparse table
//! over their heights, so the metric `d(x, y) = sup{h : x ∧ y < p < x ∨ y}` is
//! a binary search plus an O(1) range-maximum lookup.
//!
//! Combs produced by samplers are usually *floored*: atoms lower than
//! [`Comb::floor`] were never generated. Queries whose answer could depend on
//! those missing atoms are rejected (see [`Comb::first_exceed`]).

mod rmq;

pub use rmq::SparseTable;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wire format: `{"window": W or null, "floor": δ, "atoms": [[p, h], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CombJson {
    window: Option<f64>,
    floor: f64,
    atoms: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CombJson", into = "CombJson")]
pub struct Comb {
    window: Option<f64>,
    floor: f64,
    positions: Vec<f64>,
    heights: Vec<f64>,
    table: SparseTable,
}

impl TryFrom<CombJson> for Comb {
    type Error = Error;

    fn try_from(raw: CombJson) -> Result<Self> {
        let atoms = raw.atoms.into_iter().map(|[p, h]| (p, h)).collect();
        Comb::from_sorted(raw.window, raw.floor, atoms)
    }
}

impl From<Comb> for CombJson {
    fn from(c: Comb) -> Self {
        CombJson {
            window: c.window,
            floor: c.floor,
            atoms: c
                .positions
                .iter()
                .zip(&c.heights)
                .map(|(&p, &h)| [p, h])
                .collect(),
        }
    }
}

impl Comb {
    /// Builds a comb from atoms already sorted by strictly increasing position.
    ///
    /// `window = None` means the window is unbounded. Every invariant is
    /// checked; unsorted or duplicated positions are rejected.
    pub fn from_sorted(window: Option<f64>, floor: f64, atoms: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(w) = window {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidComb(format!("window length {w} must be positive")));
            }
        }
        if !(floor.is_finite() && floor >= 0.0) {
            return Err(Error::InvalidComb(format!("floor {floor} must be non-negative")));
        }
        let mut prev = f64::NEG_INFINITY;
        for &(p, h) in &atoms {
            if !(p.is_finite() && p >= 0.0) || window.is_some_and(|w| p >= w) {
                return Err(Error::InvalidComb(format!("atom position {p} outside window")));
            }
            if p <= prev {
                return Err(Error::InvalidComb(format!(
                    "atom positions must be strictly increasing ({prev} then {p})"
                )));
            }
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidComb(format!("atom height {h} must be positive")));
            }
            if h < floor {
                return Err(Error::InvalidComb(format!("atom height {h} below floor {floor}")));
            }
            prev = p;
        }
        let (positions, heights): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
        let table = SparseTable::new(&heights);
        Ok(Comb {
            window,
            floor,
            positions,
            heights,
            table,
        })
    }

    /// Sorts the atoms by position first; duplicates are still rejected.
    pub fn from_unsorted(window: Option<f64>, floor: f64, mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Comb::from_sorted(window, floor, atoms)
    }

    pub fn empty(window: Option<f64>, floor: f64) -> Result<Self> {
        Comb::from_sorted(window, floor, Vec::new())
    }

    pub fn window(&self) -> Option<f64> {
        self.window
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions.iter().copied().zip(self.heights.iter().copied())
    }

    /// The point-measure view: sorted `(position, height)` pairs.
    pub fn to_point_measure(&self) -> Vec<(f64, f64)> {
        self.atoms().collect()
    }

    /// Largest height, or 0 for an atomless comb.
    pub fn max_height(&self) -> f64 {
        self.table.max(0, self.len()).unwrap_or(0.0)
    }

    fn check_query_point(&self, x: f64) -> Result<()> {
        if !(x.is_finite() && x >= 0.0) || self.window.is_some_and(|w| x > w) {
            return Err(Error::OutsideWindow(x));
        }
        if self.positions.binary_search_by(|p| p.total_cmp(&x)).is_ok() {
            return Err(Error::AtAtomPosition(x));
        }
        Ok(())
    }

    /// Index range of atoms strictly inside `(a, b)`, `a <= b`.
    fn interior(&self, a: f64, b: f64) -> (usize, usize) {
        let lo = self.positions.partition_point(|&p| p <= a);
        let hi = self.positions.partition_point(|&p| p < b);
        (lo, hi.max(lo))
    }

    /// The comb metric: sup of the heights strictly between `x` and `y`.
    ///
    /// Both points must lie in the closed window `[0, W]` (the comb vanishes
    /// at `W`) and must not coincide with an atom.
    pub fn metric(&self, x: f64, y: f64) -> Result<f64> {
        self.check_query_point(x)?;
        self.check_query_point(y)?;
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        let (lo, hi) = self.interior(a, b);
        Ok(self.table.max(lo, hi).unwrap_or(0.0))
    }

    /// `k_t`: keeps atoms with position `< t` and shrinks the window to `min(W, t)`.
    pub fn kill(&self, t: f64) -> Result<Comb> {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("kill time {t} must be positive")));
        }
        let keep = self.positions.partition_point(|&p| p < t);
        let window = Some(self.window.map_or(t, |w| w.min(t)));
        Ok(Comb {
            window,
            floor: self.floor,
            positions: self.positions[..keep].to_vec(),
            heights: self.heights[..keep].to_vec(),
            table: SparseTable::new(&self.heights[..keep]),
        })
    }

    /// `l_x`: smallest atom position whose height is strictly above `x`.
    ///
    /// Fails when `x` is below the floor, since unrepresented atoms could
    /// then change the answer.
    pub fn first_exceed(&self, x: f64) -> Result<Option<f64>> {
        if !(x > 0.0) {
            return Err(Error::invalid(format!("level {x} must be positive")));
        }
        if x < self.floor {
            return Err(Error::BelowFloor {
                level: x,
                floor: self.floor,
            });
        }
        Ok(self.table.first_above(x).map(|i| self.positions[i]))
    }

    /// `k_{l_x}`: kills the comb at its first atom higher than `x` (no-op if none).
    pub fn kill_at_first_exceed(&self, x: f64) -> Result<Comb> {
        match self.first_exceed(x)? {
            Some(t) if t > 0.0 => self.kill(t),
            // an atom at 0 would leave an empty domain; measure-zero for samplers
            Some(_) => Err(Error::invalid("first exceedance at position 0")),
            None => Ok(self.clone()),
        }
    }

    fn map_atoms(
        &self,
        window: Option<f64>,
        floor: f64,
        f: impl Fn((f64, f64)) -> (f64, f64),
    ) -> Result<Comb> {
        Comb::from_sorted(window, floor, self.atoms().map(f).collect())
    }

    /// The scaling operator: atom `(p, h)` maps to `(a·p, h/a)`.
    ///
    /// The window becomes `[0, a·W)` and the floor `δ/a`.
    pub fn scale(&self, a: f64) -> Result<Comb> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!("scale factor {a} must be positive")));
        }
        self.map_atoms(self.window.map(|w| w * a), self.floor / a, |(p, h)| (p * a, h / a))
    }

    /// Uniform dilation of both axes: atom `(p, h)` maps to `(a·p, a·h)`.
    ///
    /// This is the rescaling under which the Brownian CPP is self-similar;
    /// `dilate(c, 1/ε)` magnifies the genealogy at time and space scale ε.
    pub fn dilate(&self, a: f64) -> Result<Comb> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!("dilation factor {a} must be positive")));
        }
        self.map_atoms(self.window.map(|w| w * a), self.floor * a, |(p, h)| (p * a, h * a))
    }

    /// `k_{end-start} C(· + start)`: atoms strictly inside `(start, end)`,
    /// re-based to 0, on the window `[0, end - start)`.
    pub fn segment(&self, start: f64, end: f64) -> Result<Comb> {
        if !(start.is_finite() && start >= 0.0 && end > start) {
            return Err(Error::invalid(format!("bad segment [{start}, {end})")));
        }
        let len = end - start;
        let (lo, hi) = self.interior(start, end);
        let atoms = (lo..hi)
            .map(|i| (self.positions[i] - start, self.heights[i]))
            .filter(|&(p, _)| p < len)
            .collect();
        Comb::from_sorted(Some(len), self.floor, atoms)
    }
}
