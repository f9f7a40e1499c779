use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serialized as a `[lo, hi]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl TryFrom<(f64, f64)> for Interval {
    type Error = Error;

    fn try_from((lo, hi): (f64, f64)) -> Result<Self> {
        Interval::new(lo, hi)
    }
}

impl From<Interval> for (f64, f64) {
    fn from(iv: Interval) -> Self {
        (iv.lo, iv.hi)
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidInterval(lo, hi));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64, eps: f64) -> bool {
        v >= self.lo - eps && v <= self.hi + eps
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// `[lo, hi] ⊆ [other.lo − eps, other.hi + eps]`
    pub fn within(&self, other: &Interval, eps: f64) -> bool {
        self.lo >= other.lo - eps && self.hi <= other.hi + eps
    }
}

/// An axis-aligned box `∏ [lo_j, hi_j]` with finite bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hyperbox {
    intervals: Vec<Interval>,
}

impl Hyperbox {
    pub fn new(intervals: Vec<Interval>) -> Self {
        Hyperbox { intervals }
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let intervals = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Hyperbox { intervals })
    }

    /// `[lo, hi]^dim`
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        let iv = Interval::new(lo, hi)?;
        Ok(Hyperbox {
            intervals: vec![iv; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn lower(&self) -> Vec<f64> {
        self.intervals.iter().map(|iv| iv.lo).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.intervals.iter().map(|iv| iv.hi).collect()
    }

    pub fn contains(&self, p: &[f64], eps: f64) -> bool {
        p.len() == self.dim()
            && self
                .intervals
                .iter()
                .zip(p)
                .all(|(iv, &v)| iv.contains(v, eps))
    }

    pub fn intersect(&self, other: &Hyperbox) -> Result<Option<Hyperbox>> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .intervals
            .iter()
            .zip(&other.intervals)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()
            .map(Hyperbox::new))
    }

    pub fn within(&self, other: &Hyperbox, eps: f64) -> bool {
        self.dim() == other.dim()
            && self
                .intervals
                .iter()
                .zip(&other.intervals)
                .all(|(a, b)| a.within(b, eps))
    }

    /// Point of the box selected by `t ∈ [0,1]^dim`.
    pub fn lerp(&self, t: &[f64]) -> Vec<f64> {
        self.intervals
            .iter()
            .zip(t)
            .map(|(iv, &s)| iv.lo + s * (iv.hi - iv.lo))
            .collect()
    }

    /// All `2^dim` corners, in binary counting order (bit `j` set means `hi_j`).
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        assert!(d < 24, "too many box vertices to enumerate");
        (0..1usize << d)
            .map(|mask| {
                self.intervals
                    .iter()
                    .enumerate()
                    .map(|(j, iv)| if mask >> j & 1 == 1 { iv.hi } else { iv.lo })
                    .collect()
            })
            .collect()
    }
}

impl std::ops::Index<usize> for Hyperbox {
    type Output = Interval;
    fn index(&self, j: usize) -> &Interval {
        &self.intervals[j]
    }
}

impl FromIterator<Interval> for Hyperbox {
    fn from_iter<I: IntoIterator<Item = Interval>>(iter: I) -> Self {
        Hyperbox::new(iter.into_iter().collect())
    }
}
