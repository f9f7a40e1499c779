//! Scalars of the max-plus semiring `(ℝ ∪ {−∞}, max, +)`.

use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

/// A max-plus scalar: a finite real or the bottom element `−∞`.
///
/// `+` on this type is tropical addition (max) and `*` is tropical
/// multiplication (ordinary addition, absorbing at `−∞`).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaxPlus(pub f64);

impl MaxPlus {
    /// Neutral element of ⊕.
    pub const ZERO: MaxPlus = MaxPlus(f64::NEG_INFINITY);
    /// Neutral element of ⊗.
    pub const ONE: MaxPlus = MaxPlus(0.0);

    pub fn new(v: f64) -> Self {
        MaxPlus(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn oplus(self, rhs: MaxPlus) -> MaxPlus {
        MaxPlus(self.0.max(rhs.0))
    }

    pub fn otimes(self, rhs: MaxPlus) -> MaxPlus {
        if self.is_zero() || rhs.is_zero() {
            MaxPlus::ZERO
        } else {
            MaxPlus(self.0 + rhs.0)
        }
    }
}

impl Add for MaxPlus {
    type Output = MaxPlus;
    fn add(self, rhs: MaxPlus) -> MaxPlus {
        self.oplus(rhs)
    }
}

impl Mul for MaxPlus {
    type Output = MaxPlus;
    fn mul(self, rhs: MaxPlus) -> MaxPlus {
        self.otimes(rhs)
    }
}

impl From<f64> for MaxPlus {
    fn from(v: f64) -> Self {
        MaxPlus(v)
    }
}

impl fmt::Display for MaxPlus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}
