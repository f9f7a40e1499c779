//! Tightest zone and octagon abstractions of one affine map `y = Wx + b`
//! over a box, in closed-form constants, tropical external/internal form,
//! and DBM form.
//!
//! Variables are ordered `(x_1..x_m, y_1..y_n)` throughout.

use serde::{Deserialize, Serialize};

use crate::dbm::{Dbm, OctDbm};
use crate::error::{Error, Result};
use crate::hyperbox::Hyperbox;
use crate::tropical::{self, AffineForm, TropExternal, TropInternal, TropRow};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineLayer {
    /// `n × m`, row `i` holds the weights of output `i`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub in_box: Hyperbox,
}

impl AffineLayer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, in_box: Hyperbox) -> Result<Self> {
        if weights.len() != bias.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                found: bias.len(),
            });
        }
        for row in &weights {
            if row.len() != in_box.dim() {
                return Err(Error::DimensionMismatch {
                    expected: in_box.dim(),
                    found: row.len(),
                });
            }
        }
        if weights.iter().flatten().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite weight or bias".into()));
        }
        Ok(AffineLayer {
            weights,
            bias,
            in_box,
        })
    }

    pub fn inputs(&self) -> usize {
        self.in_box.dim()
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// Same map over another box.
    pub fn with_box(&self, in_box: Hyperbox) -> AffineLayer {
        AffineLayer {
            weights: self.weights.clone(),
            bias: self.bias.clone(),
            in_box,
        }
    }

    /// `max` and `min` over the box of `Σ_j coef_j x_j`.
    fn range_of(&self, coef: impl Iterator<Item = f64>) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (c, iv) in coef.zip(self.in_box.intervals()) {
            if c > 0.0 {
                hi += c * iv.hi;
                lo += c * iv.lo;
            } else if c < 0.0 {
                hi += c * iv.lo;
                lo += c * iv.hi;
            }
        }
        (lo, hi)
    }
}

/// Constants of the tightest zone containing the graph of the layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneConstants {
    /// `m_i`: lower bound of `y_i`.
    pub lower: Vec<f64>,
    /// `M_i`: upper bound of `y_i`.
    pub upper: Vec<f64>,
    /// `Δ[i1][i2]`: upper bound of `y_i1 − y_i2`.
    pub diff: Vec<Vec<f64>>,
    /// `δ[i][j]`: slack of the `y_i − x_j` bounds.
    pub slack: Vec<Vec<f64>>,
    /// `d[i1][i2] = Δ[i1][i2] + m_i2`.
    pub d: Vec<Vec<f64>>,
    /// `c[i1][i2] = M_i1 − Δ[i1][i2]`.
    pub c: Vec<Vec<f64>>,
}

/// Zone constants plus the sum bounds needed for the octagon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OctConstants {
    pub zone: ZoneConstants,
    /// `Γ[i1][i2]`: upper bound of `y_i1 + y_i2`.
    pub sum_upper: Vec<Vec<f64>>,
    /// `L[i1][i2]`: lower bound of `y_i1 + y_i2`.
    pub sum_lower: Vec<Vec<f64>>,
    /// `γ[i][j]`: slack of the `y_i + x_j` bounds.
    pub sum_slack: Vec<Vec<f64>>,
}

fn slack_of(w: f64, width: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else if w <= 1.0 {
        w * width
    } else {
        width
    }
}

pub fn zone_constants(layer: &AffineLayer) -> ZoneConstants {
    let n = layer.outputs();
    let w = &layer.weights;
    let b = &layer.bias;
    let (mut lower, mut upper) = (vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let (lo, hi) = layer.range_of(w[i].iter().copied());
        lower[i] = lo + b[i];
        upper[i] = hi + b[i];
    }
    let diff: Vec<Vec<f64>> = (0..n)
        .map(|i1| {
            (0..n)
                .map(|i2| {
                    if i1 == i2 {
                        return 0.0;
                    }
                    let (_, hi) = layer.range_of(w[i1].iter().zip(&w[i2]).map(|(a, c)| a - c));
                    hi + b[i1] - b[i2]
                })
                .collect()
        })
        .collect();
    let slack = (0..n)
        .map(|i| {
            layer
                .in_box
                .intervals()
                .iter()
                .zip(&w[i])
                .map(|(iv, &wij)| slack_of(wij, iv.width()))
                .collect()
        })
        .collect();
    let d = (0..n)
        .map(|i1| (0..n).map(|i2| diff[i1][i2] + lower[i2]).collect())
        .collect();
    let c = (0..n)
        .map(|i1| (0..n).map(|i2| upper[i1] - diff[i1][i2]).collect())
        .collect();
    ZoneConstants {
        lower,
        upper,
        diff,
        slack,
        d,
        c,
    }
}

/// The `m + n + 1` tropical inequalities describing the tightest zone.
pub fn zone_external(k: &ZoneConstants, layer: &AffineLayer) -> TropExternal {
    let m = layer.inputs();
    let n = layer.outputs();
    let dim = m + n;
    let bx = &layer.in_box;
    let mut rows = Vec::with_capacity(m + n + 1);

    // every variable below its upper bound
    let mut top = AffineForm::bottom(dim);
    for j in 0..m {
        top = top.with_var(j, -bx[j].hi);
    }
    for i in 0..n {
        top = top.with_var(m + i, -k.upper[i]);
    }
    rows.push(TropRow::new(top, AffineForm::bottom(dim).with_const(0.0)));

    // lower bound of x_j together with the y_i − x_j upper bounds
    for j in 0..m {
        let mut lhs = AffineForm::bottom(dim).with_const(0.0);
        for i in 0..n {
            lhs = lhs.with_var(m + i, -k.upper[i] + k.slack[i][j]);
        }
        let rhs = AffineForm::bottom(dim).with_var(j, -bx[j].lo);
        rows.push(TropRow::new(lhs, rhs));
    }

    // lower bound of y_i together with the x_j − y_i and y_i' − y_i bounds
    for i in 0..n {
        let mut lhs = AffineForm::bottom(dim).with_const(0.0);
        for j in 0..m {
            lhs = lhs.with_var(j, -bx[j].hi + k.slack[i][j]);
        }
        for i2 in 0..n {
            lhs = lhs.with_var(m + i2, -k.d[i2][i]);
        }
        let rhs = AffineForm::bottom(dim).with_var(m + i, -k.lower[i]);
        rows.push(TropRow::new(lhs, rhs));
    }
    TropExternal::new(dim, rows).expect("rows built with matching dimension")
}

/// The raw points `A, B_1..B_m, C_1..C_n` (unfiltered, in that order).
pub fn zone_generators(k: &ZoneConstants, layer: &AffineLayer) -> TropInternal {
    let m = layer.inputs();
    let n = layer.outputs();
    let lo = layer.in_box.lower();
    let hi = layer.in_box.upper();
    let mut gens = Vec::with_capacity(1 + m + n);

    let mut a = lo.clone();
    a.extend_from_slice(&k.lower);
    gens.push(a);

    for j in 0..m {
        let mut p = lo.clone();
        p[j] = hi[j];
        p.extend((0..n).map(|i| k.lower[i] + k.slack[i][j]));
        gens.push(p);
    }

    for i in 0..n {
        let mut p: Vec<f64> = (0..m).map(|j| lo[j] + k.slack[i][j]).collect();
        p.extend((0..n).map(|i2| k.c[i][i2]));
        gens.push(p);
    }
    TropInternal::new(m + n, gens).expect("generators built with matching dimension")
}

/// Extreme points of the tightest zone.
pub fn zone_internal(k: &ZoneConstants, layer: &AffineLayer) -> TropInternal {
    zone_generators(k, layer).filter_extreme(tropical::DEFAULT_EPS)
}

/// The tightest zone as a closed DBM over `(x, y)`.
pub fn zone_dbm(k: &ZoneConstants, layer: &AffineLayer) -> Dbm {
    let m = layer.inputs();
    let n = layer.outputs();
    let bx = &layer.in_box;
    let mut d = Dbm::unconstrained(m + n);
    for j in 0..m {
        d.set_upper(j, bx[j].hi);
        d.set_lower(j, bx[j].lo);
        for j2 in 0..m {
            if j != j2 {
                d.set_diff(j, j2, bx[j].hi - bx[j2].lo);
            }
        }
    }
    for i in 0..n {
        d.set_upper(m + i, k.upper[i]);
        d.set_lower(m + i, k.lower[i]);
        for i2 in 0..n {
            if i != i2 {
                d.set_diff(m + i, m + i2, k.diff[i][i2]);
            }
        }
        for j in 0..m {
            d.set_diff(m + i, j, k.upper[i] - bx[j].lo - k.slack[i][j]);
            d.set_diff(j, m + i, bx[j].hi - k.slack[i][j] - k.lower[i]);
        }
    }
    d.close().unwrap_or(d)
}

fn sum_slack_of(w: f64, width: f64) -> f64 {
    if w >= 0.0 {
        0.0
    } else if w >= -1.0 {
        -w * width
    } else {
        width
    }
}

pub fn oct_constants(layer: &AffineLayer) -> OctConstants {
    let zone = zone_constants(layer);
    let n = layer.outputs();
    let w = &layer.weights;
    let b = &layer.bias;
    let mut sum_upper = vec![vec![0.0; n]; n];
    let mut sum_lower = vec![vec![0.0; n]; n];
    for i1 in 0..n {
        for i2 in 0..n {
            let (lo, hi) = layer.range_of(w[i1].iter().zip(&w[i2]).map(|(a, c)| a + c));
            sum_upper[i1][i2] = hi + b[i1] + b[i2];
            sum_lower[i1][i2] = lo + b[i1] + b[i2];
        }
    }
    let sum_slack = (0..n)
        .map(|i| {
            layer
                .in_box
                .intervals()
                .iter()
                .zip(&w[i])
                .map(|(iv, &wij)| sum_slack_of(wij, iv.width()))
                .collect()
        })
        .collect();
    OctConstants {
        zone,
        sum_upper,
        sum_lower,
        sum_slack,
    }
}

/// The tightest octagon as a closed coherent doubled DBM over `(x, y)`.
pub fn oct_dbm(k: &OctConstants, layer: &AffineLayer) -> OctDbm {
    let m = layer.inputs();
    let n = layer.outputs();
    let z = &k.zone;
    let bx = &layer.in_box;
    let mut o = OctDbm::unconstrained(m + n);
    for j in 0..m {
        o.add_upper(j, bx[j].hi);
        o.add_lower(j, bx[j].lo);
        for j2 in 0..m {
            if j != j2 {
                o.add_diff(j, j2, bx[j].hi - bx[j2].lo);
                o.add_sum_upper(j, j2, bx[j].hi + bx[j2].hi);
                o.add_sum_lower(j, j2, bx[j].lo + bx[j2].lo);
            }
        }
    }
    for i in 0..n {
        let y = m + i;
        o.add_upper(y, z.upper[i]);
        o.add_lower(y, z.lower[i]);
        for i2 in 0..n {
            if i != i2 {
                o.add_diff(y, m + i2, z.diff[i][i2]);
                o.add_sum_upper(y, m + i2, k.sum_upper[i][i2]);
                o.add_sum_lower(y, m + i2, k.sum_lower[i][i2]);
            }
        }
        for j in 0..m {
            let (lo, hi) = (bx[j].lo, bx[j].hi);
            o.add_diff(y, j, z.upper[i] - lo - z.slack[i][j]);
            o.add_diff(j, y, hi - z.slack[i][j] - z.lower[i]);
            o.add_sum_upper(y, j, z.upper[i] + hi - k.sum_slack[i][j]);
            o.add_sum_lower(y, j, z.lower[i] + lo + k.sum_slack[i][j]);
        }
    }
    o.close().unwrap_or(o)
}

/// Extreme points of the octagon in the doubled space
/// `(x⁺, y⁺, x⁻, y⁻)`, obtained from the doubled zone.
pub fn oct_internal(k: &OctConstants, layer: &AffineLayer) -> Result<TropInternal> {
    let zone = oct_dbm(k, layer).to_zone().ok_or(Error::EmptyAbstraction)?;
    tropical::zone_to_internal(&zone)
}
