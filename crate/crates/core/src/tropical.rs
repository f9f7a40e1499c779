//! Tropical (max-plus) polyhedra in internal and external form.
//!
//! The internal form is a finite list of generators; a point belongs to the
//! polyhedron when it is a tropical affine combination
//! `max_j (λ_j + g_j)` with `max_j λ_j = 0`. Rays are never stored: callers
//! embed into large finite intervals instead.
//!
//! The external form is a list of rows `max(lhs) ≤ max(rhs)` where each side
//! is a max-plus affine form over the variables.

use serde::{Deserialize, Serialize};

use crate::dbm::Dbm;
use crate::error::{Error, Result};
use crate::hyperbox::Interval;
use crate::maxplus::MaxPlus;

/// Default absolute tolerance for membership and generator comparisons.
pub const DEFAULT_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TropInternal {
    dim: usize,
    generators: Vec<Vec<f64>>,
}

impl TropInternal {
    pub fn new(dim: usize, generators: Vec<Vec<f64>>) -> Result<Self> {
        for g in &generators {
            if g.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: g.len(),
                });
            }
            if let Some(k) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::BadIndex(k));
            }
        }
        Ok(TropInternal { dim, generators })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    pub fn into_generators(self) -> Vec<Vec<f64>> {
        self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Residuation membership test with tolerance `eps`.
    pub fn contains(&self, p: &[f64], eps: f64) -> Result<bool> {
        if self.generators.is_empty() {
            return Err(Error::EmptyGenerators);
        }
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        Ok(in_hull(self.generators.iter().map(Vec::as_slice), p, eps))
    }

    /// Drops generators that are tropical affine combinations of the others.
    /// Among generators equal within `eps`, the first is kept.
    pub fn filter_extreme(&self, eps: f64) -> TropInternal {
        let mut uniq: Vec<&Vec<f64>> = Vec::with_capacity(self.generators.len());
        for g in &self.generators {
            if !uniq.iter().any(|u| approx_eq(u, g, eps)) {
                uniq.push(g);
            }
        }
        let mut active = vec![true; uniq.len()];
        for i in 0..uniq.len() {
            active[i] = false;
            let others = uniq
                .iter()
                .zip(&active)
                .filter(|(_, &a)| a)
                .map(|(g, _)| g.as_slice());
            if !in_hull(others, uniq[i], eps) {
                active[i] = true;
            }
        }
        let generators = uniq
            .into_iter()
            .zip(active)
            .filter(|(_, a)| *a)
            .map(|(g, _)| g.clone())
            .collect();
        TropInternal {
            dim: self.dim,
            generators,
        }
    }

    /// Tropical convex hull of the union.
    pub fn union(&self, other: &TropInternal, eps: f64) -> Result<TropInternal> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut generators = self.generators.clone();
        generators.extend(other.generators.iter().cloned());
        Ok(TropInternal {
            dim: self.dim,
            generators,
        }
        .filter_extreme(eps))
    }

    /// Generators of `H × [lo, hi]` with the new coordinate inserted at
    /// `position`. Only generators with no componentwise-smaller companion
    /// get a copy at `hi`.
    pub fn embed(&self, interval: Interval, position: usize) -> Result<TropInternal> {
        if !(interval.lo.is_finite() && interval.hi.is_finite()) || interval.lo > interval.hi {
            return Err(Error::InvalidInterval(interval.lo, interval.hi));
        }
        if position > self.dim {
            return Err(Error::BadIndex(position));
        }
        let gens = &self.generators;
        let dominated = |i: usize| {
            gens.iter().enumerate().any(|(j, pj)| {
                j != i
                    && pj.iter().zip(&gens[i]).all(|(a, b)| a <= b)
                    // exact duplicates: only the first copy counts as undominated
                    && (pj != &gens[i] || j < i)
            })
        };
        let insert = |g: &Vec<f64>, v: f64| {
            let mut out = g.clone();
            out.insert(position, v);
            out
        };
        let mut generators: Vec<Vec<f64>> = gens.iter().map(|g| insert(g, interval.lo)).collect();
        if interval.hi > interval.lo {
            generators.extend(
                (0..gens.len())
                    .filter(|&i| !dominated(i))
                    .map(|i| insert(&gens[i], interval.hi)),
            );
        }
        Ok(TropInternal {
            dim: self.dim + 1,
            generators,
        })
    }

    /// Coordinate projection onto `keep` (in that order), then filtering.
    pub fn project(&self, keep: &[usize], eps: f64) -> Result<TropInternal> {
        if let Some(&bad) = keep.iter().find(|&&k| k >= self.dim) {
            return Err(Error::BadIndex(bad));
        }
        let generators = self
            .generators
            .iter()
            .map(|g| keep.iter().map(|&k| g[k]).collect())
            .collect();
        Ok(TropInternal {
            dim: keep.len(),
            generators,
        }
        .filter_extreme(eps))
    }

    /// Applies `f` to every generator (dimension may change), without
    /// filtering.
    pub fn map_generators<F>(&self, new_dim: usize, f: F) -> TropInternal
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        TropInternal {
            dim: new_dim,
            generators: self.generators.iter().map(|g| f(g)).collect(),
        }
    }
}

/// `p ∈ hull(gens)` via the greatest residuated coefficients
/// `λ_j = min(0, min_k (p_k − g_jk))`.
fn in_hull<'a, I>(gens: I, p: &[f64], eps: f64) -> bool
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut recon = vec![f64::NEG_INFINITY; p.len()];
    let mut top = f64::NEG_INFINITY;
    for g in gens {
        let lambda = g
            .iter()
            .zip(p)
            .map(|(gk, pk)| pk - gk)
            .fold(0.0_f64, f64::min);
        top = top.max(lambda);
        for (r, gk) in recon.iter_mut().zip(g) {
            let v = lambda + gk;
            if v > *r {
                *r = v;
            }
        }
    }
    top >= -eps && recon.iter().zip(p).all(|(r, pk)| (r - pk).abs() <= eps)
}

fn approx_eq(a: &[f64], b: &[f64], eps: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= eps)
}

/// Generators of a closed, bounded zone: the lower corner `A` and one point
/// `B_k` per variable.
pub fn zone_to_internal(d: &Dbm) -> Result<TropInternal> {
    zone_to_internal_with(d, DEFAULT_EPS)
}

pub fn zone_to_internal_with(d: &Dbm, eps: f64) -> Result<TropInternal> {
    let n = d.dim();
    for i in 0..=n {
        for j in 0..=n {
            if !d.entry(i, j).is_finite() {
                return Err(Error::InfiniteEntry(i, j));
            }
        }
    }
    if !d.is_closed(eps.max(1e-9) * 10.0) {
        return Err(Error::NotClosed);
    }
    let mut generators = Vec::with_capacity(n + 1);
    generators.push((1..=n).map(|i| -d.entry(0, i)).collect());
    for k in 1..=n {
        let ck0 = d.entry(k, 0);
        generators.push((1..=n).map(|i| ck0 - d.entry(k, i)).collect());
    }
    Ok(TropInternal { dim: n, generators }.filter_extreme(eps))
}

/// Smallest zone containing the polyhedron, via the residuated matrix
/// `(A/A)_{ij} = min_k (a_ik − a_jk)` of the homogenized generator matrix.
pub fn internal_to_zone(h: &TropInternal) -> Result<Dbm> {
    if h.generators.is_empty() {
        return Err(Error::EmptyGenerators);
    }
    let n = h.dim;
    // homogenized coordinate i; index n is the appended constant 0
    let coord = |g: &[f64], i: usize| if i == n { 0.0 } else { g[i] };
    // DBM slot of homogenized coordinate i
    let slot = |i: usize| if i == n { 0 } else { i + 1 };
    let mut out = Dbm::unconstrained(n);
    for i in 0..=n {
        for j in 0..=n {
            if i == j {
                continue;
            }
            let res = h
                .generators
                .iter()
                .map(|g| coord(g, i) - coord(g, j))
                .fold(f64::INFINITY, f64::min);
            // x_i − x_j ≥ res  ⇔  x_j − x_i ≤ −res
            out.set_entry(slot(j), slot(i), -res);
        }
    }
    Ok(out)
}

/// A max-plus affine form `max(c_0, c_1 + x_1, …, c_n + x_n)`; slot 0 is
/// the constant term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AffineForm {
    coeffs: Vec<MaxPlus>,
}

impl AffineForm {
    /// The form that is identically `−∞`.
    pub fn bottom(dim: usize) -> Self {
        AffineForm {
            coeffs: vec![MaxPlus::ZERO; dim + 1],
        }
    }

    pub fn from_coeffs(coeffs: Vec<MaxPlus>) -> Self {
        AffineForm { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[MaxPlus] {
        &self.coeffs
    }

    /// Sets the constant term (max-ed with any existing one).
    pub fn with_const(mut self, c: f64) -> Self {
        self.coeffs[0] = self.coeffs[0] + MaxPlus(c);
        self
    }

    /// Adds the term `x_var + c` (0-based variable).
    pub fn with_var(mut self, var: usize, c: f64) -> Self {
        self.coeffs[var + 1] = self.coeffs[var + 1] + MaxPlus(c);
        self
    }

    pub fn constant(&self) -> MaxPlus {
        self.coeffs[0]
    }

    pub fn var(&self, var: usize) -> MaxPlus {
        self.coeffs[var + 1]
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        let mut acc = self.coeffs[0];
        for (c, &x) in self.coeffs[1..].iter().zip(p) {
            acc = acc + (*c * MaxPlus(x));
        }
        acc.value()
    }

    fn insert_bottom(&mut self, position: usize, count: usize) {
        let at = position + 1;
        self.coeffs
            .splice(at..at, std::iter::repeat_n(MaxPlus::ZERO, count));
    }

    pub fn approx_eq(&self, other: &AffineForm, eps: f64) -> bool {
        self.coeffs.len() == other.coeffs.len()
            && self.coeffs.iter().zip(&other.coeffs).all(|(a, b)| {
                a.is_zero() && b.is_zero() || (a.value() - b.value()).abs() <= eps
            })
    }
}

/// One tropical inequality `max(lhs) ≤ max(rhs)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TropRow {
    pub lhs: AffineForm,
    pub rhs: AffineForm,
}

impl TropRow {
    pub fn new(lhs: AffineForm, rhs: AffineForm) -> Self {
        TropRow { lhs, rhs }
    }

    pub fn holds(&self, p: &[f64], eps: f64) -> bool {
        self.lhs.eval(p) <= self.rhs.eval(p) + eps
    }

    pub fn approx_eq(&self, other: &TropRow, eps: f64) -> bool {
        self.lhs.approx_eq(&other.lhs, eps) && self.rhs.approx_eq(&other.rhs, eps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TropExternal {
    dim: usize,
    rows: Vec<TropRow>,
}

impl TropExternal {
    pub fn new(dim: usize, rows: Vec<TropRow>) -> Result<Self> {
        for r in &rows {
            for side in [&r.lhs, &r.rhs] {
                if side.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: side.dim(),
                    });
                }
            }
        }
        Ok(TropExternal { dim, rows })
    }

    /// The whole space.
    pub fn universe(dim: usize) -> Self {
        TropExternal {
            dim,
            rows: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[TropRow] {
        &self.rows
    }

    pub fn push(&mut self, row: TropRow) -> Result<()> {
        if row.lhs.dim() != self.dim || row.rhs.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: row.lhs.dim(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn contains(&self, p: &[f64], eps: f64) -> Result<bool> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        Ok(self.rows.iter().all(|r| r.holds(p, eps)))
    }

    /// Intersection: concatenation of the row lists.
    pub fn intersect(&self, other: &TropExternal) -> Result<TropExternal> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(TropExternal {
            dim: self.dim,
            rows,
        })
    }

    /// Inserts `count` unconstrained variables before variable `position`
    /// (their coefficients are `−∞` in every row).
    pub fn embed(&self, count: usize, position: usize) -> Result<TropExternal> {
        if position > self.dim {
            return Err(Error::BadIndex(position));
        }
        let mut rows = self.rows.clone();
        for r in &mut rows {
            r.lhs.insert_bottom(position, count);
            r.rhs.insert_bottom(position, count);
        }
        Ok(TropExternal {
            dim: self.dim + count,
            rows,
        })
    }

    /// Re-indexes every row into a space of dimension `new_dim`, sending
    /// variable `v` to `placement[v]`.
    pub fn embed_at(&self, new_dim: usize, placement: &[usize]) -> Result<TropExternal> {
        if placement.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: placement.len(),
            });
        }
        if let Some(&bad) = placement.iter().find(|&&v| v >= new_dim) {
            return Err(Error::BadIndex(bad));
        }
        let remap = |f: &AffineForm| {
            let mut out = AffineForm::bottom(new_dim);
            out.coeffs[0] = f.coeffs[0];
            for (v, &to) in placement.iter().enumerate() {
                out.coeffs[to + 1] = out.coeffs[to + 1] + f.coeffs[v + 1];
            }
            out
        };
        let rows = self
            .rows
            .iter()
            .map(|r| TropRow::new(remap(&r.lhs), remap(&r.rhs)))
            .collect();
        Ok(TropExternal { dim: new_dim, rows })
    }
}
