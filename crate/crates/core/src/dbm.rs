//! Difference-bound matrices for zones, and their doubled-variable form for
//! octagons.
//!
//! A [`Dbm`] over `n` variables is an `(n+1)×(n+1)` matrix `c` where
//! `c[i][j]` bounds `x_i − x_j` from above and slot 0 is the constant
//! variable `x_0 = 0`. Entries may be `+∞`. Public helpers taking a *variable*
//! index (`upper`, `set_diff`, ...) are 0-based and map variable `v` to slot
//! `v + 1`; the raw `entry` accessors address slots directly.

use crate::error::{Error, Result};
use crate::hyperbox::{Hyperbox, Interval};

/// Negative diagonal entries above this magnitude mean the zone is empty.
const EMPTY_TOL: f64 = 1e-9;

/// Shortest paths over an `s × s` row-major matrix; `false` on a negative
/// cycle beyond the tolerance.
fn floyd_warshall(m: &mut [f64], s: usize) -> bool {
    for k in 0..s {
        if m[k * s + k] < -EMPTY_TOL || m[k * s + k].is_nan() {
            return false;
        }
        m[k * s + k] = 0.0;
        let row_k: Vec<f64> = m[k * s..(k + 1) * s].to_vec();
        for i in 0..s {
            let cik = m[i * s + k];
            if cik == f64::INFINITY {
                continue;
            }
            let row_i = &mut m[i * s..(i + 1) * s];
            for (e, &ckj) in row_i.iter_mut().zip(&row_k) {
                let via = cik + ckj;
                if via < *e {
                    *e = via;
                }
            }
        }
    }
    for i in 0..s {
        let d = m[i * s + i];
        if d < -EMPTY_TOL || d.is_nan() {
            return false;
        }
        m[i * s + i] = 0.0;
    }
    true
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dbm {
    dim: usize,
    entries: Vec<f64>,
}

impl Dbm {
    /// The zone `ℝ^dim`: zero diagonal, every other entry `+∞`.
    pub fn unconstrained(dim: usize) -> Self {
        let size = dim + 1;
        let mut entries = vec![f64::INFINITY; size * size];
        for i in 0..size {
            entries[i * size + i] = 0.0;
        }
        Dbm { dim, entries }
    }

    /// Builds a DBM from a square matrix of slot entries (row 0 = constant slot).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::EmptyInput);
        }
        let mut entries = Vec::with_capacity(size * size);
        for row in rows {
            if row.len() != size {
                return Err(Error::DimensionMismatch {
                    expected: size,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Ok(Dbm {
            dim: size - 1,
            entries,
        })
    }

    pub fn from_box(b: &Hyperbox) -> Self {
        let mut d = Dbm::unconstrained(b.dim());
        for (v, iv) in b.intervals().iter().enumerate() {
            d.set_upper(v, iv.hi);
            d.set_lower(v, iv.lo);
        }
        // box constraints are closed once the pairwise differences are filled
        for a in 0..b.dim() {
            for c in 0..b.dim() {
                if a != c {
                    d.set_diff(a, c, b[a].hi - b[c].lo);
                }
            }
        }
        d
    }

    /// Tightest zone containing a finite point set: `c_ij = max_p (p_i − p_j)`
    /// with `p_0 = 0`.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyInput)?;
        let dim = first.len();
        let size = dim + 1;
        let mut entries = vec![f64::NEG_INFINITY; size * size];
        let mut hom = vec![0.0; size];
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            hom[1..].copy_from_slice(p);
            for i in 0..size {
                let row = &mut entries[i * size..(i + 1) * size];
                for (j, e) in row.iter_mut().enumerate() {
                    let v = hom[i] - hom[j];
                    if v > *e {
                        *e = v;
                    }
                }
            }
        }
        Ok(Dbm { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn size(&self) -> usize {
        self.dim + 1
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size() + j]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, v: f64) {
        let s = self.size();
        self.entries[i * s + j] = v;
    }

    /// `c_ij ← min(c_ij, v)`
    pub fn tighten(&mut self, i: usize, j: usize, v: f64) {
        let s = self.size();
        let e = &mut self.entries[i * s + j];
        if v < *e {
            *e = v;
        }
    }

    pub fn set_upper(&mut self, var: usize, v: f64) {
        self.tighten(var + 1, 0, v);
    }

    pub fn set_lower(&mut self, var: usize, v: f64) {
        self.tighten(0, var + 1, -v);
    }

    /// Adds `x_a − x_b ≤ v`.
    pub fn set_diff(&mut self, a: usize, b: usize, v: f64) {
        self.tighten(a + 1, b + 1, v);
    }

    pub fn upper(&self, var: usize) -> f64 {
        self.entry(var + 1, 0)
    }

    pub fn lower(&self, var: usize) -> f64 {
        -self.entry(0, var + 1)
    }

    /// Upper bound on `x_a − x_b`.
    pub fn diff(&self, a: usize, b: usize) -> f64 {
        self.entry(a + 1, b + 1)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.size()).map(<[f64]>::to_vec).collect()
    }

    /// Shortest-path closure (Floyd–Warshall). `None` when the zone is empty.
    pub fn close(&self) -> Option<Dbm> {
        let mut out = self.clone();
        out.close_in_place().then_some(out)
    }

    /// In-place closure; returns `false` on emptiness (contents then undefined).
    pub fn close_in_place(&mut self) -> bool {
        let s = self.size();
        let original = self.entries.clone();
        if floyd_warshall(&mut self.entries, s) {
            return true;
        }
        // Near-zero cycles from round-off compound on every pass; retry with
        // every edge loosened by the tolerance (sound, and only on this path).
        self.entries = original;
        for i in 0..s {
            for j in 0..s {
                if i != j && self.entries[i * s + j].is_finite() {
                    self.entries[i * s + j] += EMPTY_TOL;
                }
            }
        }
        floyd_warshall(&mut self.entries, s)
    }

    pub fn is_closed(&self, eps: f64) -> bool {
        let s = self.size();
        for i in 0..s {
            if self.entry(i, i).abs() > eps {
                return false;
            }
        }
        for k in 0..s {
            for i in 0..s {
                let cik = self.entry(i, k);
                if cik == f64::INFINITY {
                    continue;
                }
                for j in 0..s {
                    if self.entry(i, j) > cik + self.entry(k, j) + eps {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Pointwise minimum followed by closure.
    pub fn intersect(&self, other: &Dbm) -> Result<Option<Dbm>> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = self.clone();
        for (e, &o) in out.entries.iter_mut().zip(&other.entries) {
            if o < *e {
                *e = o;
            }
        }
        Ok(out.close())
    }

    /// Interval bounds read off row and column 0 of a closed DBM.
    pub fn bounds(&self) -> Result<Hyperbox> {
        (0..self.dim)
            .map(|v| {
                let hi = self.upper(v);
                let lo = self.lower(v);
                if !hi.is_finite() || !lo.is_finite() {
                    return Err(Error::UnboundedVariable(v));
                }
                // closure rounding can leave lo a hair above hi on degenerate zones
                Ok(Interval {
                    lo: lo.min(hi),
                    hi,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Hyperbox::new)
    }

    pub fn contains(&self, p: &[f64], eps: f64) -> bool {
        if p.len() != self.dim {
            return false;
        }
        let s = self.size();
        let val = |i: usize| if i == 0 { 0.0 } else { p[i - 1] };
        for i in 0..s {
            let vi = val(i);
            for j in 0..s {
                let c = self.entry(i, j);
                if c < f64::INFINITY && vi - val(j) > c + eps {
                    return false;
                }
            }
        }
        true
    }

    /// Keeps the listed variables (0-based, in the given order). Exact on a
    /// closed DBM.
    pub fn project(&self, keep: &[usize]) -> Result<Dbm> {
        if let Some(&bad) = keep.iter().find(|&&v| v >= self.dim) {
            return Err(Error::BadIndex(bad));
        }
        let slots: Vec<usize> = std::iter::once(0).chain(keep.iter().map(|v| v + 1)).collect();
        let size = slots.len();
        let mut entries = Vec::with_capacity(size * size);
        for &i in &slots {
            for &j in &slots {
                entries.push(self.entry(i, j));
            }
        }
        Ok(Dbm {
            dim: keep.len(),
            entries,
        })
    }

    /// Places this DBM's variable `v` at variable `placement[v]` of a larger
    /// unconstrained DBM of dimension `new_dim`.
    pub fn embed(&self, new_dim: usize, placement: &[usize]) -> Result<Dbm> {
        if placement.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: placement.len(),
            });
        }
        if let Some(&bad) = placement.iter().find(|&&v| v >= new_dim) {
            return Err(Error::BadIndex(bad));
        }
        let mut out = Dbm::unconstrained(new_dim);
        let slot = |i: usize| if i == 0 { 0 } else { placement[i - 1] + 1 };
        for i in 0..self.size() {
            for j in 0..self.size() {
                out.tighten(slot(i), slot(j), self.entry(i, j));
            }
        }
        Ok(out)
    }

    /// Largest absolute entrywise difference (infinite entries must match).
    pub fn max_abs_diff(&self, other: &Dbm) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| {
                if a == b {
                    0.0
                } else {
                    (a - b).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Octagon stored as a coherent DBM over doubled variables.
///
/// Slot `v` stands for `+x_v` and slot `n + v` for `−x_v`; there is no
/// constant slot. Unary bounds live on the `(+v, −v)` entries as `2·bound`.
/// Every mutation also tightens the mirrored entry, which keeps the matrix
/// coherent.
#[derive(Clone, Debug, PartialEq)]
pub struct OctDbm {
    vars: usize,
    entries: Vec<f64>,
}

impl OctDbm {
    pub fn unconstrained(vars: usize) -> Self {
        let s = 2 * vars;
        let mut entries = vec![f64::INFINITY; s * s];
        for i in 0..s {
            entries[i * s + i] = 0.0;
        }
        OctDbm { vars, entries }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn pos(&self, v: usize) -> usize {
        v
    }

    pub fn neg(&self, v: usize) -> usize {
        v + self.vars
    }

    fn bar(&self, slot: usize) -> usize {
        if slot < self.vars {
            slot + self.vars
        } else {
            slot - self.vars
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * 2 * self.vars + j]
    }

    /// Tightens `z_i − z_j ≤ v` and its mirror `z_j̄ − z_ī ≤ v`.
    pub fn tighten(&mut self, i: usize, j: usize, v: f64) {
        let s = 2 * self.vars;
        let (bi, bj) = (self.bar(i), self.bar(j));
        for idx in [i * s + j, bj * s + bi] {
            if v < self.entries[idx] {
                self.entries[idx] = v;
            }
        }
    }

    /// `x_a − x_b ≤ c`
    pub fn add_diff(&mut self, a: usize, b: usize, c: f64) {
        self.tighten(self.pos(a), self.pos(b), c);
    }

    /// `x_a + x_b ≤ c`
    pub fn add_sum_upper(&mut self, a: usize, b: usize, c: f64) {
        self.tighten(self.pos(a), self.neg(b), c);
    }

    /// `x_a + x_b ≥ c`
    pub fn add_sum_lower(&mut self, a: usize, b: usize, c: f64) {
        self.tighten(self.neg(a), self.pos(b), -c);
    }

    pub fn add_upper(&mut self, a: usize, c: f64) {
        self.tighten(self.pos(a), self.neg(a), 2.0 * c);
    }

    pub fn add_lower(&mut self, a: usize, c: f64) {
        self.tighten(self.neg(a), self.pos(a), -2.0 * c);
    }

    pub fn upper(&self, a: usize) -> f64 {
        self.entry(self.pos(a), self.neg(a)) / 2.0
    }

    pub fn lower(&self, a: usize) -> f64 {
        -self.entry(self.neg(a), self.pos(a)) / 2.0
    }

    /// Upper bound on `x_a − x_b`.
    pub fn diff(&self, a: usize, b: usize) -> f64 {
        self.entry(self.pos(a), self.pos(b))
    }

    /// Upper bound on `x_a + x_b`.
    pub fn sum_upper(&self, a: usize, b: usize) -> f64 {
        self.entry(self.pos(a), self.neg(b))
    }

    /// Lower bound on `x_a + x_b`.
    pub fn sum_lower(&self, a: usize, b: usize) -> f64 {
        -self.entry(self.neg(a), self.pos(b))
    }

    /// Floyd–Warshall over the doubled variables followed by a coherence pass.
    pub fn close(&self) -> Option<OctDbm> {
        let s = 2 * self.vars;
        let mut plain = Dbm::unconstrained(s);
        for i in 0..s {
            for j in 0..s {
                plain.set_entry(i + 1, j + 1, self.entry(i, j));
            }
        }
        if !plain.close_in_place() {
            return None;
        }
        let mut out = OctDbm::unconstrained(self.vars);
        for i in 0..s {
            for j in 0..s {
                out.tighten(i, j, plain.entry(i + 1, j + 1));
            }
        }
        Some(out)
    }

    pub fn bounds(&self) -> Result<Hyperbox> {
        (0..self.vars)
            .map(|v| {
                let (lo, hi) = (self.lower(v), self.upper(v));
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::UnboundedVariable(v));
                }
                Ok(Interval { lo: lo.min(hi), hi })
            })
            .collect::<Result<Vec<_>>>()
            .map(Hyperbox::new)
    }

    /// Membership of `x` (checked as the doubled point `(x, −x)`).
    pub fn contains(&self, x: &[f64], eps: f64) -> bool {
        if x.len() != self.vars {
            return false;
        }
        let z = |slot: usize| {
            if slot < self.vars {
                x[slot]
            } else {
                -x[slot - self.vars]
            }
        };
        let s = 2 * self.vars;
        (0..s).all(|i| {
            (0..s).all(|j| {
                let c = self.entry(i, j);
                c == f64::INFINITY || z(i) - z(j) <= c + eps
            })
        })
    }

    /// The doubled octagon as a closed zone over `2n` variables
    /// `(+x_1..+x_n, −x_1..−x_n)` with a constant slot carrying the unary bounds.
    pub fn to_zone(&self) -> Option<Dbm> {
        let s = 2 * self.vars;
        let mut z = Dbm::unconstrained(s);
        for i in 0..s {
            for j in 0..s {
                z.set_entry(i + 1, j + 1, self.entry(i, j));
            }
            let bi = self.bar(i);
            // on the manifold z_ī = −z_i, so z_i − z_ī = 2 z_i
            z.tighten(i + 1, 0, self.entry(i, bi) / 2.0);
            z.tighten(0, i + 1, self.entry(bi, i) / 2.0);
        }
        z.close()
    }

    /// Reads an octagon back from a zone over doubled variables laid out as in
    /// [`OctDbm::to_zone`].
    pub fn from_zone(z: &Dbm) -> Result<OctDbm> {
        if !z.dim().is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: z.dim() + 1,
                found: z.dim(),
            });
        }
        let n = z.dim() / 2;
        let mut out = OctDbm::unconstrained(n);
        for i in 0..2 * n {
            for j in 0..2 * n {
                let via0 = z.entry(i + 1, 0) + z.entry(0, j + 1);
                out.tighten(i, j, z.entry(i + 1, j + 1).min(via0));
            }
            let bi = out.bar(i);
            out.tighten(i, bi, 2.0 * z.entry(i + 1, 0));
            out.tighten(i, bi, 2.0 * z.entry(0, bi + 1));
        }
        Ok(out)
    }

    /// Keeps the listed variables (both signs), in order.
    pub fn project(&self, keep: &[usize]) -> Result<OctDbm> {
        if let Some(&bad) = keep.iter().find(|&&v| v >= self.vars) {
            return Err(Error::BadIndex(bad));
        }
        let k = keep.len();
        let mut out = OctDbm::unconstrained(k);
        let old = |slot: usize| {
            if slot < k {
                keep[slot]
            } else {
                keep[slot - k] + self.vars
            }
        };
        for i in 0..2 * k {
            for j in 0..2 * k {
                out.tighten(i, j, self.entry(old(i), old(j)));
            }
        }
        Ok(out)
    }

    pub fn is_coherent(&self) -> bool {
        let s = 2 * self.vars;
        (0..s).all(|i| (0..s).all(|j| self.entry(i, j) == self.entry(self.bar(j), self.bar(i))))
    }
}
