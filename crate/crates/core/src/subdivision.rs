//! Refining layer abstractions by cutting the input box.
//!
//! Two routes: extra tropical inequalities that stay valid on every cell
//! ([`subdivide_constraints`], [`subdivide_scalar`]), and per-cell zone
//! abstractions joined by tropical union ([`analyze_cellwise`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbox::{Hyperbox, Interval};
use crate::layer_abs::{self, AffineLayer};
use crate::tropical::{AffineForm, TropExternal, TropInternal, TropRow, DEFAULT_EPS};

pub const DEFAULT_CELL_BUDGET: usize = 1024;

/// Per-dimension cut points `a_i = c_i⁰ < c_i¹ < … < c_iᴺ = b_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubdivisionGrid {
    cuts: Vec<Vec<f64>>,
}

impl SubdivisionGrid {
    /// `counts[i]` equal pieces along dimension `i`.
    pub fn uniform(bx: &Hyperbox, counts: &[usize]) -> Result<Self> {
        if counts.len() != bx.dim() {
            return Err(Error::DimensionMismatch {
                expected: bx.dim(),
                found: counts.len(),
            });
        }
        let cuts = bx
            .intervals()
            .iter()
            .zip(counts)
            .map(|(iv, &n)| {
                if n == 0 {
                    return Err(Error::InvalidDomain("zero subdivision count".into()));
                }
                // a degenerate interval cannot be cut
                let n = if iv.width() > 0.0 { n } else { 1 };
                Ok((0..=n)
                    .map(|k| {
                        if k == n {
                            iv.hi
                        } else {
                            iv.lo + iv.width() * k as f64 / n as f64
                        }
                    })
                    .collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(SubdivisionGrid { cuts })
    }

    /// The trivial grid: one cell, the box itself.
    pub fn single(bx: &Hyperbox) -> Self {
        SubdivisionGrid {
            cuts: bx.intervals().iter().map(|iv| vec![iv.lo, iv.hi]).collect(),
        }
    }

    pub fn from_cuts(cuts: Vec<Vec<f64>>) -> Result<Self> {
        for c in &cuts {
            let ok = c.len() >= 2
                && c.iter().all(|v| v.is_finite())
                && c.windows(2).all(|w| w[0] < w[1] || (c.len() == 2 && w[0] == w[1]));
            if !ok {
                return Err(Error::InvalidDomain(format!("cut points {c:?} are not increasing")));
            }
        }
        Ok(SubdivisionGrid { cuts })
    }

    pub fn dim(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self) -> &[Vec<f64>] {
        &self.cuts
    }

    pub fn bounding_box(&self) -> Hyperbox {
        self.cuts
            .iter()
            .map(|c| Interval {
                lo: c[0],
                hi: *c.last().unwrap(),
            })
            .collect()
    }

    /// Pieces along dimension `i`.
    pub fn pieces(&self, i: usize) -> usize {
        self.cuts[i].len() - 1
    }

    pub fn cell_count(&self) -> usize {
        (0..self.dim()).map(|i| self.pieces(i)).product()
    }

    /// All cells, in lexicographic order of their per-dimension indices
    /// (first dimension slowest).
    pub fn cells(&self) -> Vec<Hyperbox> {
        let mut out = vec![Vec::<Interval>::new()];
        for c in &self.cuts {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    c.windows(2).map(move |w| {
                        let mut p = prefix.clone();
                        p.push(Interval { lo: w[0], hi: w[1] });
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(Hyperbox::new).collect()
    }

    pub fn check_budget(&self, budget: usize) -> Result<()> {
        let cells = self.cell_count();
        if cells > budget {
            return Err(Error::CellBudgetExceeded { cells, budget });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubdivisionMode {
    CellwiseUnion,
    ExtraConstraints,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubdivisionConfig {
    pub mode: SubdivisionMode,
    /// Largest output subset `J` used for the joint lower-bound rows; values
    /// below 2 disable them.
    pub max_subset: usize,
    pub cell_budget: usize,
}

impl Default for SubdivisionConfig {
    fn default() -> Self {
        SubdivisionConfig {
            mode: SubdivisionMode::CellwiseUnion,
            max_subset: 2,
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }
}

/// Exact-per-cut abstraction of `y = λx + bias` on `[a, b]` cut into `n`
/// equal pieces. Returns the base zone rows plus one row per interior cut,
/// and the filtered generators.
pub fn subdivide_scalar(
    lambda: f64,
    bias: f64,
    domain: (f64, f64),
    n: usize,
) -> Result<(TropExternal, TropInternal)> {
    let (a, b) = domain;
    if !(a.is_finite() && b.is_finite()) || a >= b || n == 0 || !lambda.is_finite() {
        return Err(Error::InvalidDomain(format!(
            "[{a}, {b}] with {n} pieces and slope {lambda}"
        )));
    }
    let f = |x: f64| lambda * x + bias;
    let layer = AffineLayer::new(
        vec![vec![lambda]],
        vec![bias],
        Hyperbox::new(vec![Interval::new(a, b)?]),
    )?;
    let mut ext = layer_abs::zone_external(&layer_abs::zone_constants(&layer), &layer);
    let cut = |k: usize| if k == n { b } else { a + (b - a) * k as f64 / n as f64 };

    let one = |var: Option<usize>, c: f64| {
        let f = AffineForm::bottom(2);
        match var {
            None => f.with_const(c),
            Some(v) => f.with_var(v, c),
        }
    };
    for k in 1..n {
        let (ck, fk) = (cut(k), f(cut(k)));
        let row = if lambda <= 0.0 {
            TropRow::new(one(None, 0.0), one(Some(0), -ck).with_var(1, -fk))
        } else if lambda <= 1.0 {
            TropRow::new(one(Some(1), -fk), one(None, 0.0).with_var(0, -ck))
        } else {
            TropRow::new(one(Some(0), -ck), one(None, 0.0).with_var(1, -fk))
        };
        ext.push(row)?;
    }

    let mut gens = vec![vec![a, f(a)], vec![b, f(b)]];
    for i in 1..=n {
        let (c0, c1) = (cut(i - 1), cut(i));
        gens.push(if lambda <= 0.0 {
            vec![c0, f(c1)]
        } else if lambda <= 1.0 {
            vec![c0 + f(c1) - f(c0), f(c1)]
        } else {
            vec![c1, f(c0) + c1 - c0]
        });
    }
    let int = TropInternal::new(2, gens)?.filter_extreme(DEFAULT_EPS);
    Ok((ext, int))
}

/// Extra rows, valid on the whole box, that tighten the zone abstraction of
/// `layer` using the cut points of `grid`. Variables are `(x, y)`.
pub fn subdivide_constraints(
    layer: &AffineLayer,
    grid: &SubdivisionGrid,
    cfg: &SubdivisionConfig,
) -> Result<TropExternal> {
    let m = layer.inputs();
    let n = layer.outputs();
    if grid.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: grid.dim(),
        });
    }
    let dim = m + n;
    let k = layer_abs::zone_constants(layer);
    let lo = layer.in_box.lower();
    let hi = layer.in_box.upper();
    let w = &layer.weights;
    let mut rows: Vec<TropRow> = Vec::new();
    let bottom = || AffineForm::bottom(dim);
    let zero = || AffineForm::bottom(dim).with_const(0.0);

    let max_pieces = (0..m).map(|i| grid.pieces(i)).max().unwrap_or(1);
    for kk in 1..max_pieces {
        // dimensions with an interior cut at this index
        let cut: Vec<Option<f64>> = (0..m)
            .map(|i| (kk < grid.pieces(i)).then(|| grid.cuts()[i][kk]))
            .collect();
        for j in 0..n {
            let y = m + j;
            for i in 0..m {
                let Some(c) = cut[i] else { continue };
                let l = w[j][i];
                rows.push(if l <= 0.0 {
                    TropRow::new(zero(), bottom().with_var(i, -c).with_var(y, -k.lower[j] + l * (hi[i] - c)))
                } else if l <= 1.0 {
                    TropRow::new(bottom().with_var(y, -k.upper[j] + l * (hi[i] - c)), zero().with_var(i, -c))
                } else {
                    TropRow::new(
                        bottom().with_var(i, -c),
                        zero().with_var(y, -k.lower[j] - l * (c - lo[i])),
                    )
                });
            }

            let neg: Vec<usize> = (0..m).filter(|&i| cut[i].is_some() && w[j][i] <= 0.0).collect();
            if !neg.is_empty() {
                let sigma: f64 = neg.iter().map(|&i| w[j][i] * (hi[i] - cut[i].unwrap())).sum();
                let rhs = neg
                    .iter()
                    .fold(bottom().with_var(y, -k.lower[j] + sigma), |f, &i| {
                        f.with_var(i, -cut[i].unwrap())
                    });
                rows.push(TropRow::new(zero(), rhs));
            }

            // greedy: smallest slopes first while the total stays ≤ 1
            let mut mid: Vec<usize> = (0..m)
                .filter(|&i| cut[i].is_some() && (0.0..=1.0).contains(&w[j][i]))
                .collect();
            mid.sort_by(|&p, &q| w[j][p].total_cmp(&w[j][q]).then(p.cmp(&q)));
            let mut total = 0.0;
            let mut chosen = Vec::new();
            for i in mid {
                if total + w[j][i] <= 1.0 + DEFAULT_EPS {
                    total += w[j][i];
                    chosen.push(i);
                }
            }
            if !chosen.is_empty() {
                let sigma: f64 = chosen.iter().map(|&i| w[j][i] * (hi[i] - cut[i].unwrap())).sum();
                // with slopes summing to one, y is below a convex combination
                // of the x_i − c_i and the 0 term is not needed
                let base = if (total - 1.0).abs() <= DEFAULT_EPS { bottom() } else { zero() };
                let rhs = chosen.iter().fold(base, |f, &i| f.with_var(i, -cut[i].unwrap()));
                rows.push(TropRow::new(bottom().with_var(y, -k.upper[j] + sigma), rhs));
            }
        }
    }

    for size in 2..=cfg.max_subset.min(n) {
        for subset in subsets(n, size) {
            rows.push(joint_lower_row(layer, &k, &subset, dim));
        }
    }

    let mut uniq: Vec<TropRow> = Vec::with_capacity(rows.len());
    for r in rows {
        if !uniq.iter().any(|u| u.approx_eq(&r, DEFAULT_EPS)) {
            uniq.push(r);
        }
    }
    TropExternal::new(dim, uniq)
}

/// `0 ≤ max_{j∈J} (y_j − u_j)` with `Σ u_j` the lower bound of `Σ_{j∈J} y_j`,
/// split in proportion to the output ranges.
fn joint_lower_row(layer: &AffineLayer, k: &layer_abs::ZoneConstants, set: &[usize], dim: usize) -> TropRow {
    let m = layer.inputs();
    let mut m_set: f64 = set.iter().map(|&j| layer.bias[j]).sum();
    for (i, iv) in layer.in_box.intervals().iter().enumerate() {
        let s: f64 = set.iter().map(|&j| layer.weights[j][i]).sum();
        m_set += if s < 0.0 { s * iv.hi } else { s * iv.lo };
    }
    let lower_sum: f64 = set.iter().map(|&j| k.lower[j]).sum();
    let widths: f64 = set.iter().map(|&j| k.upper[j] - k.lower[j]).sum();
    let extra = m_set - lower_sum;
    let rhs = set.iter().fold(AffineForm::bottom(dim), |f, &j| {
        let share = if widths > 0.0 {
            (k.upper[j] - k.lower[j]) / widths
        } else {
            1.0 / set.len() as f64
        };
        f.with_var(m + j, -(k.lower[j] + extra * share))
    });
    TropRow::new(AffineForm::bottom(dim).with_const(0.0), rhs)
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

/// Tropical union of the zone abstractions of `layer` over every cell of
/// `grid`. Generators are concatenated in cell order before filtering.
pub fn analyze_cellwise(layer: &AffineLayer, grid: &SubdivisionGrid, budget: usize) -> Result<TropInternal> {
    if grid.dim() != layer.inputs() {
        return Err(Error::DimensionMismatch {
            expected: layer.inputs(),
            found: grid.dim(),
        });
    }
    grid.check_budget(budget)?;
    let per_cell: Vec<Vec<Vec<f64>>> = grid
        .cells()
        .into_par_iter()
        .map(|cell| {
            let l = layer.with_box(cell);
            layer_abs::zone_internal(&layer_abs::zone_constants(&l), &l).into_generators()
        })
        .collect();
    let dim = layer.inputs() + layer.outputs();
    Ok(TropInternal::new(dim, per_cell.into_iter().flatten().collect())?.filter_extreme(DEFAULT_EPS))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-9;

    fn form(dim: usize, c: Option<f64>, vars: &[(usize, f64)]) -> AffineForm {
        let f = match c {
            Some(c) => AffineForm::bottom(dim).with_const(c),
            None => AffineForm::bottom(dim),
        };
        vars.iter().fold(f, |f, &(v, c)| f.with_var(v, c))
    }

    fn has_row(e: &TropExternal, row: &TropRow) -> bool {
        e.rows().iter().any(|r| r.approx_eq(row, EPS))
    }

    #[test]
    fn grid_cells_and_budget() {
        let bx = Hyperbox::cube(2, -1.0, 1.0).unwrap();
        let g = SubdivisionGrid::uniform(&bx, &[2, 1]).unwrap();
        assert_eq!(g.cuts()[0], vec![-1.0, 0.0, 1.0]);
        let cells = g.cells();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0][0], Interval { lo: -1.0, hi: 0.0 });
        assert_eq!(cells[1][1], Interval { lo: -1.0, hi: 1.0 });
        let big = SubdivisionGrid::uniform(&bx, &[64, 32]).unwrap();
        assert!(matches!(
            big.check_budget(DEFAULT_CELL_BUDGET),
            Err(Error::CellBudgetExceeded { cells: 2048, budget: 1024 })
        ));
        assert!(SubdivisionGrid::from_cuts(vec![vec![0.0, 1.0, 0.5]]).is_err());
        assert_eq!(SubdivisionGrid::single(&bx).cell_count(), 1);
    }

    #[test]
    fn scalar_half_slope_two_pieces() {
        let (ext, int) = subdivide_scalar(0.5, 0.0, (0.0, 2.0), 2).unwrap();
        // y − 0.5 ≤ max(0, x − 1)
        let extra = TropRow::new(form(2, None, &[(1, -0.5)]), form(2, Some(0.0), &[(0, -1.0)]));
        assert_eq!(ext.rows().len(), 3 + 1);
        assert!(ext.rows()[3].approx_eq(&extra, EPS));
        let want = [[0.0, 0.0], [2.0, 1.0], [0.5, 0.5], [1.5, 1.0]];
        assert_eq!(int.len(), 4);
        for w in &want {
            assert!(int.generators().iter().any(|g| g == w), "{w:?} missing");
        }
    }

    #[test]
    fn scalar_one_piece_matches_plain_abstraction() {
        let l = AffineLayer::new(vec![vec![2.0]], vec![1.0], Hyperbox::cube(1, -1.0, 3.0).unwrap()).unwrap();
        let k = layer_abs::zone_constants(&l);
        let (ext, int) = subdivide_scalar(2.0, 1.0, (-1.0, 3.0), 1).unwrap();
        assert_eq!(ext, layer_abs::zone_external(&k, &l));
        let base = layer_abs::zone_internal(&k, &l);
        assert_eq!(int.len(), base.len());
        for g in base.generators() {
            assert!(int.contains(g, EPS).unwrap());
        }
        for g in int.generators() {
            assert!(base.contains(g, EPS).unwrap());
        }
    }

    #[test]
    fn scalar_negative_slope_row() {
        let (ext, _) = subdivide_scalar(-1.0, 0.0, (0.0, 1.0), 2).unwrap();
        // 0 ≤ max(x − 0.5, y − f(0.5))
        let row = TropRow::new(form(2, Some(0.0), &[]), form(2, None, &[(0, -0.5), (1, 0.5)]));
        assert!(has_row(&ext, &row));
        assert!(matches!(subdivide_scalar(1.0, 0.0, (1.0, 1.0), 2), Err(Error::InvalidDomain(_))));
    }

    fn plane(slope: f64) -> AffineLayer {
        AffineLayer::new(vec![vec![slope, slope]], vec![0.0], Hyperbox::cube(2, -1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn decreasing_plane_rows() {
        let l = plane(-0.5);
        let g = SubdivisionGrid::uniform(&l.in_box, &[2, 2]).unwrap();
        let e = subdivide_constraints(&l, &g, &SubdivisionConfig::default()).unwrap();
        let (x1, x2, y) = (0, 1, 2);
        let rows = [
            TropRow::new(form(3, Some(0.0), &[]), form(3, None, &[(x1, 0.0), (x2, 0.0), (y, 0.0)])),
            TropRow::new(form(3, Some(0.0), &[]), form(3, None, &[(x1, 0.0), (y, 0.5)])),
            TropRow::new(form(3, Some(0.0), &[]), form(3, None, &[(x2, 0.0), (y, 0.5)])),
        ];
        assert_eq!(e.rows().len(), 3);
        for r in &rows {
            assert!(has_row(&e, r), "missing {r:?}");
        }
    }

    #[test]
    fn increasing_plane_rows() {
        let l = plane(0.5);
        let g = SubdivisionGrid::uniform(&l.in_box, &[2, 2]).unwrap();
        let e = subdivide_constraints(&l, &g, &SubdivisionConfig::default()).unwrap();
        // y ≤ max(x1, x2)
        let row = TropRow::new(form(3, None, &[(2, 0.0)]), form(3, None, &[(0, 0.0), (1, 0.0)]));
        assert!(has_row(&e, &row));
    }

    #[test]
    fn no_cuts_no_subsets_no_rows() {
        let l = plane(0.5);
        let g = SubdivisionGrid::single(&l.in_box);
        let cfg = SubdivisionConfig {
            max_subset: 0,
            ..SubdivisionConfig::default()
        };
        assert!(subdivide_constraints(&l, &g, &cfg).unwrap().rows().is_empty());
    }

    #[test]
    fn extra_rows_hold_on_graph_points() {
        let l = AffineLayer::new(
            vec![vec![1.5, -0.3, 0.2], vec![-2.0, 0.7, 0.4], vec![0.3, 0.3, 0.3]],
            vec![0.1, -0.5, 1.0],
            Hyperbox::from_bounds(&[(-1.0, 1.0), (0.0, 2.0), (-3.0, -1.0)]).unwrap(),
        )
        .unwrap();
        let g = SubdivisionGrid::uniform(&l.in_box, &[3, 4, 2]).unwrap();
        let cfg = SubdivisionConfig {
            max_subset: 3,
            ..SubdivisionConfig::default()
        };
        let e = subdivide_constraints(&l, &g, &cfg).unwrap();
        assert!(!e.rows().is_empty());
        let steps = 8;
        for a in 0..=steps {
            for b in 0..=steps {
                for c in 0..=steps {
                    let t = [a, b, c].map(|s| s as f64 / steps as f64);
                    let x = l.in_box.lerp(&t);
                    let mut p = x.clone();
                    p.extend(l.eval(&x));
                    assert!(e.contains(&p, 1e-9).unwrap(), "graph point {p:?} excluded");
                }
            }
        }
    }

    fn relu_tail(h: &TropInternal, from: usize) -> TropInternal {
        h.map_generators(h.dim(), |g| {
            g.iter()
                .enumerate()
                .map(|(k, &v)| if k >= from { v.max(0.0) } else { v })
                .collect()
        })
    }

    #[test]
    fn running_example_split_on_first_input() {
        let l = AffineLayer::new(
            vec![vec![1.0, -1.0], vec![1.0, 1.0]],
            vec![-1.0, 1.0],
            Hyperbox::cube(2, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let g = SubdivisionGrid::uniform(&l.in_box, &[2, 1]).unwrap();
        let h = analyze_cellwise(&l, &g, DEFAULT_CELL_BUDGET).unwrap();
        let y = relu_tail(&h, 2).project(&[2, 3], EPS).unwrap();
        let want = [[0.0, 0.0], [1.0, 1.0], [0.0, 3.0]];
        assert_eq!(y.len(), 3);
        for w in &want {
            assert!(y.generators().iter().any(|p| p == w));
        }
        // both cells contribute: the x1 ≤ 0 cell pins y1 to 0
        let xy = relu_tail(&h, 2).project(&[0, 2], EPS).unwrap();
        assert!(xy.contains(&[-0.5, 0.0], EPS).unwrap());
        assert!(xy.contains(&[1.0, 1.0], EPS).unwrap());
    }

    #[test]
    fn one_cell_matches_plain_abstraction() {
        let l = AffineLayer::new(vec![vec![0.7, -1.3]], vec![0.2], Hyperbox::cube(2, -1.0, 1.0).unwrap()).unwrap();
        let h = analyze_cellwise(&l, &SubdivisionGrid::single(&l.in_box), DEFAULT_CELL_BUDGET).unwrap();
        assert_eq!(h, layer_abs::zone_internal(&layer_abs::zone_constants(&l), &l));
    }

    #[test]
    fn cellwise_union_contains_each_cell_hull() {
        let l = AffineLayer::new(vec![vec![1.0, -1.0]], vec![-1.0], Hyperbox::cube(2, -1.0, 1.0).unwrap()).unwrap();
        let g = SubdivisionGrid::uniform(&l.in_box, &[2, 1]).unwrap();
        let h = analyze_cellwise(&l, &g, DEFAULT_CELL_BUDGET).unwrap();
        for cell in g.cells() {
            let lc = l.with_box(cell);
            for p in layer_abs::zone_internal(&layer_abs::zone_constants(&lc), &lc).generators() {
                assert!(h.contains(p, EPS).unwrap());
            }
        }
    }
}
