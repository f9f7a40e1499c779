//! Verdicts for linear assertions `h·x + h′·y + c ≥ 0` over a computed
//! abstraction.
//!
//! The assertion is minimized over the enclosing zone. A closed DBM projects
//! exactly onto any subset of its variables, so the LP only involves the
//! variables the assertion mentions; it is solved in its dual form, a
//! min-cost flow over the difference constraints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dbm::Dbm;
use crate::error::{Error, Result};
use crate::hyperbox::{Hyperbox, Interval};
use crate::network::{self, AnalysisResult, Network, Node, Options, Slot};
use crate::subdivision::SubdivisionGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearAssertion {
    pub name: String,
    pub in_coeffs: Vec<f64>,
    pub out_coeffs: Vec<f64>,
    #[serde(rename = "const")]
    pub constant: f64,
    /// Restricts the inputs the assertion quantifies over.
    #[serde(default, rename = "restrict_box", skip_serializing_if = "Option::is_none")]
    pub restrict: Option<Hyperbox>,
}

impl LinearAssertion {
    pub fn new(name: impl Into<String>, in_coeffs: Vec<f64>, out_coeffs: Vec<f64>, constant: f64) -> Result<Self> {
        let a = LinearAssertion {
            name: name.into(),
            in_coeffs,
            out_coeffs,
            constant,
            restrict: None,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn restricted(mut self, b: Hyperbox) -> Self {
        self.restrict = Some(b);
        self
    }

    /// A constant assertion has no coefficients at all; explicit zero
    /// coefficients with a constant are fine.
    pub fn validate(&self) -> Result<()> {
        let all = self.in_coeffs.iter().chain(&self.out_coeffs);
        if all.clone().any(|v| !v.is_finite()) || !self.constant.is_finite() {
            return Err(Error::InvalidSpec(format!("{}: non-finite coefficient", self.name)));
        }
        if self.in_coeffs.is_empty() && self.out_coeffs.is_empty() {
            return Err(Error::InvalidSpec(format!("{}: no coefficients", self.name)));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let dot = |c: &[f64], v: &[f64]| c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        dot(&self.in_coeffs, x) + dot(&self.out_coeffs, y) + self.constant
    }

    fn check_dims(&self, inputs: usize, outputs: usize) -> Result<()> {
        let ok_len = |v: &[f64], n: usize| v.is_empty() || v.len() == n;
        if !ok_len(&self.in_coeffs, inputs) || !ok_len(&self.out_coeffs, outputs) {
            return Err(Error::VariableMismatch(format!(
                "{}: expected {inputs} input and {outputs} output coefficients, got {} and {}",
                self.name,
                self.in_coeffs.len(),
                self.out_coeffs.len()
            )));
        }
        if let Some(r) = &self.restrict {
            if r.dim() != inputs {
                return Err(Error::VariableMismatch(format!(
                    "{}: restriction box has {} dimensions, network has {inputs} inputs",
                    self.name,
                    r.dim()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Verified,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Method {
    Zone,
    Cells { checked: usize, total: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    /// Lower bound of the assertion over the abstraction; `+∞` when the
    /// restricted domain is empty, `−∞` when unbounded below.
    pub witness: f64,
    pub method: Method,
}

/// Minimum of `objective · z + constant` over the zone, with extra interval
/// bounds on some of its variables.
pub fn min_over_zone(zone: &Dbm, objective: &[f64], constant: f64, restriction: &[(usize, Interval)]) -> Result<f64> {
    if objective.len() != zone.dim() {
        return Err(Error::DimensionMismatch {
            expected: zone.dim(),
            found: objective.len(),
        });
    }
    let mut z = zone.clone();
    for &(v, iv) in restriction {
        if v >= z.dim() {
            return Err(Error::BadIndex(v));
        }
        z.set_upper(v, iv.hi);
        z.set_lower(v, iv.lo);
    }
    let z = z.close().ok_or(Error::EmptyFeasibleSet)?;
    let support: Vec<usize> = (0..objective.len()).filter(|&v| objective[v] != 0.0).collect();
    if support.is_empty() {
        return Ok(constant);
    }
    let p = z.project(&support)?;

    // the closed zone is non-empty, so an infeasible LP is last-ulp
    // disagreement between tight rows; retry with loosened right-hand sides
    for slack in [0.0, 1e-12, 1e-9] {
        let loosen = |c: f64| if c.is_finite() { c + slack * (1.0 + c.abs()) } else { c };
        let mut lp = microlp::Problem::new(microlp::OptimizationDirection::Minimize);
        let vars: Vec<microlp::Variable> = support
            .iter()
            .enumerate()
            .map(|(k, &v)| lp.add_var(objective[v], (-loosen(p.entry(0, k + 1)), loosen(p.entry(k + 1, 0)))))
            .collect();
        for (a, &va) in vars.iter().enumerate() {
            for (b, &vb) in vars.iter().enumerate() {
                let c = p.entry(a + 1, b + 1);
                if a != b && c.is_finite() {
                    lp.add_constraint([(va, 1.0), (vb, -1.0)], microlp::ComparisonOp::Le, loosen(c));
                }
            }
        }
        match lp.solve() {
            Ok(microlp::SolveOutcome::Solution(sol)) => return Ok(constant + sol.objective()),
            Ok(microlp::SolveOutcome::Interrupted(_)) => return Err(Error::Lp("solver interrupted".into())),
            Err(microlp::Error::Unbounded) => return Err(Error::Unbounded),
            Err(microlp::Error::Infeasible) => continue,
            Err(e) => return Err(Error::Lp(e.to_string())),
        }
    }
    Err(Error::EmptyFeasibleSet)
}

/// Coefficient of every slot of `res` for the assertion; negated slots of
/// an octagon share the weight with their positive twin.
fn slot_objective(res: &AnalysisResult, a: &LinearAssertion) -> Result<Vec<f64>> {
    let mut weights: Vec<(Node, f64)> = Vec::new();
    weights.extend(a.in_coeffs.iter().enumerate().map(|(j, &c)| (Node::Input(j), c)));
    weights.extend(res.output_nodes.iter().copied().zip(a.out_coeffs.iter().copied()));
    let mut obj = vec![0.0; res.slots.len()];
    for (node, c) in weights.into_iter().filter(|(_, c)| *c != 0.0) {
        let pos = res.slot_index(Slot::pos(node));
        let neg = res.slot_index(Slot::neg(node));
        match (pos, neg) {
            (Some(p), Some(n)) => {
                obj[p] += 0.5 * c;
                obj[n] -= 0.5 * c;
            }
            (Some(p), None) => obj[p] += c,
            (None, Some(n)) => obj[n] -= c,
            (None, None) => return Err(Error::VariableMismatch(format!("{}: node {node:?} is not tracked", a.name))),
        }
    }
    Ok(obj)
}

fn restriction_rows(res: &AnalysisResult, r: &Hyperbox) -> Vec<(usize, Interval)> {
    let mut out = Vec::new();
    for (j, iv) in r.intervals().iter().enumerate() {
        if let Some(p) = res.slot_index(Slot::pos(Node::Input(j))) {
            out.push((p, *iv));
        }
        if let Some(n) = res.slot_index(Slot::neg(Node::Input(j))) {
            out.push((n, Interval { lo: -iv.hi, hi: -iv.lo }));
        }
    }
    out
}

fn verdict(name: &str, witness: f64, eps: f64, method: Method) -> Verdict {
    Verdict {
        name: name.to_string(),
        status: if witness >= -eps { Status::Verified } else { Status::Unknown },
        witness,
        method,
    }
}

fn zone_witness(res: &AnalysisResult, a: &LinearAssertion) -> Result<f64> {
    let inputs = res.slots.iter().filter(|s| matches!(s.node, Node::Input(_)) && !s.negated).count();
    a.validate()?;
    a.check_dims(inputs, res.output_nodes.len())?;
    let obj = slot_objective(res, a)?;
    let restr = a.restrict.as_ref().map(|r| restriction_rows(res, r)).unwrap_or_default();
    match min_over_zone(&res.zone, &obj, a.constant, &restr) {
        Ok(v) => Ok(v),
        Err(Error::EmptyFeasibleSet) => Ok(f64::INFINITY),
        Err(Error::Unbounded) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Checks the assertion on the enclosing zone of an analysis result.
pub fn check(a: &LinearAssertion, res: &AnalysisResult, eps: f64) -> Result<Verdict> {
    Ok(verdict(&a.name, zone_witness(res, a)?, eps, Method::Zone))
}

/// Analyzes every grid cell that meets the assertion's restriction
/// separately and checks the assertion on each; `Verified` only when every
/// such cell is.
pub fn check_with_subdivision(
    a: &LinearAssertion,
    net: &Network,
    grid: &SubdivisionGrid,
    opts: &Options,
    budget: usize,
) -> Result<Verdict> {
    grid.check_budget(budget)?;
    a.check_dims(net.inputs(), net.outputs())?;
    let total = grid.cell_count();
    let cells: Vec<Hyperbox> = grid
        .cells()
        .into_iter()
        .filter(|c| match &a.restrict {
            None => true,
            Some(r) => matches!(c.intersect(r), Ok(Some(_))),
        })
        .collect();
    let per_cell = Options {
        subdivision: None,
        ..opts.clone()
    };
    let witnesses = cells
        .par_iter()
        .map(|cell| zone_witness(&network::analyze(net, cell, &per_cell)?, a))
        .collect::<Result<Vec<f64>>>()?;
    let witness = witnesses.into_iter().fold(f64::INFINITY, f64::min);
    Ok(verdict(
        &a.name,
        witness,
        opts.eps,
        Method::Cells {
            checked: cells.len(),
            total,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Layer;

    const EPS: f64 = 1e-9;

    fn running() -> Network {
        Network::new(
            2,
            vec![Layer {
                weights: vec![vec![1.0, -1.0], vec![1.0, 1.0]],
                bias: vec![-1.0, 1.0],
                relu: true,
            }],
        )
        .unwrap()
    }

    fn p1() -> LinearAssertion {
        LinearAssertion::new("P1", vec![0.0, 0.0], vec![-1.0, 1.0], 0.0).unwrap()
    }

    fn p2() -> LinearAssertion {
        LinearAssertion::new("P2", vec![0.0, 0.0], vec![-1.0, 0.0], 0.5)
            .unwrap()
            .restricted(Hyperbox::from_bounds(&[(-0.25, 0.25), (-1.0, 1.0)]).unwrap())
    }

    #[test]
    fn min_on_small_zone() {
        // 0 ≤ x, y ≤ 1, x − y ≤ 0
        let mut z = Dbm::from_box(&Hyperbox::cube(2, 0.0, 1.0).unwrap());
        z.set_diff(0, 1, 0.0);
        let z = z.close().unwrap();
        assert_eq!(min_over_zone(&z, &[1.0, 1.0], 0.0, &[]).unwrap(), 0.0);
        assert_eq!(min_over_zone(&z, &[-1.0, -1.0], 0.0, &[]).unwrap(), -2.0);
        assert_eq!(min_over_zone(&z, &[1.0, -1.0], 0.0, &[]).unwrap(), -1.0);
        assert_eq!(min_over_zone(&z, &[-1.0, 1.0], 0.0, &[]).unwrap(), 0.0);
        assert_eq!(min_over_zone(&z, &[0.0, 0.0], 3.5, &[]).unwrap(), 3.5);
    }

    #[test]
    fn unbounded_and_empty() {
        let mut z = Dbm::unconstrained(2);
        z.set_lower(0, 0.0);
        let z = z.close().unwrap();
        assert!(matches!(min_over_zone(&z, &[-1.0, 0.0], 0.0, &[]), Err(Error::Unbounded)));
        assert_eq!(min_over_zone(&z, &[1.0, 0.0], 0.0, &[]).unwrap(), 0.0);
        let r = [(0, Interval { lo: -2.0, hi: -1.0 })];
        assert!(matches!(min_over_zone(&z, &[1.0, 0.0], 0.0, &r), Err(Error::EmptyFeasibleSet)));
    }

    #[test]
    fn running_example_verdicts() {
        let res = network::analyze(&running(), &Hyperbox::cube(2, -1.0, 1.0).unwrap(), &Options::default()).unwrap();
        let v1 = check(&p1(), &res, EPS).unwrap();
        assert_eq!(v1.status, Status::Verified);
        assert!(v1.witness.abs() < EPS);
        assert_eq!(check(&p2(), &res, EPS).unwrap().status, Status::Unknown);
        let trivial = LinearAssertion::new("one", vec![], vec![], 1.0);
        assert!(trivial.is_err());
        let trivial = LinearAssertion::new("one", vec![0.0, 0.0], vec![], 1.0).unwrap();
        assert_eq!(check(&trivial, &res, EPS).unwrap().witness, 1.0);
    }

    #[test]
    fn split_first_input_proves_restricted_bound() {
        let net = running();
        let bx = Hyperbox::cube(2, -1.0, 1.0).unwrap();
        let opts = Options::default();
        let grid = SubdivisionGrid::uniform(&bx, &[2, 1]).unwrap();
        let v = check_with_subdivision(&p2(), &net, &grid, &opts, 1024).unwrap();
        assert_eq!(v.status, Status::Verified, "{v:?}");
        assert_eq!(v.method, Method::Cells { checked: 2, total: 2 });
        let single = SubdivisionGrid::single(&bx);
        let v1 = check_with_subdivision(&p2(), &net, &single, &opts, 1024).unwrap();
        let res = network::analyze(&net, &bx, &opts).unwrap();
        assert_eq!(v1.status, check(&p2(), &res, EPS).unwrap().status);
    }

    #[test]
    fn empty_restriction_is_vacuous() {
        let net = running();
        let bx = Hyperbox::cube(2, -1.0, 1.0).unwrap();
        let a = LinearAssertion::new("far", vec![0.0, 0.0], vec![-1.0, 0.0], -10.0)
            .unwrap()
            .restricted(Hyperbox::from_bounds(&[(5.0, 6.0), (5.0, 6.0)]).unwrap());
        let grid = SubdivisionGrid::uniform(&bx, &[2, 2]).unwrap();
        let v = check_with_subdivision(&a, &net, &grid, &Options::default(), 1024).unwrap();
        assert_eq!(v.status, Status::Verified);
        assert_eq!(v.method, Method::Cells { checked: 0, total: 4 });
        let res = network::analyze(&net, &bx, &Options::default()).unwrap();
        assert_eq!(check(&a, &res, EPS).unwrap().witness, f64::INFINITY);
    }

    #[test]
    fn mismatched_coefficients() {
        let res = network::analyze(&running(), &Hyperbox::cube(2, -1.0, 1.0).unwrap(), &Options::default()).unwrap();
        let a = LinearAssertion::new("bad", vec![1.0], vec![1.0, 1.0], 0.0).unwrap();
        assert!(matches!(check(&a, &res, EPS), Err(Error::VariableMismatch(_))));
    }

    #[test]
    fn min_on_a_single_point() {
        // tight rows disagree with the fixed bounds in the last ulp
        let p = [2.667934527567316, 2.6532967290334817, -2.1776208521136424];
        let z = Dbm::from_points(&[p.to_vec()]).unwrap();
        let c = [0.0, -1.613121772134983, -0.15960790358698596];
        let want: f64 = p.iter().zip(&c).map(|(a, b)| a * b).sum();
        assert!((min_over_zone(&z, &c, 0.0, &[]).unwrap() - want).abs() < 1e-9);
    }
}
