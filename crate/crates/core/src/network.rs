//! Feedforward ReLU networks and layer-by-layer propagation of tropical
//! abstractions.
//!
//! Three chaining modes are available:
//!
//! * [`ChainMode::Zone`] keeps a closed DBM over every tracked node and
//!   intersects each new layer abstraction with it, so relations between
//!   layers survive (default).
//! * [`ChainMode::Box`] keeps only the enclosing box of the current layer;
//!   earlier tracked nodes are re-attached through their intervals.
//! * [`ChainMode::External`] runs the box chain and additionally builds the
//!   concatenated inequality system of every layer and activation.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dbm::Dbm;
use crate::error::{Error, Result};
use crate::hyperbox::{Hyperbox, Interval};
use crate::layer_abs::{self, AffineLayer};
use crate::subdivision::{self, SubdivisionConfig, SubdivisionGrid, SubdivisionMode};
use crate::tropical::{self, AffineForm, TropExternal, TropInternal, TropRow, DEFAULT_EPS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `outputs × inputs`
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub relu: bool,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    inputs: usize,
    layers: Vec<Layer>,
}

/// Every intermediate value of one concrete execution.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    /// `None` for layers without activation.
    pub post: Vec<Option<Vec<f64>>>,
}

impl Trace {
    pub fn value(&self, node: Node) -> f64 {
        match node {
            Node::Input(j) => self.input[j],
            Node::Pre { layer, neuron } => self.pre[layer][neuron],
            Node::Post { layer, neuron } => self.post[layer].as_ref().expect("layer has an activation")[neuron],
        }
    }

    pub fn output(&self) -> &[f64] {
        let last = self.pre.len() - 1;
        self.post[last].as_deref().unwrap_or(&self.pre[last])
    }
}

impl Network {
    pub fn new(inputs: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() || inputs == 0 {
            return Err(Error::MalformedFile("network needs inputs and at least one layer".into()));
        }
        let mut width = inputs;
        for l in &layers {
            if l.weights.len() != l.bias.len() {
                return Err(Error::DimensionMismatch {
                    expected: l.weights.len(),
                    found: l.bias.len(),
                });
            }
            if let Some(row) = l.weights.iter().find(|r| r.len() != width) {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: row.len(),
                });
            }
            if l.bias.is_empty() {
                return Err(Error::MalformedFile("layer without neurons".into()));
            }
            width = l.outputs();
        }
        Ok(Network { inputs, layers })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).output().to_vec()
    }

    pub fn trace(&self, x: &[f64]) -> Trace {
        let mut cur = x.to_vec();
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let h = l.affine(&cur);
            if l.relu {
                let y: Vec<f64> = h.iter().map(|v| v.max(0.0)).collect();
                cur = y.clone();
                post.push(Some(y));
            } else {
                cur = h.clone();
                post.push(None);
            }
            pre.push(h);
        }
        Trace {
            input: x.to_vec(),
            pre,
            post,
        }
    }

    /// Nodes holding the output values of layer `l` (its inputs when
    /// `l` is `None`).
    pub fn value_nodes(&self, l: Option<usize>) -> Vec<Node> {
        match l {
            None => (0..self.inputs).map(Node::Input).collect(),
            Some(l) => {
                let layer = &self.layers[l];
                (0..layer.outputs())
                    .map(|neuron| {
                        if layer.relu {
                            Node::Post { layer: l, neuron }
                        } else {
                            Node::Pre { layer: l, neuron }
                        }
                    })
                    .collect()
            }
        }
    }

    /// Every node in canonical order: inputs, then per layer its
    /// pre-activations followed by its post-activations.
    pub fn all_nodes(&self) -> Vec<Node> {
        let mut out: Vec<Node> = (0..self.inputs).map(Node::Input).collect();
        for (l, layer) in self.layers.iter().enumerate() {
            out.extend((0..layer.outputs()).map(|neuron| Node::Pre { layer: l, neuron }));
            if layer.relu {
                out.extend((0..layer.outputs()).map(|neuron| Node::Post { layer: l, neuron }));
            }
        }
        out
    }

    pub fn output_nodes(&self) -> Vec<Node> {
        self.value_nodes(Some(self.layers.len() - 1))
    }

    /// Human-readable name: `x1`, `y1` for network inputs/outputs,
    /// `l2.pre3` / `l2.post3` otherwise (all 1-based).
    pub fn label(&self, node: Node) -> String {
        let last = self.layers.len() - 1;
        let out_node = |l: usize| l == last;
        match node {
            Node::Input(j) => format!("x{}", j + 1),
            Node::Pre { layer, neuron } if out_node(layer) && !self.layers[layer].relu => {
                format!("y{}", neuron + 1)
            }
            Node::Post { layer, neuron } if out_node(layer) => format!("y{}", neuron + 1),
            Node::Pre { layer, neuron } => format!("l{}.pre{}", layer + 1, neuron + 1),
            Node::Post { layer, neuron } => format!("l{}.post{}", layer + 1, neuron + 1),
        }
    }

    pub fn slot_label(&self, slot: Slot) -> String {
        let base = self.label(slot.node);
        if slot.negated {
            format!("-{base}")
        } else {
            base
        }
    }

    /// Resolves a label produced by [`Network::slot_label`].
    pub fn parse_slot(&self, label: &str) -> Option<Slot> {
        let (negated, rest) = match label.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, label),
        };
        self.all_nodes()
            .into_iter()
            .find(|&n| self.label(n) == rest)
            .map(|node| Slot { node, negated })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Node {
    Input(usize),
    Pre { layer: usize, neuron: usize },
    Post { layer: usize, neuron: usize },
}

/// One coordinate of an abstraction: a node, or its negation (octagons).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub node: Node,
    pub negated: bool,
}

impl Slot {
    pub fn pos(node: Node) -> Self {
        Slot { node, negated: false }
    }

    pub fn neg(node: Node) -> Self {
        Slot { node, negated: true }
    }

    pub fn mirror(self) -> Self {
        Slot {
            node: self.node,
            negated: !self.negated,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainMode {
    Box,
    #[default]
    Zone,
    External,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    #[default]
    Zone,
    Octagon,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Track {
    /// Inputs and the current layer only.
    #[default]
    Io,
    All,
}

macro_rules! display_kebab {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
                write!(f, "{}", s.as_str().unwrap_or_default())
            }
        }
    )*};
}
display_kebab!(ChainMode, Domain, Track);

/// Input-box subdivision applied to the first layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSubdivision {
    /// Pieces per input dimension.
    pub counts: Vec<usize>,
    pub config: SubdivisionConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Options {
    pub mode: ChainMode,
    pub domain: Domain,
    pub track: Track,
    pub subdivision: Option<InputSubdivision>,
    pub eps: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            mode: ChainMode::Zone,
            domain: Domain::Zone,
            track: Track::Io,
            subdivision: None,
            eps: DEFAULT_EPS,
        }
    }
}

/// The concatenated inequality system built in external mode, over the
/// positive slots of every node.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalForm {
    pub slots: Vec<Slot>,
    pub system: TropExternal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub mode: ChainMode,
    pub domain: Domain,
    pub track: Track,
    pub cells: usize,
    pub generators: usize,
    #[serde(skip)]
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisResult {
    /// Coordinates of `internal` and `zone`.
    pub slots: Vec<Slot>,
    pub internal: TropInternal,
    pub zone: Dbm,
    /// Interval of every node visited, in canonical node order.
    pub node_bounds: Vec<(Node, Interval)>,
    pub output_nodes: Vec<Node>,
    pub external: Option<ExternalForm>,
    pub diagnostics: Diagnostics,
}

impl AnalysisResult {
    pub fn slot_index(&self, slot: Slot) -> Option<usize> {
        self.slots.iter().position(|&s| s == slot)
    }

    pub fn bounds_of(&self, node: Node) -> Option<Interval> {
        self.node_bounds.iter().find(|(n, _)| *n == node).map(|(_, iv)| *iv)
    }

    pub fn output_bounds(&self) -> Vec<Interval> {
        self.output_nodes
            .iter()
            .map(|&n| self.bounds_of(n).expect("output bounds are always recorded"))
            .collect()
    }

    /// The coordinates of a concrete execution in this result's slot layout.
    pub fn point_of(&self, trace: &Trace) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| {
                let v = trace.value(s.node);
                if s.negated {
                    -v
                } else {
                    v
                }
            })
            .collect()
    }

    /// Whether a concrete execution lies in the internal form, the
    /// enclosing zone and (when built) the external system.
    pub fn admits(&self, trace: &Trace, eps: f64) -> bool {
        let p = self.point_of(trace);
        let ext_ok = self.external.as_ref().is_none_or(|e| {
            let q: Vec<f64> = e.slots.iter().map(|s| trace.value(s.node)).collect();
            e.system.contains(&q, eps).unwrap_or(false)
        });
        ext_ok && self.zone.contains(&p, eps) && self.internal.contains(&p, eps).unwrap_or(false)
    }
}

/// Replaces the listed coordinates of every generator by `max(0, ·)`.
pub fn relu_internal(int: &TropInternal, coords: &[usize]) -> Result<TropInternal> {
    if let Some(&bad) = coords.iter().find(|&&c| c >= int.dim()) {
        return Err(Error::BadIndex(bad));
    }
    Ok(int
        .map_generators(int.dim(), |g| {
            let mut out = g.to_vec();
            for &c in coords {
                out[c] = out[c].max(0.0);
            }
            out
        })
        .filter_extreme(DEFAULT_EPS))
}

/// Appends `max(0, g_c)` for each listed coordinate `c`, in order. Exact:
/// ReLU is tropically affine, so the image of the hull is the hull of the
/// images.
pub fn relu_append(int: &TropInternal, coords: &[usize]) -> Result<TropInternal> {
    if let Some(&bad) = coords.iter().find(|&&c| c >= int.dim()) {
        return Err(Error::BadIndex(bad));
    }
    Ok(int
        .map_generators(int.dim() + coords.len(), |g| {
            let mut out = g.to_vec();
            out.extend(coords.iter().map(|&c| g[c].max(0.0)));
            out
        })
        .filter_extreme(DEFAULT_EPS))
}

/// Adds `y = max(0, h)` for each pair of dimensions, plus the zone rows
/// `y − h ≤ −min(0, h̲)` and `y ≤ max(0, h̄)` implied by the bounds of `h`.
pub fn relu_external(
    ext: &TropExternal,
    h_dims: &[usize],
    y_dims: &[usize],
    h_bounds: &Hyperbox,
) -> Result<TropExternal> {
    if h_dims.len() != y_dims.len() || h_dims.len() != h_bounds.dim() {
        return Err(Error::DimensionMismatch {
            expected: h_dims.len(),
            found: y_dims.len().max(h_bounds.dim()),
        });
    }
    let dim = ext.dim();
    if let Some(&bad) = h_dims.iter().chain(y_dims).find(|&&d| d >= dim) {
        return Err(Error::BadIndex(bad));
    }
    let mut out = ext.clone();
    for ((&h, &y), iv) in h_dims.iter().zip(y_dims).zip(h_bounds.intervals()) {
        let relu_h = AffineForm::bottom(dim).with_const(0.0).with_var(h, 0.0);
        let y_form = AffineForm::bottom(dim).with_var(y, 0.0);
        out.push(TropRow::new(relu_h.clone(), y_form.clone()))?;
        out.push(TropRow::new(y_form.clone(), relu_h))?;
        out.push(TropRow::new(
            y_form.clone(),
            AffineForm::bottom(dim).with_var(h, -iv.lo.min(0.0)),
        ))?;
        out.push(TropRow::new(y_form, AffineForm::bottom(dim).with_const(iv.hi.max(0.0))))?;
    }
    Ok(out)
}

fn interval_of(d: &Dbm, var: usize) -> Interval {
    let (lo, hi) = (d.lower(var), d.upper(var));
    Interval { lo: lo.min(hi), hi }
}

fn index_of(slots: &[Slot], s: Slot) -> usize {
    slots.iter().position(|&x| x == s).expect("slot is tracked")
}

/// Copies every constraint onto its mirror `z_j̄ − z_ī ≤ c` when both
/// mirrors are present (the constant slot is its own mirror).
fn mirror_tighten(d: &mut Dbm, slots: &[Slot]) {
    let mirror: Vec<Option<usize>> = std::iter::once(Some(0))
        .chain(slots.iter().map(|s| slots.iter().position(|&t| t == s.mirror()).map(|k| k + 1)))
        .collect();
    let size = slots.len() + 1;
    for i in 0..size {
        for j in 0..size {
            if let (Some(mi), Some(mj)) = (mirror[i], mirror[j]) {
                let v = d.entry(mj, mi);
                d.tighten(i, j, v);
            }
        }
    }
}

fn grid_for(net: &Network, in_box: &Hyperbox, opts: &Options) -> Result<Option<SubdivisionGrid>> {
    match &opts.subdivision {
        None => Ok(None),
        Some(s) => {
            if s.counts.len() != net.inputs() {
                return Err(Error::DimensionMismatch {
                    expected: net.inputs(),
                    found: s.counts.len(),
                });
            }
            let g = SubdivisionGrid::uniform(in_box, &s.counts)?;
            g.check_budget(s.config.cell_budget)?;
            Ok(Some(g))
        }
    }
}

fn cellwise(opts: &Options) -> bool {
    opts.subdivision
        .as_ref()
        .is_some_and(|s| s.config.mode != SubdivisionMode::ExtraConstraints)
}

/// Generators of the layer abstraction over `(x, y)`; the octagon is
/// projected back onto the positive coordinates.
fn layer_hull(layer: &AffineLayer, domain: Domain, grid: Option<&SubdivisionGrid>) -> Result<TropInternal> {
    let one = |l: &AffineLayer| -> Result<TropInternal> {
        match domain {
            Domain::Zone => Ok(layer_abs::zone_internal(&layer_abs::zone_constants(l), l)),
            Domain::Octagon => {
                let h = layer_abs::oct_internal(&layer_abs::oct_constants(l), l)?;
                let keep: Vec<usize> = (0..l.inputs() + l.outputs()).collect();
                h.project(&keep, DEFAULT_EPS)
            }
        }
    };
    match grid {
        None => one(layer),
        Some(g) => {
            let parts = g
                .cells()
                .into_par_iter()
                .map(|cell| one(&layer.with_box(cell)).map(TropInternal::into_generators))
                .collect::<Result<Vec<_>>>()?;
            let dim = layer.inputs() + layer.outputs();
            Ok(TropInternal::new(dim, parts.into_iter().flatten().collect())?.filter_extreme(DEFAULT_EPS))
        }
    }
}

/// The layer abstraction as a DBM: over `(x, y)` for zones, over
/// `(x⁺, y⁺, x⁻, y⁻)` for octagons.
fn layer_dbm(layer: &AffineLayer, domain: Domain, grid: Option<&SubdivisionGrid>) -> Result<Dbm> {
    let one = |l: &AffineLayer| -> Result<Dbm> {
        match domain {
            Domain::Zone => Ok(layer_abs::zone_dbm(&layer_abs::zone_constants(l), l)),
            Domain::Octagon => layer_abs::oct_dbm(&layer_abs::oct_constants(l), l)
                .to_zone()
                .ok_or(Error::EmptyAbstraction),
        }
    };
    match grid {
        None => one(layer),
        Some(g) => {
            let parts = g
                .cells()
                .into_par_iter()
                .map(|cell| {
                    let z = one(&layer.with_box(cell))?;
                    Ok(tropical::zone_to_internal(&z)?.into_generators())
                })
                .collect::<Result<Vec<_>>>()?;
            let dim = match domain {
                Domain::Zone => layer.inputs() + layer.outputs(),
                Domain::Octagon => 2 * (layer.inputs() + layer.outputs()),
            };
            let hull = TropInternal::new(dim, parts.into_iter().flatten().collect())?;
            tropical::internal_to_zone(&hull)
        }
    }
}

/// Runs the abstraction of `net` over `in_box`.
pub fn analyze(net: &Network, in_box: &Hyperbox, opts: &Options) -> Result<AnalysisResult> {
    if in_box.dim() != net.inputs() {
        return Err(Error::DimensionMismatch {
            expected: net.inputs(),
            found: in_box.dim(),
        });
    }
    let start = Instant::now();
    let grid = grid_for(net, in_box, opts)?;
    let mut result = match opts.mode {
        ChainMode::Zone => zone_chain(net, in_box, opts, grid.as_ref())?,
        ChainMode::Box | ChainMode::External => box_chain(net, in_box, opts, grid.as_ref())?,
    };
    if opts.mode == ChainMode::External {
        result.external = Some(external_system(net, &result, opts, grid.as_ref())?);
    }
    result.diagnostics.cells = grid.as_ref().map_or(1, SubdivisionGrid::cell_count);
    result.diagnostics.generators = result.internal.len();
    result.diagnostics.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(result)
}

fn diagnostics(opts: &Options) -> Diagnostics {
    Diagnostics {
        mode: opts.mode,
        domain: opts.domain,
        track: opts.track,
        cells: 1,
        generators: 0,
        elapsed_ms: 0.0,
    }
}

fn sort_bounds(net: &Network, mut bounds: Vec<(Node, Interval)>) -> Vec<(Node, Interval)> {
    let order = net.all_nodes();
    bounds.sort_by_key(|(n, _)| order.iter().position(|m| m == n));
    bounds
}

fn zone_chain(net: &Network, in_box: &Hyperbox, opts: &Options, grid: Option<&SubdivisionGrid>) -> Result<AnalysisResult> {
    let oct = opts.domain == Domain::Octagon;
    let signed = |nodes: &[Node]| -> Vec<Slot> {
        let mut s: Vec<Slot> = nodes.iter().map(|&n| Slot::pos(n)).collect();
        if oct {
            s.extend(nodes.iter().map(|&n| Slot::neg(n)));
        }
        s
    };
    let inputs = net.value_nodes(None);
    let mut slots = signed(&inputs);
    let mut dbm = Dbm::unconstrained(slots.len());
    for (j, iv) in in_box.intervals().iter().enumerate() {
        dbm.set_upper(j, iv.hi);
        dbm.set_lower(j, iv.lo);
        if oct {
            let k = j + inputs.len();
            dbm.set_upper(k, -iv.lo);
            dbm.set_lower(k, -iv.hi);
        }
    }
    if oct {
        mirror_tighten(&mut dbm, &slots);
    }
    let mut dbm = dbm.close().ok_or(Error::EmptyAbstraction)?;
    let mut bounds: Vec<(Node, Interval)> = inputs.iter().copied().zip(in_box.intervals().iter().copied()).collect();
    let mut internal = None;
    let last = net.layers().len() - 1;

    for (l, layer) in net.layers().iter().enumerate() {
        let in_nodes = net.value_nodes(l.checked_sub(1));
        let in_idx: Vec<usize> = in_nodes.iter().map(|&n| index_of(&slots, Slot::pos(n))).collect();
        let layer_box: Hyperbox = in_idx.iter().map(|&k| interval_of(&dbm, k)).collect();
        let abs = AffineLayer::new(layer.weights.clone(), layer.bias.clone(), layer_box)?;
        let cells = if l == 0 && cellwise(opts) { grid } else { None };
        let p = layer_dbm(&abs, opts.domain, cells)?;

        let pre: Vec<Node> = (0..layer.outputs()).map(|neuron| Node::Pre { layer: l, neuron }).collect();
        let mut next = slots.clone();
        next.extend(signed(&pre));
        let local: Vec<Slot> = if oct {
            let mut v: Vec<Slot> = in_nodes.iter().map(|&n| Slot::pos(n)).collect();
            v.extend(pre.iter().map(|&n| Slot::pos(n)));
            v.extend(in_nodes.iter().map(|&n| Slot::neg(n)));
            v.extend(pre.iter().map(|&n| Slot::neg(n)));
            v
        } else {
            in_nodes.iter().chain(&pre).map(|&n| Slot::pos(n)).collect()
        };
        let placement: Vec<usize> = local.iter().map(|&s| index_of(&next, s)).collect();
        let identity: Vec<usize> = (0..slots.len()).collect();
        let state = dbm.embed(next.len(), &identity)?;
        let mut d1 = state
            .intersect(&p.embed(next.len(), &placement)?)?
            .ok_or(Error::EmptyAbstraction)?;
        let mut cur_slots = next;
        for &n in &pre {
            bounds.push((n, interval_of(&d1, index_of(&cur_slots, Slot::pos(n)))));
        }

        let mut hull = None;
        if layer.relu {
            let post: Vec<Node> = (0..layer.outputs()).map(|neuron| Node::Post { layer: l, neuron }).collect();
            let pre_idx: Vec<usize> = pre.iter().map(|&n| index_of(&cur_slots, Slot::pos(n))).collect();
            let h = tropical::zone_to_internal_with(&d1, opts.eps)?;
            let h2 = relu_append(&h, &pre_idx)?;
            cur_slots.extend(post.iter().map(|&n| Slot::pos(n)));
            let mut d2 = tropical::internal_to_zone(&h2)?;
            let mut h2 = h2;
            if oct {
                let base = cur_slots.len();
                cur_slots.extend(post.iter().map(|&n| Slot::neg(n)));
                let identity: Vec<usize> = (0..base).collect();
                d2 = d2.embed(cur_slots.len(), &identity)?;
                for (&hn, &yn) in pre.iter().zip(&post) {
                    let (hi, yi) = (index_of(&cur_slots, Slot::pos(hn)), index_of(&cur_slots, Slot::pos(yn)));
                    let hb = interval_of(&d2, hi);
                    d2.set_lower(yi, 0.0_f64.max(hb.lo));
                    d2.set_diff(hi, yi, 0.0);
                    d2.set_diff(yi, hi, -hb.lo.min(0.0));
                    d2.set_upper(yi, hb.hi.max(0.0));
                }
                mirror_tighten(&mut d2, &cur_slots);
                d2 = d2.close().ok_or(Error::EmptyAbstraction)?;
                if l == last {
                    for (k, s) in cur_slots.iter().enumerate().skip(base) {
                        let _ = s;
                        h2 = h2.embed(interval_of(&d2, k), k)?;
                    }
                }
            }
            for &n in &post {
                bounds.push((n, interval_of(&d2, index_of(&cur_slots, Slot::pos(n)))));
            }
            d1 = d2;
            hull = Some(h2);
        }

        let keep_nodes: Vec<Node> = match opts.track {
            Track::All => Vec::new(),
            Track::Io => inputs.iter().copied().chain(net.value_nodes(Some(l))).collect(),
        };
        let keep: Vec<usize> = match opts.track {
            Track::All => (0..cur_slots.len()).collect(),
            Track::Io => signed(&keep_nodes).iter().map(|&s| index_of(&cur_slots, s)).collect(),
        };
        if l == last {
            let h = match hull {
                Some(h) => h,
                None => tropical::zone_to_internal_with(&d1, opts.eps)?,
            };
            internal = Some(h.project(&keep, opts.eps)?);
        }
        dbm = d1.project(&keep)?;
        slots = keep.iter().map(|&k| cur_slots[k]).collect();
    }

    Ok(AnalysisResult {
        slots,
        internal: internal.expect("network has at least one layer"),
        zone: dbm,
        node_bounds: sort_bounds(net, bounds),
        output_nodes: net.output_nodes(),
        external: None,
        diagnostics: diagnostics(opts),
    })
}

fn box_chain(net: &Network, in_box: &Hyperbox, opts: &Options, grid: Option<&SubdivisionGrid>) -> Result<AnalysisResult> {
    let mut cur_box = in_box.clone();
    let mut bounds: Vec<(Node, Interval)> = net
        .value_nodes(None)
        .into_iter()
        .zip(in_box.intervals().iter().copied())
        .collect();
    let last = net.layers().len() - 1;
    let mut final_hull = None;
    let mut final_local = Vec::new();

    for (l, layer) in net.layers().iter().enumerate() {
        let abs = AffineLayer::new(layer.weights.clone(), layer.bias.clone(), cur_box.clone())?;
        let cells = if l == 0 && cellwise(opts) { grid } else { None };
        let mut h = layer_hull(&abs, opts.domain, cells)?;
        let m = layer.inputs();
        let n = layer.outputs();
        let mut local: Vec<Node> = net.value_nodes(l.checked_sub(1));
        local.extend((0..n).map(|neuron| Node::Pre { layer: l, neuron }));
        if layer.relu {
            let pre_idx: Vec<usize> = (m..m + n).collect();
            h = relu_append(&h, &pre_idx)?;
            local.extend((0..n).map(|neuron| Node::Post { layer: l, neuron }));
        }
        let z = tropical::internal_to_zone(&h)?;
        for (k, &node) in local.iter().enumerate().skip(m) {
            bounds.push((node, interval_of(&z, k)));
        }
        let values = net.value_nodes(Some(l));
        cur_box = values
            .iter()
            .map(|v| interval_of(&z, local.iter().position(|x| x == v).unwrap()))
            .collect();
        if l == last {
            final_hull = Some(h);
            final_local = local;
        }
    }

    let h = final_hull.expect("network has at least one layer");
    let tracked: Vec<Node> = match opts.track {
        Track::All => net.all_nodes(),
        Track::Io => net
            .value_nodes(None)
            .into_iter()
            .chain(net.output_nodes())
            .collect(),
    };
    // keep the local nodes that are tracked, then re-attach the others
    // through their intervals, in tracked order
    let keep: Vec<usize> = tracked
        .iter()
        .filter_map(|t| final_local.iter().position(|x| x == t))
        .collect();
    let mut internal = h.project(&keep, opts.eps)?;
    for (pos, node) in tracked.iter().enumerate() {
        if final_local.contains(node) {
            continue;
        }
        let iv = bounds.iter().find(|(n, _)| n == node).map(|(_, iv)| *iv).expect("bounds recorded");
        let pad = 1e-6 * iv.width();
        internal = internal.embed(Interval { lo: iv.lo - pad, hi: iv.hi + pad }, pos)?;
    }
    let zone = tropical::internal_to_zone(&internal)?;
    Ok(AnalysisResult {
        slots: tracked.into_iter().map(Slot::pos).collect(),
        internal,
        zone,
        node_bounds: sort_bounds(net, bounds),
        output_nodes: net.output_nodes(),
        external: None,
        diagnostics: diagnostics(opts),
    })
}

/// Concatenates the per-layer inequality systems over all nodes, using the
/// layer input boxes found by the box chain.
fn external_system(
    net: &Network,
    res: &AnalysisResult,
    opts: &Options,
    grid: Option<&SubdivisionGrid>,
) -> Result<ExternalForm> {
    let all = net.all_nodes();
    let dim = all.len();
    let pos = |n: Node| all.iter().position(|&m| m == n).unwrap();
    let mut system = TropExternal::universe(dim);
    for (l, layer) in net.layers().iter().enumerate() {
        let in_nodes = net.value_nodes(l.checked_sub(1));
        let layer_box: Hyperbox = in_nodes.iter().map(|&n| res.bounds_of(n).unwrap()).collect();
        let abs = AffineLayer::new(layer.weights.clone(), layer.bias.clone(), layer_box)?;
        let pre: Vec<Node> = (0..layer.outputs()).map(|neuron| Node::Pre { layer: l, neuron }).collect();
        let placement: Vec<usize> = in_nodes.iter().chain(&pre).map(|&n| pos(n)).collect();
        let local = layer_abs::zone_external(&layer_abs::zone_constants(&abs), &abs);
        system = system.intersect(&local.embed_at(dim, &placement)?)?;
        if l == 0 {
            if let (Some(g), Some(s)) = (grid, &opts.subdivision) {
                if s.config.mode != SubdivisionMode::CellwiseUnion {
                    let extra = subdivision::subdivide_constraints(&abs, g, &s.config)?;
                    system = system.intersect(&extra.embed_at(dim, &placement)?)?;
                }
            }
        }
        if layer.relu {
            let h_dims: Vec<usize> = pre.iter().map(|&n| pos(n)).collect();
            let y_dims: Vec<usize> = (0..layer.outputs())
                .map(|neuron| pos(Node::Post { layer: l, neuron }))
                .collect();
            let h_box: Hyperbox = pre.iter().map(|&n| res.bounds_of(n).unwrap()).collect();
            system = relu_external(&system, &h_dims, &y_dims, &h_box)?;
        }
    }
    Ok(ExternalForm {
        slots: all.into_iter().map(Slot::pos).collect(),
        system,
    })
}
