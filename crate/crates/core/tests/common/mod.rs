#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use troprelu::dbm::Dbm;
use troprelu::hyperbox::{Hyperbox, Interval};
use troprelu::io::sherlock;
use troprelu::layer_abs::{self, AffineLayer};
use troprelu::network::{self, ChainMode, Domain, InputSubdivision, Layer, Network, Options, Track};
use troprelu::subdivision::SubdivisionConfig;
use troprelu::tropical::TropInternal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load(name: &str) -> Network {
    sherlock::read(fixture(name)).unwrap()
}

pub fn square() -> Hyperbox {
    Hyperbox::cube(2, -1.0, 1.0).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn random_box(rng: &mut ChaCha8Rng, dim: usize) -> Hyperbox {
    (0..dim)
        .map(|_| {
            let lo: f64 = rng.gen_range(-2.0..1.0);
            Interval { lo, hi: lo + rng.gen_range(0.1..2.0) }
        })
        .collect()
}

pub fn random_layer(rng: &mut ChaCha8Rng, m: usize, n: usize) -> AffineLayer {
    let w = random_matrix(rng, n, m);
    let b = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    AffineLayer::new(w, b, random_box(rng, m)).unwrap()
}

pub fn random_network(rng: &mut ChaCha8Rng, inputs: usize, widths: &[usize], relu_output: bool) -> Network {
    let mut layers = Vec::new();
    let mut width = inputs;
    for (k, &n) in widths.iter().enumerate() {
        layers.push(Layer {
            weights: random_matrix(rng, n, width),
            bias: (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            relu: k + 1 < widths.len() || relu_output,
        });
        width = n;
    }
    Network::new(inputs, layers).unwrap()
}

pub fn sample(rng: &mut ChaCha8Rng, bx: &Hyperbox) -> Vec<f64> {
    bx.intervals()
        .iter()
        .map(|iv| if iv.width() > 0.0 { rng.gen_range(iv.lo..=iv.hi) } else { iv.lo })
        .collect()
}

pub fn options(mode: ChainMode, domain: Domain) -> Options {
    Options {
        mode,
        domain,
        ..Options::default()
    }
}

/// box/zone chaining × zone/octagon layers.
pub fn all_modes() -> Vec<Options> {
    let mut v = Vec::new();
    for mode in [ChainMode::Box, ChainMode::Zone] {
        for domain in [Domain::Zone, Domain::Octagon] {
            v.push(options(mode, domain));
        }
    }
    v
}

pub fn with_subdivision(opts: &Options, counts: Vec<usize>) -> Options {
    Options {
        subdivision: Some(InputSubdivision {
            counts,
            config: SubdivisionConfig::default(),
        }),
        ..opts.clone()
    }
}

pub fn track_all(opts: &Options) -> Options {
    Options {
        track: Track::All,
        ..opts.clone()
    }
}

/// Concrete executions (box vertices first, then random points) that fall
/// outside the abstraction.
pub fn soundness_violations(net: &Network, bx: &Hyperbox, opts: &Options, samples: usize, rng: &mut ChaCha8Rng, tol: f64) -> usize {
    let res = network::analyze(net, bx, opts).unwrap();
    let mut points: Vec<Vec<f64>> = if bx.dim() <= 6 { bx.vertices() } else { Vec::new() };
    while points.len() < samples {
        points.push(sample(rng, bx));
    }
    let mut bad = 0;
    for x in &points {
        let t = net.trace(x);
        let out_ok = res
            .output_nodes
            .iter()
            .all(|&n| res.bounds_of(n).unwrap().contains(t.value(n), tol));
        if !out_ok || !res.admits(&t, tol) {
            bad += 1;
        }
    }
    bad
}

fn graph_point(layer: &AffineLayer, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    p.extend(layer.eval(x));
    p
}

/// Largest gap between a finite closed-zone entry and the best value over
/// the graph at box vertices (zero when every bound is attained).
pub fn zone_optimality_gap(layer: &AffineLayer) -> f64 {
    let d = layer_abs::zone_dbm(&layer_abs::zone_constants(layer), layer);
    let pts: Vec<Vec<f64>> = layer.in_box.vertices().iter().map(|x| graph_point(layer, x)).collect();
    let dim = d.dim();
    let mut gap: f64 = 0.0;
    for i in 0..=dim {
        for j in 0..=dim {
            if i == j || !d.entry(i, j).is_finite() {
                continue;
            }
            let v = |p: &[f64], k: usize| if k == 0 { 0.0 } else { p[k - 1] };
            let best = pts.iter().map(|p| v(p, i) - v(p, j)).fold(f64::NEG_INFINITY, f64::max);
            gap = gap.max((d.entry(i, j) - best).abs());
        }
    }
    gap
}

/// Same for the octagon: every `±z_a ± z_b` and `±2 z_a` bound.
pub fn octagon_optimality_gap(layer: &AffineLayer) -> f64 {
    let o = layer_abs::oct_dbm(&layer_abs::oct_constants(layer), layer);
    let n = o.vars();
    let pts: Vec<Vec<f64>> = layer.in_box.vertices().iter().map(|x| graph_point(layer, x)).collect();
    let signed = |p: &[f64], s: usize| if s < n { p[s] } else { -p[s - n] };
    let mut gap: f64 = 0.0;
    for i in 0..2 * n {
        for j in 0..2 * n {
            if i == j || !o.entry(i, j).is_finite() {
                continue;
            }
            let best = pts
                .iter()
                .map(|p| signed(p, i) - signed(p, j))
                .fold(f64::NEG_INFINITY, f64::max);
            gap = gap.max((o.entry(i, j) - best).abs());
        }
    }
    gap
}

/// Probe points for a layer: graph points, tropical combinations of the
/// generators, perturbations of both, and random points of the bounding box.
pub fn probes(layer: &AffineLayer, h: &TropInternal, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let z: Dbm = troprelu::tropical::internal_to_zone(h).unwrap();
    let bounds = z.bounds().unwrap();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = match out.len() % 5 {
            0 => graph_point(layer, &sample(rng, &layer.in_box)),
            1 | 2 => {
                let gens = h.generators();
                let lambdas: Vec<f64> = (0..gens.len()).map(|_| -rng.gen_range(0.0..2.0)).collect();
                let top = rng.gen_range(0..gens.len());
                (0..h.dim())
                    .map(|k| {
                        gens.iter()
                            .zip(&lambdas)
                            .enumerate()
                            .map(|(g, (v, l))| v[k] + if g == top { 0.0 } else { *l })
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect()
            }
            3 => sample(rng, &bounds),
            _ => {
                let mut p = graph_point(layer, &sample(rng, &layer.in_box));
                let k = rng.gen_range(0..p.len());
                p[k] += rng.gen_range(-0.5..0.5);
                p
            }
        };
        out.push(p);
    }
    out
}

/// Points on which the inequality form and the generator form of a layer
/// abstraction disagree.
pub fn equivalence_disagreements(layer: &AffineLayer, count: usize, rng: &mut ChaCha8Rng) -> usize {
    let k = layer_abs::zone_constants(layer);
    let ext = layer_abs::zone_external(&k, layer);
    let int = layer_abs::zone_internal(&k, layer);
    probes(layer, &int, count, rng)
        .iter()
        .filter(|p| ext.contains(p, 1e-9).unwrap() != int.contains(p, 1e-9).unwrap())
        .count()
}

/// Largest increase of any enclosing-zone entry when the input grid is
/// refined through `counts` (each a refinement of the previous one).
pub fn refinement_increase(net: &Network, bx: &Hyperbox, counts: &[usize]) -> f64 {
    let mut prev: Option<Dbm> = None;
    let mut worst: f64 = f64::NEG_INFINITY;
    for &n in counts {
        let opts = with_subdivision(&Options::default(), vec![n; net.inputs()]);
        let z = network::analyze(net, bx, &opts).unwrap().zone;
        if let Some(p) = &prev {
            for i in 0..=z.dim() {
                for j in 0..=z.dim() {
                    if i != j {
                        worst = worst.max(z.entry(i, j) - p.entry(i, j));
                    }
                }
            }
        }
        prev = Some(z);
    }
    worst
}
