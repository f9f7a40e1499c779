mod common;

use proptest::prelude::*;
use rand::Rng;

use common::*;
use troprelu::hyperbox::Hyperbox;
use troprelu::layer_abs::{self, AffineLayer};
use troprelu::subdivision::{self, SubdivisionConfig, SubdivisionGrid};

const EPS: f64 = 1e-9;

fn graph_point(l: &AffineLayer, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    p.extend(l.eval(x));
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_points_satisfy_every_form(seed in any::<u64>(), m in 1usize..5, n in 1usize..5) {
        let mut r = rng(seed);
        let l = random_layer(&mut r, m, n);
        let k = layer_abs::zone_constants(&l);
        let ext = layer_abs::zone_external(&k, &l);
        let int = layer_abs::zone_internal(&k, &l);
        let oct = layer_abs::oct_dbm(&layer_abs::oct_constants(&l), &l);
        for _ in 0..2000 {
            let p = graph_point(&l, &sample(&mut r, &l.in_box));
            prop_assert!(ext.contains(&p, EPS).unwrap());
            prop_assert!(int.contains(&p, EPS).unwrap());
            prop_assert!(oct.contains(&p, EPS));
        }
    }

    #[test]
    fn constants_respect_their_inequalities(seed in any::<u64>(), m in 1usize..6, n in 1usize..5) {
        let mut r = rng(seed);
        let l = random_layer(&mut r, m, n);
        let k = layer_abs::zone_constants(&l);
        for i in 0..n {
            let mut total = 0.0;
            for j in 0..m {
                let width = l.in_box[j].width();
                prop_assert!(k.slack[i][j] <= width + EPS);
                prop_assert!(k.slack[i][j] <= l.weights[i][j].abs() * width + EPS);
                total += k.slack[i][j];
            }
            prop_assert!(k.upper[i] - k.lower[i] >= total - EPS);
            for i2 in 0..n {
                prop_assert!(k.lower[i] - EPS <= k.d[i][i2] && k.d[i][i2] <= k.upper[i] + EPS);
                prop_assert!(k.lower[i2] - EPS <= k.c[i][i2] && k.c[i][i2] <= k.upper[i2] + EPS);
            }
        }
    }

    #[test]
    fn octagon_refines_zone(seed in any::<u64>(), m in 1usize..5, n in 1usize..5) {
        let mut r = rng(seed);
        let l = random_layer(&mut r, m, n);
        let zone = layer_abs::zone_dbm(&layer_abs::zone_constants(&l), &l);
        let keep: Vec<usize> = (0..m + n).collect();
        let oct = layer_abs::oct_dbm(&layer_abs::oct_constants(&l), &l).to_zone().unwrap().project(&keep).unwrap();
        for i in 0..=m + n {
            for j in 0..=m + n {
                prop_assert!(oct.entry(i, j) <= zone.entry(i, j) + EPS, "({i}, {j})");
            }
        }
    }

    #[test]
    fn subdivision_keeps_graph_points(seed in any::<u64>(), m in 1usize..4, n in 1usize..4) {
        let mut r = rng(seed);
        let l = random_layer(&mut r, m, n);
        let counts: Vec<usize> = (0..m).map(|_| r.gen_range(1..=4)).collect();
        let grid = SubdivisionGrid::uniform(&l.in_box, &counts).unwrap();
        let cfg = SubdivisionConfig { max_subset: 3, ..SubdivisionConfig::default() };
        let rows = subdivision::subdivide_constraints(&l, &grid, &cfg).unwrap();
        let hull = subdivision::analyze_cellwise(&l, &grid, 1024).unwrap();
        // dense grid over the input box, vertices included
        let steps = 6;
        let mut idx = vec![0usize; m];
        loop {
            let x: Vec<f64> = idx
                .iter()
                .zip(l.in_box.intervals())
                .map(|(&k, iv)| iv.lo + iv.width() * k as f64 / steps as f64)
                .collect();
            let p = graph_point(&l, &x);
            prop_assert!(rows.contains(&p, EPS).unwrap(), "{p:?}");
            prop_assert!(hull.contains(&p, EPS).unwrap(), "{p:?}");
            let Some(pos) = idx.iter().position(|&k| k < steps) else { break };
            idx[pos] += 1;
            for k in idx.iter_mut().take(pos) {
                *k = 0;
            }
        }
    }
}

/// Share of a fixed sample grid accepted by the scalar abstraction.
fn accepted_share(lambda: f64, n: usize) -> f64 {
    let (a, b) = (-1.0, 1.0);
    let (_, int) = subdivision::subdivide_scalar(lambda, 0.0, (a, b), n).unwrap();
    let (lo, hi) = (-(lambda.abs()) - 0.5, lambda.abs() + 0.5);
    let steps = 120;
    let mut hits = 0;
    for i in 0..=steps {
        for j in 0..=steps {
            let x = a + (b - a) * i as f64 / steps as f64;
            let y = lo + (hi - lo) * j as f64 / steps as f64;
            if int.contains(&[x, y], EPS).unwrap() {
                hits += 1;
            }
        }
    }
    hits as f64 / ((steps + 1) * (steps + 1)) as f64
}

#[test]
fn scalar_abstraction_shrinks_with_more_pieces() {
    for lambda in [-1.0, 0.5, 2.0] {
        let shares: Vec<f64> = [1, 2, 4, 8].iter().map(|&n| accepted_share(lambda, n)).collect();
        assert!(shares.windows(2).all(|w| w[1] <= w[0]), "slope {lambda}: {shares:?}");
        assert!(shares[3] < shares[0] || shares[0] == shares[3], "slope {lambda}: {shares:?}");
    }
}

#[test]
fn optimality_on_fixed_layers() {
    let mut r = rng(7);
    for m in 1..=8 {
        let l = random_layer(&mut r, m, 3);
        assert!(zone_optimality_gap(&l) <= 1e-7);
        assert!(octagon_optimality_gap(&l) <= 1e-7);
    }
    let l = AffineLayer::new(vec![vec![0.0, 0.0]], vec![2.0], Hyperbox::cube(2, 0.0, 1.0).unwrap()).unwrap();
    assert!(zone_optimality_gap(&l) <= 1e-12);
}

#[test]
fn external_and_internal_agree() {
    let mut r = rng(11);
    for _ in 0..20 {
        let (m, n) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let l = random_layer(&mut r, m, n);
        assert_eq!(equivalence_disagreements(&l, 500, &mut r), 0);
    }
}
