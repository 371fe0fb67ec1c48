mod common;

use common::{load, sample_in_polygon, to_net, to_raw};
use proptest::prelude::*;
use relu_pwa::bounds::{middle_weight_bound, normalization};
use relu_pwa::{
    enumerate_regions, gradient_backward_product, gradient_stability_report,
    lipschitz_config_bound, lipschitz_global_bound, polygon_of_region_2d, spectral_lipschitz_bound,
    spectral_norm, BoundKind, BoundingBox, Configuration, EnumerationOptions, NetworkSpec,
};
use relu_pwa_testkit as tk;

fn gain(net: &NetworkSpec, a: &[f64], b: &[f64]) -> f64 {
    let fa = net.evaluate(a).unwrap();
    let fb = net.evaluate(b).unwrap();
    let num = (&fa - &fb).mapv(|v| v * v).sum().sqrt();
    let den = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    num / den
}

#[test]
fn bounds_dominate_sampled_same_region_gains() {
    let mut rng = tk::seeded(50);
    let domain = BoundingBox::symmetric(2, 5.0).unwrap();
    for name in [
        "normalized_l4.json",
        "normalized_l5.json",
        "small_c_l4.json",
        "small_c_l5.json",
    ] {
        let net = load(name);
        assert!(normalization(&net).0, "{name}");
        let global = lipschitz_global_bound(&net).unwrap();
        let spectral = spectral_lipschitz_bound(&net);
        let tree = enumerate_regions(&net, &domain, &EnumerationOptions::default()).unwrap();
        for leaf in tree.leaves() {
            let local = lipschitz_config_bound(&net, &leaf.prefix).unwrap();
            assert!(local.value <= global.value * (1.0 + 1e-12));
            let poly = polygon_of_region_2d(&leaf.constraints).unwrap();
            let mut worst: f64 = 0.0;
            for _ in 0..1000 {
                let a = sample_in_polygon(&mut rng, &poly.vertices);
                let b = sample_in_polygon(&mut rng, &poly.vertices);
                if a == b {
                    continue;
                }
                worst = worst.max(gain(&net, &a, &b));
            }
            let slack = 1.0 + 1e-9;
            assert!(
                worst <= local.value * slack,
                "{name} {}: {worst} > {}",
                leaf.prefix,
                local.value
            );
            assert!(worst <= global.value * slack);
            assert!(worst <= spectral.value * slack);
        }
        // continuity makes the global bound hold across regions as well
        for _ in 0..2000 {
            let a = tk::random_point(&mut rng, &[-5.0, -5.0], &[5.0, 5.0]);
            let b = tk::random_point(&mut rng, &[-5.0, -5.0], &[5.0, 5.0]);
            assert!(gain(&net, &a, &b) <= global.value * (1.0 + 1e-9));
        }
    }
}

#[test]
fn power_iteration_matches_jacobi_svd() {
    let mut rng = tk::seeded(51);
    for _ in 0..50 {
        let rows = rand::Rng::random_range(&mut rng, 1..=8);
        let cols = rand::Rng::random_range(&mut rng, 1..=8);
        let raw = tk::random_layers(&mut rng, &[cols, rows], 1.0, 0.0);
        let net = to_net(&[raw[0].clone(), (vec![vec![1.0; rows]], vec![0.0])]);
        let oracle = tk::jacobi_singular_values(&raw[0].0)[0];
        let mine = spectral_norm(net.layers()[0].weights());
        assert!((mine - oracle).abs() <= 1e-8 * oracle, "{mine} vs {oracle}");
    }
}

#[test]
fn spectral_bound_of_corpus_nets() {
    for name in [
        "normalized_l4.json",
        "small_c_l6.json",
        "seven_regions.json",
    ] {
        let net = load(name);
        let raw = to_raw(&net);
        let sigma = raw
            .iter()
            .map(|(w, _)| tk::jacobi_singular_values(w)[0])
            .fold(0.0, f64::max);
        let report = spectral_lipschitz_bound(&net);
        assert_eq!(report.kind, BoundKind::Spectral);
        let expected = sigma.powi(net.depth() as i32);
        assert!((report.value - expected).abs() <= 1e-8 * expected);
        assert_eq!(report.recompute(), Some(report.value));
    }
    let id = load("identity2.json");
    assert!((spectral_lipschitz_bound(&id).value - 1.0).abs() < 1e-12);
}

#[test]
fn global_bound_does_not_grow_with_depth_when_weights_are_small() {
    let values: Vec<f64> = [4, 5, 6]
        .iter()
        .map(|l| {
            let net = load(&format!("small_c_l{l}.json"));
            let n = *net.hidden_widths().iter().max().unwrap() as f64;
            assert!(middle_weight_bound(&net) <= 1.0 / n);
            let report = lipschitz_global_bound(&net).unwrap();
            assert!(report.value <= n);
            assert_eq!(report.recompute(), Some(report.value));
            report.value
        })
        .collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]), "{values:?}");
}

fn squared_loss(raw: &[tk::RawLayer], k: usize) -> impl Fn(&[f64]) -> f64 + '_ {
    move |y: &[f64]| 0.5 * tk::norm(&tk::naive_forward_from_layer(raw, k, y)).powi(2)
}

#[test]
fn backward_products_match_finite_differences() {
    let mut rng = tk::seeded(52);
    let mut checked = 0;
    for name in ["normalized_l4.json", "normalized_l5.json"] {
        let net = load(name);
        let raw = to_raw(&net);
        while checked < 200 {
            let x = tk::random_point(&mut rng, &[-2.0, -2.0], &[2.0, 2.0]);
            let (pre, out) = tk::naive_forward(&raw, &x);
            let margin = pre
                .iter()
                .flatten()
                .fold(f64::INFINITY, |m, v| m.min(v.abs()));
            if margin < 1e-3 {
                continue;
            }
            let reports = gradient_stability_report(&net, &x, &out, 0.0).unwrap();
            for k in 1..net.depth() {
                let g = gradient_backward_product(&net, &x, k, &out).unwrap();
                let fd = tk::central_gradient(squared_loss(&raw, k), &pre[k - 1], 1e-6);
                let err: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
                assert!(
                    tk::norm(&err) <= 1e-5 * tk::norm(&fd).max(1e-12),
                    "{name} k={k}"
                );
                let r = &reports[k - 1];
                assert_eq!(r.kind, BoundKind::GradientLayer);
                assert_eq!(r.holds(), Some(true));
                assert!(r.spectral_product.unwrap() * (1.0 + 1e-9) >= r.observed.unwrap());
                assert_eq!(r.recompute(), Some(r.value));
            }
            checked += 1;
        }
        checked = 0;
    }
}

#[test]
fn gradient_bounds_do_not_grow_toward_the_input_when_weights_are_small() {
    let mut rng = tk::seeded(53);
    let widths = [3, 4, 4, 4, 2];
    let mut raw = tk::random_layers(&mut rng, &widths, 0.25, 0.3);
    raw[0].0[0][0] = 0.25;
    let net = to_net(&raw);
    let reports = gradient_stability_report(&net, &[0.5, -0.2, 1.0], &[1.0, -2.0], 1.0).unwrap();
    let layer: Vec<f64> = reports
        .iter()
        .filter(|r| r.kind == BoundKind::GradientLayer)
        .map(|r| r.value)
        .collect();
    assert_eq!(layer.len(), 3);
    assert!(layer.windows(2).all(|w| w[0] <= w[1]), "{layer:?}");
    let input = reports.last().unwrap();
    assert_eq!(input.kind, BoundKind::GradientInput);
    assert!(input.value <= 1.0);
}

#[test]
fn negative_smoothness_is_rejected() {
    let net = load("normalized_l4.json");
    assert!(gradient_stability_report(&net, &[0.0, 0.0], &[1.0, 1.0], -1.0).is_err());
}

fn random_net() -> impl Strategy<Value = (Vec<tk::RawLayer>, Vec<f64>, Vec<f64>)> {
    (any::<u64>(), 4usize..=6).prop_map(|(seed, depth)| {
        let mut rng = tk::seeded(seed);
        let mut widths = vec![2];
        for _ in 0..depth {
            widths.push(rand::Rng::random_range(&mut rng, 1..=4));
        }
        let layers = tk::random_layers(&mut rng, &widths, 1.0, 0.5);
        let x = tk::random_point(&mut rng, &[-2.0, -2.0], &[2.0, 2.0]);
        let g = tk::random_point(
            &mut rng,
            &vec![-1.0; widths[depth]],
            &vec![1.0; widths[depth]],
        );
        (layers, x, g)
    })
}

proptest! {
    #[test]
    fn config_bound_is_monotone_in_support((raw, x, _) in random_net(), flips in proptest::collection::vec(any::<bool>(), 24)) {
        let net = to_net(&raw);
        let theta = net.config_of(&x).unwrap();
        let mut k = 0;
        let bigger = Configuration::new(
            theta.blocks().iter()
                .map(|b| b.iter().map(|&bit| { k += 1; bit || flips[k % flips.len()] }).collect())
                .collect(),
        );
        let small = lipschitz_config_bound(&net, &theta).unwrap();
        let large = lipschitz_config_bound(&net, &bigger).unwrap();
        prop_assert!(small.value <= large.value);
        prop_assert!(large.value <= lipschitz_global_bound(&net).unwrap().value * (1.0 + 1e-12));
        prop_assert_eq!(small.recompute(), Some(small.value));
    }

    #[test]
    fn backward_product_satisfies_its_recursion((raw, x, g) in random_net()) {
        let net = to_net(&raw);
        let (pre, _) = tk::naive_forward(&raw, &x);
        let l = net.depth();
        for k in 1..l - 1 {
            let here = gradient_backward_product(&net, &x, k, &g).unwrap();
            let next = gradient_backward_product(&net, &x, k + 1, &g).unwrap();
            let w = &raw[k].0;
            for (i, &h) in here.iter().enumerate() {
                let mut s = 0.0;
                for (j, row) in w.iter().enumerate() {
                    s += row[i] * next[j];
                }
                let expected = if pre[k - 1][i] >= 0.0 { s } else { 0.0 };
                prop_assert!((h - expected).abs() <= 1e-12 * (1.0 + s.abs()));
            }
        }
    }
}
