#![allow(dead_code)]

use std::path::PathBuf;

use relu_pwa::{Configuration, Layer, NetworkSpec};
use relu_pwa_testkit::RawLayer;

pub fn to_net(layers: &[RawLayer]) -> NetworkSpec {
    NetworkSpec::new(
        layers
            .iter()
            .map(|(w, b)| Layer::from_rows(w.clone(), b.clone()).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn to_raw(net: &NetworkSpec) -> Vec<RawLayer> {
    net.layers()
        .iter()
        .map(|l| {
            let rows = l.weights().rows().into_iter().map(|r| r.to_vec()).collect();
            (rows, l.bias().to_vec())
        })
        .collect()
}

pub fn masks(theta: &Configuration) -> Vec<Vec<bool>> {
    theta.blocks().to_vec()
}

pub fn corpus_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

pub fn load(name: &str) -> NetworkSpec {
    relu_pwa::load_network(corpus_file(name)).unwrap()
}

/// Uniform sample from a convex polygon by area-weighted fan triangulation.
pub fn sample_in_polygon(rng: &mut impl rand::Rng, v: &[[f64; 2]]) -> Vec<f64> {
    let tri_area = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs() / 2.0
    };
    let areas: Vec<f64> = (1..v.len() - 1)
        .map(|i| tri_area(v[0], v[i], v[i + 1]))
        .collect();
    let total: f64 = areas.iter().sum();
    let mut pick = rng.random_range(0.0..total);
    let mut i = 0;
    while i + 1 < areas.len() && pick >= areas[i] {
        pick -= areas[i];
        i += 1;
    }
    let (a, b, c) = (v[0], v[i + 1], v[i + 2]);
    let (mut r1, mut r2): (f64, f64) = (rng.random(), rng.random());
    if r1 + r2 > 1.0 {
        r1 = 1.0 - r1;
        r2 = 1.0 - r2;
    }
    vec![
        a[0] + r1 * (b[0] - a[0]) + r2 * (c[0] - a[0]),
        a[1] + r1 * (b[1] - a[1]) + r2 * (c[1] - a[1]),
    ]
}
