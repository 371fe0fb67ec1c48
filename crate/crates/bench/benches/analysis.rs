use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relu_pwa::{
    affine_piece, atomic_decomposition, enumerate_regions, spectral_norm, BoundingBox,
    EnumerationOptions, Layer, NetworkSpec,
};
use relu_pwa_testkit as tk;

fn network(widths: &[usize], seed: u64) -> NetworkSpec {
    let mut rng = tk::seeded(seed);
    let layers = tk::random_layers(&mut rng, widths, 1.0, 0.5)
        .into_iter()
        .map(|(w, b)| Layer::from_rows(w, b).unwrap())
        .collect();
    NetworkSpec::new(layers).unwrap()
}

fn pointwise(c: &mut Criterion) {
    let net = network(&[4, 16, 16, 16, 16, 16, 2], 1);
    let x = [0.3, -1.2, 0.7, 2.0];
    let theta = net.config_of(&x).unwrap();
    c.bench_function("forward_pass", |b| {
        b.iter(|| net.forward_pass(black_box(&x)).unwrap())
    });
    c.bench_function("affine_piece", |b| {
        b.iter(|| affine_piece(&net, black_box(&theta)).unwrap())
    });
    c.bench_function("atomic_decomposition", |b| {
        b.iter(|| atomic_decomposition(&net, black_box(&theta)).unwrap())
    });
}

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumerate_regions");
    group.sample_size(10);
    let domain = BoundingBox::symmetric(2, 5.0).unwrap();
    for width in [4, 6, 8] {
        let net = network(&[2, width, width, 1], 2);
        group.bench_with_input(BenchmarkId::from_parameter(width), &net, |b, net| {
            b.iter(|| enumerate_regions(net, &domain, &EnumerationOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn spectral(c: &mut Criterion) {
    let net = network(&[16, 16, 1], 3);
    let w = net.layers()[0].weights();
    c.bench_function("spectral_norm_16x16", |b| {
        b.iter(|| spectral_norm(black_box(w)))
    });
}

criterion_group!(benches, pointwise, enumeration, spectral);
criterion_main!(benches);
