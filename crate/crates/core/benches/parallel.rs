//! Data-parallel kernels on the default rayon pool versus a one-thread pool.
//!
//! Run `cargo bench -p mvsense-core --no-default-features` to time the
//! sequential build instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use mvsense::em::{multi_view_channels, PhysicsConfig, RoiGrid, TargetScene, ViewLayout};
use mvsense::metrics::chamfer;
use mvsense::Point2;

fn scene(res: usize) -> TargetScene {
    let grid = RoiGrid::new(0.5, res).unwrap();
    let d = grid.num_pixels();
    let (mut eps, mut sigma) = (vec![1.0; d], vec![0.0; d]);
    for m in 0..d {
        let c = grid.pixel_center(m);
        if c.x.hypot(c.y) < 0.12 {
            eps[m] = 1.4;
            sigma[m] = 0.02;
        }
    }
    TargetScene::new(grid, eps, sigma).unwrap()
}

fn layout(cfg: &PhysicsConfig, nb: usize, nu: usize) -> ViewLayout {
    let tau = 2.0 * std::f64::consts::PI;
    let bs = (0..nb).map(|b| Point2::from_polar(90.0, tau * b as f64 / nb as f64)).collect();
    let ue = (0..nu).map(|u| Point2::from_polar(6.0, tau * u as f64 / nu as f64 + 0.2)).collect();
    ViewLayout::ula(bs, ue, 4, cfg.wavelength() / 2.0).unwrap()
}

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("rayon", rayon::ThreadPoolBuilder::new().build().unwrap()),
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ]
}

fn bench_channels(c: &mut Criterion) {
    let cfg = PhysicsConfig::default();
    let scene = scene(24);
    let layout = layout(&cfg, 4, 8);
    let mut group = c.benchmark_group("multi_view_channels_24x24_4x8");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| multi_view_channels(black_box(&scene), &layout, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn bench_chamfer(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut cloud = |n: usize| -> Vec<[f64; 4]> {
        (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0))).collect()
    };
    let (a, b) = (cloud(20_000), cloud(20_000));
    let mut group = c.benchmark_group("chamfer_20000");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| pool.install(|| chamfer(black_box(&a), black_box(&b)).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_channels, bench_chamfer);
criterion_main!(benches);
