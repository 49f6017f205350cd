//! Per-explanation latency of the residual explainer against sampled
//! Shapley values, at the default 64-channel width and at a wider
//! 257-channel layout.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rxp_core::{
    build_autoencoder, encoder_ramp, explain_rxp, fit_residual_stats, kernel_shap_explain,
    Detector, DetectorConfig, Matrix, ShapConfig, ZScoreMode,
};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random()).collect()).unwrap()
}

struct Fixture {
    detector: Detector,
    stats: rxp_core::ResidualStats,
    background: Matrix,
    x: Vec<f64>,
}

fn fixture(cfg: &DetectorConfig, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = cfg.layer_sizes[0];
    let detector = Detector::from_parts(build_autoencoder(cfg).unwrap(), 0.1, 0.01);
    let background = random_matrix(&mut rng, 60, dim);
    let stats = fit_residual_stats(&detector, &background, ZScoreMode::ResidualStats).unwrap();
    let x = (0..dim).map(|_| rng.random()).collect();
    Fixture {
        detector,
        stats,
        background,
        x,
    }
}

fn bench_explainers(c: &mut Criterion) {
    let narrow = fixture(&DetectorConfig::default(), 1);
    let wide = fixture(
        &DetectorConfig {
            layer_sizes: encoder_ramp(257, 32, 4),
            ..DetectorConfig::default()
        },
        2,
    );

    c.bench_function("rxp_64", |b| {
        b.iter(|| black_box(explain_rxp(&narrow.detector, &narrow.stats, &narrow.x).unwrap()))
    });
    c.bench_function("rxp_257", |b| {
        b.iter(|| black_box(explain_rxp(&wide.detector, &wide.stats, &wide.x).unwrap()))
    });

    let shap_cfg = ShapConfig::desk_shap3(11);
    let mut group = c.benchmark_group("sampled_shapley");
    group.sample_size(20);
    group.bench_function("desk_shap3_64", |b| {
        b.iter(|| {
            black_box(
                kernel_shap_explain(&narrow.detector, &narrow.x, &narrow.background, &shap_cfg)
                    .unwrap(),
            )
        })
    });
    group.finish();
}

criterion_group!(benches, bench_explainers);
criterion_main!(benches);
