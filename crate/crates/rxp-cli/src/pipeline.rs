//! Shared plumbing for commands that need data and a trained detector:
//! dataset loading or generation, the train/test split, scaling, training,
//! and residual statistics.

use std::path::Path;

use rxp_core::detector::{train_detector_with_losses, Detector, DetectorConfig};
use rxp_core::matrix::Matrix;
use rxp_core::rxp::{fit_residual_stats_with_epsilon, ResidualStats};
use rxp_core::seed::derive_seed;
use rxp_core::synth::{generate, load_csv, split_indices, DatasetBundle, MinMaxScaler,
                      RecordTruth};

use crate::config::RunConfig;
use crate::errors::Result;
use crate::manifest::Manifest;

/// Loads the configured CSV, or generates the configured (or default)
/// synthetic dataset with the `"dataset"`-derived seed.
pub fn load_or_generate(cfg: &RunConfig, manifest: &mut Manifest) -> Result<DatasetBundle> {
    if let Some(path) = &cfg.dataset {
        manifest.record_input(path)?;
        return Ok(load_csv(path)?);
    }
    let spec = cfg.spec_or_default();
    let mut gen = spec.generate.clone();
    gen.seed = derive_seed(cfg.seed, "dataset");
    Ok(generate(&spec.features, &gen)?)
}

/// Everything the detect/explain/benchmark stages consume.
pub struct TrainedPipeline {
    pub detector: Detector,
    pub scaler: MinMaxScaler,
    pub stats: ResidualStats,
    pub feature_names: Vec<String>,
    /// Scaled training rows (background source for sampling explainers).
    pub train: Matrix,
    /// Scaled held-out rows, aligned with `truth`.
    pub test: Matrix,
    pub truth: Vec<RecordTruth>,
    pub train_losses: Vec<f64>,
}

/// Splits, scales, trains, and fits residual statistics, deriving the
/// `"split"` and `"train"` seeds from the run seed.
pub fn train_pipeline(cfg: &RunConfig, data: &DatasetBundle) -> Result<TrainedPipeline> {
    let (train_idx, test_idx) = split_indices(
        data.data.rows(),
        cfg.train_fraction,
        derive_seed(cfg.seed, "split"),
    )?;
    let train_raw = data.data.select_rows(&train_idx);
    let test_raw = data.data.select_rows(&test_idx);
    let scaler = MinMaxScaler::fit(&train_raw)?;
    let train = scaler.apply(&train_raw)?;
    let test = scaler.apply(&test_raw)?;
    let truth: Vec<RecordTruth> = test_idx
        .iter()
        .map(|&i| data.ground_truth.records[i].clone())
        .collect();

    let mut det_cfg = DetectorConfig {
        layer_sizes: normalized_sizes(&cfg.detector.layer_sizes, train.cols()),
        ..cfg.detector.clone()
    };
    det_cfg.train.seed = derive_seed(cfg.seed, "train");
    let (detector, train_losses) = train_detector_with_losses(&det_cfg, &train)?;

    let stats = fit_residual_stats_with_epsilon(
        &detector,
        &train,
        cfg.rxp.zscore_mode,
        cfg.rxp.epsilon,
    )?;

    Ok(TrainedPipeline {
        detector,
        scaler,
        stats,
        feature_names: data.feature_names.clone(),
        train,
        test,
        truth,
        train_losses,
    })
}

/// The configured encoder sizes must start at the data's width; a leading
/// size that disagrees (e.g. the 64-wide default against a narrower CSV)
/// is replaced so configs stay portable across datasets.
fn normalized_sizes(configured: &[usize], input_dim: usize) -> Vec<usize> {
    let mut sizes = configured.to_vec();
    match sizes.first() {
        Some(&first) if first == input_dim => sizes,
        _ => {
            if sizes.is_empty() {
                return vec![input_dim, input_dim.div_ceil(2).max(1)];
            }
            sizes[0] = input_dim;
            // Drop interior sizes the narrower input can no longer ramp to.
            let mut out = vec![input_dim];
            for &s in &sizes[1..] {
                if s < *out.last().unwrap() {
                    out.push(s);
                }
            }
            if out.len() == 1 {
                out.push(input_dim.div_ceil(2).max(1));
            }
            out
        }
    }
}

/// Writes the whole pipeline as one detector envelope.
pub fn write_envelope(pipe: &TrainedPipeline, path: &Path) -> Result<()> {
    let mut env = pipe.detector.to_envelope(pipe.feature_names.clone());
    env.scaler = Some(pipe.scaler.clone());
    env.residual_stats = Some(pipe.stats.clone());
    env.zscore_mode = Some(pipe.stats.mode);
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
