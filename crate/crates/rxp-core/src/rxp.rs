//! Residual-based feature attribution (RXP).
//!
//! For a record x with reconstruction x', each feature's relevance is its
//! squared residual weighted by the log-smoothed magnitude of its deviation
//! score, normalized to sum to 1:
//!
//! ```text
//! z_m = (x_m - u_m) / sigma_m
//! R_m = log(1 + |z_m|) * (x_m - x'_m)^2 / sum_i log(1 + |z_i|) * (x_i - x'_i)^2
//! ```
//!
//! u_m and sigma_m come from the training residuals (per-feature mean and
//! population standard deviation of d = x - x'). The whole computation is
//! closed-form: no sampling, no background set, bitwise deterministic.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::explanation::{rank_desc, ExplainMethod, Explanation};
use crate::matrix::Matrix;

/// Which values feed the per-feature statistics behind the deviation score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZScoreMode {
    /// u, sigma gathered from signed training residuals d = x - x'
    /// (the default reading of the deviation-score definition).
    #[default]
    ResidualStats,
    /// u, sigma gathered from the raw training inputs instead.
    InputStats,
}

/// Floor applied to per-feature standard deviations so constant features
/// never divide by zero.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Per-feature statistics used by the deviation score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at `epsilon`.
    pub std: Vec<f64>,
    pub epsilon: f64,
    /// Number of training rows the statistics were gathered from.
    pub source_count: usize,
    pub mode: ZScoreMode,
}

/// Gathers per-feature mean and population standard deviation from the
/// training set: of the signed residuals d = x - x' in the default mode,
/// or of the raw inputs in [`ZScoreMode::InputStats`].
pub fn fit_residual_stats(
    det: &Detector,
    training: &Matrix,
    mode: ZScoreMode,
) -> Result<ResidualStats> {
    fit_residual_stats_with_epsilon(det, training, mode, DEFAULT_EPSILON)
}

pub fn fit_residual_stats_with_epsilon(
    det: &Detector,
    training: &Matrix,
    mode: ZScoreMode,
    epsilon: f64,
) -> Result<ResidualStats> {
    if training.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if training.cols() != det.input_dim {
        return Err(Error::DimensionError(format!(
            "training data has {} columns, detector expects {}",
            training.cols(),
            det.input_dim
        )));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {}",
            epsilon
        )));
    }

    let m = training.cols();
    let n = training.rows();
    let mut values = Matrix::zeros(n, m);
    for (i, row) in training.iter_rows().enumerate() {
        let v = values.row_mut(i);
        match mode {
            ZScoreMode::ResidualStats => {
                v.copy_from_slice(&det.residuals(row)?.signed);
            }
            ZScoreMode::InputStats => v.copy_from_slice(row),
        }
    }

    let mut mean = vec![0.0; m];
    for row in values.iter_rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for acc in &mut mean {
        *acc /= n as f64;
    }

    let mut var = vec![0.0; m];
    for row in values.iter_rows() {
        for ((acc, v), u) in var.iter_mut().zip(row).zip(&mean) {
            let d = v - u;
            *acc += d * d;
        }
    }
    let std = var
        .iter()
        .map(|&v| (v / n as f64).sqrt().max(epsilon))
        .collect();

    Ok(ResidualStats {
        mean,
        std,
        epsilon,
        source_count: n,
        mode,
    })
}

/// Deviation score z_m = (x_m - u_m) / sigma_m for every feature.
pub fn zscore(stats: &ResidualStats, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != stats.mean.len() {
        return Err(Error::DimensionError(format!(
            "input has {} values, statistics cover {}",
            x.len(),
            stats.mean.len()
        )));
    }
    Ok(x.iter()
        .zip(&stats.mean)
        .zip(&stats.std)
        .map(|((x, u), s)| (x - u) / s)
        .collect())
}

/// Explains one record: relevance R_m = log(1+|z_m|) * (x_m - x'_m)^2,
/// normalized over features. Intended for records classified anomalous, but
/// callable on any record (useful for false-negative analysis).
///
/// Returns [`Error::ZeroRelevanceMass`] when every term vanishes (all
/// residuals zero, or z = 0 wherever residuals are nonzero) — there is no
/// signal to distribute.
pub fn explain_rxp(det: &Detector, stats: &ResidualStats, x: &[f64]) -> Result<Explanation> {
    let start = Instant::now();
    let residual = det.residuals(x)?;
    let z = zscore(stats, x)?;

    let terms: Vec<f64> = z
        .iter()
        .zip(&residual.squared)
        .map(|(z, r2)| (1.0 + z.abs()).ln() * r2)
        .collect();
    let denom: f64 = terms.iter().sum();
    if denom == 0.0 {
        return Err(Error::ZeroRelevanceMass);
    }

    let relevance: Vec<f64> = terms.iter().map(|t| t / denom).collect();
    let ranking = rank_desc(&relevance);
    Ok(Explanation {
        method: ExplainMethod::Rxp,
        relevance,
        ranking,
        zscores: Some(z),
        elapsed_ns: Some(start.elapsed().as_nanos() as u64),
        shap: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::Detector;
    use crate::nn::{Activation, Layer, Network};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Detector whose network reproduces its input exactly.
    fn identity_detector(dim: usize) -> Detector {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Detector::from_parts(
            Network {
                input_dim: dim,
                layers: vec![Layer {
                    weights,
                    biases: vec![0.0; dim],
                    activation: Activation::Identity,
                }],
            },
            0.0,
            0.01,
        )
    }

    /// Detector that always reconstructs the zero vector, so d = x.
    fn zero_detector(dim: usize) -> Detector {
        Detector::from_parts(
            Network {
                input_dim: dim,
                layers: vec![Layer {
                    weights: vec![0.0; dim * dim],
                    biases: vec![0.0; dim],
                    activation: Activation::Identity,
                }],
            },
            0.0,
            0.01,
        )
    }

    fn stats(mean: Vec<f64>, std: Vec<f64>) -> ResidualStats {
        ResidualStats {
            mean,
            std,
            epsilon: DEFAULT_EPSILON,
            source_count: 1,
            mode: ZScoreMode::ResidualStats,
        }
    }

    #[test]
    fn perfect_reconstructor_gives_zero_mean_and_floored_std() {
        let det = identity_detector(3);
        let data = Matrix::from_rows(&[vec![0.1, 0.5, 0.9], vec![0.4, 0.2, 0.7]]).unwrap();
        let s = fit_residual_stats(&det, &data, ZScoreMode::ResidualStats).unwrap();
        assert_eq!(s.mean, vec![0.0; 3]);
        assert_eq!(s.std, vec![DEFAULT_EPSILON; 3]);
        assert_eq!(s.source_count, 2);
    }

    #[test]
    fn residual_stats_match_hand_arithmetic() {
        // Reconstruction is always 0, so residuals equal the inputs:
        // per-feature residuals {-1, 1} give mean 0, population std 1.
        let det = zero_detector(1);
        let data = Matrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let s = fit_residual_stats(&det, &data, ZScoreMode::ResidualStats).unwrap();
        assert_eq!(s.mean, vec![0.0]);
        assert_eq!(s.std, vec![1.0]);
    }

    #[test]
    fn input_mode_gathers_stats_from_raw_values() {
        let det = identity_detector(1);
        let data = Matrix::from_rows(&[vec![2.0], vec![4.0]]).unwrap();
        let s = fit_residual_stats(&det, &data, ZScoreMode::InputStats).unwrap();
        assert_eq!(s.mean, vec![3.0]);
        assert_eq!(s.std, vec![1.0]);
    }

    #[test]
    fn fitting_stats_is_pure() {
        let det = zero_detector(2);
        let data = Matrix::from_rows(&[vec![0.3, 0.8], vec![0.5, 0.1]]).unwrap();
        let a = fit_residual_stats(&det, &data, ZScoreMode::ResidualStats).unwrap();
        let b = fit_residual_stats(&det, &data, ZScoreMode::ResidualStats).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stats_reject_empty_training_set() {
        let det = zero_detector(2);
        assert!(matches!(
            fit_residual_stats(&det, &Matrix::zeros(0, 2), ZScoreMode::ResidualStats),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn zscore_is_zero_at_the_mean() {
        let s = stats(vec![0.7, -0.2], vec![1.0, 3.0]);
        assert_eq!(zscore(&s, &[0.7, -0.2]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zscore_matches_hand_arithmetic() {
        let s = stats(vec![0.0], vec![2.0]);
        assert_eq!(zscore(&s, &[4.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn zscore_scales_inversely_with_std() {
        let narrow = stats(vec![1.0], vec![0.5]);
        let wide = stats(vec![1.0], vec![5.0]);
        let zn = zscore(&narrow, &[3.0]).unwrap()[0];
        let zw = zscore(&wide, &[3.0]).unwrap()[0];
        assert!((zn / zw - 10.0).abs() < 1e-12);
    }

    #[test]
    fn explain_concentrates_mass_on_the_only_deviating_feature() {
        // x = [1, 0] reconstructed as [0.5, 0]: residuals [0.5, 0].
        // Stats chosen so z = [1, 0]: the first feature carries everything.
        let det = Detector::from_parts(
            Network {
                input_dim: 2,
                layers: vec![Layer {
                    weights: vec![0.5, 0.0, 0.0, 0.0],
                    biases: vec![0.0, 0.0],
                    activation: Activation::Identity,
                }],
            },
            0.0,
            0.01,
        );
        let s = stats(vec![0.0, 0.0], vec![1.0, 1.0]);
        let e = explain_rxp(&det, &s, &[1.0, 0.0]).unwrap();
        assert_eq!(e.relevance, vec![1.0, 0.0]);
        assert_eq!(e.ranking, vec![0, 1]);
        assert_eq!(e.zscores, Some(vec![1.0, 0.0]));
        assert!(e.elapsed_ns.is_some());
    }

    #[test]
    fn equal_residuals_and_deviations_give_uniform_relevance() {
        let det = zero_detector(4);
        let s = stats(vec![0.0; 4], vec![1.0; 4]);
        let e = explain_rxp(&det, &s, &[0.6; 4]).unwrap();
        for r in &e.relevance {
            assert!((r - 0.25).abs() < 1e-15);
        }
        assert_eq!(e.ranking, vec![0, 1, 2, 3]);
    }

    #[test]
    fn zero_deviation_with_nonzero_residuals_has_no_mass() {
        // z = 0 everywhere makes every term log(1)*r^2 = 0.
        let det = zero_detector(2);
        let s = stats(vec![0.3, 0.9], vec![1.0, 1.0]);
        let err = explain_rxp(&det, &s, &[0.3, 0.9]).unwrap_err();
        assert!(matches!(err, Error::ZeroRelevanceMass));
    }

    #[test]
    fn relevance_is_normalized_and_non_negative() {
        let det = zero_detector(6);
        let s = stats(vec![0.0; 6], vec![0.8; 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let x: Vec<f64> = (0..6).map(|_| rng.random::<f64>() + 0.01).collect();
            let e = explain_rxp(&det, &s, &x).unwrap();
            let sum: f64 = e.relevance.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
            assert!(e.relevance.iter().all(|&r| (0.0..=1.0).contains(&r)));
        }
    }

    #[test]
    fn explanations_are_bitwise_reproducible() {
        let det = zero_detector(5);
        let s = stats(vec![0.1; 5], vec![0.4; 5]);
        let x = [0.9, 0.2, 0.55, 0.7, 0.31];
        let a = explain_rxp(&det, &s, &x).unwrap();
        let b = explain_rxp(&det, &s, &x).unwrap();
        assert_eq!(a.relevance, b.relevance);
        assert_eq!(a.ranking, b.ranking);
        assert_eq!(a.zscores, b.zscores);
    }

    #[test]
    fn raising_one_deviation_raises_that_relevance() {
        // Equal squared residuals everywhere; only feature 2's z grows.
        let det = zero_detector(3);
        let base = stats(vec![0.0; 3], vec![1.0; 3]);
        let sharp = stats(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 0.2]);
        let x = [0.5, 0.5, 0.5];
        let r_base = explain_rxp(&det, &base, &x).unwrap().relevance[2];
        let r_sharp = explain_rxp(&det, &sharp, &x).unwrap().relevance[2];
        assert!(r_sharp > r_base);
    }
}
