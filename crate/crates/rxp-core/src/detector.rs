//! Autoencoder anomaly detector.
//!
//! Builds a symmetric deep autoencoder, trains it on (mostly normal) data,
//! scores records by mean squared reconstruction error, and places the
//! contamination threshold `delta` at the k-th largest training score with
//! `k = ceil(contamination * N)`. Records scoring at or above `delta` are
//! classified anomalous (the threshold itself belongs to the anomalous
//! fraction, so the comparison is inclusive).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{Activation, Network, NetworkDoc, TrainConfig};
use crate::rxp::{ResidualStats, ZScoreMode};
use crate::seed::derive_seed;
use crate::synth::MinMaxScaler;

/// Configuration for building and training the autoencoder detector.
///
/// `layer_sizes` lists the encoder widths including the input layer; the
/// decoder mirrors them. Hidden layers use `latent_activation`, the output
/// layer `output_activation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub layer_sizes: Vec<usize>,
    pub latent_activation: Activation,
    pub output_activation: Activation,
    /// Assumed fraction of anomalous records in the training data, in (0,1).
    pub contamination: f64,
    pub train: TrainConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            layer_sizes: vec![64, 32, 16, 8],
            latent_activation: Activation::Tanh,
            output_activation: Activation::Sigmoid,
            contamination: 0.01,
            train: TrainConfig::default(),
        }
    }
}

/// Evenly spaced encoder widths from `input_dim` down to `latent_dim`.
///
/// `n_sizes = 13` with 257 -> 5 yields the deep 25-neuron-layer stack
/// (13 encoder + 12 mirrored decoder sizes) with ~98% compression.
pub fn encoder_ramp(input_dim: usize, latent_dim: usize, n_sizes: usize) -> Vec<usize> {
    assert!(n_sizes >= 2, "ramp needs at least input and latent sizes");
    let steps = (n_sizes - 1) as f64;
    (0..n_sizes)
        .map(|i| {
            let f = i as f64 / steps;
            (input_dim as f64 + f * (latent_dim as f64 - input_dim as f64)).round() as usize
        })
        .collect()
}

/// Per-record reconstruction residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    /// d_m = x_m - x'_m.
    pub signed: Vec<f64>,
    /// (x_m - x'_m)^2.
    pub squared: Vec<f64>,
    /// Mean of `squared` — the record's anomaly score.
    pub score: f64,
}

impl ResidualVector {
    fn from_pair(x: &[f64], reconstructed: &[f64]) -> Self {
        let signed: Vec<f64> = x.iter().zip(reconstructed).map(|(a, b)| a - b).collect();
        let squared: Vec<f64> = signed.iter().map(|d| d * d).collect();
        let score = squared.iter().sum::<f64>() / squared.len().max(1) as f64;
        Self {
            signed,
            squared,
            score,
        }
    }
}

/// Classification outcome for one record.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub score: f64,
    pub is_anomaly: bool,
    pub residual: ResidualVector,
}

/// Trained autoencoder detector. Immutable after construction; safe to share
/// across threads for concurrent scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub net: Network,
    /// Residual-score threshold; +inf until fitted.
    pub threshold_delta: f64,
    pub contamination: f64,
    pub input_dim: usize,
}

/// Builds the symmetric autoencoder network for `cfg` (untrained).
pub fn build_autoencoder(cfg: &DetectorConfig) -> Result<Network> {
    let enc = &cfg.layer_sizes;
    if enc.len() < 2 {
        return Err(Error::InvalidArchitecture(
            "encoder needs at least input and latent sizes".into(),
        ));
    }
    let latent = *enc.last().unwrap();
    if latent > enc[0] {
        return Err(Error::InvalidArchitecture(format!(
            "latent size {} exceeds input size {}",
            latent, enc[0]
        )));
    }
    let mut sizes = enc.clone();
    sizes.extend(enc.iter().rev().skip(1));
    let mut acts = vec![cfg.latent_activation; sizes.len() - 1];
    *acts.last_mut().unwrap() = cfg.output_activation;
    Network::new(&sizes, &acts, derive_seed(cfg.train.seed, "weight-init"))
}

/// Threshold at the k-th largest training score, k = ceil(contamination*N).
///
/// `delta` is the smallest score inside the top-contamination fraction, so
/// the classification rule `score >= delta` flags at least `k` training
/// records (more when scores tie at the boundary).
pub fn fit_threshold(training_scores: &[f64], contamination: f64) -> Result<f64> {
    if training_scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(contamination > 0.0 && contamination < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "contamination must lie in (0,1), got {}",
            contamination
        )));
    }
    let n = training_scores.len();
    let k = ((contamination * n as f64).ceil() as usize).clamp(1, n);
    let mut sorted = training_scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[k - 1])
}

/// Trains the autoencoder on `data` (target = input), scores every training
/// row, and fits the contamination threshold.
pub fn train_detector(cfg: &DetectorConfig, data: &Matrix) -> Result<Detector> {
    Ok(train_detector_with_losses(cfg, data)?.0)
}

/// [`train_detector`], also returning the per-epoch mean training loss for
/// run summaries.
pub fn train_detector_with_losses(
    cfg: &DetectorConfig,
    data: &Matrix,
) -> Result<(Detector, Vec<f64>)> {
    if !(cfg.contamination > 0.0 && cfg.contamination < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "contamination must lie in (0,1), got {}",
            cfg.contamination
        )));
    }
    let mut net = build_autoencoder(cfg)?;
    if data.cols() != net.input_dim {
        return Err(Error::DimensionError(format!(
            "data has {} columns, detector expects {}",
            data.cols(),
            net.input_dim
        )));
    }
    let losses = net.fit(data, &cfg.train)?;

    let scores = data
        .iter_rows()
        .map(|r| Ok(ResidualVector::from_pair(r, &net.reconstruct(r)?).score))
        .collect::<Result<Vec<f64>>>()?;
    let threshold_delta = fit_threshold(&scores, cfg.contamination)?;
    let det = Detector {
        input_dim: net.input_dim,
        net,
        threshold_delta,
        contamination: cfg.contamination,
    };
    Ok((det, losses))
}

impl Detector {
    /// Wraps an already-trained network with a fitted threshold.
    pub fn from_parts(net: Network, threshold_delta: f64, contamination: f64) -> Self {
        Self {
            input_dim: net.input_dim,
            net,
            threshold_delta,
            contamination,
        }
    }

    pub fn is_fitted(&self) -> bool {
        self.threshold_delta.is_finite()
    }

    /// Signed/squared reconstruction residuals and the aggregate score.
    pub fn residuals(&self, x: &[f64]) -> Result<ResidualVector> {
        let reconstructed = self.net.reconstruct(x)?;
        Ok(ResidualVector::from_pair(x, &reconstructed))
    }

    /// Mean squared reconstruction error — the anomaly score.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.residuals(x)?.score)
    }

    /// Scores `x` and applies the threshold (inclusive: score = delta is
    /// anomalous).
    pub fn classify(&self, x: &[f64]) -> Result<Classification> {
        if !self.is_fitted() {
            return Err(Error::DetectorNotFitted);
        }
        let residual = self.residuals(x)?;
        Ok(Classification {
            score: residual.score,
            is_anomaly: residual.score >= self.threshold_delta,
            residual,
        })
    }

    /// Serializable envelope. `feature_names` may be empty when unknown.
    pub fn to_envelope(&self, feature_names: Vec<String>) -> DetectorEnvelope {
        DetectorEnvelope {
            version: DETECTOR_DOC_VERSION,
            network: self.net.to_doc(),
            delta: self.threshold_delta,
            contamination: self.contamination,
            feature_names,
            scaler: None,
            residual_stats: None,
            zscore_mode: None,
        }
    }

    pub fn from_envelope(env: &DetectorEnvelope) -> Result<Self> {
        if env.version != DETECTOR_DOC_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported detector document version {}",
                env.version
            )));
        }
        if !(env.delta.is_finite() && env.delta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold delta must be finite and >= 0, got {}",
                env.delta
            )));
        }
        let net = Network::from_doc(&env.network)?;
        if !env.feature_names.is_empty() && env.feature_names.len() != net.input_dim {
            return Err(Error::DimensionError(format!(
                "{} feature names for input dimension {}",
                env.feature_names.len(),
                net.input_dim
            )));
        }
        Ok(Self::from_parts(net, env.delta, env.contamination))
    }
}

pub const DETECTOR_DOC_VERSION: u32 = 1;

/// JSON envelope for a trained detector. The optional fields carry the
/// preprocessing scaler and residual statistics so one file is enough to
/// detect and explain raw CSV records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorEnvelope {
    pub version: u32,
    pub network: NetworkDoc,
    pub delta: f64,
    pub contamination: f64,
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<MinMaxScaler>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_stats: Option<ResidualStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zscore_mode: Option<ZScoreMode>,
}
