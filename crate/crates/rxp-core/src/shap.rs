//! Kernel SHAP attribution over the detector's anomaly score, plus an exact
//! brute-force Shapley oracle for small feature counts.
//!
//! The value function is the scalar anomaly score (mean squared
//! reconstruction error). A coalition mask selects which features keep their
//! explained-record values; the rest are filled from background rows, and
//! the coalition value is the mean score over those hybrids. Attributions
//! come from a weighted least-squares fit over sampled coalition indicator
//! vectors, with the all-present/all-absent anchor masks pinned by a large
//! surrogate weight.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::explanation::{rank_desc, ExplainMethod, Explanation, ShapDetail};
use crate::matrix::Matrix;
use crate::seed::derive_seed;

/// Surrogate weight pinning the two anchor masks in the regression.
pub const ANCHOR_WEIGHT: f64 = 1e6;

/// Ridge jitter added to the normal-equation diagonal so near-singular
/// designs still solve.
pub const RIDGE: f64 = 1e-10;

/// Largest feature count accepted by [`exact_shapley`] (2^M enumeration).
pub const EXACT_SHAPLEY_MAX_FEATURES: usize = 12;

/// Sampling budget for one Kernel SHAP explanation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapConfig {
    /// Number of coalition masks, anchors included; must be >= M+2.
    pub n_coalition_samples: usize,
    /// Background rows drawn (without replacement) from the training set.
    pub n_background: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ShapConfig {
    /// Full-scale scenario budgets (coalition samples, background rows).
    pub fn shap1(seed: u64) -> Self {
        Self {
            n_coalition_samples: 800,
            n_background: 200,
            seed,
        }
    }

    pub fn shap2(seed: u64) -> Self {
        Self {
            n_coalition_samples: 800,
            n_background: 100,
            seed,
        }
    }

    pub fn shap3(seed: u64) -> Self {
        Self {
            n_coalition_samples: 80,
            n_background: 10,
            seed,
        }
    }

    /// Proportionally shrunk budgets for 64-feature desk runs.
    pub fn desk_shap1(seed: u64) -> Self {
        Self {
            n_coalition_samples: 200,
            n_background: 50,
            seed,
        }
    }

    pub fn desk_shap2(seed: u64) -> Self {
        Self {
            n_coalition_samples: 200,
            n_background: 25,
            seed,
        }
    }

    pub fn desk_shap3(seed: u64) -> Self {
        Self {
            n_coalition_samples: 80,
            n_background: 10,
            seed,
        }
    }
}

/// A coalition: true = feature present (taken from the explained record),
/// false = absent (filled from background rows).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coalition {
    pub mask: Vec<bool>,
}

impl Coalition {
    pub fn size(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// The detector's anomaly score as a plain function of the input vector.
pub fn score_fn(det: &Detector) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x| {
        det.score(x)
            .expect("caller passes vectors of the detector's input dimension")
    }
}

/// Binomial coefficient in f64 (exact integer arithmetic overflows long
/// before f64's range does; C(257,128) ~ 1e76 still fits).
fn binomial(m: usize, s: usize) -> f64 {
    let s = s.min(m - s);
    let mut c = 1.0;
    for i in 1..=s {
        c = c * (m - s + i) as f64 / i as f64;
    }
    c
}

/// Regression weight for a coalition of size `s` out of `m` features:
/// (m-1) / (C(m,s) * s * (m-s)). The anchor sizes 0 and m, where the true
/// weight is infinite, return the large finite surrogate [`ANCHOR_WEIGHT`].
pub fn shap_kernel_weight(m: usize, s: usize) -> f64 {
    if s == 0 || s == m {
        return ANCHOR_WEIGHT;
    }
    (m - 1) as f64 / (binomial(m, s) * (s * (m - s)) as f64)
}

/// Draws `n` coalition masks: the two anchors first, then sizes sampled
/// proportionally to the kernel-weight marginal p(s) ~ 1/(s*(m-s)) with a
/// uniform random subset of each size. Reproducible for a fixed seed.
pub fn sample_coalitions(m: usize, n: usize, seed: u64) -> Result<Vec<Coalition>> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least the two anchor masks, got n={}",
            n
        )));
    }
    let mut out = Vec::with_capacity(n);
    out.push(Coalition {
        mask: vec![true; m],
    });
    out.push(Coalition {
        mask: vec![false; m],
    });
    if m == 1 {
        // Only the anchors exist for a single feature.
        return Ok(out);
    }

    let size_weights: Vec<f64> = (1..m).map(|s| 1.0 / (s * (m - s)) as f64).collect();
    let total: f64 = size_weights.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 2..n {
        let u = rng.random::<f64>() * total;
        let mut s = m - 1;
        let mut acc = 0.0;
        for (i, w) in size_weights.iter().enumerate() {
            acc += w;
            if u < acc {
                s = i + 1;
                break;
            }
        }
        let mut mask = vec![false; m];
        for idx in rand::seq::index::sample(&mut rng, m, s).iter() {
            mask[idx] = true;
        }
        out.push(Coalition { mask });
    }
    Ok(out)
}

/// Coalition value: mean of `f` over hybrids that take masked-in features
/// from `x` and the rest from each background row.
pub fn masked_eval<F>(f: &F, x: &[f64], background: &Matrix, mask: &[bool]) -> f64
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    assert!(background.rows() > 0, "background must be non-empty");
    assert_eq!(mask.len(), x.len(), "mask length must match the record");
    if mask.iter().all(|&b| b) {
        return f(x);
    }
    let mut hybrid = vec![0.0; x.len()];
    let mut sum = 0.0;
    for row in background.iter_rows() {
        for i in 0..x.len() {
            hybrid[i] = if mask[i] { x[i] } else { row[i] };
        }
        sum += f(&hybrid);
    }
    sum / background.rows() as f64
}

/// Kernel SHAP estimate for an arbitrary value function.
///
/// Fits phi in `v(mask) ~ phi0 + sum_{i in mask} phi_i` by weighted least
/// squares, where `phi0` is the all-absent coalition value and the
/// additivity constraint `sum_i phi_i = f(x) - phi0` is eliminated into the
/// regression, so the fitted surrogate reproduces `f(x)` exactly at the
/// explained point. Returns `(phi, phi0)`.
pub fn kernel_shap_values<F>(
    f: &F,
    x: &[f64],
    background: &Matrix,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let m = x.len();
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    if background.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if background.cols() != m {
        return Err(Error::DimensionError(format!(
            "background has {} columns, record has {}",
            background.cols(),
            m
        )));
    }
    if n_samples < m + 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least M+2={} coalition samples for a solvable regression, got {}",
            m + 2,
            n_samples
        )));
    }

    let coalitions = sample_coalitions(m, n_samples, seed)?;
    let fx = masked_eval(f, x, background, &coalitions[0].mask);
    let phi0 = masked_eval(f, x, background, &coalitions[1].mask);
    let excess = fx - phi0;

    if m == 1 {
        // The additivity constraint pins the single coefficient outright.
        return Ok((vec![excess], phi0));
    }

    // The constraint sum(phi) = f(x) - phi0 is eliminated by substituting
    // the last coefficient, phi_{m-1} = excess - sum(others). Each design
    // row z then regresses y = v - phi0 - excess*z_{m-1} on the transformed
    // indicators u_i = z_i - z_{m-1} (i < m-1). The anchor rows become
    // zero-residual constants under the substitution, so the fitted values
    // reproduce f(x) at the explained point to machine precision. The u_i
    // are all +1 (when z_{m-1}=0) or all -1 (when z_{m-1}=1) on their
    // nonzero set, so the normal equations accumulate with unit products.
    let dim = m - 1;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    let mut nz = Vec::with_capacity(dim);
    for c in &coalitions {
        let s = c.size();
        let v = match s {
            0 => phi0,
            _ if s == m => fx,
            _ => masked_eval(f, x, background, &c.mask),
        };
        let w = shap_kernel_weight(m, s);
        let last = c.mask[m - 1];
        let y = v - phi0 - if last { excess } else { 0.0 };
        let sign = if last { -1.0 } else { 1.0 };
        nz.clear();
        nz.extend(
            c.mask[..dim]
                .iter()
                .enumerate()
                .filter(|&(_, &p)| p != last)
                .map(|(i, _)| i),
        );
        for &i in &nz {
            b[i] += w * y * sign;
            for &j in &nz {
                a[(i, j)] += w;
            }
        }
    }
    for i in 0..dim {
        a[(i, i)] += RIDGE;
    }

    let head = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
    let mut phi: Vec<f64> = head.iter().copied().collect();
    phi.push(excess - phi.iter().sum::<f64>());
    Ok((phi, phi0))
}

/// Kernel SHAP explanation of one record against the detector's score.
///
/// The background set is the first `n_background` rows of a seeded shuffle
/// of the training matrix. Relevance is `|phi| / sum |phi|` so rankings are
/// comparable with the residual explainer; the signed phi vector and base
/// value are kept in the output.
pub fn kernel_shap_explain(
    det: &Detector,
    x: &[f64],
    training: &Matrix,
    cfg: &ShapConfig,
) -> Result<Explanation> {
    let start = Instant::now();
    if x.len() != det.input_dim {
        return Err(Error::DimensionError(format!(
            "record has {} values, detector expects {}",
            x.len(),
            det.input_dim
        )));
    }
    if training.cols() != det.input_dim {
        return Err(Error::DimensionError(format!(
            "training data has {} columns, detector expects {}",
            training.cols(),
            det.input_dim
        )));
    }
    if cfg.n_background == 0 || cfg.n_background > training.rows() {
        return Err(Error::InvalidArgument(format!(
            "n_background {} outside 1..={} available training rows",
            cfg.n_background,
            training.rows()
        )));
    }

    let mut order: Vec<usize> = (0..training.rows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.seed,
        "background",
    )));
    order.truncate(cfg.n_background);
    let background = training.select_rows(&order);

    let f = score_fn(det);
    let (phi, phi0) = kernel_shap_values(
        &f,
        x,
        &background,
        cfg.n_coalition_samples,
        derive_seed(cfg.seed, "coalitions"),
    )?;

    let total: f64 = phi.iter().map(|p| p.abs()).sum();
    if total == 0.0 {
        return Err(Error::ZeroRelevanceMass);
    }
    let relevance: Vec<f64> = phi.iter().map(|p| p.abs() / total).collect();
    Ok(Explanation {
        method: ExplainMethod::KernelShap,
        ranking: rank_desc(&relevance),
        relevance,
        zscores: None,
        elapsed_ns: Some(start.elapsed().as_nanos() as u64),
        shap: Some(ShapDetail {
            phi_raw: phi,
            phi0,
            config: Some(*cfg),
        }),
    })
}

/// Exact Shapley values by full coalition enumeration:
/// phi_i = sum over S not containing i of
/// |S|! (M-|S|-1)! / M! * (v(S + i) - v(S)), with v = [`masked_eval`].
///
/// Reference oracle for the sampler; M is capped at
/// [`EXACT_SHAPLEY_MAX_FEATURES`].
pub fn exact_shapley<F>(f: &F, x: &[f64], background: &Matrix) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let m = x.len();
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    if m > EXACT_SHAPLEY_MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            got: m,
            max: EXACT_SHAPLEY_MAX_FEATURES,
        });
    }
    if background.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if background.cols() != m {
        return Err(Error::DimensionError(format!(
            "background has {} columns, record has {}",
            background.cols(),
            m
        )));
    }

    let mut fact = [1.0f64; EXACT_SHAPLEY_MAX_FEATURES + 1];
    for i in 1..=EXACT_SHAPLEY_MAX_FEATURES {
        fact[i] = fact[i - 1] * i as f64;
    }

    let n_masks = 1usize << m;
    let mut values = vec![0.0; n_masks];
    let mut mask = vec![false; m];
    for (bits, value) in values.iter_mut().enumerate() {
        for (i, b) in mask.iter_mut().enumerate() {
            *b = bits & (1 << i) != 0;
        }
        *value = masked_eval(f, x, background, &mask);
    }

    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for bits in 0..n_masks {
            if bits & bit != 0 {
                continue;
            }
            let s = bits.count_ones() as usize;
            let w = fact[s] * fact[m - s - 1] / fact[m];
            *p += w * (values[bits | bit] - values[bits]);
        }
    }
    Ok(phi)
}

/// Explanation built from the exact enumeration (small M only).
pub fn exact_shapley_explain(
    det: &Detector,
    x: &[f64],
    background: &Matrix,
) -> Result<Explanation> {
    let start = Instant::now();
    let f = score_fn(det);
    let phi = exact_shapley(&f, x, background)?;
    let phi0 = masked_eval(&f, x, background, &vec![false; x.len()]);

    let total: f64 = phi.iter().map(|p| p.abs()).sum();
    if total == 0.0 {
        return Err(Error::ZeroRelevanceMass);
    }
    let relevance: Vec<f64> = phi.iter().map(|p| p.abs() / total).collect();
    Ok(Explanation {
        method: ExplainMethod::ExactShapley,
        ranking: rank_desc(&relevance),
        relevance,
        zscores: None,
        elapsed_ns: Some(start.elapsed().as_nanos() as u64),
        shap: Some(ShapDetail {
            phi_raw: phi,
            phi0,
            config: None,
        }),
    })
}
