//! Ranking and detection evaluation: average precision, precision/recall,
//! paired t-test, explanation timing, and the resampling protocol comparing
//! the residual explainer against the Kernel SHAP presets.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::explanation::Explanation;
use crate::matrix::Matrix;
use crate::rxp::{explain_rxp, ResidualStats};
use crate::seed::derive_seed;
use crate::shap::{kernel_shap_explain, ShapConfig};
use crate::synth::RecordTruth;

/// One ranking-evaluation query: a produced feature ranking (possibly
/// truncated) against the ground-truth relevant set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub index: usize,
    pub ranking: Vec<usize>,
    pub relevant: Vec<usize>,
}

/// Average precision: AP = sum_k (S_k - S_{k-1}) * P_k over ranking
/// positions, where S_k is recall and P_k precision at cutoff k. Relevant
/// items missing from a truncated ranking contribute their recall mass at
/// precision zero, which is why the sum divides by the full relevant count.
pub fn average_precision(q: &Query) -> Result<f64> {
    if q.relevant.is_empty() {
        return Err(Error::InvalidQuery(format!(
            "query {} has no relevant features",
            q.index
        )));
    }
    let mut seen = q.ranking.clone();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidQuery(format!(
            "query {} ranking repeats a feature",
            q.index
        )));
    }

    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, item) in q.ranking.iter().enumerate() {
        if q.relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    Ok(sum / q.relevant.len() as f64)
}

/// Arithmetic mean of per-query average precision.
pub fn mean_average_precision(queries: &[Query]) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::InvalidArgument("no queries to average".into()));
    }
    let mut sum = 0.0;
    for q in queries {
        sum += average_precision(q)?;
    }
    Ok(sum / queries.len() as f64)
}

/// Confusion-matrix summary. When a ratio is 0/0 its `*_defined` flag is
/// false and the value reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

pub fn precision_recall(truth: &[bool], predicted: &[bool]) -> Result<PrecisionRecall> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionError(format!(
            "{} truth labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    let mut tn = 0;
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            (0.0, false)
        } else {
            (num as f64 / den as f64, true)
        }
    };
    let (precision, precision_defined) = ratio(tp, tp + fp);
    let (recall, recall_defined) = ratio(tp, tp + fn_);
    Ok(PrecisionRecall {
        precision,
        recall,
        precision_defined,
        recall_defined,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
    })
}

/// Paired t-test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub dof: usize,
}

/// Two-sided paired t-test on the differences d = a - b, with sample
/// standard deviation (n-1 denominator). Identical vectors return t=0, p=1;
/// a zero-variance difference with nonzero mean has no finite statistic and
/// errors with [`Error::DegenerateVariance`].
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionError(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "paired t-test needs at least 2 pairs".into(),
        ));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let dof = n - 1;
    if sd == 0.0 {
        if mean == 0.0 {
            return Ok(TTest { t: 0.0, p: 1.0, dof });
        }
        return Err(Error::DegenerateVariance);
    }
    let t = mean / (sd / (n as f64).sqrt());
    let p = student_t_two_sided_p(t, dof as f64);
    Ok(TTest { t, p, dof })
}

/// Two-sided p-value of a Student-t statistic via the identity
/// P(|T| > t) = I_x(dof/2, 1/2) with x = dof / (dof + t^2).
pub fn student_t_two_sided_p(t: f64, dof: f64) -> f64 {
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(0.5 * dof, 0.5, x).clamp(0.0, 1.0)
}

/// Lanczos approximation of ln Gamma(x) (g=7, 9 coefficients).
fn ln_gamma(x: f64) -> f64 {
    // Published coefficient values kept verbatim; the trailing digits are
    // beyond f64 but document the source constants.
    #[allow(clippy::excessive_precision)]
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    use std::f64::consts::PI;
    if x < 0.5 {
        // Reflection formula keeps the series in its accurate range.
        (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = COEFFS[0];
        for (i, &c) in COEFFS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Continued-fraction kernel of the incomplete beta (modified Lentz).
fn beta_cont_frac(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-14;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b), accurate to ~1e-12 absolute.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln())
        .exp();
    // Use the continued fraction on the side where it converges fast.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cont_frac(a, b, x) / a
    } else {
        1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b
    }
}

/// Wall-clock timing of an explainer closure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    /// Mean over all timed calls.
    pub mean_ms: f64,
    /// Spread across repeat-level means (0 for a single repeat).
    pub std_ms: f64,
    pub per_sample_ms: Vec<f64>,
}

/// Times `explain` on every sample row, `repeats` passes over the matrix,
/// after one untimed warm-up call on the first row.
pub fn time_explainer<F>(mut explain: F, samples: &Matrix, repeats: usize) -> Result<TimingStats>
where
    F: FnMut(&[f64]),
{
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    if samples.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    explain(samples.row(0)); // warm-up, excluded from the measurements

    let mut per_sample_ms = Vec::with_capacity(samples.rows() * repeats);
    let mut repeat_means = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let mut repeat_sum = 0.0;
        for row in samples.iter_rows() {
            let t0 = Instant::now();
            explain(row);
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            per_sample_ms.push(ms);
            repeat_sum += ms;
        }
        repeat_means.push(repeat_sum / samples.rows() as f64);
    }

    let mean_ms = per_sample_ms.iter().sum::<f64>() / per_sample_ms.len() as f64;
    let grand = repeat_means.iter().sum::<f64>() / repeats as f64;
    let std_ms = (repeat_means
        .iter()
        .map(|m| (m - grand) * (m - grand))
        .sum::<f64>()
        / repeats as f64)
        .sqrt();
    Ok(TimingStats {
        mean_ms,
        std_ms,
        per_sample_ms,
    })
}

/// A Kernel SHAP budget with the name it is reported under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedShapConfig {
    pub name: String,
    #[serde(flatten)]
    pub config: ShapConfig,
}

/// Resampling-protocol knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    /// Number of resampling rounds.
    pub rounds: usize,
    /// Records drawn (with replacement) from the evaluation pool per round.
    pub samples_per_round: usize,
    /// Ranking truncation for MAP; defaults to the largest ground-truth
    /// cause count in the pool.
    pub top_k: Option<usize>,
    /// Include false negatives in the evaluation pool.
    pub include_false_negatives: bool,
    pub shap_presets: Vec<NamedShapConfig>,
    /// Pool records used for response-time measurement.
    pub timing_samples: usize,
    pub timing_repeats: usize,
    pub seed: u64,
    /// Worker threads for the rounds; 0 runs them serially.
    pub threads: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            rounds: 30,
            samples_per_round: 60,
            top_k: None,
            include_false_negatives: true,
            shap_presets: vec![
                NamedShapConfig {
                    name: "shap1".into(),
                    config: ShapConfig::desk_shap1(0),
                },
                NamedShapConfig {
                    name: "shap2".into(),
                    config: ShapConfig::desk_shap2(0),
                },
                NamedShapConfig {
                    name: "shap3".into(),
                    config: ShapConfig::desk_shap3(0),
                },
            ],
            timing_samples: 15,
            timing_repeats: 2,
            seed: 42,
            threads: 0,
        }
    }
}

/// Everything the protocol consumes. `test` rows align with `truth`; all
/// matrices are in the detector's (scaled) input space.
pub struct ProtocolInputs<'a> {
    pub detector: &'a Detector,
    pub stats: &'a ResidualStats,
    /// Background source for the SHAP explainers.
    pub training: &'a Matrix,
    pub test: &'a Matrix,
    pub truth: &'a [RecordTruth],
}

/// Per-method aggregate results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    /// Mean of the per-round MAP values.
    pub map: f64,
    pub map_rounds: Vec<f64>,
    pub mean_response_ms: f64,
    pub std_response_ms: f64,
}

/// Paired t-test of the first method's per-round MAP against another's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub baseline: String,
    pub method: String,
    pub t_statistic: f64,
    pub p_value: f64,
    pub dof: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    #[serde(flatten)]
    pub counts: PrecisionRecall,
    /// TP + FP (+ FN when configured) records available for explanation.
    pub pool_size: usize,
    /// Pool records that carry ground-truth causes (MAP queries come from
    /// these; false positives have no causes to rank).
    pub query_pool_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub rounds: usize,
    pub samples_per_round: usize,
    pub top_k: usize,
    pub test_rows: usize,
    pub timing_samples: usize,
    pub timing_repeats: usize,
}

/// Full protocol output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detection: DetectionReport,
    pub methods: Vec<MethodReport>,
    pub pairwise: Vec<PairedComparison>,
    pub runs: RunMeta,
}

const RXP_METHOD: &str = "rxp";

fn truncated_query(index: usize, ranking: &[usize], relevant: &[usize], k: usize) -> Query {
    Query {
        index,
        ranking: ranking[..ranking.len().min(k)].to_vec(),
        relevant: relevant.to_vec(),
    }
}

/// Ranking of an explanation attempt; explanations with no relevance mass
/// rank nothing and score AP = 0 for their queries.
fn ranking_or_empty(result: Result<Explanation>) -> Result<Vec<usize>> {
    match result {
        Ok(e) => Ok(e.ranking),
        Err(Error::ZeroRelevanceMass) => Ok(Vec::new()),
        Err(e) => Err(e),
    }
}

/// Runs the three-step evaluation: (A) detect over the test rows, (B) pool
/// the detected faults (TP+FP, plus FN when configured), (C) resample the
/// pool `rounds` times, explain each drawn record with every method, and
/// compare per-round MAP values with paired t-tests against the residual
/// explainer. Response times are measured serially at the end.
///
/// Every random choice derives from `cfg.seed`, so reruns with the same
/// configuration reproduce all residual-explainer numbers bitwise; the SHAP
/// columns change with the seed (that spread is part of what the protocol
/// measures).
pub fn run_protocol(inputs: &ProtocolInputs, cfg: &ProtocolConfig) -> Result<EvalReport> {
    if inputs.test.rows() != inputs.truth.len() {
        return Err(Error::DimensionError(format!(
            "{} test rows vs {} truth records",
            inputs.test.rows(),
            inputs.truth.len()
        )));
    }
    if cfg.rounds == 0 || cfg.samples_per_round == 0 {
        return Err(Error::InvalidArgument(
            "rounds and samples_per_round must be >= 1".into(),
        ));
    }

    // Step A: detection over the test split.
    let mut predicted = Vec::with_capacity(inputs.test.rows());
    for row in inputs.test.iter_rows() {
        predicted.push(inputs.detector.classify(row)?.is_anomaly);
    }
    let truth_flags: Vec<bool> = inputs.truth.iter().map(|t| t.is_fault).collect();
    let counts = precision_recall(&truth_flags, &predicted)?;

    // Step B: evaluation pool.
    let mut pool = Vec::new();
    for (i, (&t, &p)) in truth_flags.iter().zip(&predicted).enumerate() {
        let keep = p || (t && cfg.include_false_negatives);
        if keep && (t || p) {
            pool.push(i);
        }
    }
    let query_pool: Vec<usize> = pool
        .iter()
        .copied()
        .filter(|&i| !inputs.truth[i].cause_features.is_empty())
        .collect();
    if query_pool.is_empty() {
        return Err(Error::EmptyEvaluationPool);
    }

    let top_k = cfg
        .top_k
        .unwrap_or_else(|| {
            query_pool
                .iter()
                .map(|&i| inputs.truth[i].cause_features.len())
                .max()
                .unwrap_or(1)
        })
        .max(1);

    // The residual explainer is deterministic, so one ranking per pool
    // record serves every round.
    let mut rxp_rankings: HashMap<usize, Vec<usize>> = HashMap::new();
    for &i in &query_pool {
        let ranking = ranking_or_empty(explain_rxp(
            inputs.detector,
            inputs.stats,
            inputs.test.row(i),
        ))?;
        rxp_rankings.insert(i, ranking);
    }

    // Step C: resampling rounds.
    let run_round = |r: usize| -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("round-{}", r)));
        let draws: Vec<usize> = (0..cfg.samples_per_round)
            .map(|_| query_pool[rng.random_range(0..query_pool.len())])
            .collect();

        let mut maps = Vec::with_capacity(1 + cfg.shap_presets.len());
        let queries: Vec<Query> = draws
            .iter()
            .map(|&i| {
                truncated_query(i, &rxp_rankings[&i], &inputs.truth[i].cause_features, top_k)
            })
            .collect();
        maps.push(mean_average_precision(&queries)?);

        for preset in &cfg.shap_presets {
            let mut queries = Vec::with_capacity(draws.len());
            for (s, &i) in draws.iter().enumerate() {
                let shap_cfg = ShapConfig {
                    seed: derive_seed(cfg.seed, &format!("shap:{}:r{}:s{}", preset.name, r, s)),
                    ..preset.config
                };
                let ranking = ranking_or_empty(kernel_shap_explain(
                    inputs.detector,
                    inputs.test.row(i),
                    inputs.training,
                    &shap_cfg,
                ))?;
                queries.push(truncated_query(
                    i,
                    &ranking,
                    &inputs.truth[i].cause_features,
                    top_k,
                ));
            }
            maps.push(mean_average_precision(&queries)?);
        }
        Ok(maps)
    };

    let per_round: Vec<Vec<f64>> = if cfg.threads == 0 {
        (0..cfg.rounds).map(run_round).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {}", e)))?;
        pool.install(|| {
            (0..cfg.rounds)
                .into_par_iter()
                .map(run_round)
                .collect::<Result<_>>()
        })?
    };

    // Response times, always measured serially.
    let mut timing_rows = query_pool.clone();
    timing_rows.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.seed,
        "timing-rows",
    )));
    timing_rows.truncate(cfg.timing_samples.max(1));
    let timing_mat = inputs.test.select_rows(&timing_rows);

    let mut timings = Vec::with_capacity(1 + cfg.shap_presets.len());
    timings.push(time_explainer(
        |row| {
            let _ = explain_rxp(inputs.detector, inputs.stats, row);
        },
        &timing_mat,
        cfg.timing_repeats,
    )?);
    for preset in &cfg.shap_presets {
        let mut call = 0u64;
        timings.push(time_explainer(
            |row| {
                let shap_cfg = ShapConfig {
                    seed: derive_seed(cfg.seed, &format!("timing:{}:{}", preset.name, call)),
                    ..preset.config
                };
                call += 1;
                let _ = kernel_shap_explain(inputs.detector, row, inputs.training, &shap_cfg);
            },
            &timing_mat,
            cfg.timing_repeats,
        )?);
    }

    // Assemble per-method reports and the paired tests.
    let mut names = vec![RXP_METHOD.to_string()];
    names.extend(cfg.shap_presets.iter().map(|p| p.name.clone()));
    let mut methods = Vec::with_capacity(names.len());
    for (mi, name) in names.iter().enumerate() {
        let map_rounds: Vec<f64> = per_round.iter().map(|r| r[mi]).collect();
        methods.push(MethodReport {
            method: name.clone(),
            map: map_rounds.iter().sum::<f64>() / map_rounds.len() as f64,
            map_rounds,
            mean_response_ms: timings[mi].mean_ms,
            std_response_ms: timings[mi].std_ms,
        });
    }

    let mut pairwise = Vec::new();
    for mi in 1..methods.len() {
        let tt = paired_t_test(&methods[0].map_rounds, &methods[mi].map_rounds)?;
        pairwise.push(PairedComparison {
            baseline: RXP_METHOD.into(),
            method: methods[mi].method.clone(),
            t_statistic: tt.t,
            p_value: tt.p,
            dof: tt.dof,
        });
    }

    Ok(EvalReport {
        detection: DetectionReport {
            counts,
            pool_size: pool.len(),
            query_pool_size: query_pool.len(),
        },
        methods,
        pairwise,
        runs: RunMeta {
            seed: cfg.seed,
            rounds: cfg.rounds,
            samples_per_round: cfg.samples_per_round,
            top_k,
            test_rows: inputs.test.rows(),
            timing_samples: timing_rows.len(),
            timing_repeats: cfg.timing_repeats,
        },
    })
}

/// Plain-text table of an [`EvalReport`]: MAP, response times, and the
/// paired t-test of every method against the residual explainer.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let width = 14;
    let label_width = 24;

    let mut header = format!("{:<label_width$}", "metric");
    for m in &report.methods {
        header.push_str(&format!("{:>width$}", m.method.to_uppercase()));
    }
    out.push_str(&header);
    out.push('\n');
    out.push_str(&"-".repeat(label_width + width * report.methods.len()));
    out.push('\n');

    let mut row = |label: &str, values: Vec<String>| {
        let mut line = format!("{:<label_width$}", label);
        for v in values {
            line.push_str(&format!("{:>width$}", v));
        }
        line.push('\n');
        out.push_str(&line);
    };

    row(
        "MAP (%)",
        report
            .methods
            .iter()
            .map(|m| format!("{:.2}", m.map * 100.0))
            .collect(),
    );
    row(
        "mean response (ms)",
        report
            .methods
            .iter()
            .map(|m| format!("{:.3}", m.mean_response_ms))
            .collect(),
    );
    row(
        "std response (ms)",
        report
            .methods
            .iter()
            .map(|m| format!("{:.3}", m.std_response_ms))
            .collect(),
    );

    let mut t_cells = vec!["-".to_string()];
    let mut p_cells = vec!["-".to_string()];
    for c in &report.pairwise {
        t_cells.push(format!("{:.3}", c.t_statistic));
        p_cells.push(format!("{:.2e}", c.p_value));
    }
    row("t vs RXP (per-round MAP)", t_cells);
    row("p (two-sided)", p_cells);

    let d = &report.detection;
    out.push_str(&format!(
        "\ndetection: precision {:.3}{} recall {:.3}{} (TP {} FP {} FN {} TN {})\n",
        d.counts.precision,
        if d.counts.precision_defined { "" } else { "*" },
        d.counts.recall,
        if d.counts.recall_defined { "" } else { "*" },
        d.counts.true_positives,
        d.counts.false_positives,
        d.counts.false_negatives,
        d.counts.true_negatives,
    ));
    out.push_str(&format!(
        "pool: {} records ({} with causes), top-k {}, {} rounds x {} samples, seed {}\n",
        d.pool_size,
        d.query_pool_size,
        report.runs.top_k,
        report.runs.rounds,
        report.runs.samples_per_round,
        report.runs.seed,
    ));
    out
}

/// Headline figures from the method's original full-scale run on
/// proprietary railway data (about 3.5M training rows, 257 features).
/// Desk-scale synthetic runs are not expected to reproduce these; they are
/// kept as named constants for orientation when reading reports.
pub mod reference {
    pub const FULL_SCALE_MAP_RXP: f64 = 0.8138;
    pub const FULL_SCALE_MAP_SHAP1: f64 = 0.8047;
    pub const FULL_SCALE_MAP_SHAP2: f64 = 0.8061;
    pub const FULL_SCALE_MAP_SHAP3: f64 = 0.7954;

    pub const FULL_SCALE_RESPONSE_MS_RXP: f64 = 0.272;
    pub const FULL_SCALE_RESPONSE_MS_SHAP1: f64 = 11_100.0;
    pub const FULL_SCALE_RESPONSE_MS_SHAP2: f64 = 5_650.0;
    pub const FULL_SCALE_RESPONSE_MS_SHAP3: f64 = 170.0;

    pub const FULL_SCALE_P_VS_SHAP1: f64 = 3.3e-10;
    pub const FULL_SCALE_P_VS_SHAP2: f64 = 6.5e-10;
    pub const FULL_SCALE_P_VS_SHAP3: f64 = 3.2e-12;

    pub const FULL_SCALE_DETECTION_PRECISION: f64 = 0.825;
    pub const FULL_SCALE_DETECTION_RECALL: f64 = 0.953;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{train_detector, DetectorConfig};
    use crate::nn::TrainConfig;
    use crate::rxp::{fit_residual_stats, ZScoreMode};
    use crate::synth::{generate, split_indices, FeatureKind, FeatureSpec, GenerateConfig,
                       MinMaxScaler};

    fn q(ranking: &[usize], relevant: &[usize]) -> Query {
        Query {
            index: 0,
            ranking: ranking.to_vec(),
            relevant: relevant.to_vec(),
        }
    }

    #[test]
    fn perfect_ranking_scores_full_average_precision() {
        assert_eq!(average_precision(&q(&[0, 1, 2], &[0])).unwrap(), 1.0);
    }

    #[test]
    fn late_single_hit_matches_hand_computation() {
        // relevant {a} at rank 2 of [b, a]: AP = 1/2.
        assert_eq!(average_precision(&q(&[1, 0], &[0])).unwrap(), 0.5);
    }

    #[test]
    fn two_relevant_items_match_hand_computation() {
        // relevant {a,b}, ranking [a,c,b]: 0.5*1 + 0.5*(2/3).
        let ap = average_precision(&q(&[0, 2, 1], &[0, 1])).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
        assert!((ap - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn truncation_penalizes_missing_relevant_items() {
        // Two relevant, only one ranked: the missing one adds no precision.
        let ap = average_precision(&q(&[0], &[0, 5])).unwrap();
        assert_eq!(ap, 0.5);
    }

    #[test]
    fn empty_relevant_set_is_rejected() {
        assert!(matches!(
            average_precision(&q(&[0, 1], &[])),
            Err(Error::InvalidQuery(_))
        ));
    }

    #[test]
    fn duplicate_ranking_entries_are_rejected() {
        assert!(matches!(
            average_precision(&q(&[0, 0], &[0])),
            Err(Error::InvalidQuery(_))
        ));
    }

    #[test]
    fn ap_equals_mean_precision_at_relevant_ranks_on_full_rankings() {
        // Independent textbook formulation cross-checked on random queries.
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..1000 {
            let m = rng.random_range(2..20usize);
            let mut ranking: Vec<usize> = (0..m).collect();
            ranking.shuffle(&mut rng);
            let n_rel = rng.random_range(1..=m);
            let mut relevant: Vec<usize> = (0..m).collect();
            relevant.shuffle(&mut rng);
            relevant.truncate(n_rel);

            let ap = average_precision(&q(&ranking, &relevant)).unwrap();
            let mut hits = 0;
            let mut textbook = 0.0;
            for (pos, item) in ranking.iter().enumerate() {
                if relevant.contains(item) {
                    hits += 1;
                    textbook += hits as f64 / (pos + 1) as f64;
                }
            }
            textbook /= n_rel as f64;
            assert!((ap - textbook).abs() < 1e-12);
        }
    }

    #[test]
    fn map_is_the_mean_and_order_free() {
        let a = q(&[0, 1], &[0]); // AP 1.0
        let b = q(&[1, 0], &[0]); // AP 0.5
        let forward = mean_average_precision(&[a.clone(), b.clone()]).unwrap();
        let backward = mean_average_precision(&[b, a]).unwrap();
        assert_eq!(forward, 0.75);
        assert_eq!(forward, backward);
        assert!(matches!(
            mean_average_precision(&[]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn precision_recall_matches_confusion_counts() {
        let truth = [true, true, false, false];
        let pred = [true, false, true, false];
        let pr = precision_recall(&truth, &pred).unwrap();
        assert_eq!(pr.precision, 0.5);
        assert_eq!(pr.recall, 0.5);
        assert_eq!(
            (pr.true_positives, pr.false_positives, pr.false_negatives, pr.true_negatives),
            (1, 1, 1, 1)
        );
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let t = [true, false, true];
        let pr = precision_recall(&t, &t).unwrap();
        assert_eq!(pr.precision, 1.0);
        assert_eq!(pr.recall, 1.0);
    }

    #[test]
    fn no_predicted_positives_flags_precision_undefined() {
        let pr = precision_recall(&[false, false], &[false, false]).unwrap();
        assert!(!pr.precision_defined);
        assert_eq!(pr.precision, 0.0);
        assert!(!pr.recall_defined);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(matches!(
            precision_recall(&[true], &[true, false]),
            Err(Error::DimensionError(_))
        ));
    }

    #[test]
    fn identical_samples_give_t_zero_p_one() {
        let a = [0.4, 0.6, 0.8];
        let tt = paired_t_test(&a, &a).unwrap();
        assert_eq!(tt.t, 0.0);
        assert_eq!(tt.p, 1.0);
        assert_eq!(tt.dof, 2);
    }

    #[test]
    fn t_statistic_matches_hand_arithmetic() {
        // d = [1,2,3]: mean 2, sd 1, t = 2 / (1/sqrt(3)) = 2*sqrt(3).
        let tt = paired_t_test(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((tt.t - 3.4641).abs() < 1e-4);
        assert_eq!(tt.dof, 2);
    }

    #[test]
    fn constant_nonzero_difference_is_degenerate() {
        assert!(matches!(
            paired_t_test(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn p_value_matches_published_t_table() {
        // Two-sided 5% and 1% critical values for small dof.
        for (t, dof, p) in [
            (2.776, 4.0, 0.05),
            (12.706, 1.0, 0.05),
            (2.000, 60.0, 0.05),
            (4.032, 5.0, 0.01),
            (2.845, 20.0, 0.01),
        ] {
            let got = student_t_two_sided_p(t, dof);
            assert!(
                (got - p).abs() < 1e-3,
                "t={} dof={}: got {} want {}",
                t,
                dof,
                got,
                p
            );
        }
    }

    #[test]
    fn p_decreases_as_t_grows() {
        let mut last = 1.0;
        for i in 0..40 {
            let t = i as f64 * 0.25;
            let p = student_t_two_sided_p(t, 7.0);
            assert!(p <= last + 1e-15);
            last = p;
        }
    }

    #[test]
    fn incomplete_beta_hits_known_values() {
        // I_x(1,1) is the uniform CDF; symmetry ties the two tails together.
        assert!((regularized_incomplete_beta(1.0, 1.0, 0.3) - 0.3).abs() < 1e-12);
        let a = regularized_incomplete_beta(2.5, 1.5, 0.4);
        let b = 1.0 - regularized_incomplete_beta(1.5, 2.5, 0.6);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn timing_covers_every_sample_and_repeat() {
        let samples = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let stats = time_explainer(|_| {}, &samples, 4).unwrap();
        assert_eq!(stats.per_sample_ms.len(), 12);
        assert!(stats.mean_ms >= 0.0);
    }

    #[test]
    fn single_repeat_reports_zero_spread() {
        let samples = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let stats = time_explainer(|_| {}, &samples, 1).unwrap();
        assert_eq!(stats.std_ms, 0.0);
    }

    /// Small but complete pipeline for protocol tests: 8 features, strong
    /// single-cause faults, quick training.
    fn tiny_pipeline() -> (crate::detector::Detector, ResidualStats, Matrix, Matrix, Vec<RecordTruth>)
    {
        let features: Vec<FeatureSpec> = (0..8)
            .map(|i| {
                FeatureSpec::continuous(
                    format!("F{}", i),
                    FeatureKind::Impact,
                    50.0 + i as f64,
                    5.0,
                )
            })
            .collect();
        let gen_cfg = GenerateConfig {
            n_normal: 400,
            n_fault: 40,
            magnitude_min: 8.0,
            magnitude_max: 8.0,
            seed: 5,
            ..GenerateConfig::default()
        };
        let bundle = generate(&features, &gen_cfg).unwrap();
        let (train_idx, test_idx) = split_indices(bundle.data.rows(), 0.7, 11).unwrap();
        let train_raw = bundle.data.select_rows(&train_idx);
        let test_raw = bundle.data.select_rows(&test_idx);
        let scaler = MinMaxScaler::fit(&train_raw).unwrap();
        let train = scaler.apply(&train_raw).unwrap();
        let test = scaler.apply(&test_raw).unwrap();
        let truth: Vec<RecordTruth> = test_idx
            .iter()
            .map(|&i| bundle.ground_truth.records[i].clone())
            .collect();

        let det_cfg = DetectorConfig {
            layer_sizes: vec![8, 4],
            contamination: 0.1,
            train: TrainConfig {
                epochs: 10,
                batch_size: 32,
                learning_rate: 0.1,
                seed: 3,
            },
            ..DetectorConfig::default()
        };
        let det = train_detector(&det_cfg, &train).unwrap();
        let stats = fit_residual_stats(&det, &train, ZScoreMode::ResidualStats).unwrap();
        (det, stats, train, test, truth)
    }

    fn tiny_protocol_cfg() -> ProtocolConfig {
        ProtocolConfig {
            rounds: 3,
            samples_per_round: 8,
            shap_presets: vec![NamedShapConfig {
                name: "shap3".into(),
                config: ShapConfig {
                    n_coalition_samples: 20,
                    n_background: 5,
                    seed: 0,
                },
            }],
            timing_samples: 3,
            timing_repeats: 1,
            seed: 9,
            threads: 0,
            ..ProtocolConfig::default()
        }
    }

    #[test]
    fn protocol_produces_a_complete_report() {
        let (det, stats, train, test, truth) = tiny_pipeline();
        let inputs = ProtocolInputs {
            detector: &det,
            stats: &stats,
            training: &train,
            test: &test,
            truth: &truth,
        };
        let report = run_protocol(&inputs, &tiny_protocol_cfg()).unwrap();

        assert_eq!(report.methods.len(), 2);
        assert_eq!(report.methods[0].method, "rxp");
        assert_eq!(report.methods[0].map_rounds.len(), 3);
        for m in &report.methods {
            assert!((0.0..=1.0).contains(&m.map), "{} map {}", m.method, m.map);
        }
        assert_eq!(report.pairwise.len(), 1);
        assert!((0.0..=1.0).contains(&report.pairwise[0].p_value));
        assert_eq!(report.runs.top_k, 1);
        assert!(report.detection.query_pool_size > 0);

        let table = render_table(&report);
        assert!(table.contains("MAP (%)"));
        assert!(table.contains("SHAP3"));
    }

    #[test]
    fn protocol_is_reproducible_for_a_fixed_seed() {
        let (det, stats, train, test, truth) = tiny_pipeline();
        let inputs = ProtocolInputs {
            detector: &det,
            stats: &stats,
            training: &train,
            test: &test,
            truth: &truth,
        };
        let a = run_protocol(&inputs, &tiny_protocol_cfg()).unwrap();
        let b = run_protocol(&inputs, &tiny_protocol_cfg()).unwrap();
        for (ma, mb) in a.methods.iter().zip(&b.methods) {
            assert_eq!(ma.map_rounds, mb.map_rounds);
        }
        assert_eq!(a.detection, b.detection);
    }

    #[test]
    fn empty_pool_is_an_error() {
        let (det, stats, train, test, truth) = tiny_pipeline();
        // Push the threshold beyond every score and drop false negatives:
        // nothing is detected, nothing can be evaluated.
        let mut blind = det.clone();
        blind.threshold_delta = 1e9;
        let inputs = ProtocolInputs {
            detector: &blind,
            stats: &stats,
            training: &train,
            test: &test,
            truth: &truth,
        };
        let cfg = ProtocolConfig {
            include_false_negatives: false,
            ..tiny_protocol_cfg()
        };
        assert!(matches!(
            run_protocol(&inputs, &cfg),
            Err(Error::EmptyEvaluationPool)
        ));
    }

    #[test]
    #[allow(clippy::assertions_on_constants)]
    fn reference_figures_keep_their_published_ordering() {
        use reference::*;
        assert!(FULL_SCALE_MAP_RXP > FULL_SCALE_MAP_SHAP1);
        assert!(FULL_SCALE_MAP_RXP > FULL_SCALE_MAP_SHAP2);
        assert!(FULL_SCALE_MAP_RXP > FULL_SCALE_MAP_SHAP3);
        assert!(FULL_SCALE_RESPONSE_MS_RXP < FULL_SCALE_RESPONSE_MS_SHAP3);
        assert!(FULL_SCALE_RESPONSE_MS_SHAP3 < FULL_SCALE_RESPONSE_MS_SHAP2);
        assert!(FULL_SCALE_RESPONSE_MS_SHAP2 < FULL_SCALE_RESPONSE_MS_SHAP1);
        for p in [FULL_SCALE_P_VS_SHAP1, FULL_SCALE_P_VS_SHAP2, FULL_SCALE_P_VS_SHAP3] {
            assert!(p < 1e-3);
        }
    }
}
