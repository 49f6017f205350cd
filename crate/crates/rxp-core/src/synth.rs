//! Synthetic wayside-style sensor data with ground-truth fault causes.
//!
//! Emulates trackside measurement records (thermal, impact and acoustic
//! channels per axle and side): normal records follow per-feature Gaussians
//! with mild correlation inside each sensor kind, fault records additionally
//! shift a chosen set of cause features upward by a configurable number of
//! standard deviations. The injected cause set is the relevance oracle for
//! ranking evaluation. Also provides min-max scaling to [0,1] (required by
//! the sigmoid output layer) and CSV persistence.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Sensor family a feature belongs to; features of one kind share a common
/// per-record factor, giving mild within-kind correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Thermal,
    Impact,
    Acoustic,
}

impl FeatureKind {
    fn index(self) -> usize {
        match self {
            FeatureKind::Thermal => 0,
            FeatureKind::Impact => 1,
            FeatureKind::Acoustic => 2,
        }
    }
}

/// One synthetic sensor channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Normal-behavior mean; for binary features, the probability of 1.
    pub mean: f64,
    /// Normal-behavior standard deviation; ignored for binary features.
    pub std: f64,
    #[serde(default)]
    pub binary: bool,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>, kind: FeatureKind, mean: f64, std: f64) -> Self {
        Self {
            name: name.into(),
            kind,
            mean,
            std,
            binary: false,
        }
    }

    pub fn binary(name: impl Into<String>, kind: FeatureKind, p_one: f64) -> Self {
        Self {
            name: name.into(),
            kind,
            mean: p_one,
            std: 0.0,
            binary: true,
        }
    }
}

/// Ground truth for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTruth {
    pub is_fault: bool,
    /// Indices of injected cause features, ascending; empty for normals.
    pub cause_features: Vec<usize>,
    /// Injected shift per cause in standard deviations (0 for binary flips).
    /// Not persisted by the CSV format.
    pub magnitude_sigmas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub records: Vec<RecordTruth>,
}

impl GroundTruth {
    pub fn fault_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_fault).count()
    }
}

/// Generated dataset: raw-unit values plus names, truth, and (once fitted)
/// the scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub data: Matrix,
    pub feature_names: Vec<String>,
    pub ground_truth: GroundTruth,
    pub scaler: Option<MinMaxScaler>,
}

/// Knobs for [`generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub n_normal: usize,
    pub n_fault: usize,
    /// Number of shifted cause features per fault, drawn uniformly from
    /// this inclusive range.
    pub causes_min: usize,
    pub causes_max: usize,
    /// Shift magnitude per cause in standard deviations, drawn uniformly
    /// from this inclusive range.
    pub magnitude_min: f64,
    pub magnitude_max: f64,
    /// Probability that a binary feature flips on a fault record.
    pub binary_flip_prob: f64,
    /// Within-kind correlation of normal draws, in [0,1].
    pub correlation: f64,
    pub seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            n_normal: 20_000,
            n_fault: 200,
            causes_min: 1,
            causes_max: 1,
            magnitude_min: 8.0,
            magnitude_max: 8.0,
            binary_flip_prob: 0.02,
            correlation: 0.3,
            seed: 42,
        }
    }
}

/// Dataset description accepted as a JSON document by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub features: Vec<FeatureSpec>,
    pub generate: GenerateConfig,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            features: default_wayside_spec(),
            generate: GenerateConfig::default(),
        }
    }
}

/// The default 64-channel layout: per side (LEFT/RIGHT) and axle (1-4),
/// two thermal, four impact/load and two acoustic channels — 16 thermal,
/// 32 impact, 16 acoustic in total.
pub fn default_wayside_spec() -> Vec<FeatureSpec> {
    use FeatureKind::*;
    let mut out = Vec::with_capacity(64);
    for (side, short) in [("LEFT", "L"), ("RIGHT", "R")] {
        for axle in 1..=4 {
            out.push(FeatureSpec::continuous(
                format!("HEAT_WHEEL_{side}_AXLE{axle}"),
                Thermal,
                45.0,
                8.0,
            ));
            out.push(FeatureSpec::continuous(
                format!("HEAT_BEARING_{side}_AXLE{axle}"),
                Thermal,
                55.0,
                10.0,
            ));
            out.push(FeatureSpec::continuous(
                format!("IMPACT_PEAK_{side}_AXLE{axle}"),
                Impact,
                180.0,
                25.0,
            ));
            out.push(FeatureSpec::continuous(
                format!("IMPACT_RMS_{side}_AXLE{axle}"),
                Impact,
                120.0,
                15.0,
            ));
            out.push(FeatureSpec::continuous(
                format!("IMPACT_DYN_RATIO_{side}_AXLE{axle}"),
                Impact,
                1.4,
                0.2,
            ));
            out.push(FeatureSpec::continuous(
                format!("LOAD_VERT_{side}_AXLE{axle}"),
                Impact,
                110.0,
                12.0,
            ));
            out.push(FeatureSpec::continuous(
                format!("RS_{short}_AXLE{axle}"),
                Acoustic,
                70.0,
                6.0,
            ));
            out.push(FeatureSpec::continuous(
                format!("ACOUSTIC_BAND_{side}_AXLE{axle}"),
                Acoustic,
                40.0,
                5.0,
            ));
        }
    }
    out
}

fn validate(features: &[FeatureSpec], cfg: &GenerateConfig) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("feature list is empty".into()));
    }
    let mut names: Vec<&str> = features.iter().map(|f| f.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("feature names must be unique".into()));
    }
    for f in features {
        if f.binary {
            if !(0.0..=1.0).contains(&f.mean) {
                return Err(Error::InvalidArgument(format!(
                    "binary feature {} needs mean in [0,1]",
                    f.name
                )));
            }
        } else if !f.std.is_finite() || f.std <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "continuous feature {} needs std > 0",
                f.name
            )));
        }
    }
    if cfg.n_normal == 0 {
        return Err(Error::InvalidArgument("n_normal must be >= 1".into()));
    }
    let n_continuous = features.iter().filter(|f| !f.binary).count();
    if cfg.n_fault > 0 {
        if cfg.causes_min == 0 || cfg.causes_max < cfg.causes_min {
            return Err(Error::InvalidArgument(
                "causes_per_fault range must be non-empty and start at >= 1".into(),
            ));
        }
        if cfg.causes_max > n_continuous {
            return Err(Error::InvalidArgument(format!(
                "causes_per_fault up to {} exceeds the {} continuous features",
                cfg.causes_max, n_continuous
            )));
        }
        if !(cfg.magnitude_min > 0.0 && cfg.magnitude_max >= cfg.magnitude_min) {
            return Err(Error::InvalidArgument(
                "magnitude range must be positive and non-empty".into(),
            ));
        }
    }
    if !(0.0..=1.0).contains(&cfg.binary_flip_prob) {
        return Err(Error::InvalidArgument(
            "binary_flip_prob must lie in [0,1]".into(),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.correlation) {
        return Err(Error::InvalidArgument(
            "correlation must lie in [0,1]".into(),
        ));
    }
    Ok(n_continuous)
}

/// Generates a dataset: `n_normal` normal records plus `n_fault` fault
/// records with shifted cause features, in a seeded random order.
///
/// Normal draws use x = mean + std * (sqrt(rho) * g_kind + sqrt(1-rho) * e)
/// with shared per-kind factors g, so channels of one sensor family move
/// together mildly. Faults copy a fresh normal draw and shift each chosen
/// continuous cause upward by magnitude * std; binary features flip with
/// `binary_flip_prob` and count as causes too. Bitwise deterministic per
/// seed.
pub fn generate(features: &[FeatureSpec], cfg: &GenerateConfig) -> Result<DatasetBundle> {
    validate(features, cfg)?;
    let m = features.len();
    let continuous: Vec<usize> = features
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.binary)
        .map(|(i, _)| i)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_total = cfg.n_normal + cfg.n_fault;
    let mut data = Matrix::zeros(n_total, m);
    let mut truth = Vec::with_capacity(n_total);
    let sqrt_common = cfg.correlation.sqrt();
    let sqrt_own = (1.0 - cfg.correlation).sqrt();

    for rec in 0..n_total {
        let is_fault = rec >= cfg.n_normal;
        let mut factors = [0.0f64; 3];
        for f in &mut factors {
            *f = rng.sample(StandardNormal);
        }
        let row = data.row_mut(rec);
        for (i, f) in features.iter().enumerate() {
            if f.binary {
                row[i] = if rng.random::<f64>() < f.mean { 1.0 } else { 0.0 };
            } else {
                let own: f64 = rng.sample(StandardNormal);
                let g = factors[f.kind.index()];
                row[i] = f.mean + f.std * (sqrt_common * g + sqrt_own * own);
            }
        }

        let mut causes: Vec<(usize, f64)> = Vec::new();
        if is_fault {
            let k = if cfg.causes_min == cfg.causes_max {
                cfg.causes_min
            } else {
                rng.random_range(cfg.causes_min..=cfg.causes_max)
            };
            for pick in rand::seq::index::sample(&mut rng, continuous.len(), k).iter() {
                let fi = continuous[pick];
                let mag = if cfg.magnitude_min == cfg.magnitude_max {
                    cfg.magnitude_min
                } else {
                    rng.random_range(cfg.magnitude_min..=cfg.magnitude_max)
                };
                row[fi] += mag * features[fi].std;
                causes.push((fi, mag));
            }
            for (i, f) in features.iter().enumerate() {
                if f.binary && rng.random::<f64>() < cfg.binary_flip_prob {
                    row[i] = 1.0 - row[i];
                    causes.push((i, 0.0));
                }
            }
            causes.sort_by_key(|&(i, _)| i);
        }
        truth.push(RecordTruth {
            is_fault,
            cause_features: causes.iter().map(|&(i, _)| i).collect(),
            magnitude_sigmas: causes.iter().map(|&(_, s)| s).collect(),
        });
    }

    // Shuffle record order so faults are interleaved with normals.
    let mut perm: Vec<usize> = (0..n_total).collect();
    perm.shuffle(&mut rng);
    let data = data.select_rows(&perm);
    let records = perm.iter().map(|&i| truth[i].clone()).collect();

    Ok(DatasetBundle {
        data,
        feature_names: features.iter().map(|f| f.name.clone()).collect(),
        ground_truth: GroundTruth { records },
        scaler: None,
    })
}

/// Seeded train/test row split; both sides are non-empty.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 rows to split".into(),
        ));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction must lie in (0,1), got {}",
            train_fraction
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let test = idx.split_off(cut);
    Ok((idx, test))
}

/// Per-feature min-max scaler mapping training ranges onto [0,1].
///
/// Constant columns map to 0.5; values outside the fitted range clamp to
/// [0,1] (the network's sigmoid output can't represent anything beyond).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: &Matrix) -> Result<Self> {
        if data.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut min = data.row(0).to_vec();
        let mut max = data.row(0).to_vec();
        for row in data.iter_rows().skip(1) {
            for ((lo, hi), v) in min.iter_mut().zip(max.iter_mut()).zip(row) {
                *lo = lo.min(*v);
                *hi = hi.max(*v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.min)
            .zip(&self.max)
            .map(|((v, lo), hi)| {
                if hi > lo {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.5
                }
            })
            .collect()
    }

    pub fn apply(&self, data: &Matrix) -> Result<Matrix> {
        self.check(data)?;
        let rows: Vec<Vec<f64>> = data.iter_rows().map(|r| self.apply_row(r)).collect();
        Matrix::from_rows(&rows)
    }

    pub fn invert_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.min)
            .zip(&self.max)
            .map(|((v, lo), hi)| if hi > lo { v * (hi - lo) + lo } else { *lo })
            .collect()
    }

    pub fn invert(&self, data: &Matrix) -> Result<Matrix> {
        self.check(data)?;
        let rows: Vec<Vec<f64>> = data.iter_rows().map(|r| self.invert_row(r)).collect();
        Matrix::from_rows(&rows)
    }

    fn check(&self, data: &Matrix) -> Result<()> {
        if data.cols() != self.dim() {
            return Err(Error::DimensionError(format!(
                "data has {} columns, scaler covers {}",
                data.cols(),
                self.dim()
            )));
        }
        Ok(())
    }
}

const IS_FAULT_COLUMN: &str = "__is_fault";
const CAUSES_COLUMN: &str = "__causes";

/// Writes the bundle as CSV: feature columns plus `__is_fault` (0/1) and
/// `__causes` (semicolon-separated cause indices, empty for normals).
/// Values are printed in shortest-round-trip decimal form, so reloading
/// reproduces them exactly.
pub fn save_csv(bundle: &DatasetBundle, path: impl AsRef<std::path::Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = bundle.feature_names.clone();
    header.push(IS_FAULT_COLUMN.into());
    header.push(CAUSES_COLUMN.into());
    w.write_record(&header).map_err(csv_err)?;

    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for (row, truth) in bundle.data.iter_rows().zip(&bundle.ground_truth.records) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(if truth.is_fault { "1" } else { "0" }.into());
        record.push(
            truth
                .cause_features
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        );
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`save_csv`]. Cause magnitudes are not part of
/// the format, so `magnitude_sigmas` comes back empty.
pub fn load_csv(path: impl AsRef<std::path::Path>) -> Result<DatasetBundle> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(csv_err)?;

    let header = r.headers().map_err(csv_err)?.clone();
    let n_cols = header.len();
    if n_cols < 3
        || header.get(n_cols - 2) != Some(IS_FAULT_COLUMN)
        || header.get(n_cols - 1) != Some(CAUSES_COLUMN)
    {
        return Err(Error::ParseError {
            line: 1,
            message: format!(
                "header must end with {},{} after at least one feature column",
                IS_FAULT_COLUMN, CAUSES_COLUMN
            ),
        });
    }
    let m = n_cols - 2;
    let feature_names: Vec<String> = header.iter().take(m).map(String::from).collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut records = Vec::new();
    for item in r.records() {
        let rec = item.map_err(csv_err)?;
        let line = rec
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 2);
        let parse = |field: &str, what: &str| -> Result<f64> {
            field.trim().parse::<f64>().map_err(|_| Error::ParseError {
                line,
                message: format!("bad {} value {:?}", what, field),
            })
        };

        let mut row = Vec::with_capacity(m);
        for i in 0..m {
            row.push(parse(&rec[i], "numeric")?);
        }
        let is_fault = match rec[m].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::ParseError {
                    line,
                    message: format!("bad {} value {:?}", IS_FAULT_COLUMN, other),
                })
            }
        };
        let mut cause_features = Vec::new();
        for part in rec[m + 1].split(';').filter(|s| !s.trim().is_empty()) {
            let idx: usize = part.trim().parse().map_err(|_| Error::ParseError {
                line,
                message: format!("bad cause index {:?}", part),
            })?;
            if idx >= m {
                return Err(Error::ParseError {
                    line,
                    message: format!("cause index {} out of range for {} features", idx, m),
                });
            }
            cause_features.push(idx);
        }
        rows.push(row);
        records.push(RecordTruth {
            is_fault,
            cause_features,
            magnitude_sigmas: Vec::new(),
        });
    }

    let data = if rows.is_empty() {
        Matrix::zeros(0, m)
    } else {
        Matrix::from_rows(&rows)?
    };
    Ok(DatasetBundle {
        data,
        feature_names,
        ground_truth: GroundTruth { records },
        scaler: None,
    })
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!("is_io_error guarantees an Io kind"),
        }
    } else {
        Error::ParseError {
            line,
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_spec() -> Vec<FeatureSpec> {
        vec![
            FeatureSpec::continuous("T1", FeatureKind::Thermal, 50.0, 5.0),
            FeatureSpec::continuous("T2", FeatureKind::Thermal, 40.0, 4.0),
            FeatureSpec::continuous("I1", FeatureKind::Impact, 100.0, 10.0),
            FeatureSpec::continuous("A1", FeatureKind::Acoustic, 70.0, 7.0),
        ]
    }

    fn small_cfg() -> GenerateConfig {
        GenerateConfig {
            n_normal: 300,
            n_fault: 30,
            magnitude_min: 10.0,
            magnitude_max: 10.0,
            seed: 1,
            ..GenerateConfig::default()
        }
    }

    #[test]
    fn default_layout_has_64_unique_channels() {
        let spec = default_wayside_spec();
        assert_eq!(spec.len(), 64);
        let mut names: Vec<&str> = spec.iter().map(|f| f.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 64);
        let count = |k: FeatureKind| spec.iter().filter(|f| f.kind == k).count();
        assert_eq!(count(FeatureKind::Thermal), 16);
        assert_eq!(count(FeatureKind::Impact), 32);
        assert_eq!(count(FeatureKind::Acoustic), 16);
    }

    #[test]
    fn no_faults_means_no_fault_flags() {
        let cfg = GenerateConfig {
            n_normal: 50,
            n_fault: 0,
            ..small_cfg()
        };
        let b = generate(&small_spec(), &cfg).unwrap();
        assert_eq!(b.ground_truth.fault_count(), 0);
        assert!(b
            .ground_truth
            .records
            .iter()
            .all(|r| r.cause_features.is_empty()));
    }

    #[test]
    fn injected_causes_stand_out_against_the_normal_population() {
        let b = generate(&small_spec(), &small_cfg()).unwrap();
        let m = b.data.cols();

        // Population stats from the normal records only.
        let normals: Vec<usize> = b
            .ground_truth
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_fault)
            .map(|(i, _)| i)
            .collect();
        let mut mean = vec![0.0; m];
        for &i in &normals {
            for (acc, v) in mean.iter_mut().zip(b.data.row(i)) {
                *acc += v / normals.len() as f64;
            }
        }
        let mut var = vec![0.0; m];
        for &i in &normals {
            for ((acc, v), u) in var.iter_mut().zip(b.data.row(i)).zip(&mean) {
                *acc += (v - u) * (v - u) / normals.len() as f64;
            }
        }

        let mut seen = 0;
        let mut loud = 0;
        for (i, r) in b.ground_truth.records.iter().enumerate() {
            if !r.is_fault {
                continue;
            }
            assert_eq!(r.cause_features.len(), 1);
            let c = r.cause_features[0];
            let z = (b.data.row(i)[c] - mean[c]) / var[c].sqrt();
            seen += 1;
            if z > 5.0 {
                loud += 1;
            }
        }
        assert_eq!(seen, 30);
        assert!(loud as f64 >= 0.99 * seen as f64, "{}/{} above 5z", loud, seen);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate(&small_spec(), &small_cfg()).unwrap();
        let b = generate(&small_spec(), &small_cfg()).unwrap();
        assert_eq!(a, b);
        let c = generate(
            &small_spec(),
            &GenerateConfig {
                seed: 2,
                ..small_cfg()
            },
        )
        .unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn cause_budget_beyond_continuous_features_is_rejected() {
        let cfg = GenerateConfig {
            causes_min: 5,
            causes_max: 5,
            ..small_cfg()
        };
        assert!(matches!(
            generate(&small_spec(), &cfg),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn binary_features_flip_on_faults_and_join_the_causes() {
        let mut spec = small_spec();
        spec.push(FeatureSpec::binary("B1", FeatureKind::Impact, 0.0));
        let cfg = GenerateConfig {
            n_normal: 20,
            n_fault: 10,
            binary_flip_prob: 1.0,
            ..small_cfg()
        };
        let b = generate(&spec, &cfg).unwrap();
        for (i, r) in b.ground_truth.records.iter().enumerate() {
            let v = b.data.row(i)[4];
            assert!(v == 0.0 || v == 1.0);
            if r.is_fault {
                // p(1)=0 for normals, flip prob 1 on faults: always 1, always a cause.
                assert_eq!(v, 1.0);
                assert!(r.cause_features.contains(&4));
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn split_covers_all_rows_without_overlap() {
        let (train, test) = split_indices(100, 0.7, 9).unwrap();
        assert_eq!(train.len(), 70);
        assert_eq!(test.len(), 30);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_indices(100, 0.7, 9).unwrap(), (train, test));
    }

    #[test]
    fn scaling_maps_ranges_onto_unit_interval() {
        let data = Matrix::from_rows(&[vec![0.0, 3.0], vec![10.0, 3.0]]).unwrap();
        let s = MinMaxScaler::fit(&data).unwrap();
        assert_eq!(s.apply_row(&[5.0, 3.0]), vec![0.5, 0.5]);
        // Out-of-range values clamp.
        assert_eq!(s.apply_row(&[-5.0, 3.0])[0], 0.0);
        assert_eq!(s.apply_row(&[25.0, 3.0])[0], 1.0);
    }

    #[test]
    fn scaling_round_trips_within_tolerance() {
        let b = generate(&small_spec(), &small_cfg()).unwrap();
        let s = MinMaxScaler::fit(&b.data).unwrap();
        let scaled = s.apply(&b.data).unwrap();
        assert!(scaled.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let back = s.invert(&scaled).unwrap();
        for (a, b) in back.as_slice().iter().zip(b.data.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn csv_round_trip_preserves_data_and_truth() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bundle.csv");
        let b = generate(&small_spec(), &small_cfg()).unwrap();
        save_csv(&b, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.feature_names, b.feature_names);
        assert_eq!(back.data, b.data);
        for (a, e) in back.ground_truth.records.iter().zip(&b.ground_truth.records) {
            assert_eq!(a.is_fault, e.is_fault);
            assert_eq!(a.cause_features, e.cause_features);
        }
    }

    #[test]
    fn missing_marker_columns_fail_at_the_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "A,B\n1.0,2.0\n").unwrap();
        match load_csv(&path) {
            Err(Error::ParseError { line: 1, .. }) => {}
            other => panic!("expected header ParseError, got {:?}", other),
        }
    }

    #[test]
    fn malformed_values_report_their_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "A,__is_fault,__causes\n1.0,0,\nnot_a_number,0,\n",
        )
        .unwrap();
        match load_csv(&path) {
            Err(Error::ParseError { line: 3, .. }) => {}
            other => panic!("expected ParseError at line 3, got {:?}", other),
        }
    }

    #[test]
    fn empty_causes_field_parses_to_no_causes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ok.csv");
        std::fs::write(&path, "A,__is_fault,__causes\n0.25,1,\n").unwrap();
        let b = load_csv(&path).unwrap();
        assert!(b.ground_truth.records[0].is_fault);
        assert!(b.ground_truth.records[0].cause_features.is_empty());
        assert_eq!(b.data.row(0), &[0.25]);
    }

    #[test]
    fn out_of_range_cause_indices_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "A,__is_fault,__causes\n0.25,1,7\n").unwrap();
        match load_csv(&path) {
            Err(Error::ParseError { line: 2, .. }) => {}
            other => panic!("expected ParseError at line 2, got {:?}", other),
        }
    }
}
