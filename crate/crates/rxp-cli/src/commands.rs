//! The five subcommands: gen-data, train, detect, explain, benchmark.
//! Every command resolves one top-level seed, derives component seeds from
//! it, writes its artifacts under an output directory, and finishes with a
//! manifest sufficient to re-run it identically.

use std::path::{Path, PathBuf};

use serde::Serialize;

use rxp_core::detector::Detector;
use rxp_core::eval::{render_table, ProtocolInputs};
use rxp_core::explanation::Explanation;
use rxp_core::matrix::Matrix;
use rxp_core::rxp::{explain_rxp, ResidualStats};
use rxp_core::seed::derive_seed;
use rxp_core::shap::{exact_shapley_explain, kernel_shap_explain, ShapConfig};
use rxp_core::svg::{relevance_chart, ChartOptions};
use rxp_core::synth::{generate, load_csv, save_csv, DatasetSpec, MinMaxScaler};
use rxp_core::DetectorEnvelope;

use crate::config::RunConfig;
use crate::errors::{CliError, Result};
use crate::manifest::Manifest;
use crate::pipeline::{load_or_generate, train_pipeline, write_envelope};

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("creating {}: {}", dir.display(), e)))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::io(format!("writing {}: {}", path.display(), e)))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}: {}", path.display(), e)))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("parsing {}: {}", path.display(), e)))
}

/// Generates a synthetic dataset CSV from a dataset description file (or
/// the built-in wayside default) with the `"dataset"`-derived seed.
pub fn gen_data(spec_path: Option<&Path>, out: &Path, seed: u64) -> Result<()> {
    let spec: DatasetSpec = match spec_path {
        Some(p) => read_json(p)?,
        None => DatasetSpec::default(),
    };
    let mut gen = spec.generate.clone();
    gen.seed = derive_seed(seed, "dataset");
    let bundle = generate(&spec.features, &gen)?;

    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    save_csv(&bundle, out)?;

    let mut manifest = Manifest::new(
        "gen-data",
        serde_json::json!({
            "spec": spec,
            "out": out.display().to_string(),
        }),
        seed,
    );
    if let Some(p) = spec_path {
        manifest.record_input(p)?;
    }
    manifest.record_output(out)?;
    let manifest_dir = out.parent().filter(|p| !p.as_os_str().is_empty());
    manifest.write(manifest_dir.unwrap_or(Path::new(".")))?;

    println!(
        "wrote {} rows x {} features ({} faults) to {}",
        bundle.data.rows(),
        bundle.data.cols(),
        bundle.ground_truth.fault_count(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    input_dim: usize,
    train_rows: usize,
    test_rows: usize,
    epochs: usize,
    first_epoch_loss: f64,
    final_epoch_loss: f64,
    threshold_delta: f64,
    contamination: f64,
}

/// Trains a detector per the run configuration and writes the envelope
/// (network + threshold + scaler + residual statistics) plus a summary.
pub fn train(cfg: &RunConfig) -> Result<()> {
    ensure_dir(&cfg.output_dir)?;
    let mut manifest = Manifest::new("train", serde_json::to_value(cfg)?, cfg.seed);

    let data = load_or_generate(cfg, &mut manifest)?;
    let pipe = train_pipeline(cfg, &data)?;

    let det_path = cfg.output_dir.join("detector.json");
    write_envelope(&pipe, &det_path)?;
    manifest.record_output(&det_path)?;

    let summary = TrainSummary {
        input_dim: pipe.detector.input_dim,
        train_rows: pipe.train.rows(),
        test_rows: pipe.test.rows(),
        epochs: pipe.train_losses.len(),
        first_epoch_loss: pipe.train_losses.first().copied().unwrap_or(f64::NAN),
        final_epoch_loss: pipe.train_losses.last().copied().unwrap_or(f64::NAN),
        threshold_delta: pipe.detector.threshold_delta,
        contamination: pipe.detector.contamination,
    };
    let summary_path = cfg.output_dir.join("training_summary.json");
    write_json(&summary, &summary_path)?;
    manifest.record_output(&summary_path)?;
    manifest.write(&cfg.output_dir)?;

    println!(
        "trained {}-dim detector: loss {:.6} -> {:.6}, threshold {:.6}; wrote {}",
        summary.input_dim,
        summary.first_epoch_loss,
        summary.final_epoch_loss,
        summary.threshold_delta,
        det_path.display()
    );
    Ok(())
}

/// Loads a detector envelope and the matching pieces for explanation.
struct LoadedDetector {
    detector: Detector,
    scaler: Option<MinMaxScaler>,
    stats: Option<ResidualStats>,
    feature_names: Vec<String>,
}

fn load_detector(path: &Path) -> Result<LoadedDetector> {
    let env: DetectorEnvelope = read_json(path)?;
    let detector = Detector::from_envelope(&env)?;
    Ok(LoadedDetector {
        detector,
        scaler: env.scaler,
        stats: env.residual_stats,
        feature_names: env.feature_names,
    })
}

/// Loads a data CSV and checks it lines up with the detector's features.
fn load_aligned_data(path: &Path, loaded: &LoadedDetector) -> Result<(Matrix, Matrix)> {
    let bundle = load_csv(path)?;
    if bundle.feature_names != loaded.feature_names {
        return Err(CliError::config(format!(
            "feature names in {} do not match the detector envelope",
            path.display()
        )));
    }
    let scaled = match &loaded.scaler {
        Some(s) => s.apply(&bundle.data)?,
        None => bundle.data.clone(),
    };
    Ok((bundle.data, scaled))
}

/// Scores every record of a CSV and writes `score,is_anomaly` per row.
pub fn detect(detector_path: &Path, data_path: &Path, out: Option<&Path>) -> Result<()> {
    let loaded = load_detector(detector_path)?;
    let (_raw, scaled) = load_aligned_data(data_path, &loaded)?;

    let mut lines = String::from("score,is_anomaly\n");
    let mut flagged = 0usize;
    for row in scaled.iter_rows() {
        let c = loaded.detector.classify(row)?;
        flagged += c.is_anomaly as usize;
        lines.push_str(&format!(
            "{},{}\n",
            c.score,
            if c.is_anomaly { 1 } else { 0 }
        ));
    }

    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                ensure_dir(parent)?;
            }
            std::fs::write(path, &lines)
                .map_err(|e| CliError::io(format!("writing {}: {}", path.display(), e)))?;
            let mut manifest = Manifest::new(
                "detect",
                serde_json::json!({
                    "detector": detector_path.display().to_string(),
                    "data": data_path.display().to_string(),
                    "out": path.display().to_string(),
                }),
                0,
            );
            manifest.record_input(detector_path)?;
            manifest.record_input(data_path)?;
            manifest.record_output(path)?;
            manifest.write(path.parent().unwrap_or(Path::new(".")))?;
            println!(
                "{} of {} records flagged; wrote {}",
                flagged,
                scaled.rows(),
                path.display()
            );
        }
        None => print!("{}", lines),
    }
    Ok(())
}

pub struct ExplainArgs<'a> {
    pub detector_path: &'a Path,
    pub data_path: &'a Path,
    pub record: usize,
    pub method: String,
    pub top_k: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    /// Include wall-clock nanoseconds in the JSON. Off by default so the
    /// artifact is byte-identical across reruns.
    pub timing: bool,
}

fn explanation_for(
    method: &str,
    loaded: &LoadedDetector,
    x: &[f64],
    background: &Matrix,
    seed: u64,
) -> Result<Explanation> {
    let shap = |cfg: ShapConfig| kernel_shap_explain(&loaded.detector, x, background, &cfg);
    match method {
        "rxp" => {
            let stats = loaded.stats.as_ref().ok_or_else(|| {
                CliError::config("detector envelope lacks residual statistics; re-run train")
            })?;
            Ok(explain_rxp(&loaded.detector, stats, x)?)
        }
        "shap1" => Ok(shap(ShapConfig::shap1(seed))?),
        "shap2" => Ok(shap(ShapConfig::shap2(seed))?),
        "shap3" => Ok(shap(ShapConfig::shap3(seed))?),
        "exact" => Ok(exact_shapley_explain(&loaded.detector, x, background)?),
        other => Err(CliError::config(format!(
            "unknown method {other:?}; expected rxp, shap1, shap2, shap3, or exact"
        ))),
    }
}

/// Explains one record of a CSV with the chosen method and writes the
/// explanation JSON (and optionally an SVG bar chart).
pub fn explain(args: &ExplainArgs) -> Result<()> {
    let loaded = load_detector(args.detector_path)?;
    let (_raw, scaled) = load_aligned_data(args.data_path, &loaded)?;
    if args.record >= scaled.rows() {
        return Err(CliError::config(format!(
            "record {} out of range: {} has {} rows",
            args.record,
            args.data_path.display(),
            scaled.rows()
        )));
    }
    let x = scaled.row(args.record).to_vec();
    let explain_seed = derive_seed(args.seed, "explain");

    let mut explanation = explanation_for(&args.method, &loaded, &x, &scaled, explain_seed)?;
    if !args.timing {
        explanation.elapsed_ns = None;
    }

    let k = args
        .top_k
        .unwrap_or(5)
        .clamp(1, explanation.relevance.len());
    let top = explanation.top_k(k)?;

    if let Some(path) = &args.out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        write_json(&explanation, path)?;
    } else {
        let mut text = serde_json::to_string_pretty(&explanation)?;
        text.push('\n');
        print!("{}", text);
    }

    if let Some(path) = &args.svg {
        let chart = relevance_chart(
            &explanation,
            &loaded.feature_names,
            &[],
            &ChartOptions {
                top_n: k,
                title: format!("record {} ({})", args.record, args.method),
                ..ChartOptions::default()
            },
        )?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        std::fs::write(path, chart)
            .map_err(|e| CliError::io(format!("writing {}: {}", path.display(), e)))?;
    }

    if let Some(out) = &args.out {
        let mut manifest = Manifest::new(
            "explain",
            serde_json::json!({
                "detector": args.detector_path.display().to_string(),
                "data": args.data_path.display().to_string(),
                "record": args.record,
                "method": args.method,
                "top_k": k,
                "timing": args.timing,
            }),
            args.seed,
        );
        manifest.record_input(args.detector_path)?;
        manifest.record_input(args.data_path)?;
        manifest.record_output(out)?;
        if let Some(svg) = &args.svg {
            manifest.record_output(svg)?;
        }
        manifest.write(out.parent().unwrap_or(Path::new(".")))?;
    }

    eprintln!("top {} features for record {}:", k, args.record);
    for (rank, (feature, relevance)) in top.iter().enumerate() {
        eprintln!(
            "  {}. {} relevance {:.4}",
            rank + 1,
            loaded.feature_names[*feature],
            relevance
        );
    }
    Ok(())
}

/// Full three-step benchmark: train, detect on the held-out split, then
/// the resampling comparison of explainers. Writes the report JSON, a
/// plain-text table, the trained detector, and one relevance chart per
/// method for the first explainable fault.
pub fn benchmark(cfg: &RunConfig, threads_override: Option<usize>) -> Result<()> {
    ensure_dir(&cfg.output_dir)?;
    let mut manifest = Manifest::new("benchmark", serde_json::to_value(cfg)?, cfg.seed);

    let data = load_or_generate(cfg, &mut manifest)?;
    let pipe = train_pipeline(cfg, &data)?;

    let mut protocol = cfg.protocol.clone();
    protocol.seed = derive_seed(cfg.seed, "protocol");
    if let Some(t) = threads_override {
        protocol.threads = t;
    }

    let report = rxp_core::run_protocol(
        &ProtocolInputs {
            detector: &pipe.detector,
            stats: &pipe.stats,
            training: &pipe.train,
            test: &pipe.test,
            truth: &pipe.truth,
        },
        &protocol,
    )?;

    let det_path = cfg.output_dir.join("detector.json");
    write_envelope(&pipe, &det_path)?;
    manifest.record_output(&det_path)?;

    let report_path = cfg.output_dir.join("report.json");
    write_json(&report, &report_path)?;
    manifest.record_output(&report_path)?;

    let table = render_table(&report);
    let table_path = cfg.output_dir.join("report.txt");
    std::fs::write(&table_path, &table)
        .map_err(|e| CliError::io(format!("writing {}: {}", table_path.display(), e)))?;
    manifest.record_output(&table_path)?;

    write_method_charts(cfg, &pipe, &protocol, &mut manifest)?;
    manifest.write(&cfg.output_dir)?;

    print!("{}", table);
    println!("report written to {}", report_path.display());
    Ok(())
}

/// One chart per method for the first test fault the detector flags.
fn write_method_charts(
    cfg: &RunConfig,
    pipe: &crate::pipeline::TrainedPipeline,
    protocol: &rxp_core::ProtocolConfig,
    manifest: &mut Manifest,
) -> Result<()> {
    let example = (0..pipe.test.rows()).find(|&i| {
        !pipe.truth[i].cause_features.is_empty()
            && pipe
                .detector
                .classify(pipe.test.row(i))
                .map(|c| c.is_anomaly)
                .unwrap_or(false)
    });
    let Some(row_idx) = example else {
        return Ok(()); // nothing detected; report still stands on its own
    };
    let x = pipe.test.row(row_idx);
    let causes = &pipe.truth[row_idx].cause_features;

    let mut charts: Vec<(String, Explanation)> = Vec::new();
    if let Ok(e) = explain_rxp(&pipe.detector, &pipe.stats, x) {
        charts.push(("rxp".into(), e));
    }
    for preset in &protocol.shap_presets {
        let shap_cfg = ShapConfig {
            seed: derive_seed(protocol.seed, &format!("chart:{}", preset.name)),
            ..preset.config
        };
        if let Ok(e) = kernel_shap_explain(&pipe.detector, x, &pipe.train, &shap_cfg) {
            charts.push((preset.name.clone(), e));
        }
    }
    for (name, explanation) in charts {
        let chart = relevance_chart(
            &explanation,
            &pipe.feature_names,
            causes,
            &ChartOptions {
                title: format!("test record {} ({})", row_idx, name),
                ..ChartOptions::default()
            },
        )?;
        let path = cfg.output_dir.join(format!("chart_{}.svg", name));
        std::fs::write(&path, chart)
            .map_err(|e| CliError::io(format!("writing {}: {}", path.display(), e)))?;
        manifest.record_output(&path)?;
    }
    Ok(())
}
