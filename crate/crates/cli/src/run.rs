//! Fold and ablation drivers.
//!
//! Every job (one fold of one arm) is deterministic on its own and writes
//! only inside its own directory. Jobs may run in parallel; tables are
//! assembled afterwards in job order, so outputs do not depend on the
//! number of threads.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use pspd::model::save_parameters;
use pspd::{
    evaluate_model, generate_synthetic, load_csv, split, Ablation, Dataset, MetricsReport, ModelParameters,
    RegularizerKind, Standardizer, TrainConfig, TrainingTrace,
};

use crate::config::{DataSource, EvaluateOn, ExperimentConfig, LoadedConfig};
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const ABLATION_SUMMARY_FILE: &str = "ablation_summary.csv";
pub const KINDS_FILE: &str = "kinds.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const PARAMS_FILE: &str = "params.bin";

/// Metric names in table order.
pub const METRICS: [&str; 6] = ["acc", "sen", "spe", "auc", "ece", "nll"];

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

/// One resample of the data, standardized on its training part.
#[derive(Debug, Clone)]
pub struct PreparedFold {
    pub fold: usize,
    pub seed: u64,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Outcome of training one configuration on one fold.
#[derive(Debug, Clone)]
pub struct JobResult {
    pub fold: usize,
    pub config: TrainConfig,
    pub test: MetricsReport,
    pub trace: TrainingTrace,
    pub params: ModelParameters,
}

#[derive(Debug, Serialize)]
struct FoldReport<'a> {
    config_hash: &'a str,
    fold: usize,
    seed: u64,
    ablation: Ablation,
    pcl_kind: RegularizerKind,
    pcd_kind: RegularizerKind,
    evaluated_on: EvaluateOn,
    epochs: usize,
    test: &'a MetricsReport,
}

pub fn load_dataset(config: &ExperimentConfig) -> CliResult<Dataset> {
    match &config.data {
        DataSource::Synthetic(spec) => Ok(generate_synthetic(spec)?),
        DataSource::Csv(csv) => Ok(load_csv(&csv.path, &csv.label_column(), csv.class_count)?),
    }
}

/// Splits and standardizes `data` once per fold. Validation and test
/// labels are swapped for the clean ones when asked and available.
pub fn prepare_folds(config: &ExperimentConfig, data: &Dataset) -> CliResult<Vec<PreparedFold>> {
    (0..config.folds)
        .map(|fold| {
            let seed = config.train.seed.wrapping_add(fold as u64);
            let parts = Standardizer::standardize_splits(&split(data, &config.split.spec(seed))?)?;
            let relabel = |d: Dataset| match config.evaluate_on {
                EvaluateOn::Clean => d.with_clean_as_observed(),
                EvaluateOn::Observed => d,
            };
            Ok(PreparedFold {
                fold,
                seed,
                train: parts.train,
                val: relabel(parts.val),
                test: relabel(parts.test),
            })
        })
        .collect()
}

/// Trains `config` on one fold (seeded with the fold's seed) and evaluates it on the test part.
pub fn run_job(fold: &PreparedFold, config: &TrainConfig) -> pspd::Result<JobResult> {
    let config = TrainConfig {
        seed: fold.seed,
        ..config.clone()
    };
    let outcome = pspd::train(&config, &fold.train, Some(&fold.val))?;
    let test = evaluate_model(&outcome.params, &fold.test, config.ece_bins)?;
    Ok(JobResult {
        fold: fold.fold,
        config,
        test,
        trace: outcome.trace,
        params: outcome.params,
    })
}

fn run_jobs(jobs: &[(&PreparedFold, TrainConfig)], options: RunOptions) -> CliResult<Vec<JobResult>> {
    let work = || {
        jobs.par_iter()
            .map(|(fold, config)| run_job(fold, config))
            .collect::<Vec<_>>()
    };
    let results = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(format!("cannot start {n} worker threads: {e}")))?
            .install(work),
        None => work(),
    };
    // First failure in job order, so the reported error is deterministic too.
    results.into_iter().map(|r| r.map_err(CliError::from)).collect()
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_job(dir: &Path, job: &JobResult, hash: &str, evaluated_on: EvaluateOn) -> CliResult<()> {
    create_dir(dir)?;
    job.trace.save_csv(dir.join(TRACE_FILE), Some(hash))?;
    save_parameters(dir.join(PARAMS_FILE), &job.params, job.config.epochs)?;
    let report = FoldReport {
        config_hash: hash,
        fold: job.fold,
        seed: job.config.seed,
        ablation: job.config.ablation,
        pcl_kind: job.config.pcl_kind,
        pcd_kind: job.config.pcd_kind,
        evaluated_on,
        epochs: job.config.epochs,
        test: &job.test,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("reports serialize");
    json.push('\n');
    write_file(&dir.join(METRICS_FILE), json.as_bytes())
}

fn metric(report: &MetricsReport, name: &str) -> Option<f64> {
    match name {
        "acc" => Some(report.acc),
        "sen" => report.sen,
        "spe" => report.spe,
        "auc" => report.auc,
        "ece" => Some(report.ece),
        "nll" => Some(report.nll),
        _ => None,
    }
}

/// Mean and sample standard deviation over the defined values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    if n == 0 {
        return MeanStd { mean: None, std: None, n };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (n > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    MeanStd { mean: Some(mean), std, n }
}

pub fn summarize(reports: &[&MetricsReport]) -> Vec<(&'static str, MeanStd)> {
    METRICS
        .iter()
        .map(|&m| {
            let values: Vec<f64> = reports.iter().filter_map(|r| metric(r, m)).collect();
            (m, mean_std(&values))
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_with_hash(hash: &str, header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = format!("# config_hash: {hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header).expect("writing to memory");
        for row in rows {
            w.write_record(row).expect("writing to memory");
        }
        w.flush().expect("writing to memory");
    }
    out
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_path: String,
    config_hash: &'a str,
    version: &'a str,
    threads: Option<usize>,
    started_unix: u64,
    finished_unix: u64,
}

fn write_manifest(
    dir: &Path,
    command: &str,
    loaded: &LoadedConfig,
    options: RunOptions,
    started: u64,
) -> CliResult<()> {
    let manifest = Manifest {
        command,
        config_path: loaded.path.display().to_string(),
        config_hash: &loaded.hash,
        version: env!("CARGO_PKG_VERSION"),
        threads: options.threads,
        started_unix: started,
        finished_unix: unix_seconds(),
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(&dir.join(MANIFEST_FILE), json.as_bytes())
}

fn summary_rows(summary: &[(&str, MeanStd)]) -> Vec<Vec<String>> {
    summary
        .iter()
        .map(|(m, s)| vec![m.to_string(), cell(s.mean), cell(s.std), s.n.to_string()])
        .collect()
}

/// Human-readable `metric  mean ± std` lines.
pub fn format_summary(summary: &[(&str, MeanStd)]) -> String {
    summary
        .iter()
        .map(|(m, s)| match (s.mean, s.std) {
            (Some(mean), Some(std)) => format!("{m:<4} {mean:.4} ± {std:.4}\n"),
            (Some(mean), None) => format!("{m:<4} {mean:.4}\n"),
            _ => format!("{m:<4} undefined\n"),
        })
        .collect()
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub jobs: Vec<JobResult>,
    pub summary: Vec<(&'static str, MeanStd)>,
}

/// Trains the configured arm on every fold and writes per-fold traces,
/// reports and parameters plus a mean ± std summary.
pub fn run_experiment(loaded: &LoadedConfig, options: RunOptions) -> CliResult<ExperimentOutcome> {
    let started = unix_seconds();
    let config = &loaded.config;
    let data = load_dataset(config)?;
    let folds = prepare_folds(config, &data)?;
    let jobs: Vec<_> = folds.iter().map(|f| (f, config.train.clone())).collect();
    let results = run_jobs(&jobs, options)?;

    let out = &config.output_dir;
    create_dir(out)?;
    for job in &results {
        write_job(&out.join(format!("fold_{}", job.fold)), job, &loaded.hash, config.evaluate_on)?;
    }
    let summary = summarize(&results.iter().map(|r| &r.test).collect::<Vec<_>>());
    write_file(
        &out.join(SUMMARY_FILE),
        &csv_with_hash(&loaded.hash, &["metric", "mean", "std", "n"], &summary_rows(&summary)),
    )?;
    write_manifest(out, "run", loaded, options, started)?;
    Ok(ExperimentOutcome {
        output_dir: out.clone(),
        jobs: results,
        summary,
    })
}

/// Result of [`run_ablation`]: jobs in (fold, arm) order.
#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub output_dir: PathBuf,
    pub arms: Vec<JobResult>,
    /// Full-arm jobs for each (PCL kind, PCD kind), present when the sweep was requested.
    pub kinds: Vec<JobResult>,
}

impl AblationOutcome {
    pub fn arm(&self, fold: usize, ablation: Ablation) -> Option<&JobResult> {
        self.arms
            .iter()
            .find(|j| j.fold == fold && j.config.ablation == ablation)
    }
}

fn result_row(job: &JobResult) -> Vec<String> {
    let mut row = vec![
        job.fold.to_string(),
        job.config.ablation.to_string(),
        job.config.pcl_kind.to_string(),
        job.config.pcd_kind.to_string(),
    ];
    row.extend(METRICS.iter().map(|m| cell(metric(&job.test, m))));
    row
}

const RESULT_HEADER: [&str; 10] = ["fold", "arm", "pcl_kind", "pcd_kind", "acc", "sen", "spe", "auc", "ece", "nll"];

/// Runs Baseline, PclOnly, PcdOnly and Full on shared folds, and the
/// hard/soft sweep when `sweep_kinds` is set.
pub fn run_ablation(loaded: &LoadedConfig, options: RunOptions) -> CliResult<AblationOutcome> {
    let started = unix_seconds();
    let config = &loaded.config;
    let data = load_dataset(config)?;
    let folds = prepare_folds(config, &data)?;

    let mut jobs = Vec::new();
    for fold in &folds {
        for ablation in Ablation::ALL {
            jobs.push((fold, TrainConfig { ablation, ..config.train.clone() }));
        }
    }
    let arm_count = jobs.len();
    if config.sweep_kinds {
        for fold in &folds {
            for pcl_kind in RegularizerKind::ALL {
                for pcd_kind in RegularizerKind::ALL {
                    jobs.push((
                        fold,
                        TrainConfig {
                            ablation: Ablation::Full,
                            pcl_kind,
                            pcd_kind,
                            ..config.train.clone()
                        },
                    ));
                }
            }
        }
    }
    let mut results = run_jobs(&jobs, options)?;
    let kinds = results.split_off(arm_count);
    let arms = results;

    let out = &config.output_dir;
    create_dir(out)?;
    for job in &arms {
        let dir = out.join(job.config.ablation.name()).join(format!("fold_{}", job.fold));
        write_job(&dir, job, &loaded.hash, config.evaluate_on)?;
    }
    for job in &kinds {
        let dir = out
            .join("kinds")
            .join(format!("{}-{}", job.config.pcl_kind, job.config.pcd_kind))
            .join(format!("fold_{}", job.fold));
        write_job(&dir, job, &loaded.hash, config.evaluate_on)?;
    }

    let rows: Vec<_> = arms.iter().map(result_row).collect();
    write_file(&out.join(ABLATION_FILE), &csv_with_hash(&loaded.hash, &RESULT_HEADER, &rows))?;
    if !kinds.is_empty() {
        let rows: Vec<_> = kinds.iter().map(result_row).collect();
        write_file(&out.join(KINDS_FILE), &csv_with_hash(&loaded.hash, &RESULT_HEADER, &rows))?;
    }

    let mut summary_rows = Vec::new();
    let mut groups: Vec<(String, RegularizerKind, RegularizerKind, Vec<&MetricsReport>)> = Vec::new();
    let tagged = arms.iter().map(|j| (false, j)).chain(kinds.iter().map(|j| (true, j)));
    for (is_kind, job) in tagged {
        let label = if is_kind {
            format!("{}:{}-{}", job.config.ablation, job.config.pcl_kind, job.config.pcd_kind)
        } else {
            job.config.ablation.to_string()
        };
        match groups.iter_mut().find(|g| g.0 == label) {
            Some(g) => g.3.push(&job.test),
            None => groups.push((label, job.config.pcl_kind, job.config.pcd_kind, vec![&job.test])),
        }
    }
    for (label, pcl, pcd, reports) in &groups {
        for (m, s) in summarize(reports) {
            summary_rows.push(vec![
                label.clone(),
                pcl.to_string(),
                pcd.to_string(),
                m.to_string(),
                cell(s.mean),
                cell(s.std),
                s.n.to_string(),
            ]);
        }
    }
    write_file(
        &out.join(ABLATION_SUMMARY_FILE),
        &csv_with_hash(
            &loaded.hash,
            &["arm", "pcl_kind", "pcd_kind", "metric", "mean", "std", "n"],
            &summary_rows,
        ),
    )?;
    write_manifest(out, "ablate", loaded, options, started)?;
    Ok(AblationOutcome {
        output_dir: out.clone(),
        arms,
        kinds,
    })
}

/// Per-arm means in `ablation_summary.csv` order, for printing.
pub fn format_ablation(outcome: &AblationOutcome) -> String {
    let mut text = String::new();
    for ablation in Ablation::ALL {
        let reports: Vec<_> = outcome
            .arms
            .iter()
            .filter(|j| j.config.ablation == ablation)
            .map(|j| &j.test)
            .collect();
        let _ = writeln!(text, "[{ablation}]");
        text.push_str(&format_summary(&summarize(&reports)));
    }
    text
}
