//! Seeded paired-fraction sweeps: every (fraction, repeat) cell runs the full
//! pipeline, and the per-fraction mean ± population std of ACC and NMI is
//! written as CSV or as markdown tables (one per metric, ratios as columns).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataio::{self, MultiViewDataset, NormalizeMethod, PairingMask};
use crate::error::{Error, Result};
use crate::metrics;
use crate::spectral;
use crate::trainer::{self, TrainConfig};

pub const METHOD_NAME: &str = "PVC-MCN";
pub const DEFAULT_FRACTIONS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub n: usize,
    pub dims: Vec<usize>,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { clusters: 3, n: 150, dims: vec![10, 12], separation: 10.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    /// Path to a dataset manifest; relative paths resolve against the
    /// working directory.
    Manifest(PathBuf),
    Synthetic(SyntheticSpec),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSpec::default())
    }
}

impl DatasetSource {
    fn describe(&self) -> String {
        match self {
            DatasetSource::Manifest(p) => format!("manifest {}", p.display()),
            DatasetSource::Synthetic(s) => format!(
                "synthetic clusters={} n={} dims={:?} separation={} seed={}",
                s.clusters, s.n, s.dims, s.separation, s.seed
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub source: DatasetSource,
    pub paired_fractions: Vec<f64>,
    pub repeats: usize,
    pub base_seed: u64,
    pub train: TrainConfig,
    /// Number of clusters for the head and for spectral clustering.
    pub clusters: usize,
    /// Feature scaling for synthetic data; manifests carry their own.
    pub normalize: NormalizeMethod,
    /// Worker threads. Does not affect results.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: DatasetSource::default(),
            paired_fractions: DEFAULT_FRACTIONS.to_vec(),
            repeats: 10,
            base_seed: 0,
            train: TrainConfig::default(),
            clusters: 3,
            normalize: NormalizeMethod::MinMax,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paired_fractions.is_empty() {
            return Err(Error::InvalidArgument("no paired fractions given".into()));
        }
        for &f in &self.paired_fractions {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidArgument(format!("paired fraction {f} is outside (0, 1]")));
            }
        }
        let mut sorted = self.paired_fractions.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("paired fractions must be distinct".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        if self.clusters < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 clusters, got {}", self.clusters)));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidArgument("jobs must be at least 1".into()));
        }
        if let DatasetSource::Synthetic(s) = &self.source {
            if s.dims.len() < 2 {
                return Err(Error::InvalidArgument("synthetic data needs at least 2 views".into()));
            }
        }
        self.train_config(0).validate()
    }

    /// Training configuration for one repeat.
    pub fn train_config(&self, repeat: usize) -> TrainConfig {
        let mut t = self.train.clone();
        t.hp.clusters = self.clusters;
        t.seed = self.base_seed + repeat as u64;
        t
    }

    pub fn load_dataset(&self) -> Result<MultiViewDataset> {
        match &self.source {
            DatasetSource::Manifest(p) => dataio::load_dataset(p),
            DatasetSource::Synthetic(s) => {
                let ds = dataio::generate_synthetic(s.clusters, s.n, &s.dims, s.separation, s.seed)?;
                Ok(ds.normalized(self.normalize))
            }
        }
    }
}

/// Outcome of one (fraction, repeat) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub paired_fraction: f64,
    pub repeat: usize,
    pub seed: u64,
    pub outcome: RunOutcome,
    /// Excluded from emitted reports so they stay byte-reproducible.
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunOutcome {
    Ok { acc: f64, nmi: f64, weights: Vec<f64> },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub paired_fraction: f64,
    pub repeats: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    /// Set when any repeat failed; the statistics are then not reported.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: String,
    /// Sorted by ascending paired fraction.
    pub cells: Vec<CellSummary>,
    /// Sorted by (fraction, repeat).
    pub runs: Vec<RunRecord>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidArgument(format!("unknown report format {other:?}; use csv or markdown"))),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mask, train, affinity, spectral clustering and scoring for one cell.
pub fn run_single(
    dataset: &MultiViewDataset,
    labels: &[usize],
    paired_fraction: f64,
    config: &TrainConfig,
    mask_seed: u64,
) -> Result<(f64, f64, Vec<f64>)> {
    let mask = dataio::make_pairing_mask(dataset.n_samples(), paired_fraction, dataset.n_views(), mask_seed)?;
    let result = trainer::train(dataset, &mask, config)?;
    let s = spectral::affinity_from_z(&result.z);
    let pred = spectral::spectral_cluster(&s, config.hp.clusters, config.seed)?;
    let acc = metrics::acc(labels, &pred.labels)?;
    let nmi = metrics::nmi(labels, &pred.labels)?;
    Ok((acc, nmi, result.weights.0))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let dataset = config.load_dataset()?;
    let labels = dataset
        .labels
        .clone()
        .ok_or_else(|| Error::InvalidDataset("the experiment needs ground-truth labels".into()))?;

    let mut fractions = config.paired_fractions.clone();
    fractions.sort_by(f64::total_cmp);
    let tasks: Vec<(f64, usize)> =
        fractions.iter().flat_map(|&f| (0..config.repeats).map(move |r| (f, r))).collect();

    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(tasks.len()));
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(fraction, repeat)) = tasks.get(i) else { break };
        let train = config.train_config(repeat);
        let seed = config.base_seed + repeat as u64;
        let start = Instant::now();
        let outcome = match run_single(&dataset, &labels, fraction, &train, seed) {
            Ok((acc, nmi, weights)) => RunOutcome::Ok { acc, nmi, weights },
            Err(e) => RunOutcome::Failed { reason: e.to_string() },
        };
        let rec = RunRecord {
            paired_fraction: fraction,
            repeat,
            seed,
            outcome,
            wall_time_secs: start.elapsed().as_secs_f64(),
        };
        done.lock().expect("result lock").push((i, rec));
    };
    std::thread::scope(|scope| {
        for _ in 1..config.jobs.min(tasks.len()) {
            scope.spawn(worker);
        }
        worker();
    });
    let mut runs = done.into_inner().expect("result lock");
    runs.sort_by_key(|(i, _)| *i);
    let runs: Vec<RunRecord> = runs.into_iter().map(|(_, r)| r).collect();

    let cells = fractions
        .iter()
        .map(|&f| {
            let cell: Vec<&RunRecord> = runs.iter().filter(|r| r.paired_fraction == f).collect();
            summarize(f, &cell)
        })
        .collect();
    Ok(ExperimentReport { method: METHOD_NAME.into(), cells, runs, metadata: experiment_metadata(config, &dataset) })
}

fn summarize(fraction: f64, runs: &[&RunRecord]) -> CellSummary {
    let mut accs = Vec::new();
    let mut nmis = Vec::new();
    let mut failure = None;
    for r in runs {
        match &r.outcome {
            RunOutcome::Ok { acc, nmi, .. } => {
                accs.push(*acc);
                nmis.push(*nmi);
            }
            RunOutcome::Failed { reason } => {
                failure.get_or_insert_with(|| format!("repeat {}: {reason}", r.repeat));
            }
        }
    }
    let ((acc_mean, acc_std), (nmi_mean, nmi_std)) =
        if failure.is_some() { ((f64::NAN, f64::NAN), (f64::NAN, f64::NAN)) } else { (mean_std(&accs), mean_std(&nmis)) };
    CellSummary { paired_fraction: fraction, repeats: runs.len(), acc_mean, acc_std, nmi_mean, nmi_std, failure }
}

fn experiment_metadata(config: &ExperimentConfig, dataset: &MultiViewDataset) -> BTreeMap<String, String> {
    let probe = PairingMask::complete(dataset.n_samples(), dataset.n_views());
    let mut m = trainer::run_metadata(&config.train_config(0), &probe);
    for k in ["paired_fraction", "missing_rate", "paired_count", "unpaired_count", "mask_seed", "seed"] {
        m.remove(k);
    }
    let fractions: Vec<String> = config.paired_fractions.iter().map(|f| f.to_string()).collect();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("method", METHOD_NAME.into());
    put("source", config.source.describe());
    put("samples", dataset.n_samples().to_string());
    put("view_dims", format!("{:?}", dataset.dims()));
    put("normalize", format!("{:?}", config.normalize).to_lowercase());
    put("paired_fractions", fractions.join(" "));
    put("fraction_semantics", "paired_fraction = share of fully observed samples; missing_rate = 1 - paired_fraction".into());
    put("paired_count_rule", "floor(fraction * n + 0.5)".into());
    put("mask_rule", "each unpaired sample drops exactly one view, chosen uniformly".into());
    put("repeats", config.repeats.to_string());
    put("base_seed", config.base_seed.to_string());
    put("seed_rule", "mask, init and k-means seeds = base_seed + repeat".into());
    put("std", "population".into());
    put("affinity", "S = (|Z| + |Z|^T) / 2".into());
    put("spectral", "normalized Laplacian, row-normalized embedding, k-means++ 50 restarts".into());
    put("acc_mapping", "Hungarian on zero-padded square contingency".into());
    put("nmi", "I / max(H_y, H_l), natural log, 0 when degenerate".into());
    m
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

const CSV_HEADER: [&str; 11] =
    ["kind", "paired_fraction", "missing_rate", "repeat", "seed", "acc", "acc_std", "nmi", "nmi_std", "weights", "status"];

fn to_csv(report: &ExperimentReport) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "# method: {}", report.method)?;
    for (k, v) in &report.metadata {
        writeln!(out, "# {k}: {}", v.replace('\n', " "))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in &report.cells {
        let status = c.failure.as_ref().map_or_else(|| "ok".to_string(), |r| format!("FAILED({r})"));
        w.write_record([
            "summary".to_string(),
            sci(c.paired_fraction),
            sci(1.0 - c.paired_fraction),
            c.repeats.to_string(),
            String::new(),
            sci(c.acc_mean),
            sci(c.acc_std),
            sci(c.nmi_mean),
            sci(c.nmi_std),
            String::new(),
            status,
        ])?;
    }
    for r in &report.runs {
        let (acc, nmi, weights, status) = match &r.outcome {
            RunOutcome::Ok { acc, nmi, weights } => {
                (sci(*acc), sci(*nmi), weights.iter().map(|&w| sci(w)).collect::<Vec<_>>().join(";"), "ok".to_string())
            }
            RunOutcome::Failed { reason } => (String::new(), String::new(), String::new(), format!("FAILED({reason})")),
        };
        w.write_record([
            "run".to_string(),
            sci(r.paired_fraction),
            sci(1.0 - r.paired_fraction),
            r.repeat.to_string(),
            r.seed.to_string(),
            acc,
            String::new(),
            nmi,
            String::new(),
            weights,
            status,
        ])?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn cell_text(mean: f64, std: f64, failure: &Option<String>) -> String {
    match failure {
        Some(reason) => format!("FAILED({})", reason.replace('|', "/").replace('\n', " ")),
        None => format!("{mean:.4}±{std:.4}"),
    }
}

fn to_markdown(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let header: Vec<String> = report.cells.iter().map(|c| format!("{}", c.paired_fraction)).collect();
    for (title, pick) in [
        ("ACC", (|c: &CellSummary| (c.acc_mean, c.acc_std)) as fn(&CellSummary) -> (f64, f64)),
        ("NMI", |c: &CellSummary| (c.nmi_mean, c.nmi_std)),
    ] {
        s.push_str(&format!("### {title}\n\n"));
        s.push_str(&format!("| Method \\ Paired fraction | {} |\n", header.join(" | ")));
        s.push_str(&format!("|---|{}\n", "---|".repeat(header.len())));
        let cells: Vec<String> = report
            .cells
            .iter()
            .map(|c| {
                let (m, sd) = pick(c);
                cell_text(m, sd, &c.failure)
            })
            .collect();
        s.push_str(&format!("| {} | {} |\n\n", report.method, cells.join(" | ")));
    }
    s.push_str("### Metadata\n\n");
    for (k, v) in &report.metadata {
        s.push_str(&format!("- {k}: {v}\n"));
    }
    s
}

/// Renders `report` in `format`.
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Csv => to_csv(report),
        ReportFormat::Markdown => Ok(to_markdown(report).into_bytes()),
    }
}

/// Writes `report` to `path`, creating parent directories.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, render_report(report, format)?)?;
    Ok(())
}

fn parse_f64(s: &str, row: usize) -> Result<f64> {
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| Error::Parse { path: PathBuf::from("<report>"), row, message: format!("bad number {s:?}") })
}

fn strip_failed(status: &str) -> Option<String> {
    status.strip_prefix("FAILED(").and_then(|r| r.strip_suffix(')')).map(str::to_string)
}

/// Parses a CSV written by [`emit_report`].
pub fn read_report_csv(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path)?;
    let mut method = METHOD_NAME.to_string();
    let mut metadata = BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line[1..].trim_start().split_once(": ") {
            if k == "method" {
                method = v.to_string();
            } else {
                metadata.insert(k.to_string(), v.to_string());
            }
        }
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut cells = Vec::new();
    let mut runs = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let fraction = parse_f64(get(1), row)?;
        let status = get(10);
        match get(0) {
            "summary" => cells.push(CellSummary {
                paired_fraction: fraction,
                repeats: get(3).parse().unwrap_or(0),
                acc_mean: parse_f64(get(5), row)?,
                acc_std: parse_f64(get(6), row)?,
                nmi_mean: parse_f64(get(7), row)?,
                nmi_std: parse_f64(get(8), row)?,
                failure: strip_failed(status),
            }),
            "run" => {
                let outcome = match strip_failed(status) {
                    Some(reason) => RunOutcome::Failed { reason },
                    None => RunOutcome::Ok {
                        acc: parse_f64(get(5), row)?,
                        nmi: parse_f64(get(7), row)?,
                        weights: get(9)
                            .split(';')
                            .filter(|s| !s.is_empty())
                            .map(|s| parse_f64(s, row))
                            .collect::<Result<_>>()?,
                    },
                };
                runs.push(RunRecord {
                    paired_fraction: fraction,
                    repeat: get(3).parse().unwrap_or(0),
                    seed: get(4).parse().unwrap_or(0),
                    outcome,
                    wall_time_secs: 0.0,
                });
            }
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    message: format!("unknown row kind {other:?}"),
                })
            }
        }
    }
    Ok(ExperimentReport { method, cells, runs, metadata })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(f: f64, acc: (f64, f64), nmi: (f64, f64)) -> CellSummary {
        CellSummary {
            paired_fraction: f,
            repeats: 1,
            acc_mean: acc.0,
            acc_std: acc.1,
            nmi_mean: nmi.0,
            nmi_std: nmi.1,
            failure: None,
        }
    }

    fn report(cells: Vec<CellSummary>) -> ExperimentReport {
        ExperimentReport { method: METHOD_NAME.into(), cells, runs: vec![], metadata: BTreeMap::new() }
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[0.7]).1, 0.0);
    }

    #[test]
    fn single_cell_markdown() {
        let md = to_markdown(&report(vec![cell(0.9, (0.95, 0.0), (0.9, 0.0))]));
        assert!(md.contains("| 0.9 |"));
        assert!(md.contains(&format!("| {METHOD_NAME} | 0.9500±0.0000 |")));
        assert!(md.contains(&format!("| {METHOD_NAME} | 0.9000±0.0000 |")));
    }

    #[test]
    fn failed_cell_renders_reason() {
        let mut c = cell(0.1, (0.0, 0.0), (0.0, 0.0));
        c.failure = Some("repeat 0: diverged".into());
        let md = to_markdown(&report(vec![c]));
        assert!(md.contains("FAILED(repeat 0: diverged)"));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut r = report(vec![cell(0.3, (0.1 + 0.2, 1.0 / 3.0), (0.987654321, 0.0))]);
        r.metadata.insert("seed_rule".into(), "base_seed + repeat".into());
        r.runs.push(RunRecord {
            paired_fraction: 0.3,
            repeat: 0,
            seed: 4,
            outcome: RunOutcome::Ok { acc: 0.1 + 0.2, nmi: 0.987654321, weights: vec![0.25, 0.75] },
            wall_time_secs: 0.0,
        });
        emit_report(&r, ReportFormat::Csv, &path).unwrap();
        let back = read_report_csv(&path).unwrap();
        assert_eq!(back, r);
        assert_eq!(to_markdown(&back), to_markdown(&r));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ExperimentConfig { paired_fractions: vec![0.0], ..Default::default() };
        assert!(c.validate().is_err());
        c.paired_fractions = vec![0.5, 0.5];
        assert!(c.validate().is_err());
        c.paired_fractions = vec![0.5];
        c.repeats = 0;
        assert!(c.validate().is_err());
        c.repeats = 1;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn config_json_defaults() {
        let c = ExperimentConfig::from_json(r#"{"repeats": 2, "source": {"synthetic": {"n": 30}}}"#).unwrap();
        assert_eq!(c.repeats, 2);
        assert_eq!(c.paired_fractions, DEFAULT_FRACTIONS.to_vec());
        assert_eq!(c.source, DatasetSource::Synthetic(SyntheticSpec { n: 30, ..Default::default() }));
    }
}
