//! Multi-view datasets: loading, saving, synthesis, normalization and
//! seeded pairing masks.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Feature matrix of one view; rows are samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewMatrix {
    pub view_id: usize,
    pub values: Matrix,
}

impl ViewMatrix {
    pub fn new(view_id: usize, values: Matrix) -> Result<Self> {
        if values.rows == 0 || values.cols == 0 {
            return Err(Error::InvalidDataset(format!(
                "view {view_id} has shape {}x{}",
                values.rows, values.cols
            )));
        }
        if let Some(pos) = values.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "view {view_id} has a non-finite entry at row {}",
                pos / values.cols
            )));
        }
        Ok(Self { view_id, values })
    }

    pub fn n_samples(&self) -> usize {
        self.values.rows
    }

    pub fn dim(&self) -> usize {
        self.values.cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewDataset {
    pub views: Vec<ViewMatrix>,
    pub labels: Option<Vec<usize>>,
}

impl MultiViewDataset {
    /// Validates that every view has the same number of rows and that labels,
    /// when present, have one entry per sample.
    ///
    /// A single view is accepted here so the trainer can run its degenerate
    /// one-view configuration; file loading and synthesis require two or more.
    pub fn new(views: Vec<ViewMatrix>, labels: Option<Vec<usize>>) -> Result<Self> {
        let Some(first) = views.first() else {
            return Err(Error::InvalidDataset("no views".into()));
        };
        let n = first.n_samples();
        for v in &views {
            if v.n_samples() != n {
                return Err(Error::InvalidDataset(format!(
                    "view {} has {} rows, expected {n}",
                    v.view_id,
                    v.n_samples()
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidDataset(format!("{} labels for {n} samples", l.len())));
            }
        }
        Ok(Self { views, labels })
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].n_samples()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(ViewMatrix::dim).collect()
    }

    /// Number of distinct classes implied by the labels (max label + 1).
    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().and_then(|l| l.iter().max().map(|m| m + 1))
    }

    pub fn normalized(&self, method: NormalizeMethod) -> MultiViewDataset {
        MultiViewDataset {
            views: self.views.iter().map(|v| normalize(v, method)).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Per-sample, per-view availability. `observed[i][v]` is true when sample `i`
/// has view `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingMask {
    pub observed: Vec<Vec<bool>>,
    pub paired_fraction: f64,
    pub seed: u64,
}

impl PairingMask {
    /// Every sample observed in every view.
    pub fn complete(n: usize, n_views: usize) -> Self {
        Self { observed: vec![vec![true; n_views]; n], paired_fraction: 1.0, seed: 0 }
    }

    pub fn n_samples(&self) -> usize {
        self.observed.len()
    }

    pub fn n_views(&self) -> usize {
        self.observed.first().map_or(0, Vec::len)
    }

    pub fn is_observed(&self, sample: usize, view: usize) -> bool {
        self.observed[sample][view]
    }

    pub fn is_paired(&self, sample: usize) -> bool {
        self.observed[sample].iter().all(|&o| o)
    }

    /// Fully observed samples (p of them).
    pub fn paired_indices(&self) -> Vec<usize> {
        (0..self.n_samples()).filter(|&i| self.is_paired(i)).collect()
    }

    /// Samples missing at least one view (u of them).
    pub fn unpaired_indices(&self) -> Vec<usize> {
        (0..self.n_samples()).filter(|&i| !self.is_paired(i)).collect()
    }

    pub fn paired_count(&self) -> usize {
        (0..self.n_samples()).filter(|&i| self.is_paired(i)).count()
    }

    pub fn unpaired_count(&self) -> usize {
        self.n_samples() - self.paired_count()
    }

    pub fn observed_in(&self, view: usize) -> Vec<usize> {
        (0..self.n_samples()).filter(|&i| self.observed[i][view]).collect()
    }

    pub fn co_observed(&self, a: usize, b: usize) -> Vec<usize> {
        (0..self.n_samples()).filter(|&i| self.observed[i][a] && self.observed[i][b]).collect()
    }

    fn validate(&self) -> Result<()> {
        let v = self.n_views();
        for (i, row) in self.observed.iter().enumerate() {
            if row.len() != v {
                return Err(Error::InvalidDataset(format!("mask row {i} has {} views, expected {v}", row.len())));
            }
            if !row.iter().any(|&o| o) {
                return Err(Error::InvalidDataset(format!("mask row {i} has no observed view")));
            }
        }
        Ok(())
    }

    pub fn check_against(&self, dataset: &MultiViewDataset) -> Result<()> {
        self.validate()?;
        if self.n_samples() != dataset.n_samples() || self.n_views() != dataset.n_views() {
            return Err(Error::Shape(format!(
                "mask is {}x{}, dataset is {}x{}",
                self.n_samples(),
                self.n_views(),
                dataset.n_samples(),
                dataset.n_views()
            )));
        }
        Ok(())
    }
}

/// Number of fully observed rows for a paired fraction, rounding halves up.
pub fn paired_count_for(n: usize, paired_fraction: f64) -> usize {
    ((paired_fraction * n as f64) + 0.5).floor() as usize
}

/// Seeded mask with `round(paired_fraction * n)` fully observed rows. Every
/// other row loses exactly one view, picked uniformly.
pub fn make_pairing_mask(n: usize, paired_fraction: f64, n_views: usize, seed: u64) -> Result<PairingMask> {
    if !(paired_fraction > 0.0 && paired_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("paired fraction {paired_fraction} is outside (0, 1]")));
    }
    if n_views < 2 {
        return Err(Error::InvalidArgument(format!("pairing masks need at least 2 views, got {n_views}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let paired = paired_count_for(n, paired_fraction).min(n);
    let mut observed = vec![vec![true; n_views]; n];
    for &i in &order[paired..] {
        let drop = rng.random_range(0..n_views);
        observed[i][drop] = false;
    }
    Ok(PairingMask { observed, paired_fraction, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormalizeMethod {
    #[default]
    #[serde(alias = "min-max")]
    MinMax,
    #[serde(alias = "z-score")]
    ZScore,
    None,
}

impl std::str::FromStr for NormalizeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" | "min-max" => Ok(Self::MinMax),
            "zscore" | "z-score" => Ok(Self::ZScore),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidArgument(format!("unknown normalization '{other}'"))),
        }
    }
}

/// Column-wise normalization. Constant columns map to zero under both methods.
pub fn normalize(view: &ViewMatrix, method: NormalizeMethod) -> ViewMatrix {
    let m = &view.values;
    let mut out = m.clone();
    if method == NormalizeMethod::None {
        return view.clone();
    }
    let n = m.rows as f64;
    for j in 0..m.cols {
        let col = m.column(j);
        match method {
            NormalizeMethod::MinMax => {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let range = hi - lo;
                for (i, x) in col.iter().enumerate() {
                    out[(i, j)] = if range > 0.0 { (x - lo) / range } else { 0.0 };
                }
            }
            NormalizeMethod::ZScore => {
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                let sd = var.sqrt();
                for (i, x) in col.iter().enumerate() {
                    out[(i, j)] = if sd > 0.0 { (x - mean) / sd } else { 0.0 };
                }
            }
            NormalizeMethod::None => unreachable!(),
        }
    }
    ViewMatrix { view_id: view.view_id, values: out }
}

/// JSON manifest naming one headerless CSV per view plus an optional label
/// file. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub views: Vec<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub normalize: NormalizeMethod,
    /// Declared class count; labels at or above it are rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
}

pub fn load_dataset(manifest_path: &Path) -> Result<MultiViewDataset> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    if manifest.views.len() < 2 {
        return Err(Error::InvalidDataset(format!("manifest lists {} views; need at least 2", manifest.views.len())));
    }
    let mut views = Vec::with_capacity(manifest.views.len());
    let mut expected_rows = None;
    for (v, rel) in manifest.views.iter().enumerate() {
        let path = base.join(rel);
        let values = read_view_csv(&path)?;
        match expected_rows {
            None => expected_rows = Some(values.rows),
            Some(expected) if expected != values.rows => {
                return Err(Error::RowCountMismatch { path, expected, found: values.rows });
            }
            _ => {}
        }
        let view = ViewMatrix::new(v, values)?;
        views.push(normalize(&view, manifest.normalize));
    }
    let labels = match &manifest.labels {
        Some(rel) => {
            let path = base.join(rel);
            let labels = read_labels(&path, manifest.clusters)?;
            let expected = expected_rows.unwrap_or(0);
            if labels.len() != expected {
                return Err(Error::RowCountMismatch { path, expected, found: labels.len() });
            }
            Some(labels)
        }
        None => None,
    };
    MultiViewDataset::new(views, labels)
}

fn read_view_csv(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse { path: path.to_owned(), row, message: e.to_string() })?;
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    row,
                    message: format!("{} columns, expected {c}", record.len()),
                })
            }
            _ => {}
        }
        for cell in record.iter() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_owned(),
                row,
                message: format!("non-numeric cell '{cell}'"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse { path: path.to_owned(), row, message: format!("non-finite cell '{cell}'") });
            }
            data.push(value);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse { path: path.to_owned(), row: 0, message: "empty view file".into() })?;
    Ok(Matrix::from_vec(rows, cols, data))
}

/// One non-negative integer label per line; blank lines are skipped.
pub fn read_labels(path: &Path, clusters: Option<usize>) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let label: i64 = line.parse().map_err(|_| Error::Parse {
            path: path.to_owned(),
            row,
            message: format!("non-integer label '{line}'"),
        })?;
        let in_range = label >= 0 && clusters.is_none_or(|k| (label as usize) < k);
        if !in_range {
            return Err(Error::LabelOutOfRange { path: path.to_owned(), row, label });
        }
        labels.push(label as usize);
    }
    Ok(labels)
}

/// Writes `view{v}.csv`, optional `labels.csv` and `manifest.json` into `dir`.
/// Values are written in shortest round-trip form, so reloading with
/// normalization `none` reproduces the dataset bit for bit.
pub fn save_dataset(dataset: &MultiViewDataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut view_paths = Vec::new();
    for (v, view) in dataset.views.iter().enumerate() {
        let name = PathBuf::from(format!("view{v}.csv"));
        let mut out = String::new();
        for i in 0..view.n_samples() {
            let row: Vec<String> = view.values.row(i).iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        fs::write(dir.join(&name), out)?;
        view_paths.push(name);
    }
    let labels = match &dataset.labels {
        Some(l) => {
            let name = PathBuf::from("labels.csv");
            let body: String = l.iter().map(|x| format!("{x}\n")).collect();
            fs::write(dir.join(&name), body)?;
            Some(name)
        }
        None => None,
    };
    let manifest = Manifest { views: view_paths, labels, normalize: NormalizeMethod::None, clusters: None };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Gaussian-mixture views sharing one component assignment. Cluster means in
/// each view are drawn so that every pair sits at least `separation` apart
/// (unit-variance noise), and labels are balanced to within one sample.
pub fn generate_synthetic(
    k_clusters: usize,
    n: usize,
    dims: &[usize],
    separation: f64,
    seed: u64,
) -> Result<MultiViewDataset> {
    if k_clusters < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 clusters, got {k_clusters}")));
    }
    if n < k_clusters {
        return Err(Error::InvalidArgument(format!("{n} samples cannot cover {k_clusters} clusters")));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::InvalidArgument(format!("separation must be positive, got {separation}")));
    }
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("need at least 2 views with positive dims, got {dims:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % k_clusters).collect();
    labels.shuffle(&mut rng);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut views = Vec::with_capacity(dims.len());
    for (v, &d) in dims.iter().enumerate() {
        let means = separated_means(k_clusters, d, separation, &mut rng);
        let mut m = Matrix::zeros(n, d);
        for (i, &c) in labels.iter().enumerate() {
            for j in 0..d {
                m[(i, j)] = means[c][j] + noise.sample(&mut rng);
            }
        }
        views.push(ViewMatrix::new(v, m)?);
    }
    MultiViewDataset::new(views, Some(labels))
}

fn separated_means(k: usize, d: usize, separation: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    // Box side chosen so k points fit at the requested spacing; grows if
    // rejection keeps failing.
    let mut side = separation * (k as f64).powf(1.0 / d as f64) * 2.0;
    loop {
        for _ in 0..200 {
            let means: Vec<Vec<f64>> =
                (0..k).map(|_| (0..d).map(|_| rng.random_range(0.0..side)).collect()).collect();
            let ok = (0..k).all(|a| {
                ((a + 1)..k).all(|b| crate::linalg::squared_distance(&means[a], &means[b]).sqrt() >= separation)
            });
            if ok {
                return means;
            }
        }
        side *= 1.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> ViewMatrix {
        ViewMatrix::new(0, Matrix::from_vec(values.len(), 1, values.to_vec())).unwrap()
    }

    #[test]
    fn minmax_linear_map() {
        let out = normalize(&col(&[0.0, 5.0, 10.0]), NormalizeMethod::MinMax);
        assert_eq!(out.values.data, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        for method in [NormalizeMethod::MinMax, NormalizeMethod::ZScore] {
            let out = normalize(&col(&[3.5, 3.5, 3.5]), method);
            assert_eq!(out.values.data, vec![0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn zscore_mean_zero_sd_one() {
        let out = normalize(&col(&[1.0, 2.0, 3.0]), NormalizeMethod::ZScore);
        let mean = out.values.data.iter().sum::<f64>() / 3.0;
        let sd = (out.values.data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mask_counts() {
        let full = make_pairing_mask(100, 1.0, 2, 0).unwrap();
        assert_eq!(full.paired_count(), 100);
        let half = make_pairing_mask(100, 0.5, 2, 0).unwrap();
        assert_eq!(half.paired_count(), 50);
        for i in half.unpaired_indices() {
            assert_eq!(half.observed[i].iter().filter(|&&o| o).count(), 1);
        }
        for seed in 0..20 {
            let m = make_pairing_mask(10, 0.9, 2, seed).unwrap();
            assert_eq!((m.paired_count(), m.unpaired_count()), (9, 1));
        }
    }

    #[test]
    fn mask_rejects_bad_fraction() {
        assert!(make_pairing_mask(10, 0.0, 2, 0).is_err());
        assert!(make_pairing_mask(10, 1.01, 2, 0).is_err());
        assert!(make_pairing_mask(10, -0.5, 2, 0).is_err());
        assert!(make_pairing_mask(10, 0.5, 1, 0).is_err());
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(paired_count_for(10, 0.25), 3);
        assert_eq!(paired_count_for(10, 0.35), 4);
        assert_eq!(paired_count_for(3, 0.5), 2);
    }

    #[test]
    fn three_view_mask_drops_one_view() {
        let m = make_pairing_mask(40, 0.3, 3, 5).unwrap();
        for i in m.unpaired_indices() {
            assert_eq!(m.observed[i].iter().filter(|&&o| o).count(), 2);
        }
    }

    #[test]
    fn synthetic_shape_and_balance() {
        let ds = generate_synthetic(2, 10, &[3, 2], 10.0, 7).unwrap();
        assert_eq!(ds.n_samples(), 10);
        assert_eq!(ds.dims(), vec![3, 2]);
        let labels = ds.labels.as_ref().unwrap();
        let ones = labels.iter().filter(|&&l| l == 1).count();
        assert!((ones as i64 - 5).abs() <= 1);
        assert_eq!(ds, generate_synthetic(2, 10, &[3, 2], 10.0, 7).unwrap());
    }

    #[test]
    fn synthetic_errors() {
        assert!(generate_synthetic(3, 2, &[2, 2], 1.0, 0).is_err());
        assert!(generate_synthetic(1, 5, &[2, 2], 1.0, 0).is_err());
        assert!(generate_synthetic(2, 5, &[2, 2], 0.0, 0).is_err());
    }

    #[test]
    fn dataset_rejects_mismatched_rows() {
        let a = ViewMatrix::new(0, Matrix::zeros(4, 2)).unwrap();
        let b = ViewMatrix::new(1, Matrix::zeros(5, 2)).unwrap();
        assert!(MultiViewDataset::new(vec![a, b], None).is_err());
    }
}
