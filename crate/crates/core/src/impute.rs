//! Cross-view KNN imputation in latent space.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{PairingMask, ViewMatrix};
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    /// Inverse-distance weights.
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedRow {
    pub sample: usize,
    pub missing_view: usize,
    pub neighbors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationResult {
    pub completed_views: Vec<ViewMatrix>,
    pub imputed: Vec<ImputedRow>,
    pub k: usize,
}

impl ImputationResult {
    /// CSV audit trail: `sample_id,missing_view,neighbor_ids...`.
    pub fn write_neighbors_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path)?;
        writeln!(out, "sample_id,missing_view,neighbor_ids")?;
        for row in &self.imputed {
            let ids: Vec<String> = row.neighbors.iter().map(usize::to_string).collect();
            writeln!(out, "{},{},{}", row.sample, row.missing_view, ids.join(" "))?;
        }
        Ok(())
    }
}

/// The `k` paired samples closest to `sample` in the latent spaces of
/// `views`, ordered by (distance, index).
pub fn nearest_paired(
    sample: usize,
    views: &[usize],
    embeddings: &[Matrix],
    paired: &[usize],
    k: usize,
) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = paired
        .iter()
        .map(|&j| {
            let d: f64 = views.iter().map(|&o| squared_distance(embeddings[o].row(sample), embeddings[o].row(j))).sum();
            (j, d)
        })
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Fills every missing view of every unpaired sample from its `k` nearest
/// fully observed samples.
///
/// Distance is Euclidean in the latent space of the sample's observed views
/// (summed squared distance when more than one view is observed). Observed
/// rows are copied untouched.
pub fn knn_impute(
    views: &[ViewMatrix],
    mask: &PairingMask,
    embeddings: &[Matrix],
    k: usize,
    aggregation: Aggregation,
) -> Result<ImputationResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let n = mask.n_samples();
    let n_views = views.len();
    if mask.n_views() != n_views || embeddings.len() != n_views {
        return Err(Error::Shape(format!(
            "{n_views} views, {} mask views, {} embeddings",
            mask.n_views(),
            embeddings.len()
        )));
    }
    for (v, (view, emb)) in views.iter().zip(embeddings).enumerate() {
        if view.n_samples() != n || emb.rows != n {
            return Err(Error::Shape(format!("view {v} or its embedding does not have {n} rows")));
        }
    }
    let paired = mask.paired_indices();
    if paired.len() < k {
        return Err(Error::InvalidArgument(format!("only {} paired samples for k = {k}", paired.len())));
    }
    let mut completed: Vec<ViewMatrix> = views.to_vec();
    let mut imputed = Vec::new();
    for i in 0..n {
        let observed: Vec<usize> = (0..n_views).filter(|&v| mask.is_observed(i, v)).collect();
        if observed.len() == n_views {
            continue;
        }
        if observed.is_empty() {
            return Err(Error::InvalidDataset(format!("sample {i} has no observed view")));
        }
        let neighbors = nearest_paired(i, &observed, embeddings, &paired, k);
        let weights: Vec<f64> = match aggregation {
            Aggregation::Mean => vec![1.0; neighbors.len()],
            Aggregation::Distance => neighbors.iter().map(|&(_, d2)| 1.0 / (d2.sqrt() + 1e-12)).collect(),
        };
        let total: f64 = weights.iter().sum();
        for m in (0..n_views).filter(|v| !observed.contains(v)) {
            let src = &views[m].values;
            let mut row = vec![0.0; src.cols];
            for (&(j, _), &w) in neighbors.iter().zip(&weights) {
                for (o, &x) in row.iter_mut().zip(src.row(j)) {
                    *o += w * x;
                }
            }
            row.iter_mut().for_each(|x| *x /= total);
            completed[m].values.row_mut(i).copy_from_slice(&row);
            imputed.push(ImputedRow { sample: i, missing_view: m, neighbors: neighbors.iter().map(|p| p.0).collect() });
        }
    }
    Ok(ImputationResult { completed_views: completed, imputed, k })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(id: usize, rows: &[&[f64]]) -> ViewMatrix {
        ViewMatrix::new(id, Matrix::from_rows(rows)).unwrap()
    }

    fn mask(rows: &[[bool; 2]]) -> PairingMask {
        PairingMask { observed: rows.iter().map(|r| r.to_vec()).collect(), paired_fraction: 0.5, seed: 0 }
    }

    #[test]
    fn zero_distance_duplicate_is_copied() {
        let v1 = view(0, &[&[1.0, 2.0], &[5.0, 5.0], &[1.0, 2.0]]);
        let v2 = view(1, &[&[0.0], &[9.0], &[7.5]]);
        let m = mask(&[[true, false], [true, true], [true, true]]);
        let emb = vec![v1.values.clone(), v2.values.clone()];
        let out = knn_impute(&[v1, v2], &m, &emb, 1, Aggregation::Mean).unwrap();
        assert_eq!(out.completed_views[1].values[(0, 0)], 7.5);
        assert_eq!(out.imputed[0].neighbors, vec![2]);
    }

    #[test]
    fn full_k_gives_paired_mean() {
        let v1 = view(0, &[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let v2 = view(1, &[&[10.0, 1.0], &[20.0, 2.0], &[0.0, 0.0], &[30.0, 6.0]]);
        let m = mask(&[[true, true], [true, true], [true, false], [true, true]]);
        let emb = vec![v1.values.clone(), v2.values.clone()];
        let out = knn_impute(&[v1, v2], &m, &emb, 3, Aggregation::Mean).unwrap();
        assert_eq!(out.completed_views[1].values.row(2), &[20.0, 3.0]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let v1 = view(0, &[&[0.0], &[1.0], &[-1.0], &[0.0]]);
        let v2 = view(1, &[&[0.0], &[4.0], &[8.0], &[0.0]]);
        let m = mask(&[[true, true], [true, true], [true, true], [true, false]]);
        let emb = vec![v1.values.clone(), v2.values.clone()];
        let out = knn_impute(&[v1, v2], &m, &emb, 2, Aggregation::Mean).unwrap();
        assert_eq!(out.imputed[0].neighbors, vec![0, 1]);
    }

    #[test]
    fn too_few_paired_samples() {
        let v1 = view(0, &[&[0.0], &[1.0]]);
        let v2 = view(1, &[&[0.0], &[1.0]]);
        let m = mask(&[[true, true], [false, true]]);
        let emb = vec![v1.values.clone(), v2.values.clone()];
        assert!(knn_impute(&[v1.clone(), v2.clone()], &m, &emb, 2, Aggregation::Mean).is_err());
        assert!(knn_impute(&[v1, v2], &m, &emb, 0, Aggregation::Mean).is_err());
    }

    #[test]
    fn distance_weighting_favours_closer_neighbor() {
        let v1 = view(0, &[&[0.0], &[1.0], &[3.0]]);
        let v2 = view(1, &[&[0.0], &[10.0], &[0.0]]);
        let m = mask(&[[true, false], [true, true], [true, true]]);
        let emb = vec![v1.values.clone(), v2.values.clone()];
        let out = knn_impute(&[v1, v2], &m, &emb, 2, Aggregation::Distance).unwrap();
        // weights 1/1 and 1/3
        let expected = (10.0 * 1.0) / (1.0 + 1.0 / 3.0);
        assert!((out.completed_views[1].values[(0, 0)] - expected).abs() < 1e-9);
    }
}
