//! Affinity from self-expression coefficients and normalized spectral
//! clustering.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::linalg::{eigensolve_symmetric, EigenPairs, Matrix};

/// Degree floor for rows with no affinity.
pub const DEGREE_EPS: f64 = 1e-12;

/// Symmetric, entrywise non-negative affinity with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(pub Matrix);

impl AffinityMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.rows
    }
}

/// `S = ½(|Z| + |Z|ᵀ)`. Each pair is computed once and mirrored, so the
/// result is bitwise symmetric.
pub fn affinity_from_z(z: &Matrix) -> AffinityMatrix {
    assert_eq!(z.rows, z.cols, "Z must be square");
    let n = z.rows;
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (z[(i, j)].abs() + z[(j, i)].abs());
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    AffinityMatrix(s)
}

/// `L = I − D^{-1/2} S D^{-1/2}`; zero-degree rows use [`DEGREE_EPS`].
pub fn normalized_laplacian(s: &AffinityMatrix) -> Matrix {
    let m = s.matrix();
    let n = m.rows;
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / m.row(i).iter().sum::<f64>().max(DEGREE_EPS).sqrt()).collect();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if i == j { 1.0 } else { 0.0 } - inv_sqrt[i] * m[(i, j)] * inv_sqrt[j];
            l[(i, j)] = v;
            l[(j, i)] = v;
        }
    }
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabels {
    pub labels: Vec<usize>,
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct SpectralOutput {
    pub labels: ClusterLabels,
    pub eigen: EigenPairs,
    /// Row-normalized spectral embedding, `n x K`.
    pub embedding: Matrix,
    pub inertia: f64,
    pub kmeans_history: Vec<f64>,
}

impl SpectralOutput {
    /// Eigenvalues then the embedding, one CSV each.
    pub fn write_diagnostics(&self, eigenvalues: &Path, embedding: &Path) -> Result<()> {
        let mut f = std::fs::File::create(eigenvalues)?;
        writeln!(f, "index,eigenvalue")?;
        for (i, v) in self.eigen.values.iter().enumerate() {
            writeln!(f, "{i},{v:?}")?;
        }
        let mut f = std::fs::File::create(embedding)?;
        for i in 0..self.embedding.rows {
            let row: Vec<String> = self.embedding.row(i).iter().map(|x| format!("{x:?}")).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn spectral_cluster(s: &AffinityMatrix, k: usize, seed: u64) -> Result<ClusterLabels> {
    Ok(spectral_cluster_detailed(s, k, seed, &KMeansConfig::default())?.labels)
}

/// Ng–Jordan–Weiss pipeline: the `k` smallest eigenvectors of the normalized
/// Laplacian, rows scaled to unit length, then k-means++. Rows with zero
/// degree are left out of k-means and attached to the nearest centroid.
pub fn spectral_cluster_detailed(
    s: &AffinityMatrix,
    k: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<SpectralOutput> {
    let n = s.n();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 clusters, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("{k} clusters requested for {n} samples")));
    }
    let lap = normalized_laplacian(s);
    let eigen = eigensolve_symmetric(&lap, k)?;
    let mut embedding = eigen.vectors.clone();
    for i in 0..n {
        let norm = embedding.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            embedding.row_mut(i).iter_mut().for_each(|x| *x /= norm);
        }
    }
    let connected: Vec<usize> = (0..n).filter(|&i| s.matrix().row(i).iter().sum::<f64>() > 0.0).collect();
    let fit_rows: Vec<usize> = if connected.len() >= k { connected } else { (0..n).collect() };
    let fitted = kmeans(&embedding.select_rows(&fit_rows), k, seed, config)?;
    let mut labels = vec![0; n];
    for i in 0..n {
        let row = embedding.row(i);
        let mut best = (0, f64::INFINITY);
        for c in 0..k {
            let d = crate::linalg::squared_distance(row, fitted.centroids.row(c));
            if d < best.1 {
                best = (c, d);
            }
        }
        labels[i] = best.0;
    }
    for (pos, &i) in fit_rows.iter().enumerate() {
        labels[i] = fitted.labels[pos];
    }
    Ok(SpectralOutput {
        labels: ClusterLabels { labels, k },
        eigen,
        embedding,
        inertia: fitted.inertia,
        kmeans_history: fitted.history,
    })
}
