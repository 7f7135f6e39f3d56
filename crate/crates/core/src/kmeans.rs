//! Seeded k-means++ with restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when inertia improves by less than this.
    pub tolerance: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { restarts: 50, max_iter: 300, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration of the winning restart.
    pub history: Vec<f64>,
    pub restart: usize,
}

/// Best of `config.restarts` k-means++ runs; lowest inertia wins and ties go
/// to the earlier restart. Restart `r` draws from a generator seeded with
/// `seed + r`.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, config: &KMeansConfig) -> Result<KMeansResult> {
    if k == 0 || k > points.rows {
        return Err(Error::InvalidArgument(format!("cannot form {k} clusters from {} points", points.rows)));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..config.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let mut run = lloyd(points, plus_plus(points, k, &mut rng), config);
        run.restart = r;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.rows;
    let mut centroids = Matrix::zeros(k, points.cols);
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| squared_distance(points.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random_range(0.0..total);
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with chosen centres.
            c.min(n - 1)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(points.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows {
        let d = squared_distance(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(points: &Matrix, mut centroids: Matrix, config: &KMeansConfig) -> KMeansResult {
    let (n, k) = (points.rows, centroids.rows);
    let mut labels = vec![0; n];
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    for _ in 0..config.max_iter {
        let mut inertia = 0.0;
        let mut dist = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(points.row(i), &centroids);
            labels[i] = c;
            dist[i] = d;
            inertia += d;
        }
        history.push(inertia);
        if prev - inertia < config.tolerance {
            break;
        }
        prev = inertia;
        let mut sums = Matrix::zeros(k, points.cols);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, &x) in sums.row_mut(labels[i]).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let cnt = counts[c] as f64;
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / cnt;
                }
            } else {
                // Empty cluster takes the point farthest from its centre.
                let far = (0..n).max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a))).unwrap_or(0);
                centroids.row_mut(c).copy_from_slice(points.row(far));
                dist[far] = 0.0;
            }
        }
    }
    let inertia = (0..n).map(|i| nearest(points.row(i), &centroids).1).sum::<f64>();
    let final_labels: Vec<usize> = (0..n).map(|i| nearest(points.row(i), &centroids).0).collect();
    if history.last().is_none_or(|&h| inertia < h) {
        history.push(inertia);
    }
    KMeansResult { labels: final_labels, centroids, inertia, history, restart: 0 }
}
