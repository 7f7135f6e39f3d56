//! Differentiable loss terms recorded on a [`Graph`].
//!
//! Conventions used throughout:
//! * rows are samples, so self-expression reads `H ≈ Z H`;
//! * `‖Z‖₁,₂` is the sum of column l2 norms;
//! * logarithms clamp their argument at [`LOG_EPS`].

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor};
use crate::dataio::PairingMask;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const LOG_EPS: f64 = 1e-12;

/// Tolerance on row sums when checking probability inputs.
const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Contrastive temperature.
    pub tau: f64,
    /// Sharpness of the view-weight softmax.
    pub alpha: f64,
    pub latent_dim: usize,
    pub clusters: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self { lambda1: 1e-3, lambda2: 1e-3, lambda3: 1e-3, tau: 0.5, alpha: 1.0, latent_dim: 8, clusters: 3 }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        for (name, l) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative, got {l}")));
            }
        }
        if self.latent_dim == 0 {
            return Err(Error::InvalidArgument("latent dimension must be positive".into()));
        }
        if self.clusters < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 clusters, got {}", self.clusters)));
        }
        Ok(())
    }
}

/// Values of every term plus the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub re: f64,
    pub se: f64,
    pub mcl: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `re + λ1·se + λ2·mcl + λ3·(F + R [+ C])`.
    pub fn weighted_total(&self, hp: &Hyperparameters, include_c: bool) -> f64 {
        let cluster = self.f + self.r + if include_c { self.c } else { 0.0 };
        self.re + hp.lambda1 * self.se + hp.lambda2 * self.mcl + hp.lambda3 * cluster
    }
}

/// Graph handles for each term of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub re: Tensor,
    pub se: Tensor,
    pub mcl: Tensor,
    pub f: Tensor,
    pub c: Tensor,
    pub r: Tensor,
}

impl LossTerms {
    /// Records the combined objective on the graph.
    pub fn total(&self, g: &mut Graph, hp: &Hyperparameters, include_c: bool) -> Tensor {
        let se = g.scale(self.se, hp.lambda1);
        let mcl = g.scale(self.mcl, hp.lambda2);
        let mut cluster = g.add(self.f, self.r);
        if include_c {
            cluster = g.add(cluster, self.c);
        }
        let cluster = g.scale(cluster, hp.lambda3);
        let t = g.add(self.re, se);
        let t = g.add(t, mcl);
        g.add(t, cluster)
    }

    pub fn breakdown(&self, g: &Graph, total: Tensor) -> LossBreakdown {
        LossBreakdown {
            re: g.scalar(self.re),
            se: g.scalar(self.se),
            mcl: g.scalar(self.mcl),
            f: g.scalar(self.f),
            c: g.scalar(self.c),
            r: g.scalar(self.r),
            total: g.scalar(total),
        }
    }
}

fn zero(g: &mut Graph) -> Tensor {
    g.constant(Matrix::zeros(1, 1))
}

fn check_nonzero_rows(m: &Matrix) -> Result<()> {
    for i in 0..m.rows {
        if m.row(i).iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroNorm(i));
        }
    }
    Ok(())
}

/// Multi-view contrastive loss under cosine similarity.
///
/// `q` stacks representations from all views; `sample_ids[r]` names the
/// sample row `r` came from. The positives of an anchor are the other rows
/// with the same sample id and its denominator runs over every row except the
/// anchor itself. Returns the mean over anchors of
/// `-(1/|B|) Σ_{j∈B} log softmax_j(sim/τ)`.
pub fn contrastive_loss(g: &mut Graph, q: Tensor, sample_ids: &[usize], tau: f64) -> Result<Tensor> {
    let m = g.shape(q).0;
    if sample_ids.len() != m {
        return Err(Error::Shape(format!("{} sample ids for {m} representations", sample_ids.len())));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    check_nonzero_rows(g.value(q))?;
    let mut positive_weights = Matrix::zeros(m, m);
    let mut denominator = vec![true; m * m];
    for i in 0..m {
        denominator[i * m + i] = false;
        let positives: Vec<usize> = (0..m).filter(|&j| j != i && sample_ids[j] == sample_ids[i]).collect();
        if positives.is_empty() {
            return Err(Error::InvalidArgument(format!("anchor {i} has no positive representation")));
        }
        let w = 1.0 / positives.len() as f64;
        for j in positives {
            positive_weights[(i, j)] = w;
        }
    }
    let unit = g.normalize_rows(q);
    let unit_t = g.transpose(unit);
    let cos = g.matmul(unit, unit_t);
    let logits = g.scale(cos, 1.0 / tau);
    let lse = g.logsumexp_masked(logits, denominator);
    let lse_sum = g.sum(lse);
    let pw = g.constant(positive_weights);
    let pos = g.mul(logits, pw);
    let pos_sum = g.sum(pos);
    let diff = g.sub(lse_sum, pos_sum);
    Ok(g.scale(diff, 1.0 / m as f64))
}

/// `‖H − ZH‖²_F + λ1·Σ_j ‖Z[:, j]‖₂`. `Z` must have an exactly zero diagonal.
pub fn self_expression_loss(g: &mut Graph, h: Tensor, z: Tensor, lambda1: f64) -> Result<Tensor> {
    let (n, _) = g.shape(h);
    let zm = g.value(z);
    if zm.shape() != (n, n) {
        return Err(Error::Shape(format!("Z is {}x{}, H has {n} rows", zm.rows, zm.cols)));
    }
    if let Some(i) = (0..n).find(|&i| zm[(i, i)] != 0.0) {
        return Err(Error::InvalidArgument(format!("Z has nonzero diagonal entry at {i}")));
    }
    let zh = g.matmul(z, h);
    let resid = g.sub(h, zh);
    let sq = g.mul(resid, resid);
    let fro = g.sum(sq);
    let z2 = g.mul(z, z);
    let col_sq = g.sum_rows(z2);
    let col_norm = g.sqrt(col_sq);
    let l12 = g.sum(col_norm);
    let reg = g.scale(l12, lambda1);
    Ok(g.add(fro, reg))
}

/// Squared reconstruction error of one view restricted to `rows`.
pub fn reconstruction_term(g: &mut Graph, target: &Matrix, recon: Tensor, rows: &[usize]) -> Result<Tensor> {
    if g.shape(recon) != target.shape() {
        let (r, c) = g.shape(recon);
        return Err(Error::Shape(format!("reconstruction is {r}x{c}, target is {}x{}", target.rows, target.cols)));
    }
    if rows.is_empty() {
        return Ok(zero(g));
    }
    let x = g.constant(target.select_rows(rows));
    let xh = g.gather_rows(recon, rows.to_vec());
    let d = g.sub(x, xh);
    let sq = g.mul(d, d);
    Ok(g.sum(sq))
}

/// Per-view reconstruction terms over the entries `mask` marks observed.
pub fn reconstruction_terms(
    g: &mut Graph,
    targets: &[Matrix],
    recon: &[Tensor],
    mask: &PairingMask,
) -> Result<Vec<Tensor>> {
    if targets.len() != recon.len() || targets.len() != mask.n_views() {
        return Err(Error::Shape(format!(
            "{} targets, {} reconstructions, {} mask views",
            targets.len(),
            recon.len(),
            mask.n_views()
        )));
    }
    targets
        .iter()
        .zip(recon)
        .enumerate()
        .map(|(v, (x, &xh))| reconstruction_term(g, x, xh, &mask.observed_in(v)))
        .collect()
}

/// `Σ_v Σ_{i observed in v} ‖X_i − X̂_i‖²`.
pub fn reconstruction_loss(g: &mut Graph, targets: &[Matrix], recon: &[Tensor], mask: &PairingMask) -> Result<Tensor> {
    let terms = reconstruction_terms(g, targets, recon, mask)?;
    Ok(sum_all(g, &terms))
}

pub fn sum_all(g: &mut Graph, terms: &[Tensor]) -> Tensor {
    let mut acc = match terms.first() {
        Some(&t) => t,
        None => return zero(g),
    };
    for &t in &terms[1..] {
        acc = g.add(acc, t);
    }
    acc
}

/// Semantic feature alignment summed over ordered view pairs `(p, q)`:
/// `−(1/n_t) Σ_i f_i^p·f_i^q + (1/(2 n_t)) Σ_{i≠j} f_i^p·f_j^q`, with
/// features l2-normalized and `n_t` the number of co-observed samples.
/// Pairs with fewer than two co-observed samples are skipped.
pub fn feature_alignment_loss(g: &mut Graph, features: &[Tensor], mask: &PairingMask) -> Result<Tensor> {
    if features.len() < 2 {
        return Err(Error::InvalidArgument("feature alignment needs at least 2 views".into()));
    }
    let mut terms = Vec::new();
    for p in 0..features.len() {
        for q in 0..features.len() {
            if p == q {
                continue;
            }
            let rows = mask.co_observed(p, q);
            if rows.len() < 2 {
                continue;
            }
            let nt = rows.len() as f64;
            let fp = g.gather_rows(features[p], rows.clone());
            let fq = g.gather_rows(features[q], rows);
            check_nonzero_rows(g.value(fp))?;
            check_nonzero_rows(g.value(fq))?;
            let up = g.normalize_rows(fp);
            let uq = g.normalize_rows(fq);
            let prod = g.mul(up, uq);
            let same = g.sum(prod);
            let sp = g.sum_rows(up);
            let sq = g.sum_rows(uq);
            let outer = g.mul(sp, sq);
            let all = g.sum(outer);
            let cross = g.sub(all, same);
            let a = g.scale(same, -1.0 / nt);
            let b = g.scale(cross, 1.0 / (2.0 * nt));
            terms.push(g.add(a, b));
        }
    }
    if terms.is_empty() {
        return Err(Error::InvalidArgument("no view pair has 2 or more co-observed samples".into()));
    }
    Ok(sum_all(g, &terms))
}

fn check_distributions(m: &Matrix) -> Result<()> {
    for i in 0..m.rows {
        let s: f64 = m.row(i).iter().sum();
        if (s - 1.0).abs() > DISTRIBUTION_TOLERANCE || m.row(i).iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidArgument(format!("row {i} is not a probability distribution (sum {s})")));
        }
    }
    Ok(())
}

/// Symmetric KL between cluster-assignment distributions of co-observed
/// samples, summed over unordered view pairs:
/// `Σ ½[KL(q^p‖q^q) + KL(q^q‖q^p)] = Σ ½ (q^p − q^q)·(ln q^p − ln q^q)`.
pub fn probability_alignment_loss(g: &mut Graph, probs: &[Tensor], mask: &PairingMask) -> Result<Tensor> {
    for &q in probs {
        check_distributions(g.value(q))?;
    }
    let mut terms = Vec::new();
    for p in 0..probs.len() {
        for q in (p + 1)..probs.len() {
            let rows = mask.co_observed(p, q);
            if rows.is_empty() {
                continue;
            }
            let a = g.gather_rows(probs[p], rows.clone());
            let b = g.gather_rows(probs[q], rows);
            let la = g.ln_clamped(a, LOG_EPS);
            let lb = g.ln_clamped(b, LOG_EPS);
            let dp = g.sub(a, b);
            let dl = g.sub(la, lb);
            let prod = g.mul(dp, dl);
            let s = g.sum(prod);
            terms.push(g.scale(s, 0.5));
        }
    }
    Ok(sum_all(g, &terms))
}

/// `Σ_views Σ_j Q̂_j log Q̂_j` with `Q̂` the mean assignment over rows.
/// Each view contributes a value in `[−ln K, 0]`.
pub fn entropy_regularization(g: &mut Graph, probs: &[Tensor]) -> Result<Tensor> {
    let mut terms = Vec::new();
    for &q in probs {
        check_distributions(g.value(q))?;
        let n = g.shape(q).0;
        if n == 0 {
            continue;
        }
        let s = g.sum_rows(q);
        let mean = g.scale(s, 1.0 / n as f64);
        let l = g.ln_clamped(mean, LOG_EPS);
        let prod = g.mul(mean, l);
        terms.push(g.sum(prod));
    }
    Ok(sum_all(g, &terms))
}
