//! wasm-bindgen entry points for the static page in `www/`.
//!
//! Everything crosses the boundary as JSON strings so the page needs no
//! generated TypeScript bindings.

use pvcmc::dataio::{self, NormalizeMethod};
use pvcmc::linalg::Matrix;
use pvcmc::trainer::{self, TrainConfig};
use pvcmc::{metrics, spectral};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Knobs exposed on the page. Small budgets keep a run under a few seconds.
#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct DemoParams {
    pub clusters: usize,
    pub n: usize,
    pub dims: Vec<usize>,
    pub separation: f64,
    pub paired_fraction: f64,
    pub seed: u64,
    pub epochs_step1: usize,
    pub epochs_step3: usize,
    pub learning_rate: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub alpha: f64,
    pub latent_dim: usize,
    pub knn_k: usize,
}

impl Default for DemoParams {
    fn default() -> Self {
        Self {
            clusters: 3,
            n: 60,
            dims: vec![10, 12],
            separation: 10.0,
            paired_fraction: 0.5,
            seed: 0,
            epochs_step1: 200,
            epochs_step3: 100,
            learning_rate: 1e-3,
            lambda1: 0.1,
            lambda2: 1e-3,
            lambda3: 1e-3,
            alpha: 1.0,
            latent_dim: 8,
            knn_k: 5,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PipelineOutput {
    pub n: usize,
    pub truth: Vec<usize>,
    pub predicted: Vec<usize>,
    pub paired: Vec<bool>,
    /// Row-major `n x n` affinity, rows and columns in sample order.
    pub affinity: Vec<f64>,
    /// First two columns of the row-normalized spectral embedding.
    pub embedding: Vec<[f64; 2]>,
    pub eigenvalues: Vec<f64>,
    pub weights: Vec<f64>,
    pub objective: Vec<f64>,
    pub acc: f64,
    pub nmi: f64,
}

pub fn run_pipeline(params: &DemoParams) -> pvcmc::Result<PipelineOutput> {
    let dataset = dataio::generate_synthetic(params.clusters, params.n, &params.dims, params.separation, params.seed)?
        .normalized(NormalizeMethod::MinMax);
    let mask = dataio::make_pairing_mask(dataset.n_samples(), params.paired_fraction, dataset.n_views(), params.seed)?;
    let mut config = TrainConfig {
        epochs_step1: params.epochs_step1,
        epochs_step3: params.epochs_step3,
        learning_rate: params.learning_rate,
        seed: params.seed,
        knn_k: params.knn_k,
        ..TrainConfig::default()
    };
    config.hp.lambda1 = params.lambda1;
    config.hp.lambda2 = params.lambda2;
    config.hp.lambda3 = params.lambda3;
    config.hp.alpha = params.alpha;
    config.hp.latent_dim = params.latent_dim;
    config.hp.clusters = params.clusters;
    config.validate()?;

    let result = trainer::train(&dataset, &mask, &config)?;
    let s = spectral::affinity_from_z(&result.z);
    let sc = spectral::spectral_cluster_detailed(&s, params.clusters, params.seed, &Default::default())?;
    let truth = dataset.labels.clone().unwrap_or_default();
    let predicted = sc.labels.labels.clone();
    let n = dataset.n_samples();
    Ok(PipelineOutput {
        n,
        acc: metrics::acc(&truth, &predicted)?,
        nmi: metrics::nmi(&truth, &predicted)?,
        paired: (0..n).map(|i| mask.is_paired(i)).collect(),
        affinity: s.matrix().data.clone(),
        embedding: first_two_columns(&sc.embedding),
        eigenvalues: sc.eigen.values.clone(),
        weights: result.weights.0.clone(),
        objective: result.loss_history.iter().map(|r| r.objective).collect(),
        truth,
        predicted,
    })
}

fn first_two_columns(m: &Matrix) -> Vec<[f64; 2]> {
    (0..m.rows).map(|i| [m[(i, 0)], if m.cols > 1 { m[(i, 1)] } else { 0.0 }]).collect()
}

fn to_js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Train and cluster a synthetic dataset. `params_json` may be `"{}"`.
#[wasm_bindgen(js_name = runPipeline)]
pub fn run_pipeline_json(params_json: &str) -> Result<String, JsError> {
    let params: DemoParams = serde_json::from_str(params_json).map_err(to_js)?;
    let out = run_pipeline(&params).map_err(to_js)?;
    serde_json::to_string(&out).map_err(to_js)
}

/// Softmax view weights `exp(-alpha L_v) / sum_u exp(-alpha L_u)`.
#[wasm_bindgen(js_name = viewWeights)]
pub fn view_weights(losses: &[f64], alpha: f64) -> Result<Vec<f64>, JsError> {
    Ok(trainer::update_view_weights(losses, alpha).map_err(to_js)?.0)
}

/// ACC and NMI of two label vectors, as `{"acc":..,"nmi":..}`.
#[wasm_bindgen(js_name = scoreLabels)]
pub fn score_labels(truth: &[u32], predicted: &[u32]) -> Result<String, JsError> {
    let y: Vec<usize> = truth.iter().map(|&x| x as usize).collect();
    let l: Vec<usize> = predicted.iter().map(|&x| x as usize).collect();
    let acc = metrics::acc(&y, &l).map_err(to_js)?;
    let nmi = metrics::nmi(&y, &l).map_err(to_js)?;
    Ok(serde_json::json!({ "acc": acc, "nmi": nmi }).to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_pipeline_runs() {
        let params = DemoParams { n: 30, epochs_step1: 40, epochs_step3: 5, ..Default::default() };
        let out = run_pipeline(&params).unwrap();
        assert_eq!(out.affinity.len(), 30 * 30);
        assert_eq!(out.embedding.len(), 30);
        assert_eq!(out.predicted.len(), 30);
        assert!((out.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&out.acc));
        for i in 0..30 {
            for j in 0..30 {
                assert_eq!(out.affinity[i * 30 + j], out.affinity[j * 30 + i]);
            }
        }
    }

    #[test]
    fn params_default_from_empty_json() {
        let p: DemoParams = serde_json::from_str("{}").unwrap();
        assert_eq!(p.clusters, 3);
        assert_eq!(p.dims, vec![10, 12]);
    }
}
