//! End-to-end training: joint representation learning (step one), KNN
//! imputation, softmax view weights (step two) and the alternating
//! view-weighted optimization (step three).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor};
use crate::dataio::{MultiViewDataset, PairingMask, ViewMatrix};
use crate::error::{Error, Result};
use crate::impute::{knn_impute, Aggregation, ImputationResult};
use crate::linalg::Matrix;
use crate::losses::{self, Hyperparameters, LossBreakdown, LossTerms};
use crate::nn::{self, BoundParams, ParameterSet};
use crate::optim::{AdamConfig, AdamState};

/// Softmax weights over views; positive and summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewWeights(pub Vec<f64>);

impl ViewWeights {
    pub fn uniform(n_views: usize) -> Self {
        Self(vec![1.0 / n_views as f64; n_views])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `w_v = exp(−α·L_v) / Σ exp(−α·L_v')`, evaluated with a max shift.
pub fn update_view_weights(losses: &[f64], alpha: f64) -> Result<ViewWeights> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if losses.is_empty() || losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument(format!("view losses must be finite and non-empty: {losses:?}")));
    }
    let mut w: Vec<f64> = losses.iter().map(|l| -alpha * l).collect();
    crate::autodiff::softmax_in_place(&mut w);
    Ok(ViewWeights(w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hp: Hyperparameters,
    pub epochs_step1: usize,
    pub epochs_step3: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Count imputed rows as reconstruction targets.
    pub trust_imputed: bool,
    /// Add the probability-alignment term to the clustering group.
    pub enable_prob_alignment: bool,
    /// Early stop when the objective changes by less than this.
    pub tolerance: f64,
    pub knn_k: usize,
    pub knn_aggregation: Aggregation,
    /// Re-run imputation before every step-three iteration.
    pub reimpute_each_epoch: bool,
    /// Hidden width of every MLP; defaults to `max(16, 2·latent)`.
    pub hidden_width: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hp: Hyperparameters::default(),
            epochs_step1: 500,
            epochs_step3: 200,
            learning_rate: 1e-4,
            seed: 0,
            trust_imputed: false,
            enable_prob_alignment: false,
            tolerance: 1e-6,
            knn_k: 5,
            knn_aggregation: Aggregation::Mean,
            reimpute_each_epoch: false,
            hidden_width: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        if self.epochs_step1 == 0 || self.epochs_step3 == 0 {
            return Err(Error::InvalidArgument("epoch budgets must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidArgument("knn k must be at least 1".into()));
        }
        Ok(())
    }

    fn hidden(&self) -> usize {
        self.hidden_width.unwrap_or_else(|| nn::default_hidden_width(self.hp.latent_dim))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: String,
    /// Value actually minimized this epoch.
    pub objective: f64,
    pub per_view: Vec<f64>,
    pub weights: Vec<f64>,
    pub breakdown: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub z: Matrix,
    pub weights: ViewWeights,
    pub params: ParameterSet,
    pub loss_history: Vec<EpochRecord>,
    pub imputation: Option<ImputationResult>,
    pub metadata: BTreeMap<String, String>,
}

impl TrainResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-epoch CSV: epoch, phase, objective, per-view losses, weights, then
    /// the loss breakdown.
    pub fn write_run_log(&self, path: &Path) -> Result<()> {
        write_run_log(&self.loss_history, path)
    }
}

pub fn write_run_log(history: &[EpochRecord], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let v = history.first().map_or(0, |r| r.per_view.len());
    let mut header = vec!["epoch".to_string(), "phase".into(), "objective".into()];
    header.extend((0..v).map(|i| format!("view_loss_{i}")));
    header.extend((0..v).map(|i| format!("weight_{i}")));
    header.extend(["re", "se", "mcl", "F", "C", "R", "total"].map(String::from));
    writeln!(f, "{}", header.join(","))?;
    for r in history {
        let b = &r.breakdown;
        let mut cells = vec![r.epoch.to_string(), r.phase.clone(), format!("{:?}", r.objective)];
        cells.extend(r.per_view.iter().map(|x| format!("{x:?}")));
        cells.extend(r.weights.iter().map(|x| format!("{x:?}")));
        cells.extend([b.re, b.se, b.mcl, b.f, b.c, b.r, b.total].iter().map(|x| format!("{x:?}")));
        writeln!(f, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Everything recorded by one forward pass of the model.
pub struct ForwardPass {
    pub bound: BoundParams,
    pub latents: Vec<Tensor>,
    pub fused: Tensor,
    pub recons: Vec<Tensor>,
    pub probs: Vec<Tensor>,
    pub per_view: Vec<Tensor>,
    pub terms: LossTerms,
    pub total: Tensor,
}

/// Records the full model on `g`.
///
/// `inputs` are the encoder inputs (missing rows zero-filled or imputed).
/// `recon_mask` selects reconstruction targets; `align_mask` decides which
/// latent rows take part in fusion and the alignment terms.
#[allow(clippy::too_many_arguments)]
pub fn forward(
    g: &mut Graph,
    params: &ParameterSet,
    inputs: &[Matrix],
    recon_mask: &PairingMask,
    align_mask: &PairingMask,
    weights: &[f64],
    hp: &Hyperparameters,
    include_c: bool,
) -> Result<ForwardPass> {
    let n_views = params.n_views();
    if inputs.len() != n_views || weights.len() != n_views {
        return Err(Error::Shape(format!("{} inputs and {} weights for {n_views} views", inputs.len(), weights.len())));
    }
    let n = align_mask.n_samples();
    let bound = params.bind(g);
    let mut latents = Vec::with_capacity(n_views);
    let mut recons = Vec::with_capacity(n_views);
    for v in 0..n_views {
        let x = g.constant(inputs[v].clone());
        let h = nn::encode(g, &bound.encoders[v], x)?;
        recons.push(nn::decode(g, &bound.decoders[v], h)?);
        latents.push(h);
    }

    // Fused latent: per-sample weighted mean over the views it has.
    let mut fused = None;
    for v in 0..n_views {
        let coef: Vec<f64> = (0..n)
            .map(|i| {
                if !align_mask.is_observed(i, v) {
                    return 0.0;
                }
                let denom: f64 = (0..n_views).filter(|&u| align_mask.is_observed(i, u)).map(|u| weights[u]).sum();
                weights[v] / denom
            })
            .collect();
        let part = g.scale_rows(latents[v], coef);
        fused = Some(match fused {
            None => part,
            Some(acc) => g.add(acc, part),
        });
    }
    let fused = fused.expect("at least one view");

    let per_view = losses::reconstruction_terms(g, inputs, &recons, recon_mask)?;
    let re = losses::sum_all(g, &per_view);
    let se = losses::self_expression_loss(g, fused, bound.z, hp.lambda1)?;

    let multi: Vec<usize> =
        (0..n).filter(|&i| (0..n_views).filter(|&v| align_mask.is_observed(i, v)).count() >= 2).collect();
    let mcl = if n_views >= 2 && !multi.is_empty() {
        let mut parts = Vec::new();
        let mut ids = Vec::new();
        for v in 0..n_views {
            let rows: Vec<usize> = multi.iter().copied().filter(|&i| align_mask.is_observed(i, v)).collect();
            ids.extend(&rows);
            parts.push(g.gather_rows(latents[v], rows));
        }
        let q = g.concat_rows(parts);
        losses::contrastive_loss(g, q, &ids, hp.tau)?
    } else {
        g.constant(Matrix::zeros(1, 1))
    };
    let f = if n_views >= 2 {
        losses::feature_alignment_loss(g, &latents, align_mask)?
    } else {
        g.constant(Matrix::zeros(1, 1))
    };

    let mut probs = Vec::with_capacity(n_views);
    for &h in &latents {
        probs.push(nn::cluster_probabilities(g, &bound.head, h)?);
    }
    let c = losses::probability_alignment_loss(g, &probs, align_mask)?;
    let observed_probs: Vec<Tensor> =
        (0..n_views).map(|v| g.gather_rows(probs[v], align_mask.observed_in(v))).collect();
    let r = losses::entropy_regularization(g, &observed_probs)?;

    let terms = LossTerms { re, se, mcl, f, c, r };
    let total = terms.total(g, hp, include_c);
    Ok(ForwardPass { bound, latents, fused, recons, probs, per_view, terms, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Objective {
    /// Combined representation objective.
    Joint,
    /// `Σ_v w_v L_v`.
    ViewWeighted,
}

/// Training state carried between the steps.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub config: TrainConfig,
    pub params: ParameterSet,
    adam: AdamState,
    /// Availability as given.
    pub mask: PairingMask,
    /// Encoder inputs; missing rows are zero until imputed.
    pub inputs: Vec<Matrix>,
    pub recon_mask: PairingMask,
    pub align_mask: PairingMask,
    pub weights: ViewWeights,
    pub history: Vec<EpochRecord>,
    pub imputation: Option<ImputationResult>,
}

impl TrainState {
    pub fn new(dataset: &MultiViewDataset, mask: &PairingMask, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        mask.check_against(dataset)?;
        let n = dataset.n_samples();
        let n_views = dataset.n_views();
        if n_views >= 2 {
            let paired = mask.paired_count();
            let needed = if mask.unpaired_count() > 0 { config.knn_k.max(2) } else { 2 };
            if paired < needed {
                return Err(Error::InvalidArgument(format!(
                    "{paired} fully observed samples; training needs at least {needed}"
                )));
            }
        }
        let inputs: Vec<Matrix> = dataset
            .views
            .iter()
            .enumerate()
            .map(|(v, view)| {
                let mut m = view.values.clone();
                for i in 0..n {
                    if !mask.is_observed(i, v) {
                        m.row_mut(i).iter_mut().for_each(|x| *x = 0.0);
                    }
                }
                m
            })
            .collect();
        let params = ParameterSet::init(
            &dataset.dims(),
            config.hp.latent_dim,
            config.hp.clusters,
            n,
            config.hidden(),
            config.seed,
        );
        let adam = AdamState::new(AdamConfig { learning_rate: config.learning_rate, ..Default::default() }, &params.tensors());
        Ok(Self {
            config: config.clone(),
            params,
            adam,
            mask: mask.clone(),
            inputs,
            recon_mask: mask.clone(),
            align_mask: mask.clone(),
            weights: ViewWeights::uniform(n_views),
            history: Vec::new(),
            imputation: None,
        })
    }

    pub fn n_views(&self) -> usize {
        self.params.n_views()
    }

    fn run_epoch(&mut self, objective: Objective, phase: &str) -> Result<EpochRecord> {
        let epoch = self.history.len();
        let diverged = || Error::Diverged { epoch, phase: phase.to_string() };
        let mut g = Graph::new();
        let fp = forward(
            &mut g,
            &self.params,
            &self.inputs,
            &self.recon_mask,
            &self.align_mask,
            &self.weights.0,
            &self.config.hp,
            self.config.enable_prob_alignment,
        )?;
        let target = match objective {
            Objective::Joint => fp.total,
            Objective::ViewWeighted => {
                let parts: Vec<Tensor> =
                    fp.per_view.iter().zip(&self.weights.0).map(|(&l, &w)| g.scale(l, w)).collect();
                losses::sum_all(&mut g, &parts)
            }
        };
        let objective_value = g.scalar(target);
        if !objective_value.is_finite() {
            return Err(diverged());
        }
        let mut grads = g.backward(target).map_err(|_| diverged())?;
        let grad_list: Vec<Matrix> = fp
            .bound
            .tensors()
            .into_iter()
            .map(|t| grads.take(t).expect("every parameter is a differentiable leaf"))
            .collect();
        let record = EpochRecord {
            epoch,
            phase: phase.to_string(),
            objective: objective_value,
            per_view: fp.per_view.iter().map(|&t| g.scalar(t)).collect(),
            weights: self.weights.0.clone(),
            breakdown: fp.terms.breakdown(&g, fp.total),
        };
        self.adam.step(&mut self.params.tensors_mut(), &grad_list);
        self.params.zero_z_diagonal();
        if self.params.tensors().iter().any(|m| !m.is_finite()) {
            return Err(diverged());
        }
        self.history.push(record.clone());
        Ok(record)
    }

    /// Replaces missing encoder inputs with KNN estimates from the current
    /// encoders' latent space.
    pub fn impute(&mut self) -> Result<()> {
        if self.mask.unpaired_count() == 0 {
            self.align_mask = self.mask.clone();
            return Ok(());
        }
        let embeddings: Vec<Matrix> = self
            .params
            .encoders
            .iter()
            .zip(&self.inputs)
            .map(|(enc, x)| enc.predict(x))
            .collect::<Result<_>>()?;
        let views: Vec<ViewMatrix> =
            self.inputs.iter().enumerate().map(|(v, m)| ViewMatrix { view_id: v, values: m.clone() }).collect();
        let result = knn_impute(&views, &self.mask, &embeddings, self.config.knn_k, self.config.knn_aggregation)?;
        self.inputs = result.completed_views.iter().map(|v| v.values.clone()).collect();
        let complete = PairingMask::complete(self.mask.n_samples(), self.n_views());
        self.align_mask = complete.clone();
        self.recon_mask = if self.config.trust_imputed { complete } else { self.mask.clone() };
        self.imputation = Some(result);
        Ok(())
    }

    pub fn into_result(self) -> TrainResult {
        let metadata = run_metadata(&self.config, &self.mask);
        TrainResult {
            z: self.params.z.clone(),
            weights: self.weights,
            params: self.params,
            loss_history: self.history,
            imputation: self.imputation,
            metadata,
        }
    }
}

/// Step one: minimize the joint objective with Adam until the epoch budget
/// runs out or the objective stops moving.
pub fn step_one(dataset: &MultiViewDataset, mask: &PairingMask, config: &TrainConfig) -> Result<TrainState> {
    let mut state = TrainState::new(dataset, mask, config)?;
    let mut prev: Option<f64> = None;
    for _ in 0..config.epochs_step1 {
        let rec = state.run_epoch(Objective::Joint, "step1")?;
        if prev.is_some_and(|p| (p - rec.objective).abs() < config.tolerance) {
            break;
        }
        prev = Some(rec.objective);
    }
    Ok(state)
}

/// Observed-entry reconstruction loss of view `v` under the current
/// parameters.
pub fn per_view_loss(state: &TrainState, v: usize) -> Result<f64> {
    if v >= state.n_views() {
        return Err(Error::InvalidArgument(format!("view {v} out of range for {} views", state.n_views())));
    }
    if state.history.is_empty() {
        return Err(Error::InvalidArgument("per-view loss needs at least one trained epoch".into()));
    }
    let mut g = Graph::new();
    let enc = state.params.encoders[v].bind(&mut g);
    let dec = state.params.decoders[v].bind(&mut g);
    let x = g.constant(state.inputs[v].clone());
    let h = nn::encode(&mut g, &enc, x)?;
    let xh = nn::decode(&mut g, &dec, h)?;
    let term = losses::reconstruction_term(&mut g, &state.inputs[v], xh, &state.recon_mask.observed_in(v))?;
    Ok(g.scalar(term))
}

pub fn per_view_losses(state: &TrainState) -> Result<Vec<f64>> {
    (0..state.n_views()).map(|v| per_view_loss(state, v)).collect()
}

/// Step three: each outer iteration runs one epoch of the joint objective and
/// one of the view-weighted loss, then refreshes the weights.
pub fn step_three(mut state: TrainState, weights: ViewWeights, config: &TrainConfig) -> Result<TrainResult> {
    if weights.0.len() != state.n_views() {
        return Err(Error::Shape(format!("{} weights for {} views", weights.0.len(), state.n_views())));
    }
    state.weights = weights;
    let mut prev: Option<f64> = None;
    for outer in 0..config.epochs_step3 {
        if outer > 0 {
            if config.reimpute_each_epoch {
                state.impute()?;
            }
            state.weights = update_view_weights(&per_view_losses(&state)?, config.hp.alpha)?;
        }
        let joint = state.run_epoch(Objective::Joint, "step3-joint")?;
        state.run_epoch(Objective::ViewWeighted, "step3-weighted")?;
        if prev.is_some_and(|p| (p - joint.objective).abs() < config.tolerance) {
            break;
        }
        prev = Some(joint.objective);
    }
    state.weights = update_view_weights(&per_view_losses(&state)?, config.hp.alpha)?;
    Ok(state.into_result())
}

/// Step one, imputation, step two and step three.
pub fn train(dataset: &MultiViewDataset, mask: &PairingMask, config: &TrainConfig) -> Result<TrainResult> {
    let mut state = step_one(dataset, mask, config)?;
    state.impute()?;
    let weights = update_view_weights(&per_view_losses(&state)?, config.hp.alpha)?;
    step_three(state, weights, config)
}

/// Flags and modelling choices in effect for a run.
pub fn run_metadata(config: &TrainConfig, mask: &PairingMask) -> BTreeMap<String, String> {
    let hp = &config.hp;
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("paired_fraction", format!("{}", mask.paired_fraction));
    put("missing_rate", format!("{}", 1.0 - mask.paired_fraction));
    put("paired_count", mask.paired_count().to_string());
    put("unpaired_count", mask.unpaired_count().to_string());
    put("mask_seed", mask.seed.to_string());
    put("seed", config.seed.to_string());
    put("lambda1", hp.lambda1.to_string());
    put("lambda2", hp.lambda2.to_string());
    put("lambda3", hp.lambda3.to_string());
    put("tau", hp.tau.to_string());
    put("alpha", hp.alpha.to_string());
    put("latent_dim", hp.latent_dim.to_string());
    put("clusters", hp.clusters.to_string());
    put("learning_rate", config.learning_rate.to_string());
    put("epochs_step1", config.epochs_step1.to_string());
    put("epochs_step3", config.epochs_step3.to_string());
    put("tolerance", config.tolerance.to_string());
    put("knn_k", config.knn_k.to_string());
    put("knn_aggregation", format!("{:?}", config.knn_aggregation).to_lowercase());
    put("knn_space", "encoder latent space of the observed view(s)".into());
    put("reimpute_each_epoch", config.reimpute_each_epoch.to_string());
    put("trust_imputed", config.trust_imputed.to_string());
    put("imputed_rows_in_alignment", "yes".into());
    put("prob_alignment", if config.enable_prob_alignment { "symmetric KL, in clustering group" } else { "reported only" }.into());
    put("encoder", format!("MLP, 2 hidden ReLU layers of width {}; stands in for ViT embeddings", config.hidden()));
    put("cluster_head", "shared linear layer + softmax on each view latent".into());
    put("fusion", "per-sample weighted mean of observed view latents".into());
    put("self_expression", "H ~ ZH, l1,2 = sum of column l2 norms, diag(Z) projected to 0".into());
    put("contrastive", "cosine, anchor excluded from denominator, negated mean over anchors".into());
    put("feature_alignment", "ordered view pairs, l2-normalized latents (index reading reconstructed)".into());
    put("view_loss", "observed-entry reconstruction per view".into());
    put("step3_schedule", "1 joint epoch : 1 weighted epoch".into());
    put("optimizer", "Adam beta1=0.9 beta2=0.999 eps=1e-8, full batch".into());
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, make_pairing_mask, NormalizeMethod};

    #[test]
    fn weight_closed_forms() {
        let w = update_view_weights(&[0.3, 0.3, 0.3], 2.0).unwrap();
        assert!(w.0.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        let w = update_view_weights(&[0.0, 2.0f64.ln()], 1.0).unwrap();
        assert!((w.0[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((w.0[1] - 1.0 / 3.0).abs() < 1e-12);
        let w = update_view_weights(&[1.0, 50.0, 3.0], 1e-8).unwrap();
        assert!(w.0.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-6));
        assert_eq!(update_view_weights(&[4.2], 1.0).unwrap().0, vec![1.0]);
        assert!(update_view_weights(&[1.0], 0.0).is_err());
        assert!(update_view_weights(&[f64::NAN, 1.0], 1.0).is_err());
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            hp: Hyperparameters { latent_dim: 3, clusters: 2, ..Default::default() },
            epochs_step1: 5,
            epochs_step3: 3,
            knn_k: 2,
            ..Default::default()
        }
    }

    fn small_data() -> (MultiViewDataset, PairingMask) {
        let ds = generate_synthetic(2, 12, &[4, 3], 8.0, 1).unwrap().normalized(NormalizeMethod::MinMax);
        let mask = make_pairing_mask(12, 0.75, 2, 4).unwrap();
        (ds, mask)
    }

    #[test]
    fn zero_epochs_rejected() {
        let (ds, mask) = small_data();
        let cfg = TrainConfig { epochs_step1: 0, ..small_config() };
        assert!(step_one(&ds, &mask, &cfg).is_err());
    }

    #[test]
    fn per_view_losses_partition_reconstruction() {
        let (ds, mask) = small_data();
        let state = step_one(&ds, &mask, &small_config()).unwrap();
        let per = per_view_losses(&state).unwrap();
        let mut g = Graph::new();
        let fp = forward(
            &mut g,
            &state.params,
            &state.inputs,
            &state.recon_mask,
            &state.align_mask,
            &state.weights.0,
            &state.config.hp,
            false,
        )
        .unwrap();
        let re = g.scalar(fp.terms.re);
        assert!((per.iter().sum::<f64>() - re).abs() < 1e-9);
        assert!(per_view_loss(&state, 2).is_err());
    }

    #[test]
    fn missing_inputs_are_hidden() {
        let (ds, mask) = small_data();
        let state = TrainState::new(&ds, &mask, &small_config()).unwrap();
        for i in mask.unpaired_indices() {
            for v in 0..2 {
                if !mask.is_observed(i, v) {
                    assert!(state.inputs[v].row(i).iter().all(|&x| x == 0.0));
                }
            }
        }
    }

    #[test]
    fn train_keeps_zero_diagonal_and_is_deterministic() {
        let (ds, mask) = small_data();
        let a = train(&ds, &mask, &small_config()).unwrap();
        let b = train(&ds, &mask, &small_config()).unwrap();
        assert_eq!(a, b);
        for i in 0..a.z.rows {
            assert_eq!(a.z[(i, i)], 0.0);
        }
        let s: f64 = a.weights.0.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(a.imputation.as_ref().unwrap().imputed.len(), mask.unpaired_count());
    }
}
