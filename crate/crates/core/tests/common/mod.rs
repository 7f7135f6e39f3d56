#![allow(dead_code)]

use std::collections::HashMap;

use pvcmc::autodiff::Graph;
use pvcmc::dataio::PairingMask;
use pvcmc::linalg::Matrix;
use pvcmc::losses::Hyperparameters;
use pvcmc::nn::ParameterSet;
use pvcmc::trainer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All permutations of `0..m` in lexicographic order.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; m], &mut out);
    out
}

/// Lexicographically first permutation of minimal total cost.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for p in permutations(cost.len()) {
        let t: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        if best.as_ref().is_none_or(|b| t < b.1) {
            best = Some((p, t));
        }
    }
    best.unwrap_or((Vec::new(), 0.0))
}

/// Best accuracy over every bijection between padded label sets.
pub fn brute_force_acc(y: &[usize], l: &[usize]) -> f64 {
    let k = y.iter().chain(l).max().map_or(0, |&m| m + 1);
    let mut best = 0;
    for p in permutations(k) {
        let hits = y.iter().zip(l).filter(|(&a, &b)| p[b] == a).count();
        best = best.max(hits);
    }
    best as f64 / y.len() as f64
}

/// Plug-in NMI straight from label counts.
pub fn formula_nmi(y: &[usize], l: &[usize]) -> f64 {
    let n = y.len() as f64;
    let mut cy: HashMap<usize, f64> = HashMap::new();
    let mut cl: HashMap<usize, f64> = HashMap::new();
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    for (&a, &b) in y.iter().zip(l) {
        *cy.entry(a).or_default() += 1.0;
        *cl.entry(b).or_default() += 1.0;
        *joint.entry((a, b)).or_default() += 1.0;
    }
    let h = |c: &HashMap<usize, f64>| -> f64 { c.values().map(|&x| -(x / n) * (x / n).ln()).sum() };
    let (hy, hl) = (h(&cy), h(&cl));
    if hy.max(hl) == 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for (&(a, b), &c) in &joint {
        let pab = c / n;
        mi += pab * (pab / ((cy[&a] / n) * (cl[&b] / n))).ln();
    }
    mi / hy.max(hl)
}

pub fn random_labels(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| r.random_range(0..k)).collect()
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-scale..scale)).collect())
}

pub fn random_symmetric(r: &mut ChaCha8Rng, n: usize) -> Matrix {
    let a = random_matrix(r, n, n, 1.0);
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    s
}

/// KNN neighbor sets by repeated linear-scan minimum, independent of any
/// sorting. Distance sums squared Euclidean distances over `views`.
pub fn brute_force_neighbors(
    sample: usize,
    views: &[usize],
    embeddings: &[Matrix],
    paired: &[usize],
    k: usize,
) -> Vec<usize> {
    let dist = |j: usize| -> f64 {
        let mut d = 0.0;
        for &v in views {
            for c in 0..embeddings[v].cols {
                let diff = embeddings[v][(sample, c)] - embeddings[v][(j, c)];
                d += diff * diff;
            }
        }
        d
    };
    let mut left: Vec<usize> = paired.to_vec();
    let mut out = Vec::new();
    while out.len() < k && !left.is_empty() {
        let mut best = 0;
        for idx in 1..left.len() {
            let (a, b) = (dist(left[idx]), dist(left[best]));
            if a < b || (a == b && left[idx] < left[best]) {
                best = idx;
            }
        }
        out.push(left.remove(best));
    }
    out
}

pub const LOSS_NAMES: [&str; 6] = ["mcl", "se", "re", "F", "C", "R"];

/// One small random model plus data for gradient checks.
pub struct GradInstance {
    pub params: ParameterSet,
    pub inputs: Vec<Matrix>,
    pub mask: PairingMask,
    pub weights: Vec<f64>,
    pub hp: Hyperparameters,
}

impl GradInstance {
    pub fn random(seed: u64) -> Self {
        let mut r = rng(seed);
        let n = r.random_range(4..=8);
        let dims = [r.random_range(2..=4), r.random_range(2..=4)];
        let hp = Hyperparameters { lambda1: 0.3, tau: 0.5, latent_dim: 3, clusters: 3, ..Default::default() };
        let mut params = ParameterSet::init(&dims, hp.latent_dim, hp.clusters, n, 5, seed);
        // Larger Z entries than the training init so every term is exercised.
        for i in 0..n {
            for j in 0..n {
                params.z[(i, j)] = if i == j { 0.0 } else { r.random_range(-0.5..0.5) };
            }
        }
        for net in params.encoders.iter_mut().chain(params.decoders.iter_mut()).chain([&mut params.head]) {
            for layer in &mut net.layers {
                layer.bias.data.iter_mut().for_each(|b| *b = r.random_range(-0.2..0.2));
            }
        }
        let inputs = dims.iter().map(|&d| random_matrix(&mut r, n, d, 1.0)).collect();
        let mask = pvcmc::dataio::make_pairing_mask(n, 0.6, 2, seed).expect("mask");
        let w0 = r.random_range(0.2..0.8);
        Self { params, inputs, mask, weights: vec![w0, 1.0 - w0], hp }
    }

    /// Value of loss term `which` and, optionally, its gradient for every
    /// parameter in [`ParameterSet::tensors`] order.
    pub fn eval(&self, params: &ParameterSet, which: usize, with_grad: bool) -> (f64, Option<Vec<Matrix>>) {
        let mut g = Graph::new();
        let fp = trainer::forward(
            &mut g,
            params,
            &self.inputs,
            &self.mask,
            &self.mask,
            &self.weights,
            &self.hp,
            true,
        )
        .expect("forward");
        let t = &fp.terms;
        let target = [t.mcl, t.se, t.re, t.f, t.c, t.r][which];
        let value = g.scalar(target);
        if !with_grad {
            return (value, None);
        }
        let mut grads = g.backward(target).expect("backward");
        let list = fp.bound.tensors().into_iter().map(|x| grads.take(x).expect("grad")).collect();
        (value, Some(list))
    }

    /// Largest relative error between analytic and central-difference
    /// gradients over every parameter entry (diagonal of Z excluded).
    pub fn max_relative_error(&self, which: usize, h: f64) -> f64 {
        let (_, grads) = self.eval(&self.params, which, true);
        let grads = grads.expect("gradients");
        let n_tensors = grads.len();
        let z_index = n_tensors - 1;
        let n = self.params.z.rows;
        let mut worst = 0.0f64;
        let mut p = self.params.clone();
        for (k, grad) in grads.iter().enumerate() {
            for e in 0..grad.data.len() {
                if k == z_index && e / n == e % n {
                    continue;
                }
                let orig = p.tensors()[k].data[e];
                p.tensors_mut()[k].data[e] = orig + h;
                let plus = self.eval(&p, which, false).0;
                p.tensors_mut()[k].data[e] = orig - h;
                let minus = self.eval(&p, which, false).0;
                p.tensors_mut()[k].data[e] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = grad.data[e];
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                worst = worst.max((numeric - analytic).abs() / denom);
            }
        }
        worst
    }
}
