//! Per-view MLP encoders/decoders, the shared cluster head, and the
//! parameter set that the trainer optimizes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetRole {
    Encoder { view: usize },
    Decoder { view: usize },
    ClusterHead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `fan_in x fan_out`
    pub weight: Matrix,
    /// `1 x fan_out`
    pub bias: Matrix,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    pub role: NetRole,
    pub layers: Vec<Layer>,
}

impl MlpNetwork {
    /// Glorot-uniform weights and zero biases. `dims` lists every layer width
    /// including input and output; hidden layers use ReLU, the last is linear.
    pub fn new(role: NetRole, dims: &[usize], rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
                Layer {
                    weight: Matrix::from_vec(fan_in, fan_out, data),
                    bias: Matrix::zeros(1, fan_out),
                    activation: if i == last { Activation::Identity } else { Activation::Relu },
                }
            })
            .collect();
        Self { role, layers }
    }

    /// Network with all weights and biases zero.
    pub fn zeros(role: NetRole, dims: &[usize]) -> Self {
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer {
                weight: Matrix::zeros(w[0], w[1]),
                bias: Matrix::zeros(1, w[1]),
                activation: if i == last { Activation::Identity } else { Activation::Relu },
            })
            .collect();
        Self { role, layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols)
    }

    pub fn bind(&self, g: &mut Graph) -> BoundMlp {
        let layers =
            self.layers.iter().map(|l| (g.param(l.weight.clone()), g.param(l.bias.clone()), l.activation)).collect();
        BoundMlp { role: self.role, layers }
    }

    /// Forward pass outside any training graph.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g);
        let input = g.constant(x.clone());
        let out = bound.forward(&mut g, input)?;
        Ok(g.value(out).clone())
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    fn params(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }
}

/// An [`MlpNetwork`] whose parameters are leaves on a [`Graph`].
#[derive(Debug, Clone)]
pub struct BoundMlp {
    pub role: NetRole,
    pub layers: Vec<(Tensor, Tensor, Activation)>,
}

impl BoundMlp {
    pub fn forward(&self, g: &mut Graph, x: Tensor) -> Result<Tensor> {
        let expected = g.shape(self.layers[0].0).0;
        let (rows, cols) = g.shape(x);
        if cols != expected {
            return Err(Error::Shape(format!("{:?} expects {expected} input columns, got {rows}x{cols}", self.role)));
        }
        let mut h = x;
        for &(w, b, act) in &self.layers {
            let lin = g.matmul(h, w);
            h = g.add_row_vector(lin, b);
            if act == Activation::Relu {
                h = g.relu(h);
            }
        }
        Ok(h)
    }

    pub fn tensors(&self) -> impl Iterator<Item = Tensor> + '_ {
        self.layers.iter().flat_map(|&(w, b, _)| [w, b])
    }
}

/// `H = f(X; encoder)`.
pub fn encode(g: &mut Graph, net: &BoundMlp, x: Tensor) -> Result<Tensor> {
    if !matches!(net.role, NetRole::Encoder { .. }) {
        return Err(Error::InvalidArgument(format!("encode called with a {:?} network", net.role)));
    }
    net.forward(g, x)
}

/// `X_hat = f(H; decoder)`.
pub fn decode(g: &mut Graph, net: &BoundMlp, h: Tensor) -> Result<Tensor> {
    if !matches!(net.role, NetRole::Decoder { .. }) {
        return Err(Error::InvalidArgument(format!("decode called with a {:?} network", net.role)));
    }
    net.forward(g, h)
}

/// Row-wise softmax of the cluster head's logits.
pub fn cluster_probabilities(g: &mut Graph, head: &BoundMlp, h: Tensor) -> Result<Tensor> {
    if head.role != NetRole::ClusterHead {
        return Err(Error::InvalidArgument(format!("cluster_probabilities called with a {:?} network", head.role)));
    }
    let k = g.shape(head.layers.last().expect("head has layers").0).1;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("cluster head has {k} outputs; need at least 2")));
    }
    let logits = head.forward(g, h)?;
    Ok(g.softmax_rows(logits))
}

/// Widths for the default architecture: two hidden ReLU layers of
/// `max(16, 2 * latent)` units.
pub fn default_hidden_width(latent_dim: usize) -> usize {
    (2 * latent_dim).max(16)
}

/// Everything the trainer optimizes: encoders, decoders, the shared cluster
/// head and the self-expression matrix `Z` (zero diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub encoders: Vec<MlpNetwork>,
    pub decoders: Vec<MlpNetwork>,
    pub head: MlpNetwork,
    pub z: Matrix,
}

/// Initial magnitude of off-diagonal self-expression coefficients.
pub const Z_INIT_SCALE: f64 = 1e-4;

impl ParameterSet {
    pub fn init(
        view_dims: &[usize],
        latent_dim: usize,
        clusters: usize,
        n_samples: usize,
        hidden: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoders = view_dims
            .iter()
            .enumerate()
            .map(|(v, &d)| MlpNetwork::new(NetRole::Encoder { view: v }, &[d, hidden, hidden, latent_dim], &mut rng))
            .collect();
        let decoders = view_dims
            .iter()
            .enumerate()
            .map(|(v, &d)| MlpNetwork::new(NetRole::Decoder { view: v }, &[latent_dim, hidden, hidden, d], &mut rng))
            .collect();
        let head = MlpNetwork::new(NetRole::ClusterHead, &[latent_dim, clusters], &mut rng);
        let mut z = Matrix::zeros(n_samples, n_samples);
        for i in 0..n_samples {
            for j in 0..n_samples {
                if i != j {
                    z[(i, j)] = rng.random_range(0.0..Z_INIT_SCALE);
                }
            }
        }
        Self { encoders, decoders, head, z }
    }

    pub fn n_views(&self) -> usize {
        self.encoders.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoders[0].output_dim()
    }

    pub fn bind(&self, g: &mut Graph) -> BoundParams {
        BoundParams {
            encoders: self.encoders.iter().map(|e| e.bind(g)).collect(),
            decoders: self.decoders.iter().map(|d| d.bind(g)).collect(),
            head: self.head.bind(g),
            z: g.param(self.z.clone()),
        }
    }

    /// Parameters in a fixed order shared with [`BoundParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        for e in &mut self.encoders {
            out.extend(e.params_mut());
        }
        for d in &mut self.decoders {
            out.extend(d.params_mut());
        }
        out.extend(self.head.params_mut());
        out.push(&mut self.z);
        out
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = Vec::new();
        for e in &self.encoders {
            out.extend(e.params());
        }
        for d in &self.decoders {
            out.extend(d.params());
        }
        out.extend(self.head.params());
        out.push(&self.z);
        out
    }

    pub fn zero_z_diagonal(&mut self) {
        for i in 0..self.z.rows {
            self.z[(i, i)] = 0.0;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone)]
pub struct BoundParams {
    pub encoders: Vec<BoundMlp>,
    pub decoders: Vec<BoundMlp>,
    pub head: BoundMlp,
    pub z: Tensor,
}

impl BoundParams {
    pub fn tensors(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        for e in &self.encoders {
            out.extend(e.tensors());
        }
        for d in &self.decoders {
            out.extend(d.tensors());
        }
        out.extend(self.head.tensors());
        out.push(self.z);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_net(role: NetRole, d: usize) -> MlpNetwork {
        MlpNetwork {
            role,
            layers: vec![Layer {
                weight: Matrix::identity(d),
                bias: Matrix::zeros(1, d),
                activation: Activation::Identity,
            }],
        }
    }

    #[test]
    fn zero_encoder_gives_zero_latent() {
        let net = MlpNetwork::zeros(NetRole::Encoder { view: 0 }, &[4, 16, 16, 3]);
        let mut g = Graph::new();
        let b = net.bind(&mut g);
        let x = g.constant(Matrix::from_vec(2, 4, vec![1.0, -2.0, 3.0, 0.5, 9.0, 8.0, 7.0, 6.0]));
        let h = encode(&mut g, &b, x).unwrap();
        assert_eq!(g.value(h), &Matrix::zeros(2, 3));
    }

    #[test]
    fn identity_layers_pass_through() {
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0], [-1.0, 0.0, 4.0]]);
        for role in [NetRole::Encoder { view: 0 }, NetRole::Decoder { view: 0 }] {
            let net = identity_net(role, 3);
            assert_eq!(net.predict(&x).unwrap(), x);
        }
        let zero_dec = MlpNetwork::zeros(NetRole::Decoder { view: 1 }, &[3, 16, 16, 5]);
        assert_eq!(zero_dec.predict(&x).unwrap(), Matrix::zeros(2, 5));
    }

    #[test]
    fn encode_rejects_wrong_role_and_width() {
        let dec = identity_net(NetRole::Decoder { view: 0 }, 3);
        let mut g = Graph::new();
        let b = dec.bind(&mut g);
        let x = g.constant(Matrix::zeros(2, 3));
        assert!(encode(&mut g, &b, x).is_err());
        let enc = identity_net(NetRole::Encoder { view: 0 }, 4);
        let b = enc.bind(&mut g);
        assert!(matches!(encode(&mut g, &b, x), Err(Error::Shape(_))));
    }

    #[test]
    fn encode_decode_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = MlpNetwork::new(NetRole::Encoder { view: 0 }, &[5, 16, 16, 3], &mut rng);
        let dec = MlpNetwork::new(NetRole::Decoder { view: 0 }, &[3, 16, 16, 5], &mut rng);
        let x = Matrix::from_vec(4, 5, (0..20).map(|i| i as f64 / 7.0).collect());
        let h = enc.predict(&x).unwrap();
        let xh = dec.predict(&h).unwrap();
        assert_eq!(xh.shape(), (4, 5));
        assert!(xh.is_finite());
        assert_eq!(enc.predict(&x).unwrap(), h);
    }

    #[test]
    fn cluster_head_probabilities() {
        let zero = MlpNetwork::zeros(NetRole::ClusterHead, &[2, 4]);
        let mut g = Graph::new();
        let b = zero.bind(&mut g);
        let h = g.constant(Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]));
        let q = cluster_probabilities(&mut g, &b, h).unwrap();
        assert!(g.value(q).data.iter().all(|&p| (p - 0.25).abs() < 1e-15));

        // Logits [10, 0] through an identity head.
        let id = identity_net(NetRole::ClusterHead, 2);
        let b = id.bind(&mut g);
        let h = g.constant(Matrix::from_rows(&[[10.0, 0.0]]));
        let q = cluster_probabilities(&mut g, &b, h).unwrap();
        let p = g.value(q);
        let expected = 1.0 / (1.0 + (-10.0f64).exp());
        assert!((p.data[0] - expected).abs() < 1e-15);
        assert!((p.data[0] - 0.99995).abs() < 1e-5);

        let single = MlpNetwork::zeros(NetRole::ClusterHead, &[2, 1]);
        let b = single.bind(&mut g);
        assert!(cluster_probabilities(&mut g, &b, h).is_err());
    }

    #[test]
    fn parameter_set_json_round_trip() {
        let p = ParameterSet::init(&[3, 2], 2, 2, 5, 16, 9);
        let back = ParameterSet::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, back);
        for i in 0..5 {
            assert_eq!(p.z[(i, i)], 0.0);
        }
    }
}
