//! Dense ReLU network: parameters, forward pass, input gradients and
//! region-local linearization.
//!
//! Hidden layers apply ReLU, the output layer is affine. A single-logit head
//! is read out through a sigmoid (class 1 iff the logit is strictly positive);
//! a multi-logit head is read out by argmax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::TrainConfig;

/// Layer widths `[d, h_1, ..., h_k, m]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct NetworkSpec {
    dims: Vec<usize>,
}

impl NetworkSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least input and output dims, got {dims:?}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidSpec(format!("zero-width layer in {dims:?}")));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn hidden_dims(&self) -> &[usize] {
        &self.dims[1..self.dims.len() - 1]
    }

    pub fn hidden_neuron_count(&self) -> usize {
        self.hidden_dims().iter().sum()
    }

    pub fn is_binary(&self) -> bool {
        self.output_dim() == 1
    }

    pub fn num_classes(&self) -> usize {
        if self.is_binary() {
            2
        } else {
            self.output_dim()
        }
    }
}

impl TryFrom<Vec<usize>> for NetworkSpec {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        NetworkSpec::new(dims)
    }
}

impl From<NetworkSpec> for Vec<usize> {
    fn from(spec: NetworkSpec) -> Self {
        spec.dims
    }
}

/// One affine layer. `weights` is row-major with shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    /// Initialization seed.
    pub seed: u64,
    #[serde(default)]
    pub dataset_fingerprint: Option<String>,
    #[serde(default)]
    pub train_config: Option<TrainConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Dense>,
    pub meta: NetworkMeta,
}

/// Per-neuron on/off state of every hidden unit, layer by layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActivationPattern {
    pub bits: Vec<bool>,
}

impl ActivationPattern {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Affine map `f(x) = weights · x + bias` valid inside one activation region.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLinearMap {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LocalLinearMap {
    pub fn eval(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(&self.weights, x) + self.bias
    }
}

/// Glorot-uniform bound for a layer with the given fan-in and fan-out.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Builds a network with Glorot-uniform weights and zero biases.
///
/// Weights are drawn from ChaCha8 (rand_chacha 0.9) seeded with
/// `seed_from_u64(seed)` on stream 0, layer by layer, row-major.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .dims()
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = glorot_bound(fan_in, fan_out);
            let weights = (0..fan_out)
                .map(|_| {
                    (0..fan_in)
                        .map(|_| bound * (2.0 * rng.random::<f64>() - 1.0))
                        .collect()
                })
                .collect();
            Dense {
                weights,
                bias: vec![0.0; fan_out],
            }
        })
        .collect();
    Network {
        spec: spec.clone(),
        layers,
        meta: NetworkMeta {
            seed,
            ..NetworkMeta::default()
        },
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Pre-activations per layer (hidden layers and output).
    pub pre: Vec<Vec<f64>>,
    /// Layer inputs: `inputs[0]` is x, `inputs[l]` is ReLU of `pre[l-1]`.
    pub inputs: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn logits(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }
}

impl Network {
    /// Assembles a network from explicit layers, validating shapes and
    /// finiteness.
    pub fn from_layers(layers: Vec<Dense>, meta: NetworkMeta) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidSpec("network without layers".into()));
        }
        let mut dims = vec![layers[0].in_dim()];
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.bias.len() {
                return Err(Error::InvalidSpec(format!(
                    "layer {i}: {} weight rows but {} biases",
                    layer.weights.len(),
                    layer.bias.len()
                )));
            }
            let expected_in = *dims.last().unwrap();
            if layer.weights.iter().any(|row| row.len() != expected_in) {
                return Err(Error::InvalidSpec(format!(
                    "layer {i}: weight rows must have {expected_in} columns"
                )));
            }
            dims.push(layer.out_dim());
        }
        let spec = NetworkSpec::new(dims)?;
        let net = Network { spec, layers, meta };
        if !net.is_finite() {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.bias.iter().all(|v| v.is_finite())
                && l.weights.iter().flatten().all(|v| v.is_finite())
        })
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping every intermediate. Panics on a wrong input length.
    pub fn trace(&self, x: &[f64]) -> ForwardTrace {
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let u = layer.apply(&current);
            inputs.push(current);
            current = if i == last {
                u.clone()
            } else {
                u.iter().map(|v| v.max(0.0)).collect()
            };
            pre.push(u);
        }
        ForwardTrace { pre, inputs }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.logits(x))
    }

    /// Unchecked forward pass (panics on a wrong input length).
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut current = x.to_vec();
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        for (i, layer) in self.layers.iter().enumerate() {
            current = layer.apply(&current);
            if i != last {
                for v in &mut current {
                    *v = v.max(0.0);
                }
            }
        }
        current
    }

    /// Predicted class: `logit > 0` for single-logit heads, argmax otherwise
    /// (lowest index wins ties).
    pub fn predict(&self, x: &[f64]) -> usize {
        classify(&self.logits(x))
    }

    /// Gradient of logit `logit_index` with respect to the input.
    ///
    /// The ReLU derivative at a pre-activation of exactly zero is taken as 0.
    pub fn grad_input(&self, x: &[f64], logit_index: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if logit_index >= self.output_dim() {
            return Err(Error::InvalidArgument(format!(
                "logit index {logit_index} out of range for {} outputs",
                self.output_dim()
            )));
        }
        let mut seed = vec![0.0; self.output_dim()];
        seed[logit_index] = 1.0;
        Ok(self.backprop_input(&self.trace(x), &seed))
    }

    /// Vector-Jacobian product of the logits with `upstream` at a traced point.
    pub fn backprop_input(&self, trace: &ForwardTrace, upstream: &[f64]) -> Vec<f64> {
        let mut grad = upstream.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let mut next = vec![0.0; layer.in_dim()];
            for (row, g) in layer.weights.iter().zip(&grad) {
                if *g == 0.0 {
                    continue;
                }
                for (n, w) in next.iter_mut().zip(row) {
                    *n += g * w;
                }
            }
            if l > 0 {
                for (n, u) in next.iter_mut().zip(&trace.pre[l - 1]) {
                    if *u <= 0.0 {
                        *n = 0.0;
                    }
                }
            }
            grad = next;
        }
        grad
    }

    pub fn activation_pattern(&self, x: &[f64]) -> ActivationPattern {
        let trace = self.trace(x);
        let hidden = self.layers.len() - 1;
        ActivationPattern {
            bits: trace.pre[..hidden]
                .iter()
                .flat_map(|u| u.iter().map(|v| *v > 0.0))
                .collect(),
        }
    }

    /// Affine map of every logit on the activation region containing `x`.
    ///
    /// Built by composing layer maps with the region's activation masks, so it
    /// is independent of the backward pass used by [`Network::grad_input`].
    pub fn local_linear_map(&self, x: &[f64]) -> Result<Vec<LocalLinearMap>> {
        self.check_input(x)?;
        let trace = self.trace(x);
        let d = self.input_dim();
        // affine map of the current layer input: rows = units, cols = d
        let mut a: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut row = vec![0.0; d];
                row[i] = 1.0;
                row
            })
            .collect();
        let mut c = vec![0.0; d];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next_a = vec![vec![0.0; d]; layer.out_dim()];
            let mut next_c = layer.bias.clone();
            for (j, row) in layer.weights.iter().enumerate() {
                for (k, w) in row.iter().enumerate() {
                    if *w == 0.0 {
                        continue;
                    }
                    for (dst, src) in next_a[j].iter_mut().zip(&a[k]) {
                        *dst += w * src;
                    }
                    next_c[j] += w * c[k];
                }
            }
            if l != last {
                for (j, u) in trace.pre[l].iter().enumerate() {
                    if *u <= 0.0 {
                        next_a[j].iter_mut().for_each(|v| *v = 0.0);
                        next_c[j] = 0.0;
                    }
                }
            }
            a = next_a;
            c = next_c;
        }
        Ok(a
            .into_iter()
            .zip(c)
            .map(|(weights, bias)| LocalLinearMap { weights, bias })
            .collect())
    }

    /// Output of the penultimate layer h(x) (post-ReLU). For a network with
    /// no hidden layer this is x itself.
    pub fn penultimate(&self, x: &[f64]) -> Vec<f64> {
        let trace = self.trace(x);
        trace.inputs.last().expect("at least one layer").clone()
    }

    /// Jacobian of the penultimate output h with respect to the input,
    /// shape `h_dim × d`, i.e. the product of masked hidden weight matrices.
    pub fn penultimate_jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let trace = self.trace(x);
        let d = self.input_dim();
        let mut jac: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut row = vec![0.0; d];
                row[i] = 1.0;
                row
            })
            .collect();
        for (l, layer) in self.layers[..self.layers.len() - 1].iter().enumerate() {
            let mut next = vec![vec![0.0; d]; layer.out_dim()];
            for (j, row) in layer.weights.iter().enumerate() {
                if trace.pre[l][j] <= 0.0 {
                    continue;
                }
                for (k, w) in row.iter().enumerate() {
                    for (dst, src) in next[j].iter_mut().zip(&jac[k]) {
                        *dst += w * src;
                    }
                }
            }
            jac = next;
        }
        jac
    }

    /// Copy of this network with the top-layer weights replaced.
    pub fn with_top_weights(&self, weights: &[Vec<f64>]) -> Result<Self> {
        let mut layers = self.layers.clone();
        let top = layers.last_mut().expect("at least one layer");
        if weights.len() != top.weights.len()
            || weights.iter().zip(&top.weights).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::InvalidArgument("top-layer shape mismatch".into()));
        }
        top.weights = weights.to_vec();
        Network::from_layers(layers, self.meta.clone())
    }

    /// Content hash over spec and parameters, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for d in self.spec.dims() {
            hasher.update((*d as u64).to_le_bytes());
        }
        for layer in &self.layers {
            for v in layer.weights.iter().flatten().chain(&layer.bias) {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Class readout for a logit vector.
pub fn classify(logits: &[f64]) -> usize {
    if logits.len() == 1 {
        usize::from(logits[0] > 0.0)
    } else {
        let mut best = 0;
        for (i, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_layer(w: Vec<Vec<f64>>, b: Vec<f64>) -> Network {
        Network::from_layers(vec![Dense { weights: w, bias: b }], NetworkMeta::default()).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::new(vec![3]).is_err());
        assert!(NetworkSpec::new(vec![3, 0, 1]).is_err());
        let spec = NetworkSpec::new(vec![4, 8, 8, 1]).unwrap();
        assert_eq!(spec.hidden_neuron_count(), 16);
        assert!(spec.is_binary());
        assert_eq!(spec.num_classes(), 2);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let spec = NetworkSpec::new(vec![2, 4, 1]).unwrap();
        let a = init_network(&spec, 7);
        let b = init_network(&spec, 7);
        let c = init_network(&spec, 8);
        assert_eq!(a.layers, b.layers);
        assert_ne!(a.layers, c.layers);
    }

    #[test]
    fn init_respects_glorot_bound_and_zero_bias() {
        let spec = NetworkSpec::new(vec![3, 2, 1]).unwrap();
        for seed in 0..20 {
            let net = init_network(&spec, seed);
            for layer in net.layers() {
                assert!(layer.bias.iter().all(|b| *b == 0.0));
                let bound = glorot_bound(layer.in_dim(), layer.out_dim());
                let expected = (6.0 / (layer.in_dim() + layer.out_dim()) as f64).sqrt();
                assert_eq!(bound, expected);
                assert!(layer.weights.iter().flatten().all(|w| w.abs() <= bound));
            }
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::from_layers(
            vec![
                Dense {
                    weights: vec![vec![0.0; 3]; 4],
                    bias: vec![0.0; 4],
                },
                Dense {
                    weights: vec![vec![0.0; 4]],
                    bias: vec![0.0],
                },
            ],
            NetworkMeta::default(),
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0]);
        assert_eq!(crate::linalg::sigmoid(0.0), 0.5);
        assert!(net.activation_pattern(&[1.0, 2.0, 3.0]).bits.iter().all(|b| !b));
    }

    #[test]
    fn hand_affine_layer() {
        let net = single_layer(vec![vec![2.0, -1.0]], vec![0.5]);
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap(), vec![1.5]);
        assert_eq!(net.grad_input(&[3.0, -7.0], 0).unwrap(), vec![2.0, -1.0]);
        let maps = net.local_linear_map(&[0.0, 0.0]).unwrap();
        assert_eq!(maps[0].weights, vec![2.0, -1.0]);
        assert_eq!(maps[0].bias, 0.5);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = single_layer(vec![vec![2.0, -1.0]], vec![0.5]);
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(net.grad_input(&[1.0, 1.0], 1).is_err());
    }

    #[test]
    fn strict_activation_threshold() {
        // one hidden neuron u(x) = x
        let net = Network::from_layers(
            vec![
                Dense {
                    weights: vec![vec![1.0]],
                    bias: vec![0.0],
                },
                Dense {
                    weights: vec![vec![1.0]],
                    bias: vec![0.0],
                },
            ],
            NetworkMeta::default(),
        )
        .unwrap();
        assert_eq!(net.activation_pattern(&[1.0]).bits, vec![true]);
        assert_eq!(net.activation_pattern(&[-1.0]).bits, vec![false]);
        assert_eq!(net.activation_pattern(&[0.0]).bits, vec![false]);
        assert_eq!(net.grad_input(&[0.0], 0).unwrap(), vec![0.0]);
    }

    #[test]
    fn classify_readouts() {
        assert_eq!(classify(&[0.0]), 0);
        assert_eq!(classify(&[1e-300]), 1);
        assert_eq!(classify(&[0.1, 0.3, 0.3]), 1);
    }

    #[test]
    fn from_layers_rejects_bad_shapes() {
        let bad = vec![
            Dense {
                weights: vec![vec![1.0, 2.0]],
                bias: vec![0.0],
            },
            Dense {
                weights: vec![vec![1.0, 2.0]],
                bias: vec![0.0],
            },
        ];
        assert!(Network::from_layers(bad, NetworkMeta::default()).is_err());
        let nan = vec![Dense {
            weights: vec![vec![f64::NAN]],
            bias: vec![0.0],
        }];
        assert!(Network::from_layers(nan, NetworkMeta::default()).is_err());
    }
}
