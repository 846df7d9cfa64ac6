//! Mini-batch Adam training with binary or categorical cross-entropy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::sigmoid;
use crate::nn::network::{classify, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl Default for AdamConfig {
    /// Keras defaults.
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Seeds the per-epoch shuffle. Initialization takes its own seed.
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 100,
            batch_size: 32,
            optimizer: AdamConfig::default(),
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be positive".into()));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && o.eps_hat > 0.0) {
            return Err(Error::Config("learning_rate and eps_hat must be positive".into()));
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return Err(Error::Config("beta1 and beta2 must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,accuracy\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.loss, e.accuracy));
        }
        out
    }
}

/// Cross-entropy loss and its gradient with respect to the logits.
fn loss_and_grad(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    if logits.len() == 1 {
        let z = logits[0];
        let y = label as f64;
        // softplus(z) - y z, computed stably
        let loss = z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        (loss, vec![sigmoid(z) - y])
    } else {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let loss = total.ln() + max - logits[label];
        let grad = exps
            .iter()
            .enumerate()
            .map(|(i, e)| e / total - if i == label { 1.0 } else { 0.0 })
            .collect();
        (loss, grad)
    }
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

/// Flattened per-layer parameter views: weights row-major then biases.
fn layer_len(net: &Network, l: usize) -> usize {
    let layer = &net.layers()[l];
    layer.in_dim() * layer.out_dim() + layer.out_dim()
}

/// Trains `net` on `dataset` and returns the trained copy with its loss log.
///
/// The only source of randomness is the epoch shuffle, drawn from ChaCha8
/// seeded with `config.seed` on stream `epoch + 1`, so identical inputs give
/// bitwise-identical parameters.
pub fn train(net: &Network, dataset: &Dataset, config: &TrainConfig) -> Result<(Network, TrainLog)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if dataset.feature_dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: dataset.feature_dim(),
        });
    }
    let classes = net.spec().num_classes();
    if let Some(bad) = dataset.labels().iter().find(|&&y| y >= classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for a {classes}-class network"
        )));
    }

    let mut trained = net.clone();
    trained.meta.dataset_fingerprint = Some(dataset.fingerprint().to_string());
    trained.meta.train_config = Some(config.clone());
    let mut log = TrainLog::default();
    if config.epochs == 0 {
        return Ok((trained, log));
    }

    let n_layers = trained.layers().len();
    let mut state = AdamState {
        m: (0..n_layers).map(|l| vec![0.0; layer_len(&trained, l)]).collect(),
        v: (0..n_layers).map(|l| vec![0.0; layer_len(&trained, l)]).collect(),
        step: 0,
    };
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let features = dataset.features();
    let labels = dataset.labels();

    for epoch in 0..config.epochs {
        if config.shuffle {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(epoch as u64 + 1);
            order.sort_unstable();
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            let mut grads: Vec<Vec<f64>> =
                (0..n_layers).map(|l| vec![0.0; layer_len(&trained, l)]).collect();
            for &i in batch {
                let trace = trained.trace(&features[i]);
                let (loss, dlogits) = loss_and_grad(trace.logits(), labels[i]);
                epoch_loss += loss;
                if classify(trace.logits()) == labels[i] {
                    correct += 1;
                }
                accumulate_param_grads(&trained, &trace, dlogits, &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().flatten().for_each(|g| *g *= scale);
            adam_step(&mut trained, &mut state, &grads, &config.optimizer);
        }
        let loss = epoch_loss / dataset.len() as f64;
        if !loss.is_finite() || !trained.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss or parameters at epoch {epoch}"
            )));
        }
        log.epochs.push(EpochStats {
            epoch,
            loss,
            accuracy: correct as f64 / dataset.len() as f64,
        });
    }
    Ok((trained, log))
}

fn accumulate_param_grads(
    net: &Network,
    trace: &crate::nn::network::ForwardTrace,
    dlogits: Vec<f64>,
    grads: &mut [Vec<f64>],
) {
    let mut delta = dlogits;
    for (l, layer) in net.layers().iter().enumerate().rev() {
        let input = &trace.inputs[l];
        let in_dim = layer.in_dim();
        let g = &mut grads[l];
        for (j, dj) in delta.iter().enumerate() {
            if *dj == 0.0 {
                continue;
            }
            let row = &mut g[j * in_dim..(j + 1) * in_dim];
            for (gw, x) in row.iter_mut().zip(input) {
                *gw += dj * x;
            }
            g[layer.out_dim() * in_dim + j] += dj;
        }
        if l == 0 {
            break;
        }
        let mut prev = vec![0.0; in_dim];
        for (row, dj) in layer.weights.iter().zip(&delta) {
            if *dj == 0.0 {
                continue;
            }
            for (p, w) in prev.iter_mut().zip(row) {
                *p += dj * w;
            }
        }
        for (p, u) in prev.iter_mut().zip(&trace.pre[l - 1]) {
            if *u <= 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }
}

fn adam_step(net: &mut Network, state: &mut AdamState, grads: &[Vec<f64>], cfg: &AdamConfig) {
    state.step += 1;
    let t = state.step;
    let lr_t = cfg.learning_rate * (1.0 - cfg.beta2.powi(t)).sqrt() / (1.0 - cfg.beta1.powi(t));
    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        let in_dim = layer.in_dim();
        let out_dim = layer.out_dim();
        let (m, v, g) = (&mut state.m[l], &mut state.v[l], &grads[l]);
        let mut update = |idx: usize, param: &mut f64| {
            m[idx] = cfg.beta1 * m[idx] + (1.0 - cfg.beta1) * g[idx];
            v[idx] = cfg.beta2 * v[idx] + (1.0 - cfg.beta2) * g[idx] * g[idx];
            *param -= lr_t * m[idx] / (v[idx].sqrt() + cfg.eps_hat);
        };
        for j in 0..out_dim {
            for k in 0..in_dim {
                update(j * in_dim + k, &mut layer.weights[j][k]);
            }
        }
        for j in 0..out_dim {
            update(out_dim * in_dim + j, &mut layer.bias[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_loss_gradient_matches_finite_difference() {
        for &(z, y) in &[(0.3, 1usize), (-2.0, 0), (5.0, 0), (-30.0, 1)] {
            let (_, g) = loss_and_grad(&[z], y);
            let h = 1e-6;
            let fd = (loss_and_grad(&[z + h], y).0 - loss_and_grad(&[z - h], y).0) / (2.0 * h);
            assert!((g[0] - fd).abs() < 1e-6, "z={z} y={y}");
        }
    }

    #[test]
    fn softmax_loss_gradient_matches_finite_difference() {
        let logits = [0.2, -1.0, 0.7];
        let (_, g) = loss_and_grad(&logits, 2);
        for i in 0..3 {
            let h = 1e-6;
            let mut up = logits;
            let mut down = logits;
            up[i] += h;
            down[i] -= h;
            let fd = (loss_and_grad(&up, 2).0 - loss_and_grad(&down, 2).0) / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
