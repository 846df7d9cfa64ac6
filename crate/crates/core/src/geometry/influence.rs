//! Expected input gradient over the straight path from the origin to `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Network;

/// Support of the averaging distribution.
pub const UNIFORM_PATH: &str = "uniform(0->x)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceResult {
    pub influence: Vec<f64>,
    pub doi_radius: String,
    pub sample_count: usize,
}

/// Midpoints `t_k = (k − ½)/samples`, `k = 1..=samples`.
pub fn midpoint_grid(samples: usize) -> Vec<f64> {
    (1..=samples)
        .map(|k| (k as f64 - 0.5) / samples as f64)
        .collect()
}

/// Mean of `∇f_target(t x)` over the midpoint grid on `[0, 1]`.
pub fn distributional_influence(
    net: &Network,
    x: &[f64],
    target_logit: usize,
    samples: usize,
) -> Result<InfluenceResult> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let mut acc = vec![0.0; x.len()];
    for t in midpoint_grid(samples) {
        let point: Vec<f64> = x.iter().map(|v| t * v).collect();
        let g = net.grad_input(&point, target_logit)?;
        acc.iter_mut().zip(&g).for_each(|(a, v)| *a += v);
    }
    acc.iter_mut().for_each(|v| *v /= samples as f64);
    Ok(InfluenceResult {
        influence: acc,
        doi_radius: UNIFORM_PATH.to_string(),
        sample_count: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Dense, NetworkMeta};

    #[test]
    fn linear_model_influence_is_the_weight() {
        let net = Network::from_layers(
            vec![Dense {
                weights: vec![vec![2.0, -3.0]],
                bias: vec![0.5],
            }],
            NetworkMeta::default(),
        )
        .unwrap();
        for s in [1, 7, 100] {
            let r = distributional_influence(&net, &[1.0, 4.0], 0, s).unwrap();
            assert_eq!(r.influence, vec![2.0, -3.0]);
            assert_eq!(r.sample_count, s);
        }
    }

    #[test]
    fn zero_samples_is_an_error() {
        let net = Network::from_layers(
            vec![Dense {
                weights: vec![vec![1.0]],
                bias: vec![0.0],
            }],
            NetworkMeta::default(),
        )
        .unwrap();
        assert!(distributional_influence(&net, &[1.0], 0, 0).is_err());
    }
}
