//! Stable Neighbor Search.
//!
//! Starting from a valid counterfactual `c`, ascend
//! `J(x′) = (1/G) Σ_{k=1..G} σ_target((k/G) · x′)`, the right-endpoint
//! Riemann sum of `∫₀¹ σ_target(t x′) dt`, with normalized gradient steps
//! projected onto the ℓ2 ball of radius δ around `c`. The returned point is
//! the iterate with the highest `J` among those still classified as the
//! target class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::record::{CounterfactualRecord, Method, RecordDraft};
use crate::generators::score::score_and_grad;
use crate::linalg::{axpy, norm2, project_l2_ball};
use crate::nn::Network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnsConfig {
    pub delta: f64,
    pub steps: usize,
    pub grid_points: usize,
    pub step_size: f64,
}

impl SnsConfig {
    /// Radius `0.8 · max_eps` with step `2 · radius / steps`.
    pub fn from_max_eps(max_eps: f64, steps: usize, grid_points: usize) -> Self {
        let delta = 0.8 * max_eps;
        Self {
            delta,
            steps,
            grid_points,
            step_size: 2.0 * delta / steps.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) || !(self.step_size > 0.0) {
            return Err(Error::Config("SNS needs delta >= 0 and step_size > 0".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::Config("SNS grid_points must be >= 2".into()));
        }
        Ok(())
    }
}

/// Path-averaged target score and its gradient.
pub fn sns_objective(net: &Network, x: &[f64], target: usize, grid_points: usize) -> (f64, Vec<f64>) {
    let g = grid_points as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; x.len()];
    for k in 1..=grid_points {
        let t = k as f64 / g;
        let scaled: Vec<f64> = x.iter().map(|v| t * v).collect();
        let (s, ds) = score_and_grad(net, &scaled, target);
        value += s;
        for (acc, d) in grad.iter_mut().zip(&ds) {
            *acc += t * d;
        }
    }
    grad.iter_mut().for_each(|v| *v /= g);
    (value / g, grad)
}

/// Per-step trace of the search, used by tests and diagnostics.
#[derive(Debug, Clone, Default)]
pub struct SnsTrace {
    /// Best feasible objective after each step (index 0 is the center).
    pub best_objective: Vec<f64>,
}

pub fn gen_sns(net: &Network, start: &CounterfactualRecord, config: &SnsConfig) -> Result<CounterfactualRecord> {
    gen_sns_traced(net, start, config).map(|(r, _)| r)
}

pub fn gen_sns_traced(
    net: &Network,
    start: &CounterfactualRecord,
    config: &SnsConfig,
) -> Result<(CounterfactualRecord, SnsTrace)> {
    config.validate()?;
    if !start.success {
        return Err(Error::InvalidArgument(
            "SNS needs a successful starting counterfactual".into(),
        ));
    }
    let center = &start.counterfactual;
    if center.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: center.len(),
        });
    }
    let target = start.target_class;
    let feasible = |p: &[f64]| net.predict(p) == target;

    let mut trace = SnsTrace::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut point = center.clone();
    let (mut value, mut grad) = sns_objective(net, &point, target, config.grid_points);
    if feasible(&point) {
        best = Some((value, point.clone()));
    }
    trace.best_objective.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0));

    let mut steps_taken = 0;
    for _ in 0..config.steps {
        let g = norm2(&grad);
        if g == 0.0 || config.delta == 0.0 {
            break;
        }
        point = project_l2_ball(&axpy(&point, config.step_size / g, &grad), center, config.delta);
        steps_taken += 1;
        (value, grad) = sns_objective(net, &point, target, config.grid_points);
        if feasible(&point) && best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, point.clone()));
        }
        trace.best_objective.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0));
    }

    let found = best.is_some();
    let counterfactual = best.map_or_else(|| center.clone(), |(_, p)| p);
    let record = CounterfactualRecord::build(
        net,
        RecordDraft {
            origin_index: start.origin_index,
            origin: start.origin.clone(),
            counterfactual,
            method: Method::Sns,
            base_method: Some(start.method),
            target_class: target,
            found,
            iterations_used: steps_taken,
            eps_used: None,
            jittered: false,
        },
    );
    Ok((record, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::record::RecordDraft;
    use crate::linalg::distance_l2;
    use crate::nn::{Dense, NetworkMeta};

    fn linear(w: Vec<f64>, b: f64) -> Network {
        Network::from_layers(
            vec![Dense {
                weights: vec![w],
                bias: vec![b],
            }],
            NetworkMeta::default(),
        )
        .unwrap()
    }

    fn seed_record(net: &Network, origin: Vec<f64>, cf: Vec<f64>) -> CounterfactualRecord {
        CounterfactualRecord::build(
            net,
            RecordDraft {
                origin_index: 0,
                origin,
                counterfactual: cf,
                method: Method::MinL2,
                base_method: None,
                target_class: 1,
                found: true,
                iterations_used: 0,
                eps_used: None,
                jittered: false,
            },
        )
    }

    #[test]
    fn linear_model_moves_to_ball_edge_along_weights() {
        let w = vec![3.0, 4.0];
        let net = linear(w.clone(), 0.0);
        let center = vec![0.2, 0.1];
        let start = seed_record(&net, vec![-1.0, -1.0], center.clone());
        let cfg = SnsConfig::from_max_eps(1.0, 200, 10);
        let out = gen_sns(&net, &start, &cfg).unwrap();
        let expected = [center[0] + cfg.delta * 0.6, center[1] + cfg.delta * 0.8];
        assert!(out.success);
        assert!(distance_l2(&out.counterfactual, &expected) <= cfg.step_size);
        assert_eq!(out.base_method, Some(Method::MinL2));
        assert_eq!(out.origin, start.origin);
    }

    #[test]
    fn zero_radius_returns_center() {
        let net = linear(vec![1.0, 1.0], 0.0);
        let start = seed_record(&net, vec![-1.0, -1.0], vec![0.3, 0.3]);
        let cfg = SnsConfig {
            delta: 0.0,
            steps: 50,
            grid_points: 10,
            step_size: 0.1,
        };
        let out = gen_sns(&net, &start, &cfg).unwrap();
        assert_eq!(out.counterfactual, start.counterfactual);
    }

    #[test]
    fn failed_start_is_rejected() {
        let net = linear(vec![1.0, 1.0], 0.0);
        let mut start = seed_record(&net, vec![-1.0, -1.0], vec![0.3, 0.3]);
        start.success = false;
        assert!(gen_sns(&net, &start, &SnsConfig::from_max_eps(1.0, 10, 10)).is_err());
    }

    #[test]
    fn grid_points_must_be_at_least_two() {
        let cfg = SnsConfig {
            delta: 1.0,
            steps: 10,
            grid_points: 1,
            step_size: 0.1,
        };
        assert!(cfg.validate().is_err());
    }
}
