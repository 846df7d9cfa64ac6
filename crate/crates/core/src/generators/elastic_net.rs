//! Minimum-cost counterfactuals under an elastic-net distance.
//!
//! Proximal gradient descent (ISTA) on
//! `c · max(f_other − f_target + κ, 0) + β‖x′ − x‖₁ + ‖x′ − x‖₂²`
//! with the trade-off constant `c` tuned by bisection across rounds.
//! `β = 1` yields the minimum-ℓ1 baseline, `β = 0` the minimum-ℓ2 one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::record::{CounterfactualRecord, Method, RecordDraft};
use crate::generators::score::validate_target;
use crate::generators::{jitter, GenContext};
use crate::linalg::{norm1, norm2, sub};
use crate::nn::Network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElasticNetConfig {
    pub beta: f64,
    /// Target-class probability required; κ = logit(confidence).
    pub confidence: f64,
    pub max_steps: usize,
    pub step_size: f64,
    pub initial_const: f64,
    pub search_steps: usize,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            confidence: 0.5,
            max_steps: 500,
            step_size: 0.01,
            initial_const: 1.0,
            search_steps: 6,
        }
    }
}

impl ElasticNetConfig {
    pub fn min_l1() -> Self {
        Self {
            beta: 1.0,
            step_size: 0.05,
            ..Self::default()
        }
    }

    pub fn min_l2() -> Self {
        Self::default()
    }

    pub fn method(&self) -> Method {
        if self.beta > 0.0 {
            Method::MinL1
        } else {
            Method::MinL2
        }
    }

    pub fn kappa(&self) -> f64 {
        let p = self.confidence;
        (p / (1.0 - p)).ln()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config("confidence must lie in (0, 1)".into()));
        }
        if self.beta < 0.0 || self.step_size <= 0.0 || self.initial_const <= 0.0 {
            return Err(Error::Config(
                "beta must be >= 0; step_size and initial_const > 0".into(),
            ));
        }
        if self.search_steps == 0 {
            return Err(Error::Config("search_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Signed margin `f_target − max_{j≠target} f_j` and its input gradient.
fn margin_and_grad(net: &Network, x: &[f64], target: usize) -> (f64, Vec<f64>) {
    let trace = net.trace(x);
    let logits = trace.logits();
    let (margin, upstream) = if logits.len() == 1 {
        let sign = if target == 1 { 1.0 } else { -1.0 };
        (sign * logits[0], vec![sign])
    } else {
        let mut other = if target == 0 { 1 } else { 0 };
        for (j, v) in logits.iter().enumerate() {
            if j != target && *v > logits[other] {
                other = j;
            }
        }
        let mut up = vec![0.0; logits.len()];
        up[target] = 1.0;
        up[other] = -1.0;
        (logits[target] - logits[other], up)
    };
    (margin, net.backprop_input(&trace, &upstream))
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Searches for the lowest elastic-net-cost point classified as `target`.
pub fn gen_elastic_net(
    net: &Network,
    x: &[f64],
    target: usize,
    config: &ElasticNetConfig,
    ctx: &GenContext,
) -> Result<CounterfactualRecord> {
    config.validate()?;
    validate_target(net, target)?;
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: x.len(),
        });
    }
    let kappa = config.kappa();
    let cost = |p: &[f64]| {
        let d = sub(p, x);
        config.beta * norm1(&d) + norm2(&d).powi(2)
    };

    let mut start = x.to_vec();
    let mut jittered = false;
    if norm2(&margin_and_grad(net, x, target).1) == 0.0 {
        start = jitter(x, ctx);
        jittered = true;
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0usize;
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut c = config.initial_const;
    let step = config.step_size;

    for _ in 0..config.search_steps {
        let mut point = start.clone();
        let mut round_success = false;
        for _ in 0..config.max_steps {
            iterations += 1;
            let (margin, grad_margin) = margin_and_grad(net, &point, target);
            let hinge_active = kappa - margin > 0.0;
            let next: Vec<f64> = point
                .iter()
                .zip(x)
                .zip(&grad_margin)
                .map(|((p, o), gm)| {
                    let mut g = 2.0 * (p - o);
                    if hinge_active {
                        g -= c * gm;
                    }
                    let z = p - step * g;
                    o + soft_threshold(z - o, step * config.beta)
                })
                .collect();
            point = next;
            if net.predict(&point) == target && margin_and_grad(net, &point, target).0 >= kappa {
                round_success = true;
                let value = cost(&point);
                if best.as_ref().is_none_or(|(b, _)| value < *b) {
                    best = Some((value, point.clone()));
                }
            }
        }
        if round_success {
            hi = hi.min(c);
            c = 0.5 * (lo + hi);
        } else {
            lo = lo.max(c);
            c = if hi.is_finite() { 0.5 * (lo + hi) } else { c * 10.0 };
        }
    }

    let found = best.is_some();
    let counterfactual = best.map_or_else(|| x.to_vec(), |(_, p)| p);
    Ok(CounterfactualRecord::build(
        net,
        RecordDraft {
            origin_index: ctx.origin_index,
            origin: x.to_vec(),
            counterfactual,
            method: config.method(),
            base_method: None,
            target_class: target,
            found,
            iterations_used: iterations,
            eps_used: None,
            jittered,
        },
    ))
}
