//! Gradient norm versus radial directional derivative along the path from
//! the origin: `‖∇f(x′)‖ ≥ |∇f(x′)ᵀx′| / ‖x‖` for `x′ = t x`, `t ∈ (0, 1]`.
//!
//! The inequality itself holds for any vector standing in for the gradient,
//! so each sample also checks the analytic radial derivative against a
//! difference quotient of the network output taken inside the same
//! activation region. A wrong gradient shows up there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::report::VerifierReport;
use crate::linalg::{dot, norm2};
use crate::nn::{init_network, ForwardTrace, Network, NetworkSpec};

pub const PROP1_SLACK: f64 = 1e-9;
/// Relative tolerance of the radial-derivative consistency check.
pub const RADIAL_TOLERANCE: f64 = 1e-6;
const RADIAL_STEP: f64 = 1e-4;

/// Where the verifier takes its gradients from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientSource {
    #[default]
    Exact,
    /// Test-only fault: backpropagates through the complement of the ReLU
    /// mask. Used as a negative control for the verifiers.
    FlippedReluMask,
}

impl GradientSource {
    pub fn gradient(self, net: &Network, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            GradientSource::Exact => net.grad_input(x, 0),
            GradientSource::FlippedReluMask => Ok(flipped_mask_gradient(net, &net.trace(x))),
        }
    }
}

fn flipped_mask_gradient(net: &Network, trace: &ForwardTrace) -> Vec<f64> {
    let layers = net.layers();
    let mut grad = vec![1.0];
    for (l, layer) in layers.iter().enumerate().rev() {
        let mut next = vec![0.0; layer.in_dim()];
        for (row, g) in layer.weights.iter().zip(&grad) {
            for (n, w) in next.iter_mut().zip(row) {
                *n += g * w;
            }
        }
        if l > 0 {
            for (n, u) in next.iter_mut().zip(&trace.pre[l - 1]) {
                if *u > 0.0 {
                    *n = 0.0;
                }
            }
        }
        grad = next;
    }
    grad
}

/// Path parameters `t_k = k / trials`, `k = 1..=trials`.
pub fn path_parameters(trials: usize) -> Vec<f64> {
    (1..=trials).map(|k| k as f64 / trials as f64).collect()
}

pub fn verify_prop1(net: &Network, x: &[f64], trials: usize) -> Result<VerifierReport> {
    verify_prop1_with(net, x, &path_parameters(trials), GradientSource::Exact)
}

/// Checks the inequality and the radial-derivative consistency at each
/// `x′ = t x` for the given path parameters.
pub fn verify_prop1_with(
    net: &Network,
    x: &[f64],
    ts: &[f64],
    source: GradientSource,
) -> Result<VerifierReport> {
    if ts.is_empty() {
        return Err(Error::Config("prop1 needs trials >= 1".into()));
    }
    if net.output_dim() != 1 {
        return Err(Error::InvalidArgument("prop1 checks a single-logit network".into()));
    }
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: x.len(),
        });
    }
    let mut report = VerifierReport::new("prop1");
    let x_norm = norm2(x);
    if x_norm == 0.0 {
        report.bump("skipped_zero_x", ts.len() as u64);
        return Ok(report);
    }
    let f = |p: &[f64]| net.logits(p)[0];
    for &t in ts {
        let xp: Vec<f64> = x.iter().map(|v| t * v).collect();
        let grad = source.gradient(net, &xp)?;
        let radial = dot(&grad, &xp);
        let lhs = norm2(&grad);
        let rhs = radial.abs() / x_norm;
        let ineq_margin = lhs + PROP1_SLACK - rhs;

        let pattern = net.activation_pattern(&xp);
        let f0 = f(&xp);
        let mut consistency = None;
        for r in [1.0 + RADIAL_STEP, 1.0 - RADIAL_STEP] {
            let shifted: Vec<f64> = xp.iter().map(|v| r * v).collect();
            if net.activation_pattern(&shifted) == pattern {
                let quotient = (f(&shifted) - f0) / (r - 1.0);
                let tol = RADIAL_TOLERANCE * (1.0 + radial.abs());
                consistency = Some((tol - (quotient - radial).abs(), quotient));
                break;
            }
        }
        if consistency.is_none() {
            report.bump("consistency_skipped", 1);
        }
        let margin = consistency.map_or(ineq_margin, |(m, _)| ineq_margin.min(m));
        let passed = ineq_margin >= 0.0 && consistency.is_none_or(|(m, _)| m >= 0.0);
        report.record(passed, margin, || {
            json!({
                "x": x, "t": t, "lhs": lhs, "rhs": rhs,
                "radial_analytic": radial,
                "radial_difference": consistency.map(|(_, q)| q),
            })
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prop1SweepConfig {
    pub specs: Vec<Vec<usize>>,
    /// Number of (net, x) pairs; each contributes `trials` path samples.
    pub pairs: usize,
    pub trials: usize,
    pub input_scale: f64,
    pub gradient: GradientSource,
    pub seed: u64,
}

impl Default for Prop1SweepConfig {
    fn default() -> Self {
        Self {
            specs: vec![vec![2, 16, 1], vec![5, 16, 1], vec![10, 64, 32, 1]],
            pairs: 100,
            trials: 10,
            input_scale: 2.0,
            gradient: GradientSource::Exact,
            seed: 0,
        }
    }
}

impl Prop1SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.pairs == 0 || self.specs.is_empty() {
            return Err(Error::Config("prop1 sweep needs trials, pairs and specs >= 1".into()));
        }
        for s in &self.specs {
            let spec = NetworkSpec::new(s.clone()).map_err(|e| Error::Config(e.to_string()))?;
            if spec.output_dim() != 1 {
                return Err(Error::Config("prop1 sweep specs need a single logit".into()));
            }
        }
        Ok(())
    }
}

/// Random networks (cycling through `specs`) and Gaussian inputs, with the
/// path parameters drawn uniformly from `(0, 1]`.
pub fn verify_prop1_sweep(config: &Prop1SweepConfig) -> Result<VerifierReport> {
    config.validate()?;
    let parts: Vec<Result<VerifierReport>> = (0..config.pairs)
        .into_par_iter()
        .map(|k| {
            let seed = config.seed.wrapping_add(k as u64);
            let spec = NetworkSpec::new(config.specs[k % config.specs.len()].clone())?;
            let net = init_network(&spec, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            let x: Vec<f64> = (0..spec.input_dim())
                .map(|_| config.input_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let ts: Vec<f64> = (0..config.trials).map(|_| 1.0 - rng.random::<f64>()).collect();
            verify_prop1_with(&net, &x, &ts, config.gradient)
        })
        .collect();
    let mut report = VerifierReport::new("prop1");
    for p in parts {
        report.merge(p?);
    }
    Ok(report)
}
