//! Stability of the sigmoid-composed distributional influence under
//! perturbations of the top-layer weights.
//!
//! For `g_w(z) = wᵀh(z) + b` and `χ(x; w) = E_t[σ′(g_w(t x)) J_h(t x)ᵀ w]`
//! the checked bound is
//! `‖χ(x; w) − χ(x; w′)‖ ≤ K [σ′(g_w(x)) ‖w − λ w′‖ + ½(‖w‖ + ½Δ)]`
//! with `λ = σ′(g_{w′}(x)) / σ′(g_w(x))`, `‖w − w′‖ ≤ Δ`, and `K` an upper
//! estimate of `‖J_h‖₂` over the path.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::influence::midpoint_grid;
use crate::geometry::report::VerifierReport;
use crate::linalg::{dot, median, norm2, sigmoid, sub};
use crate::nn::{init_network, Network, NetworkSpec};

pub const THEOREM2_SLACK: f64 = 1e-6;
pub const K_SAFETY: f64 = 1.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem2Options {
    /// Evenly spaced path points (both ends included) for the estimate of K.
    pub path_points: usize,
    pub seed: u64,
}

impl Default for Theorem2Options {
    fn default() -> Self {
        Self {
            path_points: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Outcome {
    pub report: VerifierReport,
    pub k: f64,
    pub margins: Vec<f64>,
    /// Margins with the ratio inverted, `λ = σ′(g_w(x)) / σ′(g_{w′}(x))`.
    pub alt_margins: Vec<f64>,
}

fn spectral_norm(jac: &[Vec<f64>]) -> f64 {
    let rows = jac.len();
    let cols = jac.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let m = DMatrix::from_fn(rows, cols, |i, j| jac[i][j]);
    m.singular_values().max()
}

fn dsigmoid(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

struct PathSample {
    hidden: Vec<f64>,
    /// `J_h`, shape `h × d`.
    jac: Vec<Vec<f64>>,
}

fn sigmoid_influence(samples: &[PathSample], w: &[f64], b: f64, d: usize) -> Vec<f64> {
    let mut acc = vec![0.0; d];
    for s in samples {
        let gain = dsigmoid(dot(w, &s.hidden) + b);
        for (row, wi) in s.jac.iter().zip(w) {
            for (a, j) in acc.iter_mut().zip(row) {
                *a += gain * wi * j;
            }
        }
    }
    acc.iter_mut().for_each(|v| *v /= samples.len() as f64);
    acc
}

pub fn verify_theorem2_bound(
    net: &Network,
    x: &[f64],
    delta_cap: f64,
    trials: usize,
    doi_samples: usize,
) -> Result<Theorem2Outcome> {
    verify_theorem2_with(net, x, delta_cap, trials, doi_samples, &Theorem2Options::default())
}

pub fn verify_theorem2_with(
    net: &Network,
    x: &[f64],
    delta_cap: f64,
    trials: usize,
    doi_samples: usize,
    options: &Theorem2Options,
) -> Result<Theorem2Outcome> {
    if net.output_dim() != 1 {
        return Err(Error::InvalidArgument("theorem2 needs a single-logit head".into()));
    }
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: x.len(),
        });
    }
    if !(delta_cap >= 0.0 && delta_cap.is_finite()) {
        return Err(Error::Config(format!("delta_cap must be >= 0, got {delta_cap}")));
    }
    if trials == 0 || doi_samples == 0 || options.path_points < 2 {
        return Err(Error::Config(
            "theorem2 needs trials, doi_samples >= 1 and path_points >= 2".into(),
        ));
    }
    let d = x.len();
    let at = |t: f64| -> Vec<f64> { x.iter().map(|v| t * v).collect() };
    let samples: Vec<PathSample> = midpoint_grid(doi_samples)
        .into_iter()
        .map(|t| {
            let p = at(t);
            PathSample {
                hidden: net.penultimate(&p),
                jac: net.penultimate_jacobian(&p),
            }
        })
        .collect();
    let n = options.path_points;
    let grid_max = (0..n)
        .map(|j| spectral_norm(&net.penultimate_jacobian(&at(j as f64 / (n - 1) as f64))))
        .fold(0.0, f64::max);
    let sample_max = samples.iter().map(|s| spectral_norm(&s.jac)).fold(0.0, f64::max);
    let k = K_SAFETY * grid_max.max(sample_max);

    let top = net.layers().last().expect("at least one layer");
    let w = top.weights[0].clone();
    let b = top.bias[0];
    let chi_w = sigmoid_influence(&samples, &w, b, d);
    let h_x = net.penultimate(x);
    let ds_w = dsigmoid(dot(&w, &h_x) + b);
    let c = 0.5 * (norm2(&w) + 0.5 * delta_cap);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut report = VerifierReport::new("theorem2");
    let mut margins = Vec::with_capacity(trials);
    let mut alt_margins = Vec::with_capacity(trials);
    for trial in 0..trials {
        // the first trial keeps w′ = w
        let w_prime: Vec<f64> = if trial == 0 || delta_cap == 0.0 {
            w.clone()
        } else {
            let mut u: Vec<f64> = (0..w.len()).map(|_| rng.sample(StandardNormal)).collect();
            let un = norm2(&u);
            let r = delta_cap * rng.random::<f64>();
            u.iter_mut().for_each(|v| *v *= r / un);
            w.iter().zip(&u).map(|(a, e)| a + e).collect()
        };
        let chi_wp = sigmoid_influence(&samples, &w_prime, b, d);
        let lhs = norm2(&sub(&chi_w, &chi_wp));
        let ds_wp = dsigmoid(dot(&w_prime, &h_x) + b);
        let rhs_for = |lambda: f64| {
            let diff: Vec<f64> = w.iter().zip(&w_prime).map(|(a, p)| a - lambda * p).collect();
            k * (ds_w * norm2(&diff) + c)
        };
        let rhs = rhs_for(ds_wp / ds_w);
        let margin = rhs + THEOREM2_SLACK - lhs;
        let alt_margin = rhs_for(ds_w / ds_wp) + THEOREM2_SLACK - lhs;
        margins.push(margin);
        alt_margins.push(alt_margin);
        report.record(margin >= 0.0, margin, || {
            json!({ "x": x, "w": w, "w_prime": w_prime, "lhs": lhs, "rhs": rhs, "k": k })
        });
    }
    report.details.insert("k".into(), json!(k));
    Ok(Theorem2Outcome {
        report,
        k,
        margins,
        alt_margins,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem2SweepConfig {
    pub spec: Vec<usize>,
    pub nets: usize,
    pub trials: usize,
    pub doi_samples: usize,
    pub path_points: usize,
    /// `Δ = delta_fraction · ‖w‖`.
    pub delta_fraction: f64,
    pub input_scale: f64,
    pub seed: u64,
}

impl Default for Theorem2SweepConfig {
    fn default() -> Self {
        Self {
            spec: vec![5, 16, 1],
            nets: 20,
            trials: 100,
            doi_samples: 50,
            path_points: 1000,
            delta_fraction: 0.5,
            input_scale: 2.0,
            seed: 0,
        }
    }
}

impl Theorem2SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let spec = NetworkSpec::new(self.spec.clone()).map_err(|e| Error::Config(e.to_string()))?;
        if spec.output_dim() != 1 {
            return Err(Error::Config("theorem2 sweep spec needs a single logit".into()));
        }
        if self.nets == 0 || self.trials == 0 || self.doi_samples == 0 || self.path_points < 2 {
            return Err(Error::Config(
                "theorem2 sweep needs nets, trials, doi_samples >= 1 and path_points >= 2".into(),
            ));
        }
        if !(self.delta_fraction >= 0.0) {
            return Err(Error::Config("delta_fraction must be >= 0".into()));
        }
        Ok(())
    }
}

fn quantiles(values: &mut [f64]) -> serde_json::Value {
    if values.is_empty() {
        return serde_json::Value::Null;
    }
    values.sort_by(f64::total_cmp);
    let at = |q: f64| values[((values.len() - 1) as f64 * q).round() as usize];
    json!({ "min": at(0.0), "p10": at(0.1), "median": median(values), "p90": at(0.9), "max": at(1.0) })
}

/// Random networks of `spec` with one Gaussian input each; summarizes the
/// margin distribution and the inverted-ratio variant in `details`.
pub fn verify_theorem2_sweep(config: &Theorem2SweepConfig) -> Result<VerifierReport> {
    config.validate()?;
    let spec = NetworkSpec::new(config.spec.clone())?;
    let outcomes: Vec<Result<Theorem2Outcome>> = (0..config.nets)
        .into_par_iter()
        .map(|k| {
            let seed = config.seed.wrapping_add(k as u64);
            let net = init_network(&spec, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2);
            let x: Vec<f64> = (0..spec.input_dim())
                .map(|_| config.input_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let w_norm = norm2(&net.layers().last().expect("layer").weights[0]);
            verify_theorem2_with(
                &net,
                &x,
                config.delta_fraction * w_norm,
                config.trials,
                config.doi_samples,
                &Theorem2Options {
                    path_points: config.path_points,
                    seed,
                },
            )
        })
        .collect();
    let mut report = VerifierReport::new("theorem2");
    let mut margins = Vec::new();
    let mut alt = Vec::new();
    let mut ks = Vec::new();
    for o in outcomes {
        let mut o = o?;
        o.report.details.remove("k");
        report.merge(o.report);
        margins.extend(o.margins);
        alt.extend(o.alt_margins);
        ks.push(o.k);
    }
    let alt_violations = alt.iter().filter(|m| **m < 0.0).count();
    report.details.insert("margin_quantiles".into(), quantiles(&mut margins));
    report.details.insert("k_quantiles".into(), quantiles(&mut ks));
    report.details.insert("inverted_ratio_violations".into(), json!(alt_violations));
    report.details.insert("inverted_ratio_margin_quantiles".into(), quantiles(&mut alt));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_weights_give_zero_lhs() {
        let net = init_network(&NetworkSpec::new(vec![3, 8, 1]).unwrap(), 4);
        let out = verify_theorem2_bound(&net, &[0.5, -1.0, 2.0], 0.0, 3, 10).unwrap();
        assert!(out.report.is_clean());
        assert!(out.margins.iter().all(|m| *m > 0.0));
    }

    #[test]
    fn multi_logit_head_is_rejected() {
        let net = init_network(&NetworkSpec::new(vec![3, 8, 2]).unwrap(), 4);
        assert!(verify_theorem2_bound(&net, &[0.5, -1.0, 2.0], 0.5, 3, 10).is_err());
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        assert!((spectral_norm(&[vec![3.0, 0.0], vec![0.0, -4.0]]) - 4.0).abs() < 1e-12);
    }
}
