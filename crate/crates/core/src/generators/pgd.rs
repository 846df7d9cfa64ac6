//! Minimum-radius PGD: ℓ2-ball PGD on the target score at increasing radii.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::record::{CounterfactualRecord, Method, RecordDraft};
use crate::generators::score::{score_and_grad, validate_target};
use crate::generators::{jitter, GenContext};
use crate::linalg::{axpy, norm2, project_l2_ball};
use crate::nn::Network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgdConfig {
    /// Largest ball radius. `None` means the median ℓ2 norm of the training
    /// points, resolved by the harness.
    pub max_eps: Option<f64>,
    pub n_interp: usize,
    pub max_steps: usize,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            max_eps: None,
            n_interp: 10,
            max_steps: 100,
        }
    }
}

/// Radii tried in order: `max_eps · k / n_interp` for `k = 1..=n_interp`.
pub fn eps_grid(max_eps: f64, n_interp: usize) -> Vec<f64> {
    (1..=n_interp)
        .map(|k| max_eps * k as f64 / n_interp as f64)
        .collect()
}

/// Runs PGD at each radius of the grid and returns the first success.
pub fn gen_pgd_min_eps(
    net: &Network,
    x: &[f64],
    target: usize,
    max_eps: f64,
    n_interp: usize,
    max_steps: usize,
    ctx: &GenContext,
) -> Result<CounterfactualRecord> {
    validate_target(net, target)?;
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: x.len(),
        });
    }
    if !(max_eps > 0.0) || n_interp == 0 || max_steps == 0 {
        return Err(Error::Config(
            "PGD needs max_eps > 0, n_interp >= 1 and max_steps >= 1".into(),
        ));
    }

    let mut start = x.to_vec();
    let mut jittered = false;
    if norm2(&score_and_grad(net, x, target).1) == 0.0 {
        start = jitter(x, ctx);
        jittered = true;
    }

    let mut iterations = 0;
    for eps in eps_grid(max_eps, n_interp) {
        let step = 2.0 * eps / max_steps as f64;
        let mut point = project_l2_ball(&start, x, eps);
        for _ in 0..max_steps {
            iterations += 1;
            let (_, grad) = score_and_grad(net, &point, target);
            let g = norm2(&grad);
            if g == 0.0 {
                break;
            }
            point = project_l2_ball(&axpy(&point, step / g, &grad), x, eps);
        }
        if net.predict(&point) == target {
            return Ok(CounterfactualRecord::build(
                net,
                RecordDraft {
                    origin_index: ctx.origin_index,
                    origin: x.to_vec(),
                    counterfactual: point,
                    method: Method::MinEpsPgd,
                    base_method: None,
                    target_class: target,
                    found: true,
                    iterations_used: iterations,
                    eps_used: Some(eps),
                    jittered,
                },
            ));
        }
    }
    Ok(CounterfactualRecord::build(
        net,
        RecordDraft {
            origin_index: ctx.origin_index,
            origin: x.to_vec(),
            counterfactual: x.to_vec(),
            method: Method::MinEpsPgd,
            base_method: None,
            target_class: target,
            found: false,
            iterations_used: iterations,
            eps_used: None,
            jittered,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
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

    #[test]
    fn grid_is_increasing_and_ends_at_max() {
        let g = eps_grid(1.0, 10);
        assert_eq!(g.len(), 10);
        assert_eq!(g[9], 1.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn succeeds_at_first_radius_past_the_distance() {
        // boundary x1 + x2 = 0, origin at distance 0.3 - 1e-9
        let w = vec![1.0, 1.0];
        let net = linear(w, 0.0);
        let dist = 0.3 - 1e-9;
        let s = dist / 2f64.sqrt();
        let x = [-s, -s];
        let rec = gen_pgd_min_eps(&net, &x, 1, 1.0, 10, 100, &GenContext::new(0)).unwrap();
        assert!(rec.success);
        assert_eq!(rec.eps_used, Some(eps_grid(1.0, 10)[2]));
        assert!(distance_l2(&rec.counterfactual, &x) <= rec.eps_used.unwrap() + 1e-9);
    }

    #[test]
    fn fails_when_boundary_is_out_of_reach() {
        let net = linear(vec![1.0, 0.0], 0.0);
        let rec = gen_pgd_min_eps(&net, &[-2.0, 0.0], 1, 1.0, 10, 50, &GenContext::new(0)).unwrap();
        assert!(!rec.success);
        assert_eq!(rec.eps_used, None);
    }
}
