use crate::error::{Error, Result};
use crate::linalg::sigmoid;
use crate::nn::Network;

fn check_target(net: &Network, target: usize) -> Result<()> {
    let classes = net.spec().num_classes();
    if target >= classes {
        return Err(Error::InvalidArgument(format!(
            "target class {target} out of range for {classes} classes"
        )));
    }
    Ok(())
}

fn score_from_logits(logits: &[f64], target: usize) -> f64 {
    if logits.len() == 1 {
        let s = sigmoid(logits[0]);
        if target == 1 {
            s
        } else {
            sigmoid(-logits[0])
        }
    } else {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        (logits[target] - max).exp() / total
    }
}

/// Probability the network assigns to `target`: sigmoid readout for a
/// single logit, softmax otherwise.
pub fn multiclass_score(net: &Network, x: &[f64], target: usize) -> Result<f64> {
    check_target(net, target)?;
    let logits = net.forward(x)?;
    Ok(score_from_logits(&logits, target))
}

/// Score and its input gradient. Panics on bad dimensions; callers validate.
pub(crate) fn score_and_grad(net: &Network, x: &[f64], target: usize) -> (f64, Vec<f64>) {
    let trace = net.trace(x);
    let logits = trace.logits();
    let score = score_from_logits(logits, target);
    let upstream = if logits.len() == 1 {
        let s = sigmoid(logits[0]);
        let ds = s * (1.0 - s);
        vec![if target == 1 { ds } else { -ds }]
    } else {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let p: Vec<f64> = exps.iter().map(|e| e / total).collect();
        (0..logits.len())
            .map(|j| p[target] * (if j == target { 1.0 } else { 0.0 } - p[j]))
            .collect()
    };
    (score, net.backprop_input(&trace, &upstream))
}

pub(crate) fn validate_target(net: &Network, target: usize) -> Result<()> {
    check_target(net, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Dense, NetworkMeta};

    fn linear(w: Vec<Vec<f64>>, b: Vec<f64>) -> Network {
        Network::from_layers(vec![Dense { weights: w, bias: b }], NetworkMeta::default()).unwrap()
    }

    #[test]
    fn sigmoid_readout_symmetry() {
        let net = linear(vec![vec![1.0, 0.0]], vec![0.0]);
        assert_eq!(multiclass_score(&net, &[0.0, 3.0], 0).unwrap(), 0.5);
        assert_eq!(multiclass_score(&net, &[0.0, 3.0], 1).unwrap(), 0.5);
        assert!(multiclass_score(&net, &[0.0, 3.0], 2).is_err());
    }

    #[test]
    fn softmax_uniform_for_equal_logits() {
        let net = linear(vec![vec![0.0; 2]; 3], vec![0.4; 3]);
        for t in 0..3 {
            let s = multiclass_score(&net, &[1.0, -1.0], t).unwrap();
            assert!((s - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_logit_softmax_equals_sigmoid_of_difference() {
        // f(x) = w·x + b as one logit, or as logits (0, w·x + b)
        let w = vec![0.7, -1.3];
        let b = 0.25;
        let single = linear(vec![w.clone()], vec![b]);
        let pair = linear(vec![vec![0.0, 0.0], w], vec![0.0, b]);
        for x in [[0.1, 0.2], [-3.0, 1.0], [5.0, -4.0], [0.0, 0.0]] {
            for t in 0..2 {
                let a = multiclass_score(&single, &x, t).unwrap();
                let c = multiclass_score(&pair, &x, t).unwrap();
                assert!((a - c).abs() <= 1e-12, "{a} vs {c}");
            }
        }
    }

    #[test]
    fn score_gradient_matches_finite_difference() {
        let single = linear(vec![vec![0.7, -1.3]], vec![0.25]);
        let multi = linear(vec![vec![0.3, 0.1], vec![-0.5, 0.9], vec![0.2, -0.4]], vec![0.1, 0.0, -0.2]);
        for (net, targets) in [(&single, 0..2), (&multi, 0..3)] {
            for t in targets {
                let x = [0.4, -0.6];
                let (_, g) = score_and_grad(net, &x, t);
                for i in 0..2 {
                    let h = 1e-6;
                    let mut up = x;
                    let mut down = x;
                    up[i] += h;
                    down[i] -= h;
                    let fd = (multiclass_score(net, &up, t).unwrap()
                        - multiclass_score(net, &down, t).unwrap())
                        / (2.0 * h);
                    assert!((fd - g[i]).abs() < 1e-8);
                }
            }
        }
    }
}
