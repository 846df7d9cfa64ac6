//! Linear pieces of a ReLU decision boundary and their construction
//! from ray searches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, scale};
use crate::nn::{ActivationPattern, Network};

/// Hyperplane `{x : normal · x + offset = 0}` carrying the decision boundary
/// inside the activation region `pattern`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProbe {
    pub pattern: ActivationPattern,
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl BoundaryProbe {
    pub fn new(pattern: ActivationPattern, normal: Vec<f64>, offset: f64) -> Self {
        Self {
            pattern,
            normal,
            offset,
        }
    }

    /// Hyperplane without a region (empty pattern), e.g. for hand-built tests.
    pub fn plane(normal: Vec<f64>, offset: f64) -> Self {
        Self::new(ActivationPattern { bits: Vec::new() }, normal, offset)
    }

    /// Boundary piece of a single-logit network in the region containing
    /// `point`: the region's local linear map of the logit.
    pub fn at(net: &Network, point: &[f64]) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::InvalidArgument(
                "boundary probes need a single-logit network".into(),
            ));
        }
        let map = net.local_linear_map(point)?.remove(0);
        Ok(Self::new(net.activation_pattern(point), map.weights, map.bias))
    }

    pub fn signed_value(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) + self.offset
    }

    fn normal_norm(&self) -> Result<f64> {
        let n = norm2(&self.normal);
        if n > 0.0 {
            Ok(n)
        } else {
            Err(Error::DegenerateBoundaries("zero boundary normal".into()))
        }
    }

    /// Orthogonal projection of `x` onto the hyperplane.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.normal_norm()?;
        Ok(axpy(x, -self.signed_value(x) / (n * n), &self.normal))
    }

    /// Same hyperplane with the normal flipped, if needed, so that `x` lies
    /// on its non-negative side.
    pub fn oriented_toward(&self, x: &[f64]) -> Self {
        if self.signed_value(x) < 0.0 {
            Self::new(self.pattern.clone(), scale(&self.normal, -1.0), -self.offset)
        } else {
            self.clone()
        }
    }
}

/// `|n·x + offset| / ‖n‖₂`.
pub fn distance_to_hyperplane(x: &[f64], probe: &BoundaryProbe) -> Result<f64> {
    if x.len() != probe.normal.len() {
        return Err(Error::DimensionMismatch {
            expected: probe.normal.len(),
            got: x.len(),
        });
    }
    Ok(probe.signed_value(x).abs() / probe.normal_norm()?)
}

/// Whether the projection of `x` onto the probe's hyperplane lies in the
/// probe's activation region, i.e. on the actual decision boundary piece.
pub fn projection_on_piece(net: &Network, x: &[f64], probe: &BoundaryProbe) -> bool {
    match probe.project(x) {
        Ok(p) => net.activation_pattern(&p) == probe.pattern,
        Err(_) => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub directions: usize,
    pub radius: f64,
    /// Coarse scan resolution along each ray before bisection.
    pub scan_steps: usize,
    pub tolerance: f64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            directions: 32,
            radius: 4.0,
            scan_steps: 400,
            tolerance: 1e-10,
        }
    }
}

/// Finds decision-boundary pieces around `x` by casting random rays,
/// bisecting the first class change on each to `tolerance`, and reading the
/// pattern at the bracket midpoint. Distinct patterns only, in discovery
/// order.
pub fn discover_boundaries(
    net: &Network,
    x: &[f64],
    config: &DiscoveryConfig,
    seed: u64,
) -> Result<Vec<BoundaryProbe>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_class = net.predict(x);
    let mut found: Vec<BoundaryProbe> = Vec::new();
    for _ in 0..config.directions {
        let mut dir: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm2(&dir);
        if n == 0.0 {
            continue;
        }
        dir.iter_mut().for_each(|v| *v /= n);
        let at = |s: f64| axpy(x, s, &dir);
        let ds = config.radius / config.scan_steps as f64;
        let mut lo = 0.0;
        let mut hi = None;
        for k in 1..=config.scan_steps {
            let s = k as f64 * ds;
            if net.predict(&at(s)) != base_class {
                hi = Some(s);
                break;
            }
            lo = s;
        }
        let Some(mut hi) = hi else { continue };
        while hi - lo > config.tolerance {
            let mid = 0.5 * (lo + hi);
            if net.predict(&at(mid)) == base_class {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = at(0.5 * (lo + hi));
        let probe = BoundaryProbe::at(net, &mid)?;
        if norm2(&probe.normal) == 0.0 {
            continue;
        }
        if !found.iter().any(|p| p.pattern == probe.pattern) {
            found.push(probe);
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_projection_distance() {
        let probe = BoundaryProbe::plane(vec![3.0, 4.0], 0.0);
        assert!((distance_to_hyperplane(&[1.0, 0.0], &probe).unwrap() - 0.6).abs() < 1e-15);
        let on = BoundaryProbe::plane(vec![1.0, -1.0], 0.5);
        assert_eq!(distance_to_hyperplane(&[0.0, 0.5], &on).unwrap(), 0.0);
    }

    #[test]
    fn zero_normal_is_an_error() {
        let probe = BoundaryProbe::plane(vec![0.0, 0.0], 1.0);
        assert!(distance_to_hyperplane(&[1.0, 0.0], &probe).is_err());
    }

    #[test]
    fn orientation_flips_sign() {
        let probe = BoundaryProbe::plane(vec![1.0, 0.0], 0.0);
        let o = probe.oriented_toward(&[-2.0, 0.0]);
        assert_eq!(o.normal, vec![-1.0, 0.0]);
        assert!(o.signed_value(&[-2.0, 0.0]) > 0.0);
        let p = probe.project(&[-2.0, 5.0]).unwrap();
        assert_eq!(p, vec![0.0, 5.0]);
    }
}
