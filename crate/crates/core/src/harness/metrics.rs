//! Invalidation rate of a counterfactual under retraining and the
//! cost-versus-invalidation regression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::CounterfactualRecord;
use crate::nn::Network;

/// Fraction of `ensemble` members whose prediction at the counterfactual
/// differs from `base`'s prediction there.
pub fn invalidation_rate(
    record: &CounterfactualRecord,
    base: &Network,
    ensemble: &[Network],
) -> Result<f64> {
    if !record.success {
        return Err(Error::InvalidArgument(format!(
            "record {} is not a successful counterfactual",
            record.origin_index
        )));
    }
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    let x = &record.counterfactual;
    if x.len() != base.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: base.input_dim(),
            got: x.len(),
        });
    }
    let reference = base.predict(x);
    let flips = ensemble.iter().filter(|m| m.predict(x) != reference).count();
    Ok(flips as f64 / ensemble.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub r_squared: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares of IV on cost over `(cost, iv)` points with
/// `R² = 1 − SS_res / SS_tot`. Constant IV gives `R² = 0`.
pub fn regress_cost_iv(points: &[(f64, f64)]) -> Result<Regression> {
    if points.len() < 2 {
        return Err(Error::Numeric(format!(
            "regression needs at least 2 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numeric("zero variance in cost; regression undefined".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        let ss_res: f64 = points
            .iter()
            .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
            .sum();
        1.0 - ss_res / syy
    };
    Ok(Regression {
        r_squared,
        slope,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_unit_r_squared() {
        let r = regress_cost_iv(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((r.r_squared - 1.0).abs() < 1e-15);
        assert!((r.slope - 2.0).abs() < 1e-15 && (r.intercept - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_iv_gives_zero() {
        let r = regress_cost_iv(&[(1.0, 0.3), (2.0, 0.3), (5.0, 0.3)]).unwrap();
        assert_eq!(r.r_squared, 0.0);
        assert_eq!(r.slope, 0.0);
    }

    #[test]
    fn constant_cost_is_an_error() {
        assert!(regress_cost_iv(&[(1.0, 0.1), (1.0, 0.5)]).is_err());
        assert!(regress_cost_iv(&[(1.0, 0.1)]).is_err());
    }
}
