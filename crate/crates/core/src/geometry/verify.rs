//! Configured bundle of verifier sweeps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::prop1::{verify_prop1_sweep, Prop1SweepConfig};
use crate::geometry::report::VerifierReport;
use crate::geometry::theorem1::{verify_theorem1_sweep, Theorem1SweepConfig};
use crate::geometry::theorem2::{verify_theorem2_sweep, Theorem2SweepConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyCheck {
    Prop1,
    Theorem1,
    Theorem2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub checks: Vec<VerifyCheck>,
    pub prop1: Prop1SweepConfig,
    pub theorem1: Theorem1SweepConfig,
    pub theorem2: Theorem2SweepConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            checks: vec![VerifyCheck::Prop1, VerifyCheck::Theorem1, VerifyCheck::Theorem2],
            prop1: Prop1SweepConfig::default(),
            theorem1: Theorem1SweepConfig::default(),
            theorem2: Theorem2SweepConfig::default(),
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.checks.is_empty() {
            return Err(Error::Config("verify.checks is empty".into()));
        }
        for c in &self.checks {
            match c {
                VerifyCheck::Prop1 => self.prop1.validate()?,
                VerifyCheck::Theorem1 => self.theorem1.validate()?,
                VerifyCheck::Theorem2 => self.theorem2.validate()?,
            }
        }
        Ok(())
    }

    pub fn shift_seeds(&mut self, offset: u64) {
        self.prop1.seed = self.prop1.seed.wrapping_add(offset);
        self.theorem1.seed = self.theorem1.seed.wrapping_add(offset);
        self.theorem2.seed = self.theorem2.seed.wrapping_add(offset);
    }
}

/// Runs the configured checks in order. Theorem 1 yields two reports
/// (orthogonal and oblique pairs).
pub fn run_verification(config: &VerifyConfig) -> Result<Vec<VerifierReport>> {
    config.validate()?;
    let mut out = Vec::new();
    for c in &config.checks {
        match c {
            VerifyCheck::Prop1 => out.push(verify_prop1_sweep(&config.prop1)?),
            VerifyCheck::Theorem1 => {
                let (orth, obl) = verify_theorem1_sweep(&config.theorem1)?;
                out.push(orth);
                out.push(obl);
            }
            VerifyCheck::Theorem2 => out.push(verify_theorem2_sweep(&config.theorem2)?),
        }
    }
    Ok(out)
}
