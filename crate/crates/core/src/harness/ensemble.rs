//! Retrained model ensembles: leave-one-out data and shifted random seeds.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{leave_one_out_variants, Dataset};
use crate::error::{Error, Result};
use crate::nn::{init_network, train, Network, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Same initialization, one training row removed per member.
    Loo,
    /// Same data, initialization and shuffle seeds shifted per member.
    Rs,
}

impl EnsembleKind {
    pub fn key(self) -> &'static str {
        match self {
            EnsembleKind::Loo => "loo",
            EnsembleKind::Rs => "rs",
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnsembleKind::Loo => "LOO",
            EnsembleKind::Rs => "RS",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub count: usize,
    /// RS: member `k` (1-based) uses init seed `base_seed + k` and shuffle
    /// seed `config.seed + k`. LOO: seed of the removed-row draw.
    pub base_seed: u64,
}

/// Trains the ensemble members in parallel; member order is fixed by `k`.
///
/// LOO members start from `base`'s initialization seed and reuse `config`
/// unchanged, so removing the row is the only difference.
pub fn build_ensemble(
    base: &Network,
    train_set: &Dataset,
    spec: &EnsembleSpec,
    config: &TrainConfig,
) -> Result<Vec<Network>> {
    if spec.count == 0 {
        return Err(Error::Config("ensemble count must be >= 1".into()));
    }
    let net_spec = base.spec().clone();
    match spec.kind {
        EnsembleKind::Rs => (1..=spec.count as u64)
            .into_par_iter()
            .map(|k| {
                let cfg = TrainConfig {
                    seed: config.seed.wrapping_add(k),
                    ..config.clone()
                };
                let init = init_network(&net_spec, spec.base_seed.wrapping_add(k));
                train(&init, train_set, &cfg).map(|(n, _)| n)
            })
            .collect(),
        EnsembleKind::Loo => {
            if spec.count > train_set.len() {
                return Err(Error::Config(format!(
                    "LOO ensemble of {} exceeds {} training rows",
                    spec.count,
                    train_set.len()
                )));
            }
            let variants = leave_one_out_variants(train_set, spec.count, spec.base_seed)?;
            let init = init_network(&net_spec, base.meta.seed);
            variants
                .into_par_iter()
                .map(|(_, data)| train(&init, &data, config).map(|(n, _)| n))
                .collect()
        }
    }
}
