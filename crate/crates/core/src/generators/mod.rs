//! Counterfactual search: minimum-cost elastic-net descent, minimum-radius
//! PGD and Stable Neighbor Search.

mod elastic_net;
mod pgd;
mod record;
mod score;
mod sns;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use elastic_net::{gen_elastic_net, ElasticNetConfig};
pub use pgd::{eps_grid, gen_pgd_min_eps, PgdConfig};
pub use record::{
    method_label, read_records, write_records, CounterfactualRecord, Method, RecordDraft,
};
pub use score::multiclass_score;
pub use sns::{gen_sns, gen_sns_traced, sns_objective, SnsConfig, SnsTrace};

use crate::nn::Network;

/// Magnitude of the one-time restart perturbation after a dead gradient.
pub const JITTER_MAGNITUDE: f64 = 1e-3;

/// Per-origin context: where the origin sits in its split and the seed for
/// any jitter, derived from the generating model and that position.
#[derive(Debug, Clone)]
pub struct GenContext {
    pub origin_index: usize,
    pub jitter_seed: u64,
}

impl GenContext {
    pub fn new(origin_index: usize) -> Self {
        Self {
            origin_index,
            jitter_seed: origin_index as u64,
        }
    }

    pub fn for_model(net: &Network, origin_index: usize) -> Self {
        let mut h = Sha256::new();
        h.update(net.fingerprint().as_bytes());
        h.update((origin_index as u64).to_le_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 8];
        seed.copy_from_slice(&digest[..8]);
        Self {
            origin_index,
            jitter_seed: u64::from_le_bytes(seed),
        }
    }
}

pub(crate) fn jitter(x: &[f64], ctx: &GenContext) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.jitter_seed);
    x.iter()
        .map(|v| v + JITTER_MAGNITUDE * (2.0 * rng.random::<f64>() - 1.0))
        .collect()
}
