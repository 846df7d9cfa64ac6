//! Seeded splits, synthetic 2-D data and leave-one-out variants.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64`.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};

/// Seeded permutation split. The train part gets `round(n * train_frac)` rows.
pub fn split(dataset: &Dataset, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_frac must lie in (0, 1), got {train_frac}"
        )));
    }
    let n = dataset.len();
    let n_train = (n as f64 * train_frac).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "split of {n} rows at {train_frac} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = order.split_at(n_train);
    Ok((dataset.subset(train)?, dataset.subset(test)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Gaussian clusters centred at (-1, -1) (class 0) and (1, 1) (class 1).
    Blobs,
    /// Concentric annuli of radius 1 (class 0) and 2 (class 1).
    Rings,
}

pub const BLOB_CENTERS: [[f64; 2]; 2] = [[-1.0, -1.0], [1.0, 1.0]];

/// Two balanced classes in the plane; row `i` has label `i % 2`.
pub fn synth_2d(kind: SynthKind, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("synth_2d needs n >= 4, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise must be >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        let point = match kind {
            SynthKind::Blobs => {
                let c = BLOB_CENTERS[label];
                vec![c[0] + noise * g1, c[1] + noise * g2]
            }
            SynthKind::Rings => {
                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                let radius = (label + 1) as f64 + noise * g1;
                vec![radius * angle.cos(), radius * angle.sin()]
            }
        };
        features.push(point);
        labels.push(label);
    }
    Dataset::from_raw(features, labels)
}

/// Draws a pool of `pool_size` distinct training rows and returns, for each,
/// the training set with that row removed. Variant order follows the draw.
pub fn leave_one_out_variants(
    train: &Dataset,
    pool_size: usize,
    seed: u64,
) -> Result<Vec<(usize, Dataset)>> {
    let n = train.len();
    if pool_size > n {
        return Err(Error::InvalidArgument(format!(
            "pool size {pool_size} exceeds {n} training rows"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    index::sample(&mut rng, n, pool_size)
        .into_iter()
        .map(|i| Ok((i, train.without_row(i)?)))
        .collect()
}
