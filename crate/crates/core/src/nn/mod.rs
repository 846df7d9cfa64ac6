//! Small fully-connected ReLU networks in 64-bit floating point.

mod io;
mod network;
mod train;

pub use io::{load_model, model_from_json, model_to_json, save_model, ModelFile, MODEL_FORMAT_VERSION};
pub use network::{
    classify, glorot_bound, init_network, ActivationPattern, Dense, ForwardTrace, LocalLinearMap,
    Network, NetworkMeta, NetworkSpec,
};
pub use train::{train, AdamConfig, EpochStats, TrainConfig, TrainLog};
