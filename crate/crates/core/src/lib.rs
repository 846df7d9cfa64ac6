//! Counterfactual stability laboratory.
//!
//! Trains small fully-connected ReLU networks deterministically, generates
//! counterfactual examples (minimum-cost elastic-net search, minimum-radius
//! PGD and Stable Neighbor Search), measures how often those counterfactuals
//! are invalidated by near-duplicate retrained models, and numerically checks
//! the decision-boundary geometry and Lipschitz bounds that motivate SNS.
//!
//! Module map:
//!
//! - [`nn`]: network construction, Adam training, input gradients, activation
//!   patterns and region-local linear maps.
//! - [`data`]: CSV ingestion with per-column transforms, seeded splits,
//!   synthetic 2-D datasets and leave-one-out variants.
//! - [`generators`]: counterfactual search methods and their record type.
//! - [`geometry`]: boundary probes, distance computations, influence and the
//!   theorem verifiers, plus 2-D rasters.
//! - [`harness`]: retraining ensembles, invalidation metrics, experiment runner
//!   and report emitters.

// `!(v > 0.0)`-style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod generators;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod nn;

pub use error::{Error, Result};
