//! Decision-boundary geometry of ReLU networks and numerical checks of the
//! distance, gradient and influence-stability results used by the
//! counterfactual stability analysis.

mod influence;
mod probe;
mod prop1;
mod raster;
mod report;
mod theorem1;
mod theorem2;
mod verify;

pub use influence::{distributional_influence, midpoint_grid, InfluenceResult, UNIFORM_PATH};
pub use probe::{
    discover_boundaries, distance_to_hyperplane, projection_on_piece, BoundaryProbe,
    DiscoveryConfig,
};
pub use prop1::{
    path_parameters, verify_prop1, verify_prop1_sweep, verify_prop1_with, GradientSource,
    Prop1SweepConfig, PROP1_SLACK, RADIAL_TOLERANCE,
};
pub use raster::{raster_2d, raster_pair, BBox, ClassGrid, GridKind, RasterSidecar};
pub use report::{VerifierReport, MAX_COUNTEREXAMPLES};
pub use theorem1::{
    boundary_cosine, check_theorem1_pair, construct_theorem1_point, lemma1_threshold,
    verify_theorem1_at, verify_theorem1_sweep, PairRegime, Theorem1Check, Theorem1SweepConfig,
    DISTANCE_SLACK, PARALLEL_COS,
};
pub use theorem2::{
    verify_theorem2_bound, verify_theorem2_sweep, verify_theorem2_with, Theorem2Options,
    Theorem2Outcome, Theorem2SweepConfig, K_SAFETY, THEOREM2_SLACK,
};
pub use verify::{run_verification, VerifyCheck, VerifyConfig};
