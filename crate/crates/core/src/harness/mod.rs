//! Retraining ensembles, invalidation and cost metrics, the cost/IV
//! regression and the experiment pipeline that assembles them into a
//! report.

mod config;
mod ensemble;
mod experiment;
mod metrics;
mod plot;
mod report;

pub use config::{
    apply_override, deep_merge, parse_override, read_config_value, resolve_config, BaseMethod,
    DataSource, DatasetConfig, EnsembleSettings, EnsemblesConfig, ExperimentConfig,
    MethodsConfig, ModelConfig, OriginsConfig, ReportConfig, ReportFormat, SnsSearchConfig,
};
pub use ensemble::{build_ensemble, EnsembleKind, EnsembleSpec};
pub use experiment::{
    build_ensembles, generate_records, load_dataset, model_spec, resolve_max_eps, row_order,
    run_experiment, select_origins, train_base, with_threads, ExperimentOutput,
};
pub use plot::{run_plot, PlotConfig, PlotOutput};
pub use metrics::{invalidation_rate, regress_cost_iv, Regression};
pub use report::{
    aggregate, evaluate_records, report_emit, InvalidationReport, MethodRow, RecordEvaluation,
    RegressionSummary, ReportMeta, Stat, REPORT_SCHEMA_VERSION,
};
