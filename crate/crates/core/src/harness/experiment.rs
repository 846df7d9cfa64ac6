//! End-to-end run: data, base model, counterfactuals, ensembles, metrics.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::data::{load_csv, load_schema, split, synth_2d, Dataset, SynthKind};
use crate::error::{Error, Result};
use crate::generators::{
    gen_elastic_net, gen_pgd_min_eps, gen_sns, method_label, CounterfactualRecord, GenContext,
    Method,
};
use crate::harness::config::{BaseMethod, DataSource, ExperimentConfig};
use crate::harness::ensemble::{build_ensemble, EnsembleKind, EnsembleSpec};
use crate::harness::report::{aggregate, evaluate_records, InvalidationReport, RecordEvaluation, ReportMeta};
use crate::linalg::{median, norm2};
use crate::nn::{init_network, train, Network, NetworkSpec, TrainLog};

/// Everything a run produces; the report is the canonical summary.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: InvalidationReport,
    pub records: Vec<CounterfactualRecord>,
    pub evaluations: Vec<RecordEvaluation>,
    pub base: Network,
    pub train_log: TrainLog,
    pub ensembles: Vec<(EnsembleKind, Vec<Network>)>,
    pub train_set: Dataset,
    pub validation_set: Dataset,
    pub origins: Vec<usize>,
    pub max_eps: f64,
}

/// Loads the configured dataset and splits it into train and validation.
pub fn load_dataset(config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let d = &config.dataset;
    let full = match d.source {
        DataSource::SynthBlobs => synth_2d(SynthKind::Blobs, d.n, d.noise, d.seed)?,
        DataSource::SynthRings => synth_2d(SynthKind::Rings, d.n, d.noise, d.seed)?,
        DataSource::Csv => {
            let (Some(path), Some(schema), Some(label)) = (&d.path, &d.schema, &d.label) else {
                return Err(Error::Config("csv source needs path, schema and label".into()));
            };
            let schema = load_schema(schema)?;
            load_csv(path, &schema.columns, label)?
        }
    };
    split(&full, d.train_frac, d.split_seed)
}

/// Network shape for the dataset: one logit for two classes.
pub fn model_spec(config: &ExperimentConfig, data: &Dataset) -> Result<NetworkSpec> {
    let classes = data.num_classes().max(2);
    let out = if classes == 2 { 1 } else { classes };
    let mut dims = vec![data.feature_dim()];
    dims.extend(&config.model.hidden);
    dims.push(out);
    NetworkSpec::new(dims).map_err(|e| Error::Config(e.to_string()))
}

pub fn train_base(config: &ExperimentConfig, train_set: &Dataset) -> Result<(Network, TrainLog)> {
    let spec = model_spec(config, train_set)?;
    train(&init_network(&spec, config.model.init_seed), train_set, &config.train)
}

/// Table rows in display order: each enabled base method followed by its
/// SNS refinement.
pub fn row_order(config: &ExperimentConfig) -> Vec<String> {
    let mut rows = Vec::new();
    for m in &config.methods.enabled {
        let method = generator_method(*m);
        rows.push(method_label(method, None));
        if config.methods.sns.enabled {
            rows.push(method_label(Method::Sns, Some(method)));
        }
    }
    rows
}

fn generator_method(m: BaseMethod) -> Method {
    match m {
        BaseMethod::MinL1 => Method::MinL1,
        BaseMethod::MinL2 => Method::MinL2,
        BaseMethod::Pgd => Method::MinEpsPgd,
    }
}

/// Validation indices whose base prediction is not the desired class, in
/// split order, capped at `max_origins`.
pub fn select_origins(config: &ExperimentConfig, base: &Network, validation: &Dataset) -> Vec<usize> {
    validation
        .features()
        .iter()
        .enumerate()
        .filter(|(_, x)| base.predict(x) != config.origins.desired_class)
        .map(|(i, _)| i)
        .take(config.origins.max_origins)
        .collect()
}

/// `max_eps` from the config, or the median ℓ2 norm of the training rows.
pub fn resolve_max_eps(config: &ExperimentConfig, train_set: &Dataset) -> f64 {
    config.methods.pgd.max_eps.unwrap_or_else(|| {
        let norms: Vec<f64> = train_set.features().iter().map(|x| norm2(x)).collect();
        median(&norms)
    })
}

/// All counterfactual records for `origins`, sorted by row then origin.
pub fn generate_records(
    config: &ExperimentConfig,
    base: &Network,
    validation: &Dataset,
    origins: &[usize],
    max_eps: f64,
) -> Result<Vec<CounterfactualRecord>> {
    let target = config.origins.desired_class;
    let sns_cfg = config.methods.sns.resolve(max_eps);
    let per_origin: Vec<Result<Vec<CounterfactualRecord>>> = origins
        .par_iter()
        .map(|&i| {
            let x = &validation.features()[i];
            let ctx = GenContext::for_model(base, i);
            let mut out = Vec::new();
            for m in &config.methods.enabled {
                let rec = match m {
                    BaseMethod::MinL1 => gen_elastic_net(base, x, target, &config.methods.min_l1, &ctx)?,
                    BaseMethod::MinL2 => gen_elastic_net(base, x, target, &config.methods.min_l2, &ctx)?,
                    BaseMethod::Pgd => {
                        let p = &config.methods.pgd;
                        gen_pgd_min_eps(base, x, target, max_eps, p.n_interp, p.max_steps, &ctx)?
                    }
                };
                if config.methods.sns.enabled && rec.success {
                    out.push(gen_sns(base, &rec, &sns_cfg)?);
                }
                out.push(rec);
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_origin {
        records.extend(r?);
    }
    let order = row_order(config);
    let rank = |r: &CounterfactualRecord| order.iter().position(|l| *l == r.label()).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (rank(r), r.origin_index));
    Ok(records)
}

pub fn build_ensembles(
    config: &ExperimentConfig,
    base: &Network,
    train_set: &Dataset,
) -> Result<Vec<(EnsembleKind, Vec<Network>)>> {
    let mut specs = Vec::new();
    if config.ensembles.loo.enabled {
        specs.push(EnsembleSpec {
            kind: EnsembleKind::Loo,
            count: config.ensembles.loo.count,
            base_seed: config.ensembles.loo_seed,
        });
    }
    if config.ensembles.rs.enabled {
        specs.push(EnsembleSpec {
            kind: EnsembleKind::Rs,
            count: config.ensembles.rs.count,
            base_seed: config.model.init_seed,
        });
    }
    specs
        .iter()
        .map(|s| build_ensemble(base, train_set, s, &config.train).map(|m| (s.kind, m)))
        .collect()
}

fn run_pipeline(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (train_set, validation_set) = load_dataset(config).map_err(Error::in_stage("dataset"))?;
    let (base, train_log) = train_base(config, &train_set).map_err(Error::in_stage("train"))?;
    if config.origins.desired_class >= base.spec().num_classes() {
        return Err(Error::Config(format!(
            "origins.desired_class {} is not a class of this dataset",
            config.origins.desired_class
        )));
    }
    let origins = select_origins(config, &base, &validation_set);
    let max_eps = resolve_max_eps(config, &train_set);
    let records = generate_records(config, &base, &validation_set, &origins, max_eps)
        .map_err(Error::in_stage("generate"))?;
    let ensembles = build_ensembles(config, &base, &train_set).map_err(Error::in_stage("ensemble"))?;
    let evaluations = evaluate_records(&records, &base, &ensembles).map_err(Error::in_stage("evaluate"))?;
    let meta = ReportMeta {
        dataset_fingerprint: train_set.fingerprint().to_string(),
        base_model: base.fingerprint(),
        model_spec: base.spec().dims().to_vec(),
        origin_count: origins.len(),
        ensemble_sizes: ensembles
            .iter()
            .map(|(k, m)| (k.key().to_string(), m.len()))
            .collect::<BTreeMap<_, _>>(),
        success_floor: config.report.success_floor,
        notes: vec![
            "origins are validation points whose base prediction is not the desired class".into(),
            "cost and IV statistics use successful records only; success_rate counts successes over origins".into(),
            "SNS rows refine the successful records of their base method".into(),
            "regression pools l2 cost against per-record IV over all rows and ensembles".into(),
            format!("pgd max_eps = {max_eps}"),
        ],
        config: serde_json::to_value(config)?,
    };
    let report = aggregate(&row_order(config), &records, &evaluations, origins.len(), meta);
    Ok(ExperimentOutput {
        report,
        records,
        evaluations,
        base,
        train_log,
        ensembles,
        train_set,
        validation_set,
        origins,
        max_eps,
    })
}

/// Runs the whole pipeline on a dedicated pool of `threads` workers
/// (`0` = rayon's default). Results do not depend on the thread count.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    config.validate()?;
    with_threads(threads, || run_pipeline(config))
}

/// Runs `f` inside a rayon pool with `threads` workers (`0` = default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}
