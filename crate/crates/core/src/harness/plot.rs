//! Class and agreement rasters for a base model and retrained members.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{raster_2d, raster_pair, BBox, ClassGrid};
use crate::harness::config::ExperimentConfig;
use crate::harness::ensemble::{build_ensemble, EnsembleKind, EnsembleSpec};
use crate::harness::experiment::{generate_records, load_dataset, resolve_max_eps, select_origins, train_base};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    pub resolution: usize,
    /// Raster extent; `None` uses the data range widened by `padding`.
    pub bbox: Option<BBox>,
    pub padding: f64,
    /// Retrained members per ensemble kind to compare with the base.
    pub members: usize,
    /// Also emit origin/counterfactual coordinates for the enabled methods.
    pub overlay: bool,
}

impl Default for PlotConfig {
    fn default() -> Self {
        Self {
            resolution: 200,
            bbox: None,
            padding: 0.5,
            members: 1,
            overlay: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlotOutput {
    /// `(file stem, grid)` in emission order.
    pub grids: Vec<(String, ClassGrid)>,
    pub overlay: Option<Value>,
}

fn data_bbox(points: &[Vec<f64>], padding: f64) -> BBox {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in points {
        for k in 0..2 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    BBox {
        min: [min[0] - padding, min[1] - padding],
        max: [max[0] + padding, max[1] + padding],
    }
}

pub fn run_plot(config: &ExperimentConfig, plot: &PlotConfig) -> Result<PlotOutput> {
    if plot.resolution == 0 {
        return Err(Error::Config("plot.resolution must be >= 1".into()));
    }
    let (train_set, validation) = load_dataset(config).map_err(Error::in_stage("dataset"))?;
    if train_set.feature_dim() != 2 {
        return Err(Error::Config(format!(
            "plots need 2-D data, dataset has {} features",
            train_set.feature_dim()
        )));
    }
    let bbox = plot.bbox.unwrap_or_else(|| {
        let all: Vec<Vec<f64>> = train_set.features().iter().chain(validation.features()).cloned().collect();
        data_bbox(&all, plot.padding)
    });
    let (base, _) = train_base(config, &train_set).map_err(Error::in_stage("train"))?;
    let mut grids = vec![("class_base".to_string(), raster_2d(&base, &bbox, plot.resolution)?)];
    if plot.members > 0 {
        for (kind, seed) in [
            (EnsembleKind::Rs, config.model.init_seed),
            (EnsembleKind::Loo, config.ensembles.loo_seed),
        ] {
            let spec = EnsembleSpec {
                kind,
                count: plot.members,
                base_seed: seed,
            };
            let members = build_ensemble(&base, &train_set, &spec, &config.train)
                .map_err(Error::in_stage("ensemble"))?;
            for (k, m) in members.iter().enumerate() {
                let tag = format!("{}_{}", kind.key(), k + 1);
                grids.push((format!("class_{tag}"), raster_2d(m, &bbox, plot.resolution)?));
                grids.push((format!("agree_base_{tag}"), raster_pair(&base, m, &bbox, plot.resolution)?));
            }
        }
    }
    let overlay = if plot.overlay {
        let origins = select_origins(config, &base, &validation);
        let max_eps = resolve_max_eps(config, &train_set);
        let records = generate_records(config, &base, &validation, &origins, max_eps)
            .map_err(Error::in_stage("generate"))?;
        let points: Vec<Value> = records
            .iter()
            .filter(|r| r.success)
            .map(|r| json!({ "method": r.label(), "origin_index": r.origin_index, "origin": r.origin, "counterfactual": r.counterfactual }))
            .collect();
        Some(json!({ "bbox": bbox, "points": points }))
    } else {
        None
    };
    Ok(PlotOutput { grids, overlay })
}
