//! Experiment configuration: TOML or JSON, deep-merged over defaults, with
//! dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::generators::{ElasticNetConfig, PgdConfig, SnsConfig};
use crate::geometry::VerifyConfig;
use crate::harness::plot::PlotConfig;
use crate::nn::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    SynthBlobs,
    SynthRings,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DataSource,
    /// Synthetic sources: row count, noise and generator seed.
    pub n: usize,
    pub noise: f64,
    pub seed: u64,
    /// CSV source: table, JSON schema file and label column.
    pub path: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub label: Option<String>,
    pub train_frac: f64,
    pub split_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DataSource::SynthBlobs,
            n: 500,
            noise: 0.35,
            seed: 0,
            path: None,
            schema: None,
            label: None,
            train_frac: 0.8,
            split_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 16],
            init_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMethod {
    MinL1,
    MinL2,
    Pgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnsSearchConfig {
    pub enabled: bool,
    pub steps: usize,
    pub grid_points: usize,
    /// Ball radius as a fraction of the PGD `max_eps`.
    pub radius_factor: f64,
}

impl Default for SnsSearchConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            steps: 200,
            grid_points: 10,
            radius_factor: 0.8,
        }
    }
}

impl SnsSearchConfig {
    pub fn resolve(&self, max_eps: f64) -> SnsConfig {
        let delta = self.radius_factor * max_eps;
        SnsConfig {
            delta,
            steps: self.steps,
            grid_points: self.grid_points,
            step_size: 2.0 * delta / self.steps.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodsConfig {
    pub enabled: Vec<BaseMethod>,
    pub min_l1: ElasticNetConfig,
    pub min_l2: ElasticNetConfig,
    pub pgd: PgdConfig,
    pub sns: SnsSearchConfig,
}

impl Default for MethodsConfig {
    fn default() -> Self {
        Self {
            enabled: vec![BaseMethod::MinL1, BaseMethod::MinL2, BaseMethod::Pgd],
            min_l1: ElasticNetConfig::min_l1(),
            min_l2: ElasticNetConfig::min_l2(),
            pgd: PgdConfig::default(),
            sns: SnsSearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSettings {
    pub enabled: bool,
    pub count: usize,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            count: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsemblesConfig {
    /// Members use init seeds `model.init_seed + 1 ..= count`.
    pub rs: EnsembleSettings,
    pub loo: EnsembleSettings,
    /// Seed of the removed-row draw for LOO.
    pub loo_seed: u64,
}

impl Default for EnsemblesConfig {
    fn default() -> Self {
        Self {
            rs: EnsembleSettings::default(),
            loo: EnsembleSettings::default(),
            loo_seed: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OriginsConfig {
    pub desired_class: usize,
    pub max_origins: usize,
}

impl Default for OriginsConfig {
    fn default() -> Self {
        Self {
            desired_class: 1,
            max_origins: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Rows with a success rate below this are dashed in the text table.
    pub success_floor: f64,
    pub formats: Vec<ReportFormat>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            success_floor: 0.25,
            formats: vec![ReportFormat::Json, ReportFormat::Csv, ReportFormat::Text],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Added to every seed below (see [`ExperimentConfig::shifted`]).
    pub seed_offset: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub methods: MethodsConfig,
    pub ensembles: EnsemblesConfig,
    pub origins: OriginsConfig,
    pub report: ReportConfig,
    pub verify: VerifyConfig,
    pub plot: PlotConfig,
}

/// Recursively overlays `patch` onto `base`; objects merge key by key,
/// everything else replaces.
pub fn deep_merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses `key.path=value`. The value is read as JSON when possible
/// (numbers, booleans, arrays, quoted strings) and as a bare string
/// otherwise.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{text}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{text}` has an empty key")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    Ok((key.to_string(), value))
}

/// Sets an existing dotted path in `root`; unknown keys are config errors.
pub fn apply_override(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut slot = root;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| Error::Config(format!("override key `{key}` does not exist")))?;
    }
    *slot = value;
    Ok(())
}

/// Reads a TOML (`.toml`) or JSON file into a JSON value.
pub fn read_config_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    if is_toml {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Defaults, then `user` (if any), then `overrides`, deserialized into `T`.
pub fn resolve_config<T>(user: Option<Value>, overrides: &[String]) -> Result<T>
where
    T: Default + Serialize + for<'de> Deserialize<'de>,
{
    let mut root = serde_json::to_value(T::default())?;
    if let Some(u) = user {
        if !u.is_object() {
            return Err(Error::Config("config root must be a table/object".into()));
        }
        deep_merge(&mut root, u);
    }
    for o in overrides {
        let (k, v) = parse_override(o)?;
        apply_override(&mut root, &k, v)?;
    }
    serde_json::from_value(root).map_err(|e| Error::Config(e.to_string()))
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let user = path.map(read_config_value).transpose()?;
        let cfg: Self = resolve_config(user, overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Copy with `seed_offset` (plus `extra`) folded into every seed and the
    /// offset reset to zero.
    pub fn shifted(&self, extra: u64) -> Self {
        let off = self.seed_offset.wrapping_add(extra);
        let mut c = self.clone();
        c.dataset.seed = c.dataset.seed.wrapping_add(off);
        c.dataset.split_seed = c.dataset.split_seed.wrapping_add(off);
        c.model.init_seed = c.model.init_seed.wrapping_add(off);
        c.train.seed = c.train.seed.wrapping_add(off);
        c.ensembles.loo_seed = c.ensembles.loo_seed.wrapping_add(off);
        c.verify.shift_seeds(off);
        c.seed_offset = 0;
        c
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if !(d.train_frac > 0.0 && d.train_frac < 1.0) {
            return Err(Error::Config("dataset.train_frac must lie in (0, 1)".into()));
        }
        if d.source == DataSource::Csv && (d.path.is_none() || d.schema.is_none() || d.label.is_none()) {
            return Err(Error::Config(
                "csv datasets need dataset.path, dataset.schema and dataset.label".into(),
            ));
        }
        if self.model.hidden.contains(&0) {
            return Err(Error::Config("model.hidden sizes must be positive".into()));
        }
        self.train.validate()?;
        self.methods.min_l1.validate()?;
        self.methods.min_l2.validate()?;
        let p = &self.methods.pgd;
        if p.n_interp == 0 || p.max_steps == 0 || p.max_eps.is_some_and(|e| !(e > 0.0)) {
            return Err(Error::Config(
                "methods.pgd needs n_interp, max_steps >= 1 and max_eps > 0".into(),
            ));
        }
        let s = &self.methods.sns;
        if s.steps == 0 || s.grid_points < 2 || !(s.radius_factor >= 0.0) {
            return Err(Error::Config(
                "methods.sns needs steps >= 1, grid_points >= 2, radius_factor >= 0".into(),
            ));
        }
        for e in [&self.ensembles.rs, &self.ensembles.loo] {
            if e.enabled && e.count == 0 {
                return Err(Error::Config("enabled ensembles need count >= 1".into()));
            }
        }
        if self.origins.max_origins == 0 {
            return Err(Error::Config("origins.max_origins must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.report.success_floor) {
            return Err(Error::Config("report.success_floor must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn partial_tables_keep_section_defaults() {
        let user = json!({ "methods": { "min_l1": { "max_steps": 10 } } });
        let cfg: ExperimentConfig = resolve_config(Some(user), &[]).unwrap();
        assert_eq!(cfg.methods.min_l1.max_steps, 10);
        assert_eq!(cfg.methods.min_l1.beta, 1.0);
    }

    #[test]
    fn overrides_win_and_must_exist() {
        let cfg: ExperimentConfig =
            resolve_config(None, &["train.epochs=3".into(), "dataset.source=synth_rings".into()])
                .unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.dataset.source, DataSource::SynthRings);
        let err = resolve_config::<ExperimentConfig>(None, &["train.epoch=3".into()]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let user = json!({ "model": { "hiden": [3] } });
        assert!(resolve_config::<ExperimentConfig>(Some(user), &[]).is_err());
    }

    #[test]
    fn shift_moves_every_seed() {
        let cfg = ExperimentConfig {
            seed_offset: 10,
            ..Default::default()
        };
        let s = cfg.shifted(5);
        assert_eq!(s.dataset.seed, 15);
        assert_eq!(s.model.init_seed, 15);
        assert_eq!(s.ensembles.loo_seed, 17);
        assert_eq!(s.seed_offset, 0);
    }
}
