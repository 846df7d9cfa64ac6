//! Versioned JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::network::{Dense, Network, NetworkMeta};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerFile {
    /// Row-major `out × in`.
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub spec: Vec<usize>,
    pub layers: Vec<LayerFile>,
    pub meta: NetworkMeta,
}

impl From<&Network> for ModelFile {
    fn from(net: &Network) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            spec: net.spec().dims().to_vec(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerFile {
                    w: l.weights.clone(),
                    b: l.bias.clone(),
                })
                .collect(),
            meta: net.meta.clone(),
        }
    }
}

impl TryFrom<ModelFile> for Network {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported model format_version {}",
                file.format_version
            )));
        }
        let layers = file
            .layers
            .into_iter()
            .map(|l| Dense {
                weights: l.w,
                bias: l.b,
            })
            .collect();
        let net = Network::from_layers(layers, file.meta)?;
        if net.spec().dims() != file.spec.as_slice() {
            return Err(Error::Data(format!(
                "spec {:?} does not match layer shapes {:?}",
                file.spec,
                net.spec().dims()
            )));
        }
        Ok(net)
    }
}

pub fn model_to_json(net: &Network) -> String {
    serde_json::to_string_pretty(&ModelFile::from(net)).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<Network> {
    let file: ModelFile = serde_json::from_str(text)?;
    Network::try_from(file)
}

pub fn save_model(net: &Network, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(net)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
