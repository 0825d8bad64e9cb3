use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{InputNorm, KanEdge, KanNetwork, KanSpec};
use crate::error::{KanError, Result};

pub const CHECKPOINT_VERSION: &str = "kanele-ckpt-v1";

/// JSON model checkpoint (`kanele-ckpt-v1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub spec: KanSpec,
    pub seed: u64,
    pub input: InputNorm,
    pub layers: Vec<LayerState>,
    /// Free-form record of the run configuration that produced the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerState {
    pub scale: f64,
    pub edges: Vec<KanEdge>,
}

impl Checkpoint {
    pub fn from_network(net: &KanNetwork, config: Option<serde_json::Value>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION.to_string(),
            spec: net.spec.clone(),
            seed: net.seed,
            input: net.norm.clone(),
            layers: net
                .layers
                .iter()
                .map(|l| LayerState {
                    scale: l.scale,
                    edges: l.edges.clone(),
                })
                .collect(),
            config,
        }
    }

    pub fn into_network(self) -> Result<KanNetwork> {
        if self.version != CHECKPOINT_VERSION {
            return Err(KanError::schema(
                "version",
                format!("expected {CHECKPOINT_VERSION}, found {}", self.version),
            ));
        }
        let mut net = KanNetwork::zeros(&self.spec, self.seed)?;
        if self.layers.len() != net.layers.len() {
            return Err(KanError::schema(
                "layers",
                format!("{} layers for {} in dims", self.layers.len(), net.layers.len()),
            ));
        }
        for (l, (layer, state)) in net.layers.iter_mut().zip(self.layers).enumerate() {
            if state.edges.len() != layer.edges.len() {
                return Err(KanError::schema(
                    format!("layers[{l}].edges"),
                    format!("expected {} edges, found {}", layer.edges.len(), state.edges.len()),
                ));
            }
            for (e, edge) in state.edges.iter().enumerate() {
                if edge.coeffs.len() != layer.basis.len() {
                    return Err(KanError::schema(
                        format!("layers[{l}].edges[{e}].coeffs"),
                        format!("expected {} coefficients", layer.basis.len()),
                    ));
                }
            }
            layer.scale = state.scale;
            layer.edges = state.edges;
        }
        let width = net.input_width();
        if self.input.mean.len() != width || self.input.std.len() != width {
            return Err(KanError::schema("input", format!("expected {width} features")));
        }
        if !(self.input.gain.is_finite() && self.input.gain > 0.0) {
            return Err(KanError::schema("input.gain", "must be positive"));
        }
        net.set_normalization(self.input.mean.clone(), self.input.std.clone())
            .map_err(|e| KanError::schema("input.std", e.to_string()))?;
        net.norm = self.input;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            KanError::schema(path, e.into_inner().to_string())
        })
    }

    /// SHA-256 of the serialized checkpoint, recorded in compiled graphs.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| KanError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KanError::io(path, e))?;
        Self::from_json(&text)
    }
}
