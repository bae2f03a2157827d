//! JSON model checkpoints. Keys are sorted and floats use shortest
//! round-trip form, so identical parameters always give identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::io::{read_text, write_atomic};
use crate::model::{Model, ModelConfig};
use crate::tensor::{Dense, Parameters};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub config: ModelConfig,
    pub parameters: BTreeMap<String, Dense>,
}

impl Checkpoint {
    pub fn new(model: &Model, params: &Parameters) -> Result<Self> {
        model.check_params(params)?;
        Ok(Checkpoint {
            version: CHECKPOINT_VERSION,
            config_hash: model.config().config_hash(),
            config: model.config().clone(),
            parameters: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and checks version, config hash and parameter shapes.
    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::CheckpointMismatch(format!("unreadable checkpoint: {e}")))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointMismatch(format!(
                "version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        if ckpt.config.config_hash() != ckpt.config_hash {
            return Err(Error::CheckpointMismatch("config hash does not match the stored config".into()));
        }
        let (model, params) = ckpt.parts()?;
        model.check_params(&params)?;
        Ok(ckpt)
    }

    pub fn parts(&self) -> Result<(Model, Parameters)> {
        let model = Model::new(self.config.clone()).map_err(|e| Error::CheckpointMismatch(e.to_string()))?;
        let mut params = Parameters::new();
        for (k, v) in &self.parameters {
            params.insert(k.clone(), v.clone());
        }
        Ok((model, params))
    }

    /// Refuses graphs whose feature widths differ from the trained model's.
    pub fn check_graph(&self, graph: &Graph) -> Result<()> {
        if graph.feature_dim() != self.config.input_dim || graph.edge_feature_dim() != self.config.edge_dim {
            return Err(Error::CheckpointMismatch(format!(
                "graph has {} node and {} edge features, checkpoint expects {} and {}",
                graph.feature_dim(),
                graph.edge_feature_dim(),
                self.config.input_dim,
                self.config.edge_dim
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_json(&read_text(path)?)
    }
}
