use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::SubgraphOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizerArch {
    /// linear(d→t) → ReLU → linear(t→t) → Tanh
    #[default]
    Deep,
    /// linear(d→t) → Tanh
    Shallow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    #[default]
    Regression,
    BinaryClassification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttendOver {
    /// Only members sharing an induced edge with the center.
    #[default]
    Neighbors,
    /// Every other member of the pattern.
    Members,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HiddenActivation {
    #[default]
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub token_dim: usize,
    pub edge_dim: usize,
    pub tokenizer: TokenizerArch,
    pub head_hidden: [usize; 2],
    pub head_activation: HiddenActivation,
    pub task: Task,
    pub attend_over: AttendOver,
    pub exclude_center_edge: bool,
}

impl ModelConfig {
    pub fn new(input_dim: usize, token_dim: usize, edge_dim: usize) -> Self {
        ModelConfig {
            input_dim,
            token_dim,
            edge_dim,
            tokenizer: TokenizerArch::Deep,
            head_hidden: [32, 16],
            head_activation: HiddenActivation::Relu,
            task: Task::Regression,
            attend_over: AttendOver::Neighbors,
            exclude_center_edge: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.token_dim == 0 {
            return Err(Error::Config(format!(
                "input_dim and token_dim must be positive (got {} and {})",
                self.input_dim, self.token_dim
            )));
        }
        if self.head_hidden.contains(&0) {
            return Err(Error::Config("head hidden sizes must be positive".into()));
        }
        Ok(())
    }

    /// Width of a center embedding: aggregated messages next to the center's own token.
    pub fn embedding_dim(&self) -> usize {
        2 * self.token_dim
    }

    /// Width of the head input: per-feature minima next to maxima.
    pub fn head_input_dim(&self) -> usize {
        2 * self.embedding_dim()
    }

    pub fn subgraph_options(&self) -> SubgraphOptions {
        SubgraphOptions {
            exclude_center_edge: self.exclude_center_edge,
        }
    }

    /// Hex SHA-256 of the compact JSON rendering.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
