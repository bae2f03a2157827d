//! Forward network: tokenizer, node-edge attention and the pairwise head.
//!
//! For a pattern subgraph every member row is tokenized once. Each center
//! then attends over its neighbors: queries come from the center token
//! (joined with the connecting edge's features when the graph has them),
//! keys and values from the neighbor tokens, each through its own
//! linear + sigmoid map. Scores are the row sums of `Q ⊙ K`, normalized with
//! a softmax, and weight the value rows. The center embedding is
//! `tanh([aggregate ; own token])`.
//!
//! The head projects both embeddings with one shared linear + tanh layer,
//! takes the per-feature minimum and maximum of the pair and feeds
//! `[min ; max]` to a three-layer perceptron. Because min and max are
//! symmetric, swapping the centers yields exactly the same prediction.

mod config;

pub use config::{AttendOver, HiddenActivation, ModelConfig, Task, TokenizerArch};

use crate::error::{Error, Result};
use crate::graph::{Graph, PatternSubgraph};
use crate::tensor::{cosine_similarity, glorot_init, Dense, NodeId, Parameters, Tape};

pub mod names {
    pub const TOK_W1: &str = "tokenizer.w1";
    pub const TOK_B1: &str = "tokenizer.b1";
    pub const TOK_W2: &str = "tokenizer.w2";
    pub const TOK_B2: &str = "tokenizer.b2";
    pub const Q_W: &str = "attention.query.w";
    pub const Q_B: &str = "attention.query.b";
    pub const K_W: &str = "attention.key.w";
    pub const K_B: &str = "attention.key.b";
    pub const V_W: &str = "attention.value.w";
    pub const V_B: &str = "attention.value.b";
    pub const PROJ_W: &str = "projection.w";
    pub const PROJ_B: &str = "projection.b";
    pub const HEAD_W1: &str = "head.w1";
    pub const HEAD_B1: &str = "head.b1";
    pub const HEAD_W2: &str = "head.w2";
    pub const HEAD_B2: &str = "head.b2";
    pub const HEAD_W3: &str = "head.w3";
    pub const HEAD_B3: &str = "head.b3";
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: NodeId,
    b: NodeId,
}

/// Parameter nodes registered on one tape.
#[derive(Debug, Clone)]
pub struct Bound {
    tok1: Linear,
    tok2: Option<Linear>,
    query: Linear,
    key: Linear,
    value: Linear,
    proj: Linear,
    head: [Linear; 3],
}

/// Which member rows a center attends over, in member-row coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub target_row: usize,
    pub source_rows: Vec<usize>,
    /// One row per source (n × q); absent when the model has no edge features.
    pub edge_rows: Option<Dense>,
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardNodes {
    pub prediction: NodeId,
    pub z_i: NodeId,
    pub z_j: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub z_i: Vec<f64>,
    pub z_j: Vec<f64>,
    /// Cosine similarity of the two embeddings.
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Model { config })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// `(name, rows, cols, is_weight)` for every trainable matrix.
    pub fn param_shapes(&self) -> Vec<(&'static str, usize, usize, bool)> {
        use names::*;
        let c = &self.config;
        let (d, t, q) = (c.input_dim, c.token_dim, c.edge_dim);
        let (e, h1, h2) = (c.embedding_dim(), c.head_hidden[0], c.head_hidden[1]);
        let mut shapes = vec![(TOK_W1, t, d, true), (TOK_B1, 1, t, false)];
        if c.tokenizer == TokenizerArch::Deep {
            shapes.extend([(TOK_W2, t, t, true), (TOK_B2, 1, t, false)]);
        }
        shapes.extend([
            (Q_W, t, t + q, true),
            (Q_B, 1, t, false),
            (K_W, t, t, true),
            (K_B, 1, t, false),
            (V_W, t, t, true),
            (V_B, 1, t, false),
            (PROJ_W, e, e, true),
            (PROJ_B, 1, e, false),
            (HEAD_W1, h1, c.head_input_dim(), true),
            (HEAD_B1, 1, h1, false),
            (HEAD_W2, h2, h1, true),
            (HEAD_B2, 1, h2, false),
            (HEAD_W3, 1, h2, true),
            (HEAD_B3, 1, 1, false),
        ]);
        shapes
    }

    /// Glorot-uniform weights and zero biases. Each matrix draws from its
    /// own stream derived from `seed` and its position in the layout.
    pub fn init_params(&self, seed: u64) -> Result<Parameters> {
        let mut params = Parameters::new();
        for (k, (name, rows, cols, is_weight)) in self.param_shapes().into_iter().enumerate() {
            let value = if is_weight {
                let stream = seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                glorot_init(rows, cols, stream)?
            } else {
                Dense::zeros(rows, cols)
            };
            params.insert(name, value);
        }
        Ok(params)
    }

    /// Checks that `params` has exactly this model's layout.
    pub fn check_params(&self, params: &Parameters) -> Result<()> {
        let shapes = self.param_shapes();
        if params.len() != shapes.len() {
            return Err(Error::CheckpointMismatch(format!(
                "expected {} parameter matrices, found {}",
                shapes.len(),
                params.len()
            )));
        }
        for (name, rows, cols, _) in shapes {
            let p = params
                .get(name)
                .map_err(|_| Error::CheckpointMismatch(format!("missing parameter `{name}`")))?;
            if p.shape() != (rows, cols) {
                return Err(Error::CheckpointMismatch(format!(
                    "`{name}` is {}x{}, expected {rows}x{cols}",
                    p.rows(),
                    p.cols()
                )));
            }
        }
        Ok(())
    }

    pub fn bind(&self, params: &Parameters, tape: &mut Tape) -> Result<Bound> {
        use names::*;
        let mut lin = |w: &str, b: &str| -> Result<Linear> {
            Ok(Linear {
                w: tape.param(w, params.get(w)?),
                b: tape.param(b, params.get(b)?),
            })
        };
        let tok1 = lin(TOK_W1, TOK_B1)?;
        let tok2 = match self.config.tokenizer {
            TokenizerArch::Deep => Some(lin(TOK_W2, TOK_B2)?),
            TokenizerArch::Shallow => None,
        };
        Ok(Bound {
            tok1,
            tok2,
            query: lin(Q_W, Q_B)?,
            key: lin(K_W, K_B)?,
            value: lin(V_W, V_B)?,
            proj: lin(PROJ_W, PROJ_B)?,
            head: [lin(HEAD_W1, HEAD_B1)?, lin(HEAD_W2, HEAD_B2)?, lin(HEAD_W3, HEAD_B3)?],
        })
    }

    /// Row-wise tokenizer; output entries lie in [-1, 1].
    pub fn tokenize(&self, tape: &mut Tape, bound: &Bound, features: NodeId) -> Result<NodeId> {
        let cols = tape.value(features).cols();
        if cols != self.config.input_dim {
            return Err(Error::Contract(format!(
                "node features have {cols} columns, model expects {}",
                self.config.input_dim
            )));
        }
        let h = tape.affine(features, bound.tok1.w, bound.tok1.b)?;
        let h = match bound.tok2 {
            Some(second) => {
                let a = tape.relu(h);
                tape.affine(a, second.w, second.b)?
            }
            None => h,
        };
        Ok(tape.tanh(h))
    }

    /// Sources for `target` within `sub`, honoring the `attend_over` setting.
    pub fn neighborhood(&self, sub: &PatternSubgraph, target: usize) -> Result<Neighborhood> {
        let q = self.config.edge_dim;
        if sub.edge_feature_dim() != q {
            return Err(Error::Contract(format!(
                "pattern carries {} edge features, model expects {q}",
                sub.edge_feature_dim()
            )));
        }
        let target_row = sub
            .position(target)
            .ok_or_else(|| Error::Contract(format!("node {target} is not in the pattern")))?;
        let sources: Vec<usize> = match self.config.attend_over {
            AttendOver::Neighbors => sub.neighbors_in_subgraph(target)?,
            AttendOver::Members => {
                if target != sub.center_i && target != sub.center_j {
                    return Err(Error::Contract(format!("node {target} is not a center")));
                }
                let mut all: Vec<usize> = sub.members.iter().copied().filter(|&m| m != target).collect();
                all.sort_unstable();
                all
            }
        };
        let source_rows = sources
            .iter()
            .map(|&s| sub.position(s).expect("neighbors are members"))
            .collect();
        let edge_rows = (q > 0).then(|| {
            let mut rows = Dense::zeros(sources.len(), q);
            for (k, &s) in sources.iter().enumerate() {
                // members without a direct edge (attend-over members) get zeros
                if let Some(row) = sub.edge_feature_row(target, s) {
                    rows.row_mut(k).copy_from_slice(row);
                }
            }
            rows
        });
        Ok(Neighborhood {
            target_row,
            source_rows,
            edge_rows,
        })
    }

    /// Softmax-normalized attention weights (1 × n), or `None` for an empty neighborhood.
    pub fn attention_weights(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        tokens: NodeId,
        nb: &Neighborhood,
    ) -> Result<Option<NodeId>> {
        Ok(self.attend(tape, bound, tokens, nb)?.map(|(w, _)| w))
    }

    fn attend(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        tokens: NodeId,
        nb: &Neighborhood,
    ) -> Result<Option<(NodeId, NodeId)>> {
        let n = nb.source_rows.len();
        if n == 0 {
            return Ok(None);
        }
        let target = tape.gather_rows(tokens, &vec![nb.target_row; n])?;
        let query_in = match &nb.edge_rows {
            Some(rows) => {
                if rows.shape() != (n, self.config.edge_dim) {
                    return Err(Error::Contract("edge rows do not match the neighborhood".into()));
                }
                let e = tape.constant(rows.clone());
                tape.hconcat(&[target, e])?
            }
            None => target,
        };
        let q_lin = tape.affine(query_in, bound.query.w, bound.query.b)?;
        let q = tape.sigmoid(q_lin);
        let sources = tape.gather_rows(tokens, &nb.source_rows)?;
        let k_lin = tape.affine(sources, bound.key.w, bound.key.b)?;
        let k = tape.sigmoid(k_lin);
        let v_lin = tape.affine(sources, bound.value.w, bound.value.b)?;
        let v = tape.sigmoid(v_lin);
        let qk = tape.mul(q, k)?;
        let scores = tape.row_sum(qk);
        let scores = tape.transpose(scores);
        let weights = tape.row_softmax(scores);
        Ok(Some((weights, v)))
    }

    /// Center embedding `tanh([Σ w_k V_k ; token])` of width `2t`.
    pub fn nea_embed(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        tokens: NodeId,
        nb: &Neighborhood,
    ) -> Result<NodeId> {
        let own = tape.gather_rows(tokens, &[nb.target_row])?;
        let aggregate = match self.attend(tape, bound, tokens, nb)? {
            Some((weights, values)) => tape.matmul(weights, values)?,
            None => tape.constant(Dense::zeros(1, self.config.token_dim)),
        };
        let joined = tape.hconcat(&[aggregate, own])?;
        Ok(tape.tanh(joined))
    }

    pub fn predict_head(&self, tape: &mut Tape, bound: &Bound, z_i: NodeId, z_j: NodeId) -> Result<NodeId> {
        let e = self.config.embedding_dim();
        for z in [z_i, z_j] {
            if tape.value(z).shape() != (1, e) {
                return Err(Error::Contract(format!(
                    "embedding must be 1x{e}, found {:?}",
                    tape.value(z).shape()
                )));
            }
        }
        let ui = tape.affine(z_i, bound.proj.w, bound.proj.b)?;
        let ui = tape.tanh(ui);
        let uj = tape.affine(z_j, bound.proj.w, bound.proj.b)?;
        let uj = tape.tanh(uj);
        let lo = tape.min(ui, uj)?;
        let hi = tape.max(ui, uj)?;
        let mut h = tape.hconcat(&[lo, hi])?;
        for (k, layer) in bound.head.iter().enumerate() {
            h = tape.affine(h, layer.w, layer.b)?;
            if k < 2 {
                h = match self.config.head_activation {
                    HiddenActivation::Relu => tape.relu(h),
                    HiddenActivation::Tanh => tape.tanh(h),
                };
            }
        }
        Ok(match self.config.task {
            Task::Regression => h,
            Task::BinaryClassification => tape.sigmoid(h),
        })
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, sub: &PatternSubgraph) -> Result<ForwardNodes> {
        let x = tape.constant(sub.node_feature_slice.clone());
        let tokens = self.tokenize(tape, bound, x)?;
        let nb_i = self.neighborhood(sub, sub.center_i)?;
        let nb_j = self.neighborhood(sub, sub.center_j)?;
        let z_i = self.nea_embed(tape, bound, tokens, &nb_i)?;
        let z_j = self.nea_embed(tape, bound, tokens, &nb_j)?;
        let prediction = self.predict_head(tape, bound, z_i, z_j)?;
        Ok(ForwardNodes { prediction, z_i, z_j })
    }

    /// Forward pass with frozen parameters.
    pub fn predict(&self, params: &Parameters, sub: &PatternSubgraph) -> Result<Prediction> {
        let mut tape = Tape::new();
        let bound = self.bind(params, &mut tape)?;
        let out = self.forward(&mut tape, &bound, sub)?;
        let value = tape.scalar(out.prediction)?;
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("prediction evaluated to {value}")));
        }
        let z_i = tape.value(out.z_i).data().to_vec();
        let z_j = tape.value(out.z_j).data().to_vec();
        let cosine = cosine_similarity(&z_i, &z_j);
        Ok(Prediction { value, z_i, z_j, cosine })
    }

    /// Embedding of a single node attending over its full graph neighborhood.
    ///
    /// With the default settings this equals the embedding the node gets as
    /// a center of any pattern, since a center's neighbors are always members.
    pub fn embed_node(&self, params: &Parameters, graph: &Graph, node: usize) -> Result<Vec<f64>> {
        if node >= graph.node_count() {
            return Err(Error::Lookup(format!("node index {node}")));
        }
        if graph.edge_feature_dim() != self.config.edge_dim {
            return Err(Error::Contract(format!(
                "graph carries {} edge features, model expects {}",
                graph.edge_feature_dim(),
                self.config.edge_dim
            )));
        }
        let neighbors = graph.neighbors(node);
        let mut members = Vec::with_capacity(neighbors.len() + 1);
        members.push(node);
        members.extend_from_slice(neighbors);
        let edge_rows = graph.edge_features().map(|ef| {
            let rows: Vec<usize> = neighbors
                .iter()
                .map(|&v| graph.edge_index(node, v).expect("neighbor edge exists"))
                .collect();
            ef.select_rows(&rows)
        });
        let nb = Neighborhood {
            target_row: 0,
            source_rows: (1..members.len()).collect(),
            edge_rows,
        };
        let mut tape = Tape::new();
        let bound = self.bind(params, &mut tape)?;
        let x = tape.constant(graph.node_features().select_rows(&members));
        let tokens = self.tokenize(&mut tape, &bound, x)?;
        let z = self.nea_embed(&mut tape, &bound, tokens, &nb)?;
        Ok(tape.value(z).data().to_vec())
    }
}

#[cfg(test)]
mod tests;
