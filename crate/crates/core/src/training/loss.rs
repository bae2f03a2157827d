//! The three-term hybrid loss, as plain arithmetic and on a tape.
//!
//! `total = alpha * supervised + beta * cosine + gamma * cosine_pred`, summed
//! in that order in both forms so they agree bit for bit. Unlabeled patterns
//! only carry the prediction-vs-cosine term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Task;
use crate::tensor::{cosine_similarity, NodeId, Tape};

use super::TrainConfig;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before any log.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub supervised: f64,
    pub cosine: f64,
    pub cosine_pred: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.supervised.is_finite() && self.cosine.is_finite() && self.cosine_pred.is_finite()
    }
}

/// Cosine similarity of two embeddings; 0 (with a warning) if either is zero.
pub fn cosine_embedding_target(z_i: &[f64], z_j: &[f64]) -> f64 {
    let zero = |z: &[f64]| z.iter().all(|&x| x == 0.0);
    if zero(z_i) || zero(z_j) {
        log::warn!("zero-norm embedding, cosine target set to 0");
        return 0.0;
    }
    cosine_similarity(z_i, z_j)
}

pub fn check_label(label: f64, task: Task) -> Result<()> {
    match task {
        Task::BinaryClassification if label != 0.0 && label != 1.0 => Err(Error::InvalidArgument(format!(
            "classification label {label} is not 0 or 1"
        ))),
        Task::Regression if !label.is_finite() => {
            Err(Error::InvalidArgument(format!("regression label {label} is not finite")))
        }
        _ => Ok(()),
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn cosine_prob(y_tilde: f64) -> f64 {
    clamp_prob(0.5 * y_tilde + 0.5)
}

fn bce(p: f64, target: f64) -> f64 {
    let p = clamp_prob(p);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Scalar form of the hybrid loss.
pub fn composite_loss(prediction: f64, y_tilde: f64, label: Option<f64>, cfg: &TrainConfig) -> Result<LossBreakdown> {
    let cosine_pred = match cfg.task {
        Task::Regression => (prediction - y_tilde).powi(2),
        Task::BinaryClassification => bce(prediction, cosine_prob(y_tilde)),
    };
    let Some(y) = label else {
        return Ok(LossBreakdown {
            total: cfg.gamma * cosine_pred,
            supervised: 0.0,
            cosine: 0.0,
            cosine_pred,
        });
    };
    check_label(y, cfg.task)?;
    let (supervised, cosine) = match cfg.task {
        Task::Regression => ((prediction - y).powi(2), (y_tilde - y).powi(2)),
        Task::BinaryClassification => (bce(prediction, y), bce(cosine_prob(y_tilde), y)),
    };
    Ok(LossBreakdown {
        total: cfg.alpha * supervised + cfg.beta * cosine + cfg.gamma * cosine_pred,
        supervised,
        cosine,
        cosine_pred,
    })
}

/// Loss nodes recorded on a tape; label terms are absent for unlabeled patterns.
#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    pub total: NodeId,
    pub supervised: Option<NodeId>,
    pub cosine: Option<NodeId>,
    pub cosine_pred: NodeId,
    pub y_tilde: NodeId,
}

impl LossNodes {
    pub fn breakdown(&self, tape: &Tape) -> Result<LossBreakdown> {
        let opt = |n: Option<NodeId>| n.map_or(Ok(0.0), |n| tape.scalar(n));
        Ok(LossBreakdown {
            total: tape.scalar(self.total)?,
            supervised: opt(self.supervised)?,
            cosine: opt(self.cosine)?,
            cosine_pred: tape.scalar(self.cosine_pred)?,
        })
    }
}

fn tape_bce(tape: &mut Tape, p: NodeId, target: NodeId) -> Result<NodeId> {
    let p = tape.clamp(p, PROB_EPS, 1.0 - PROB_EPS);
    let log_p = tape.ln(p);
    let neg = tape.scale(p, -1.0);
    let q = tape.offset(neg, 1.0);
    let log_q = tape.ln(q);
    let neg_t = tape.scale(target, -1.0);
    let one_minus_t = tape.offset(neg_t, 1.0);
    let a = tape.mul(target, log_p)?;
    let b = tape.mul(one_minus_t, log_q)?;
    let s = tape.add(a, b)?;
    Ok(tape.scale(s, -1.0))
}

fn tape_cosine_prob(tape: &mut Tape, y_tilde: NodeId) -> NodeId {
    let half = tape.scale(y_tilde, 0.5);
    let shifted = tape.offset(half, 0.5);
    tape.clamp(shifted, PROB_EPS, 1.0 - PROB_EPS)
}

/// Records the hybrid loss for one pattern. The label enters the tape only
/// when present, so unlabeled patterns have no path to it at all.
pub fn composite_loss_on_tape(
    tape: &mut Tape,
    prediction: NodeId,
    z_i: NodeId,
    z_j: NodeId,
    label: Option<f64>,
    cfg: &TrainConfig,
) -> Result<LossNodes> {
    let y_tilde = tape.cosine(z_i, z_j)?;
    let cosine_pred = match cfg.task {
        Task::Regression => {
            let d = tape.sub(prediction, y_tilde)?;
            tape.square(d)
        }
        Task::BinaryClassification => {
            let target = tape_cosine_prob(tape, y_tilde);
            tape_bce(tape, prediction, target)?
        }
    };
    let weighted_pred = tape.scale(cosine_pred, cfg.gamma);
    let Some(y) = label else {
        return Ok(LossNodes {
            total: weighted_pred,
            supervised: None,
            cosine: None,
            cosine_pred,
            y_tilde,
        });
    };
    check_label(y, cfg.task)?;
    let y = tape.constant(crate::tensor::Dense::scalar(y));
    let (supervised, cosine) = match cfg.task {
        Task::Regression => {
            let d1 = tape.sub(prediction, y)?;
            let d2 = tape.sub(y_tilde, y)?;
            (tape.square(d1), tape.square(d2))
        }
        Task::BinaryClassification => {
            let sup = tape_bce(tape, prediction, y)?;
            let p = tape_cosine_prob(tape, y_tilde);
            (sup, tape_bce(tape, p, y)?)
        }
    };
    let ws = tape.scale(supervised, cfg.alpha);
    let wc = tape.scale(cosine, cfg.beta);
    let partial = tape.add(ws, wc)?;
    let total = tape.add(partial, weighted_pred)?;
    Ok(LossNodes {
        total,
        supervised: Some(supervised),
        cosine: Some(cosine),
        cosine_pred,
        y_tilde,
    })
}
