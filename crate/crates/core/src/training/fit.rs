use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{f1_max, mae};
use crate::graph::{induce_pattern_subgraph, Graph, Pattern, PatternSubgraph};
use crate::model::Model;
use crate::tensor::{Parameters, Tape};

use super::loss::{check_label, composite_loss, composite_loss_on_tape, LossBreakdown};
use super::{Monitor, TrainConfig};

/// RNG stream for the per-epoch shuffle; parameter init uses the seed directly.
const SHUFFLE_STREAM: u64 = 1;
/// RNG stream for carving a validation set out of the training patterns.
const CARVE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

/// Mean loss terms over one split for one epoch. The components are
/// unweighted, so `total = alpha*l_sup + beta*l_cos + gamma*l_cospred`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: Split,
    pub total: f64,
    pub l_sup: f64,
    pub l_cos: f64,
    pub l_cospred: f64,
    /// Best monitored value seen up to and including this epoch.
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    EpochLimit,
    EarlyStop { epochs_without_improvement: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub monitor: Monitor,
    /// Monitored value per epoch, on validation if present, else on train.
    pub monitor_values: Vec<f64>,
    pub best_epoch: usize,
    pub best_value: f64,
    pub stop_reason: StopReason,
}

pub const HISTORY_HEADER: &str = "epoch,split,total,l_sup,l_cos,l_cospred,best";

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.monitor_values.len()
    }

    pub fn split_records(&self, split: Split) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epoch,
                r.split.as_str(),
                r.total,
                r.l_sup,
                r.l_cos,
                r.l_cospred,
                r.best
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Values from the best monitored epoch, without optimizer state.
    pub params: Parameters,
    pub history: TrainHistory,
}

/// A pattern resolved against the graph with its subgraph precomputed.
#[derive(Debug, Clone)]
pub struct Sample {
    pub sub: PatternSubgraph,
    pub label: Option<f64>,
}

pub fn prepare_samples(graph: &Graph, patterns: &[Pattern], cfg: &TrainConfig) -> Result<Vec<Sample>> {
    let opts = cfg.model_config(graph.feature_dim(), graph.edge_feature_dim()).subgraph_options();
    patterns
        .iter()
        .map(|p| {
            let (i, j) = p.resolve(graph)?;
            if let Some(y) = p.label {
                check_label(y, cfg.task)?;
            }
            Ok(Sample {
                sub: induce_pattern_subgraph(graph, i, j, opts)?,
                label: p.label,
            })
        })
        .collect()
}

/// Frozen-parameter pass over a split.
#[derive(Debug, Clone)]
pub struct SplitEval {
    pub mean: LossBreakdown,
    pub predictions: Vec<f64>,
    pub cosines: Vec<f64>,
}

pub fn evaluate_samples(model: &Model, params: &Parameters, samples: &[Sample], cfg: &TrainConfig) -> Result<SplitEval> {
    let per: Vec<(f64, f64, LossBreakdown)> = samples
        .par_iter()
        .map(|s| {
            let p = model.predict(params, &s.sub)?;
            let l = composite_loss(p.value, p.cosine, s.label, cfg)?;
            Ok((p.value, p.cosine, l))
        })
        .collect::<Result<_>>()?;
    let mut acc = Accumulator::default();
    for (_, _, l) in &per {
        acc.add(l);
    }
    Ok(SplitEval {
        mean: acc.mean(cfg),
        predictions: per.iter().map(|x| x.0).collect(),
        cosines: per.iter().map(|x| x.1).collect(),
    })
}

#[derive(Default)]
struct Accumulator {
    n: usize,
    sup: f64,
    cos: f64,
    pred: f64,
    total: f64,
}

impl Accumulator {
    fn add(&mut self, l: &LossBreakdown) {
        self.n += 1;
        self.sup += l.supervised;
        self.cos += l.cosine;
        self.pred += l.cosine_pred;
        self.total += l.total;
    }

    fn mean(&self, cfg: &TrainConfig) -> LossBreakdown {
        if self.n == 0 {
            return LossBreakdown::default();
        }
        let n = self.n as f64;
        let (supervised, cosine, cosine_pred) = (self.sup / n, self.cos / n, self.pred / n);
        // rebuilt from the component means so the identity holds exactly
        let total = cfg.alpha * supervised + cfg.beta * cosine + cfg.gamma * cosine_pred;
        debug_assert!((total - self.total / n).abs() <= 1e-9 * (1.0 + total.abs()));
        LossBreakdown {
            total,
            supervised,
            cosine,
            cosine_pred,
        }
    }
}

fn monitor_value(monitor: Monitor, eval: &SplitEval, samples: &[Sample]) -> Result<f64> {
    let labeled: Vec<(f64, f64)> = eval
        .predictions
        .iter()
        .zip(samples)
        .filter_map(|(&p, s)| s.label.map(|y| (p, y)))
        .collect();
    let value = match monitor {
        Monitor::Loss => eval.mean.total,
        Monitor::Mae | Monitor::F1 if labeled.is_empty() => {
            return Err(Error::NoSupervision("no labeled patterns to monitor".into()));
        }
        Monitor::Mae => {
            let (p, y): (Vec<f64>, Vec<f64>) = labeled.into_iter().unzip();
            mae(&p, &y)?
        }
        Monitor::F1 => {
            let p: Vec<f64> = labeled.iter().map(|x| x.0).collect();
            let y: Vec<bool> = labeled.iter().map(|x| x.1 == 1.0).collect();
            if y.iter().any(|&b| b) {
                f1_max(&p, &y)?.0
            } else {
                0.0
            }
        }
    };
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("monitored {monitor:?} value {value}")));
    }
    Ok(value)
}

/// Trains on `train`, early-stopping on `validation` (or on `train` itself
/// when `validation` is empty).
pub fn fit(graph: &Graph, train: &[Pattern], validation: &[Pattern], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training split".into()));
    }
    if !train.iter().any(Pattern::is_labeled) {
        return Err(Error::NoSupervision(format!(
            "all {} training patterns are unlabeled",
            train.len()
        )));
    }
    let model = Model::new(cfg.model_config(graph.feature_dim(), graph.edge_feature_dim()))?;
    let train_samples = prepare_samples(graph, train, cfg)?;
    let val_samples = prepare_samples(graph, validation, cfg)?;
    let unlabeled = train.iter().filter(|p| !p.is_labeled()).count();
    if unlabeled > 0 {
        log::info!("{unlabeled} of {} training patterns are unlabeled", train.len());
    }

    let adam = cfg.adam();
    let mut params = model.init_params(cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);

    let mut records = Vec::new();
    let mut monitor_values = Vec::new();
    let mut best: Option<(usize, f64, Parameters)> = None;
    let mut stale = 0usize;
    let mut stop_reason = StopReason::EpochLimit;

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_samples.len()).collect();
        order.shuffle(&mut rng);
        let mut acc = Accumulator::default();
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = params.zeros_like();
            for &k in batch {
                let s = &train_samples[k];
                let mut tape = Tape::new();
                let bound = model.bind(&params, &mut tape)?;
                let out = model.forward(&mut tape, &bound, &s.sub)?;
                let loss = composite_loss_on_tape(&mut tape, out.prediction, out.z_i, out.z_j, s.label, cfg)?;
                let breakdown = loss.breakdown(&tape)?;
                if !breakdown.is_finite() {
                    return Err(Error::NonFinite(format!("loss at epoch {epoch}: {breakdown:?}")));
                }
                acc.add(&breakdown);
                for (name, g) in tape.backward(loss.total)?.params() {
                    grads
                        .get_mut(&name)
                        .ok_or_else(|| Error::Contract(format!("gradient for unknown parameter {name}")))?
                        .add_assign(&g)?;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for g in grads.values_mut() {
                g.scale_in_place(scale);
                if !g.is_finite() {
                    return Err(Error::NonFinite(format!("gradient at epoch {epoch}")));
                }
            }
            adam.step(&mut params, &grads)?;
        }
        let train_mean = acc.mean(cfg);

        let (monitor_samples, monitor_eval) = if val_samples.is_empty() {
            (&train_samples, evaluate_samples(&model, &params, &train_samples, cfg)?)
        } else {
            (&val_samples, evaluate_samples(&model, &params, &val_samples, cfg)?)
        };
        let value = monitor_value(cfg.monitor, &monitor_eval, monitor_samples)?;
        monitor_values.push(value);

        let improved = best.as_ref().is_none_or(|b| cfg.monitor.improves(value, b.1));
        if improved {
            best = Some((epoch, value, params.values_only()));
            stale = 0;
        } else {
            stale += 1;
        }
        let best_value = best.as_ref().map(|b| b.1).unwrap_or(value);

        let record = |split, m: &LossBreakdown| EpochRecord {
            epoch,
            split,
            total: m.total,
            l_sup: m.supervised,
            l_cos: m.cosine,
            l_cospred: m.cosine_pred,
            best: best_value,
        };
        records.push(record(Split::Train, &train_mean));
        if !val_samples.is_empty() {
            records.push(record(Split::Validation, &monitor_eval.mean));
        }
        log::debug!(
            "epoch {epoch}: train {:.6} monitor {:?} {value:.6} best {best_value:.6}",
            train_mean.total,
            cfg.monitor
        );

        if stale >= cfg.patience.max(1) {
            stop_reason = StopReason::EarlyStop {
                epochs_without_improvement: stale,
            };
            break;
        }
    }

    let (best_epoch, best_value, params) = best.expect("at least one epoch ran");
    log::info!("best epoch {best_epoch} ({:?} {best_value})", cfg.monitor);
    Ok(TrainOutcome {
        model,
        params,
        history: TrainHistory {
            records,
            monitor: cfg.monitor,
            monitor_values,
            best_epoch,
            best_value,
            stop_reason,
        },
    })
}

/// Seeded split of patterns into (train, validation) using
/// `cfg.validation_fraction`. The training part is never left empty.
pub fn carve_validation(patterns: &[Pattern], cfg: &TrainConfig) -> (Vec<Pattern>, Vec<Pattern>) {
    let n = patterns.len();
    let mut n_val = (cfg.validation_fraction * n as f64).round() as usize;
    n_val = n_val.min(n.saturating_sub(1));
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(CARVE_STREAM);
    order.shuffle(&mut rng);
    let mut val_idx = order[..n_val].to_vec();
    let mut train_idx = order[n_val..].to_vec();
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    let pick = |idx: &[usize]| idx.iter().map(|&k| patterns[k].clone()).collect::<Vec<_>>();
    (pick(&train_idx), pick(&val_idx))
}

/// Carves a validation set and trains once.
pub fn train(graph: &Graph, patterns: &[Pattern], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let (tr, va) = carve_validation(patterns, cfg);
    fit(graph, &tr, &va, cfg)
}

/// Result of `train_runs`: the selected outcome plus each run's score.
#[derive(Debug, Clone)]
pub struct RunSelection {
    pub outcome: TrainOutcome,
    pub selected: usize,
    pub seeds: Vec<u64>,
    pub scores: Vec<f64>,
}

/// Trains `cfg.runs` times with seeds `seed, seed+1, ...` on one shared
/// validation carve and keeps the run with the best monitored value.
pub fn train_runs(graph: &Graph, patterns: &[Pattern], cfg: &TrainConfig) -> Result<RunSelection> {
    cfg.validate()?;
    let (tr, va) = carve_validation(patterns, cfg);
    let mut chosen: Option<(usize, TrainOutcome)> = None;
    let mut seeds = Vec::with_capacity(cfg.runs);
    let mut scores = Vec::with_capacity(cfg.runs);
    for r in 0..cfg.runs {
        let run_cfg = TrainConfig {
            seed: cfg.seed.wrapping_add(r as u64),
            ..cfg.clone()
        };
        let outcome = fit(graph, &tr, &va, &run_cfg)?;
        let score = outcome.history.best_value;
        log::info!("run {r} (seed {}): {:?} {score}", run_cfg.seed, cfg.monitor);
        seeds.push(run_cfg.seed);
        scores.push(score);
        let better = chosen
            .as_ref()
            .is_none_or(|(_, o)| cfg.monitor.improves(score, o.history.best_value));
        if better {
            chosen = Some((r, outcome));
        }
    }
    let (selected, outcome) = chosen.expect("runs >= 1");
    Ok(RunSelection {
        outcome,
        selected,
        seeds,
        scores,
    })
}
