//! Hybrid loss, mini-batch training with early stopping, and fold splitting.

mod config;
mod crossval;
mod fit;
mod folds;
mod loss;

pub use config::{Monitor, Select, TrainConfig};
pub use crossval::{aggregate, cross_validate, fold_seed, fold_splits, mean_std, run_fold, FoldOutcome, MeanStd};
pub use fit::{
    carve_validation, evaluate_samples, fit, prepare_samples, train, train_runs, EpochRecord, RunSelection, Sample,
    Split, SplitEval, StopReason, TrainHistory, TrainOutcome, HISTORY_HEADER,
};
pub use folds::{kfold_split, kfold_split_with_validation, FoldSplit, DEFAULT_VALIDATION_FRACTION};
pub use loss::{
    check_label, composite_loss, composite_loss_on_tape, cosine_embedding_target, LossBreakdown, LossNodes, PROB_EPS,
};
