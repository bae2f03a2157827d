use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttendOver, HiddenActivation, ModelConfig, Task, TokenizerArch};
use crate::tensor::Adam;

/// Quantity watched for early stopping and run selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monitor {
    /// Mean total loss, lower is better.
    #[default]
    Loss,
    /// F1max over labeled patterns, higher is better.
    F1,
    /// Mean absolute error over labeled patterns, lower is better.
    Mae,
}

impl Monitor {
    pub fn higher_is_better(self) -> bool {
        matches!(self, Monitor::F1)
    }

    /// True when `candidate` strictly beats `incumbent`.
    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        if self.higher_is_better() {
            candidate > incumbent
        } else {
            candidate < incumbent
        }
    }
}

/// How to pick among several training runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Select {
    /// Best monitored validation value; ties go to the earliest run.
    #[default]
    BestVal,
}

/// Everything a training or cross-validation run needs besides data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Epochs without improvement before stopping; 0 behaves like 1.
    pub patience: usize,
    pub task: Task,
    pub folds: usize,
    pub repeats: usize,
    pub validation_fraction: f64,
    pub monitor: Monitor,
    /// Decision threshold for precision, recall and F1 reports.
    pub threshold: f64,
    pub token_dim: usize,
    pub tokenizer: TokenizerArch,
    pub head_hidden: [usize; 2],
    pub head_activation: HiddenActivation,
    pub attend_over: AttendOver,
    pub exclude_center_edge: bool,
    pub runs: usize,
    pub select: Select,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = Adam::default();
        TrainConfig {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            epochs: 300,
            batch_size: 32,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            seed: 0,
            patience: 30,
            task: Task::Regression,
            folds: 5,
            repeats: 10,
            validation_fraction: 0.16,
            monitor: Monitor::Loss,
            threshold: 0.5,
            token_dim: 16,
            tokenizer: TokenizerArch::Deep,
            head_hidden: [32, 16],
            head_activation: HiddenActivation::Relu,
            attend_over: AttendOver::Neighbors,
            exclude_center_edge: false,
            runs: 1,
            select: Select::BestVal,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, w) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !w.is_finite() || w < 0.0 {
                return bad(format!("{name} must be a finite non-negative weight, got {w}"));
            }
        }
        if self.alpha == 0.0 && self.beta == 0.0 && self.gamma == 0.0 {
            return bad("alpha, beta and gamma are all zero".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.eps.is_nan() || self.eps <= 0.0 {
            return bad(format!("lr and eps must be positive (got {} and {})", self.lr, self.eps));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.repeats == 0 || self.runs == 0 {
            return bad("repeats and runs must be positive".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            ));
        }
        if !self.threshold.is_finite() {
            return bad("threshold must be finite".into());
        }
        if self.monitor == Monitor::F1 && self.task != Task::BinaryClassification {
            return bad("the f1 monitor needs the binary-classification task".into());
        }
        self.model_config(1, 0).validate()
    }

    /// Model hyperparameters for a graph with the given feature widths.
    pub fn model_config(&self, input_dim: usize, edge_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            token_dim: self.token_dim,
            edge_dim,
            tokenizer: self.tokenizer,
            head_hidden: self.head_hidden,
            head_activation: self.head_activation,
            task: self.task,
            attend_over: self.attend_over,
            exclude_center_edge: self.exclude_center_edge,
        }
    }

    pub fn adam(&self) -> Adam {
        Adam {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = TrainConfig::from_json(r#"{"epochs": 7, "task": "binary-classification"}"#).unwrap();
        assert_eq!(cfg.epochs, 7);
        assert_eq!(cfg.task, Task::BinaryClassification);
        assert_eq!(cfg.alpha, 1.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(TrainConfig::from_json(r#"{"epoch": 7}"#), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        for json in [
            r#"{"alpha": 0, "beta": 0, "gamma": 0}"#,
            r#"{"beta": -1}"#,
            r#"{"folds": 1}"#,
            r#"{"batch_size": 0}"#,
            r#"{"validation_fraction": 1.0}"#,
            r#"{"monitor": "f1"}"#,
            r#"{"token_dim": 0}"#,
        ] {
            assert!(TrainConfig::from_json(json).is_err(), "{json}");
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = TrainConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(TrainConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn monitor_direction() {
        assert!(Monitor::Loss.improves(0.1, 0.2));
        assert!(!Monitor::Loss.improves(0.2, 0.2));
        assert!(Monitor::F1.improves(0.9, 0.8));
    }
}
