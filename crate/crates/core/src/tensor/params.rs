use std::collections::BTreeMap;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Dense;

/// Glorot-uniform matrix: entries in `[-a, a]`, `a = sqrt(6 / (rows + cols))`.
pub fn glorot_init(rows: usize, cols: usize, seed: u64) -> Result<Dense> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidShape(format!(
            "glorot init needs nonzero dimensions, got {rows}x{cols}"
        )));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| dist.sample(&mut rng)).collect();
    Dense::from_vec(rows, cols, data)
}

#[derive(Debug, Clone, PartialEq)]
struct Slot {
    value: Dense,
    first_moment: Dense,
    second_moment: Dense,
    step: u64,
}

/// Named trainable matrices with their Adam state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Parameters {
    slots: BTreeMap<String, Slot>,
}

impl Parameters {
    pub fn new() -> Self {
        Parameters::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Dense) {
        let (r, c) = value.shape();
        self.slots.insert(
            name.into(),
            Slot {
                value,
                first_moment: Dense::zeros(r, c),
                second_moment: Dense::zeros(r, c),
                step: 0,
            },
        );
    }

    pub fn get(&self, name: &str) -> Result<&Dense> {
        self.slots
            .get(name)
            .map(|s| &s.value)
            .ok_or_else(|| Error::Contract(format!("no parameter named `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Dense> {
        self.slots
            .get_mut(name)
            .map(|s| &mut s.value)
            .ok_or_else(|| Error::Contract(format!("no parameter named `{name}`")))
    }

    pub fn step_count(&self, name: &str) -> Option<u64> {
        self.slots.get(name).map(|s| s.step)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Dense)> {
        self.slots.iter().map(|(k, s)| (k.as_str(), &s.value))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Total number of scalar entries across all matrices.
    pub fn scalar_count(&self) -> usize {
        self.slots.values().map(|s| s.value.len()).sum()
    }

    /// A zero matrix per parameter, for gradient accumulation.
    pub fn zeros_like(&self) -> BTreeMap<String, Dense> {
        self.slots
            .iter()
            .map(|(k, s)| (k.clone(), Dense::zeros(s.value.rows(), s.value.cols())))
            .collect()
    }

    /// Same parameter values with fresh optimizer state.
    pub fn values_only(&self) -> Parameters {
        let mut p = Parameters::new();
        for (name, value) in self.iter() {
            p.insert(name, value.clone());
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    /// One bias-corrected Adam update. Every parameter with a gradient
    /// entry is updated and its step counter incremented.
    pub fn step(&self, params: &mut Parameters, grads: &BTreeMap<String, Dense>) -> Result<()> {
        for (name, g) in grads {
            let slot = params
                .slots
                .get(name)
                .ok_or_else(|| Error::Contract(format!("gradient for unknown parameter `{name}`")))?;
            if slot.value.shape() != g.shape() {
                return Err(Error::Contract(format!(
                    "gradient shape {:?} does not match parameter `{name}` shape {:?}",
                    g.shape(),
                    slot.value.shape()
                )));
            }
        }
        for (name, g) in grads {
            let slot = params.slots.get_mut(name).expect("checked above");
            slot.step += 1;
            let t = slot.step as i32;
            let c1 = 1.0 - self.beta1.powi(t);
            let c2 = 1.0 - self.beta2.powi(t);
            let m = slot.first_moment.data_mut();
            let v = slot.second_moment.data_mut();
            let w = slot.value.data_mut();
            for k in 0..w.len() {
                let gk = g.data()[k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                w[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glorot_bounds_and_determinism() {
        let one = glorot_init(1, 1, 7).unwrap();
        assert!(one.get(0, 0).abs() <= 3f64.sqrt());
        assert_eq!(glorot_init(3, 3, 7).unwrap(), glorot_init(3, 3, 7).unwrap());
        assert_ne!(glorot_init(3, 3, 7).unwrap(), glorot_init(3, 3, 8).unwrap());
        assert!(matches!(glorot_init(0, 3, 1), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn glorot_mean_near_zero() {
        let m = glorot_init(100, 100, 1).unwrap();
        let mean = m.sum() / m.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Parameters::new();
        p.insert("w", glorot_init(2, 3, 1).unwrap());
        let before = p.get("w").unwrap().clone();
        let zeros = p.zeros_like();
        Adam::default().step(&mut p, &zeros).unwrap();
        assert_eq!(p.get("w").unwrap(), &before);
        assert_eq!(p.step_count("w"), Some(1));
    }

    #[test]
    fn first_step_moves_by_lr() {
        let adam = Adam::default();
        for g in [0.5, -3.0, 1e-3] {
            let mut p = Parameters::new();
            p.insert("w", Dense::zeros(2, 2));
            let mut grads = p.zeros_like();
            grads.insert("w".into(), Dense::filled(2, 2, g));
            adam.step(&mut p, &grads).unwrap();
            // m_hat = g, v_hat = g^2 after bias correction
            let expected = -adam.lr * g / (g.abs() + adam.eps);
            for &w in p.get("w").unwrap().data() {
                assert!((w - expected).abs() < 1e-15);
                assert!((w.abs() - adam.lr).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Parameters::new();
        p.insert("w", Dense::zeros(2, 2));
        let mut grads = BTreeMap::new();
        grads.insert("w".to_string(), Dense::zeros(2, 3));
        assert!(matches!(Adam::default().step(&mut p, &grads), Err(Error::Contract(_))));
    }
}
