use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// A named trainable (or frozen) matrix with its Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Param<T: Scalar> {
    pub value: Matrix<T>,
    /// Frozen parameters are bound as constants and never updated.
    pub trainable: bool,
    /// Whether the parameter enters the L2 penalty (false for biases).
    pub decay: bool,
    first_moment: Matrix<T>,
    second_moment: Matrix<T>,
}

impl<T: Scalar> Param<T> {
    pub fn moments(&self) -> (&Matrix<T>, &Matrix<T>) {
        (&self.first_moment, &self.second_moment)
    }
}

/// Every parameter of a model, keyed by unique name, plus the shared Adam step count.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ParamStore<T: Scalar> {
    params: BTreeMap<String, Param<T>>,
    step: u64,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: BTreeMap::new(),
            step: 0,
        }
    }

    pub fn insert(&mut self, name: &str, value: Matrix<T>, trainable: bool, decay: bool) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(Error::Contract(format!("duplicate parameter `{name}`")));
        }
        let (r, c) = value.shape();
        self.params.insert(
            name.to_string(),
            Param {
                value,
                trainable,
                decay,
                first_moment: Matrix::zeros(r, c),
                second_moment: Matrix::zeros(r, c),
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.get(name)
    }

    pub fn value(&self, name: &str) -> Option<&Matrix<T>> {
        self.params.get(name).map(|p| &p.value)
    }

    /// Mutable access to a value; Adam moments are left untouched.
    pub fn value_mut(&mut self, name: &str) -> Option<&mut Matrix<T>> {
        self.params.get_mut(name).map(|p| &mut p.value)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Total number of scalar entries, frozen ones included.
    pub fn num_scalars(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    /// Scalar count of parameters whose name starts with `prefix`.
    pub fn num_scalars_with_prefix(&self, prefix: &str) -> usize {
        self.params
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, p)| p.value.len())
            .sum()
    }

    /// One Adam update with bias-corrected moments.
    ///
    /// Trainable parameters missing from `grads` are treated as having a zero
    /// gradient. Gradients are validated before anything is mutated, so a
    /// non-finite gradient leaves the store untouched.
    pub fn adam_step(&mut self, grads: &[(String, Matrix<T>)], cfg: &AdamConfig) -> Result<()> {
        let mut by_name: BTreeMap<&str, &Matrix<T>> = BTreeMap::new();
        for (name, g) in grads {
            let p = self
                .params
                .get(name)
                .ok_or_else(|| Error::Contract(format!("gradient for unknown parameter `{name}`")))?;
            if g.shape() != p.value.shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    lhs: p.value.shape(),
                    rhs: g.shape(),
                });
            }
            if !g.all_finite() {
                return Err(Error::NonFinite {
                    name: name.clone(),
                    context: format!("gradient at optimizer step {}", self.step + 1),
                });
            }
            by_name.insert(name.as_str(), g);
        }

        self.step += 1;
        let t = self.step as f64;
        let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
        let bc1 = T::lit(1.0 - cfg.beta1.powf(t));
        let bc2 = T::lit(1.0 - cfg.beta2.powf(t));
        let lr = T::lit(cfg.lr);
        let eps = T::lit(cfg.eps);
        let one = T::one();

        for (name, p) in self.params.iter_mut() {
            if !p.trainable {
                continue;
            }
            let g = by_name.get(name.as_str());
            let Param {
                value,
                first_moment,
                second_moment,
                ..
            } = p;
            for i in 0..value.len() {
                let gi = g.map_or(T::zero(), |g| g.data()[i]);
                let m = &mut first_moment.data_mut()[i];
                *m = b1 * *m + (one - b1) * gi;
                let v = &mut second_moment.data_mut()[i];
                *v = b2 * *v + (one - b2) * gi * gi;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                value.data_mut()[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Global L2 norm over a gradient set.
pub fn global_norm<T: Scalar>(grads: &[(String, Matrix<T>)]) -> T {
    grads.iter().map(|(_, g)| g.sum_squares()).sum::<T>().sqrt()
}

/// Rescales `grads` in place so their global norm is at most `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut [(String, Matrix<T>)], max_norm: f64) -> T {
    let norm = global_norm(grads);
    let max = T::lit(max_norm);
    if norm > max {
        let s = max / norm;
        for (_, g) in grads.iter_mut() {
            g.scale_in_place(s);
        }
    }
    norm
}
