use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam moment estimates for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub first: Tensor,
    pub second: Tensor,
}

/// Named trainable tensors, their gradients, and optimizer state.
///
/// Iteration order is the lexicographic order of names, which keeps
/// serialization and reductions deterministic.
/// Parameters, their gradients and their Adam moments, borrowed together.
pub(crate) type Parts<'a> = (
    &'a mut BTreeMap<String, Tensor>,
    &'a BTreeMap<String, Tensor>,
    &'a mut BTreeMap<String, Moments>,
);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
    grads: BTreeMap<String, Tensor>,
    moments: BTreeMap<String, Moments>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        self.grads
            .insert(name.clone(), Tensor::zeros(value.shape()));
        self.params.insert(name, value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn grad(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn moments(&self, name: &str) -> Option<&Moments> {
        self.moments.get(name)
    }

    pub fn zero_grads(&mut self) {
        for g in self.grads.values_mut() {
            g.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Removes the gradient buffer for `name`; used to model a store whose
    /// gradients were never populated.
    pub fn clear_grad(&mut self, name: &str) {
        self.grads.remove(name);
    }

    pub fn accumulate_grad(&mut self, name: &str, g: &Tensor, weight: f64) -> Result<()> {
        let param_shape = self
            .params
            .get(name)
            .ok_or_else(|| Error::State(format!("gradient for unknown parameter {name}")))?
            .shape()
            .to_vec();
        if g.shape() != param_shape.as_slice() {
            return Err(Error::Shape(format!(
                "gradient shape {:?} does not match parameter {name} shape {:?}",
                g.shape(),
                param_shape
            )));
        }
        let acc = self
            .grads
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(&param_shape));
        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
            *a += weight * b;
        }
        Ok(())
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads
            .values()
            .flat_map(|g| g.data().iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales all gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for g in self.grads.values_mut() {
                g.data_mut().iter_mut().for_each(|v| *v *= s);
            }
        }
        norm
    }

    pub(crate) fn parts_mut(&mut self) -> Parts<'_> {
        (&mut self.params, &self.grads, &mut self.moments)
    }

    pub(crate) fn bump_step(&mut self) -> u64 {
        self.step += 1;
        self.step
    }
}

/// Weight initializer: normal(0, `std`) drawn from a generator seeded by the
/// model seed and the parameter name, so a given parameter gets the same
/// values in every model variant that contains it.
pub fn init_normal(seed: u64, name: &str, shape: &[usize], std: f64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(name.as_bytes()));
    let normal = Normal::new(0.0, std).expect("finite std");
    let n = shape.iter().product();
    let data = (0..n).map(|_| normal.sample(&mut rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
