use super::params::{Moments, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
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

/// One bias-corrected Adam update using the gradients currently in `store`.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig) -> Result<()> {
    {
        let (params, grads, _) = store.parts_mut();
        for name in params.keys() {
            if !grads.contains_key(name) {
                return Err(Error::State(format!("no gradient for parameter {name}")));
            }
        }
    }
    let t = store.bump_step() as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let (params, grads, moments) = store.parts_mut();
    for (name, p) in params.iter_mut() {
        let g = &grads[name];
        let m = moments.entry(name.clone()).or_insert_with(|| Moments {
            first: Tensor::zeros(p.shape()),
            second: Tensor::zeros(p.shape()),
        });
        let (first, second) = (m.first.data_mut(), m.second.data_mut());
        for (((w, &gv), m1), m2) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(first.iter_mut())
            .zip(second.iter_mut())
        {
            *m1 = cfg.beta1 * *m1 + (1.0 - cfg.beta1) * gv;
            *m2 = cfg.beta2 * *m2 + (1.0 - cfg.beta2) * gv * gv;
            let mhat = *m1 / bc1;
            let vhat = *m2 / bc2;
            *w -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
