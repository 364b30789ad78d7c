use rand::Rng;

use crate::error::{Error, Result};
use crate::netmodel::GruMask;
use crate::numcore::{ParamSet, Tensor};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for every parameter of one set.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    /// Steps skipped because a gradient was not finite.
    pub skipped: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Tensor> = params
            .ids()
            .map(|id| Tensor::zeros(params.value(id).rows(), params.value(id).cols()))
            .collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            skipped: 0,
        }
    }

    pub fn moments_finite(&self) -> bool {
        self.m.iter().chain(&self.v).all(Tensor::is_finite)
    }

    /// One bias-corrected update from the accumulated gradients, which are
    /// zeroed afterwards. Returns false if the step was skipped.
    pub fn step(&mut self, params: &mut ParamSet, lr: f64) -> Result<bool> {
        if self.m.len() != params.len() {
            return Err(Error::invalid("optimizer state does not match parameter set"));
        }
        if !params.grads_finite() {
            self.skipped += 1;
            log::warn!("skipping update with non-finite gradient ({} so far)", self.skipped);
            params.zero_grads();
            return Ok(false);
        }
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let i = id.index();
            let (value, grad) = params.value_and_grad_mut(id);
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (((p, &g), m), v) in value.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p -= lr * mh / (vh.sqrt() + ADAM_EPS);
            }
        }
        params.zero_grads();
        Ok(true)
    }
}

/// Rescale gradients so their global norm is at most `max_norm` (0 disables).
/// Returns the norm before clipping.
pub fn clip_grad_norm(params: &mut ParamSet, max_norm: f64) -> f64 {
    let norm = params.grad_norm();
    if max_norm > 0.0 && norm > max_norm && norm.is_finite() {
        params.scale_grads(max_norm / norm);
    }
    norm
}

/// Inverted-dropout masks for GRUs of the given `(input, hidden)` sizes,
/// one per input and recurrent connection. Rate 0 yields all ones.
pub fn variational_dropout_masks<R: Rng + ?Sized>(
    shapes: &[(usize, usize)],
    rate: f64,
    rng: &mut R,
) -> Result<Vec<GruMask>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    let keep = 1.0 - rate;
    let mut draw = |n: usize| -> Vec<f64> {
        if rate == 0.0 {
            return vec![1.0; n];
        }
        (0..n)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect()
    };
    Ok(shapes
        .iter()
        .map(|&(i, h)| GruMask {
            input: draw(i),
            recurrent: draw(h),
        })
        .collect())
}
