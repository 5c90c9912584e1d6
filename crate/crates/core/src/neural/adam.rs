//! Adam optimizer with bias correction. One state holds first/second
//! moment buffers for a fixed list of parameter slots; the step count
//! advances once per call regardless of how many slots there are.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{NeuralError, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    hyper: AdamHyper,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// One moment buffer pair per parameter slot, all zeros.
    pub fn new(slot_sizes: &[usize], hyper: AdamHyper) -> Self {
        AdamState {
            hyper,
            t: 0,
            m: slot_sizes.iter().map(|&s| vec![T::zero(); s]).collect(),
            v: slot_sizes.iter().map(|&s| vec![T::zero(); s]).collect(),
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn lr(&self) -> f64 {
        self.hyper.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.hyper.lr = lr;
    }

    /// Update every slot in place from its gradient. `params[i]` and
    /// `grads[i]` must match the size declared at construction.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<(), NeuralError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NeuralError::BadArgument {
                op: "adam_step",
                why: "slot count differs from the optimizer state",
            });
        }
        for i in 0..params.len() {
            if params[i].len() != self.m[i].len() || grads[i].len() != self.m[i].len() {
                return Err(NeuralError::BadArgument {
                    op: "adam_step",
                    why: "slot size differs from the optimizer state",
                });
            }
        }
        self.t += 1;
        let b1 = T::from_f64(self.hyper.beta1);
        let b2 = T::from_f64(self.hyper.beta2);
        let one = T::one();
        // Bias corrections in f64: beta^t underflows gracefully there.
        let c1 = T::from_f64(1.0 - self.hyper.beta1.powi(self.t as i32));
        let c2 = T::from_f64(1.0 - self.hyper.beta2.powi(self.t as i32));
        let lr = T::from_f64(self.hyper.lr);
        let eps = T::from_f64(self.hyper.eps);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Convenience wrapper matching the common call pattern: one optimizer
/// step over the whole parameter set.
pub fn adam_step<T: Scalar>(
    state: &mut AdamState<T>,
    params: &mut [&mut [T]],
    grads: &[&[T]],
) -> Result<(), NeuralError> {
    state.step(params, grads)
}
