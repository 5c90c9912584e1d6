//! Batch normalization over the channel axis (axis 1).
//!
//! Training mode normalizes with biased batch statistics, updates the
//! running estimates as `running = momentum * running + (1 - momentum) * batch`,
//! and requires a batch of at least 2. Eval mode is a pure function of the
//! stored running statistics.

use alloc::vec;
use alloc::vec::Vec;

use super::{NeuralError, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: f64,
    pub eps: f64,
}

/// Saved forward intermediates needed by the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub x_hat: Vec<T>,
    pub inv_std: Vec<T>,
    pub channels: usize,
    /// Elements per channel across batch and spatial dims.
    pub per_channel: usize,
}

impl<T: Scalar> BatchNorm<T> {
    /// Identity-initialized layer: gamma 1, beta 0, running mean 0,
    /// running variance 1.
    pub fn identity(channels: usize, momentum: f64, eps: f64) -> Self {
        BatchNorm {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum,
            eps,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(usize, usize, usize), NeuralError> {
        let s = input.shape();
        if s.len() < 2 || s[1] != self.channels() {
            return Err(NeuralError::BadShape {
                op: "batchnorm",
                expected: "rank >= 2 with axis 1 equal to the layer's channel count",
                got: s.to_vec(),
            });
        }
        let n = s[0];
        let spatial: usize = s[2..].iter().product();
        Ok((n, self.channels(), spatial))
    }

    /// Normalize with batch statistics and update the running ones.
    pub fn forward_train(
        &mut self,
        input: &Tensor<T>,
    ) -> Result<(Tensor<T>, BnCache<T>), NeuralError> {
        let (n, c, spatial) = self.check_input(input)?;
        if n < 2 {
            return Err(NeuralError::BatchTooSmall(n));
        }
        let m = n * spatial;
        let m_t = T::from_f64(m as f64);
        let x = input.data();
        let mut out = Tensor::zeros(input.shape());
        let mut x_hat = vec![T::zero(); x.len()];
        let mut inv_std = vec![T::zero(); c];
        let chan = c * spatial;

        for ci in 0..c {
            let mut sum = T::zero();
            for ni in 0..n {
                let base = ni * chan + ci * spatial;
                for &v in &x[base..base + spatial] {
                    sum = sum + v;
                }
            }
            let mean = sum / m_t;
            let mut varsum = T::zero();
            for ni in 0..n {
                let base = ni * chan + ci * spatial;
                for &v in &x[base..base + spatial] {
                    let d = v - mean;
                    varsum = varsum + d * d;
                }
            }
            let var = varsum / m_t; // biased, matches the running update
            let istd = (var + T::from_f64(self.eps)).sqrt().recip();
            inv_std[ci] = istd;

            let (g, b) = (self.gamma[ci], self.beta[ci]);
            for ni in 0..n {
                let base = ni * chan + ci * spatial;
                for i in base..base + spatial {
                    let xh = (x[i] - mean) * istd;
                    x_hat[i] = xh;
                    out.data_mut()[i] = g * xh + b;
                }
            }

            let mom = T::from_f64(self.momentum);
            let rest = T::one() - mom;
            self.running_mean[ci] = mom * self.running_mean[ci] + rest * mean;
            self.running_var[ci] = mom * self.running_var[ci] + rest * var;
        }

        Ok((
            out,
            BnCache {
                x_hat,
                inv_std,
                channels: c,
                per_channel: m,
            },
        ))
    }

    /// Normalize with the stored running statistics; no state changes.
    pub fn forward_eval(&self, input: &Tensor<T>) -> Result<Tensor<T>, NeuralError> {
        let (n, c, spatial) = self.check_input(input)?;
        let x = input.data();
        let mut out = Tensor::zeros(input.shape());
        let chan = c * spatial;
        for ci in 0..c {
            let istd = (self.running_var[ci] + T::from_f64(self.eps)).sqrt().recip();
            let mean = self.running_mean[ci];
            let (g, b) = (self.gamma[ci], self.beta[ci]);
            for ni in 0..n {
                let base = ni * chan + ci * spatial;
                for i in base..base + spatial {
                    out.data_mut()[i] = g * (x[i] - mean) * istd + b;
                }
            }
        }
        Ok(out)
    }

    /// Returns `(grad_input, grad_gamma, grad_beta)`.
    pub fn backward(
        &self,
        cache: &BnCache<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(Tensor<T>, Vec<T>, Vec<T>), NeuralError> {
        let (n, c, spatial) = self.check_input(grad_out)?;
        if cache.x_hat.len() != grad_out.len() || cache.channels != c {
            return Err(NeuralError::BadArgument {
                op: "batchnorm_backward",
                why: "cache does not match grad_out shape",
            });
        }
        let m_t = T::from_f64(cache.per_channel as f64);
        let go = grad_out.data();
        let mut grad_input = Tensor::zeros(grad_out.shape());
        let mut grad_gamma = vec![T::zero(); c];
        let mut grad_beta = vec![T::zero(); c];
        let chan = c * spatial;

        for ci in 0..c {
            let mut sum_go = T::zero();
            let mut sum_go_xhat = T::zero();
            for ni in 0..n {
                let base = ni * chan + ci * spatial;
                for i in base..base + spatial {
                    sum_go = sum_go + go[i];
                    sum_go_xhat = sum_go_xhat + go[i] * cache.x_hat[i];
                }
            }
            grad_beta[ci] = sum_go;
            grad_gamma[ci] = sum_go_xhat;

            // dx = g * istd / m * (m * dy - sum(dy) - x_hat * sum(dy * x_hat))
            let scale = self.gamma[ci] * cache.inv_std[ci] / m_t;
            for ni in 0..n {
                let base = ni * chan + ci * spatial;
                for i in base..base + spatial {
                    grad_input.data_mut()[i] =
                        scale * (m_t * go[i] - sum_go - cache.x_hat[i] * sum_go_xhat);
                }
            }
        }
        Ok((grad_input, grad_gamma, grad_beta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gamma_outputs_beta() {
        let mut bn = BatchNorm::<f64>::identity(2, 0.9, 1e-5);
        bn.gamma = vec![0.0, 0.0];
        bn.beta = vec![3.0, -1.0];
        let input = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (out, _) = bn.forward_train(&input).unwrap();
        assert_relative_eq!(out.data()[0], 3.0);
        assert_relative_eq!(out.data()[1], -1.0);
        assert_relative_eq!(out.data()[2], 3.0);
        assert_relative_eq!(out.data()[3], -1.0);
    }

    #[test]
    fn train_output_is_standardized() {
        let mut bn = BatchNorm::<f64>::identity(1, 0.9, 1e-12);
        let input =
            Tensor::from_vec(&[4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (out, cache) = bn.forward_train(&input).unwrap();
        let mean: f64 = out.data().iter().sum::<f64>() / 4.0;
        let var: f64 = out.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert_relative_eq!(mean, 0.0, epsilon = 1e-9);
        assert_relative_eq!(var, 1.0, epsilon = 1e-6);
        assert_eq!(cache.per_channel, 4);
        // Biased variance of {1,2,3,4} is 1.25; running update from the
        // identity initialization: 0.9 * 1 + 0.1 * 1.25.
        assert_relative_eq!(bn.running_var[0], 1.025, epsilon = 1e-12);
        assert_relative_eq!(bn.running_mean[0], 0.1 * 2.5, epsilon = 1e-12);
    }

    #[test]
    fn train_mode_requires_two_samples() {
        let mut bn = BatchNorm::<f64>::identity(1, 0.9, 1e-5);
        let input = Tensor::from_vec(&[1, 1], vec![1.0]).unwrap();
        assert_eq!(
            bn.forward_train(&input).unwrap_err(),
            NeuralError::BatchTooSmall(1)
        );
        // Eval mode is fine with one sample and mutates nothing.
        let before = bn.clone();
        bn.forward_eval(&input).unwrap();
        assert_eq!(bn, before);
    }

    #[test]
    fn eval_uses_running_statistics() {
        let mut bn = BatchNorm::<f64>::identity(1, 0.9, 0.0);
        bn.running_mean = vec![2.0];
        bn.running_var = vec![4.0];
        let input = Tensor::from_vec(&[1, 1], vec![6.0]).unwrap();
        let out = bn.forward_eval(&input).unwrap();
        assert_relative_eq!(out.data()[0], 2.0); // (6-2)/2
    }

    #[test]
    fn backward_matches_finite_differences() {
        use crate::neural::gradcheck::{finite_diff_check, GradCheckConfig};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = [3, 2, 4];
        let data: Vec<f64> = (0..24).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let input = Tensor::from_vec(&shape, data).unwrap();
        let weights: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gamma = vec![1.3, 0.7];
        let beta = vec![0.2, -0.4];

        let fresh = |g: &[f64], b: &[f64]| {
            let mut bn = BatchNorm::<f64>::identity(2, 0.9, 1e-5);
            bn.gamma = g.to_vec();
            bn.beta = b.to_vec();
            bn
        };
        let objective = |inp: &[f64], g: &[f64], b: &[f64]| -> f64 {
            let t = Tensor::from_vec(&shape, inp.to_vec()).unwrap();
            let (out, _) = fresh(g, b).forward_train(&t).unwrap();
            out.data().iter().zip(&weights).map(|(o, w)| o * w).sum()
        };

        let mut bn = fresh(&gamma, &beta);
        let (_, cache) = bn.forward_train(&input).unwrap();
        let go = Tensor::from_vec(&shape, weights.clone()).unwrap();
        let (gi, gg, gb) = bn.backward(&cache, &go).unwrap();

        let cfg = GradCheckConfig::default();
        let r = finite_diff_check(
            input.data(),
            gi.data(),
            |p| objective(p, &gamma, &beta),
            &cfg,
        )
        .unwrap();
        assert!(r.max_rel_err < 1e-5, "input grad {r:?}");
        let r = finite_diff_check(&gamma, &gg, |p| objective(input.data(), p, &beta), &cfg)
            .unwrap();
        assert!(r.max_rel_err < 1e-5, "gamma grad {r:?}");
        let r = finite_diff_check(&beta, &gb, |p| objective(input.data(), &gamma, p), &cfg)
            .unwrap();
        assert!(r.max_rel_err < 1e-5, "beta grad {r:?}");
    }

    #[test]
    fn running_stats_converge_toward_batch_stats() {
        let mut bn = BatchNorm::<f64>::identity(1, 0.9, 1e-5);
        let input = Tensor::from_vec(&[2, 1], vec![4.0, 8.0]).unwrap();
        for _ in 0..400 {
            bn.forward_train(&input).unwrap();
        }
        assert_relative_eq!(bn.running_mean[0], 6.0, epsilon = 1e-6);
        assert_relative_eq!(bn.running_var[0], 4.0, epsilon = 1e-6);
    }
}
