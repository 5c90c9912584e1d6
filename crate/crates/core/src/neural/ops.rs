//! Elementwise activations, inverted dropout, and the two
//! classification heads (softmax and renormalized sigmoid) with their
//! cross-entropy losses.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use super::{NeuralError, Scalar, Tensor};

pub fn relu_forward<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    out
}

/// Subgradient 0 at exactly 0: gradient passes only where the forward
/// input was strictly positive.
pub fn relu_backward<T: Scalar>(
    input: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>, NeuralError> {
    if input.shape() != grad_out.shape() {
        return Err(NeuralError::BadShape {
            op: "relu_backward",
            expected: "grad_out matching the forward input shape",
            got: grad_out.shape().to_vec(),
        });
    }
    let mut out = grad_out.clone();
    for (g, x) in out.data_mut().iter_mut().zip(input.data()) {
        if *x <= T::zero() {
            *g = T::zero();
        }
    }
    Ok(out)
}

/// Inverted dropout: each element is zeroed with probability `rate`,
/// survivors are scaled by `1 / (1 - rate)` so the expected value is
/// unchanged and eval needs no rescaling. Returns the output and the
/// applied multiplier per element (0 or the scale), which the backward
/// pass reapplies.
pub fn dropout_forward<T: Scalar, R: Rng>(
    input: &Tensor<T>,
    rate: f64,
    rng: &mut R,
) -> Result<(Tensor<T>, Vec<T>), NeuralError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NeuralError::BadArgument {
            op: "dropout",
            why: "rate must be in [0, 1)",
        });
    }
    let scale = T::from_f64(1.0 / (1.0 - rate));
    let mut out = input.clone();
    let mut mask = vec![T::zero(); input.len()];
    for (v, m) in out.data_mut().iter_mut().zip(mask.iter_mut()) {
        let u: f64 = rng.gen_range(0.0..1.0);
        if u < rate {
            *v = T::zero();
        } else {
            *m = scale;
            *v = *v * scale;
        }
    }
    Ok((out, mask))
}

pub fn dropout_backward<T: Scalar>(
    mask: &[T],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>, NeuralError> {
    if mask.len() != grad_out.len() {
        return Err(NeuralError::BadArgument {
            op: "dropout_backward",
            why: "mask length must equal grad_out length",
        });
    }
    let mut out = grad_out.clone();
    for (g, m) in out.data_mut().iter_mut().zip(mask) {
        *g = *g * *m;
    }
    Ok(out)
}

fn check_logits<T: Scalar>(logits: &Tensor<T>, op: &'static str) -> Result<(usize, usize), NeuralError> {
    let s = logits.shape();
    if s.len() != 2 || s[1] == 0 {
        return Err(NeuralError::BadShape {
            op,
            expected: "logits of rank 2 [n, classes]",
            got: s.to_vec(),
        });
    }
    Ok((s[0], s[1]))
}

fn check_labels(labels: &[usize], n: usize, c: usize, op: &'static str) -> Result<(), NeuralError> {
    if labels.len() != n {
        return Err(NeuralError::BadArgument {
            op,
            why: "one label per row required",
        });
    }
    if labels.iter().any(|&l| l >= c) {
        return Err(NeuralError::BadArgument {
            op,
            why: "label out of range",
        });
    }
    Ok(())
}

/// Row-wise softmax, shifted by the row max for stability.
pub fn softmax_probs<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>, NeuralError> {
    let (n, c) = check_logits(logits, "softmax")?;
    let mut out = Tensor::zeros(&[n, c]);
    for ni in 0..n {
        let row = &logits.data()[ni * c..(ni + 1) * c];
        let orow = &mut out.data_mut()[ni * c..(ni + 1) * c];
        let mut m = row[0];
        for &v in &row[1..] {
            if v > m {
                m = v;
            }
        }
        let mut sum = T::zero();
        for (o, &v) in orow.iter_mut().zip(row) {
            let e = (v - m).exp();
            *o = e;
            sum = sum + e;
        }
        for o in orow.iter_mut() {
            *o = *o / sum;
        }
    }
    Ok(out)
}

/// Mean cross-entropy of softmax probabilities and its gradient with
/// respect to the logits: `(softmax - onehot) / n`.
pub fn cross_entropy_loss_grad<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(f64, Tensor<T>), NeuralError> {
    let (n, c) = check_logits(logits, "cross_entropy")?;
    check_labels(labels, n, c, "cross_entropy")?;
    let mut grad = softmax_probs(logits)?;
    let inv_n = T::from_f64(1.0 / n as f64);
    let mut loss = 0.0;
    for (ni, &y) in labels.iter().enumerate() {
        let row = &logits.data()[ni * c..(ni + 1) * c];
        let mut m = row[0];
        for &v in &row[1..] {
            if v > m {
                m = v;
            }
        }
        // ln p_y = (z_y - m) - ln(sum exp(z - m)), no cancellation.
        let mut lse = 0.0;
        for &v in row {
            lse += (v - m).to_f64().exp();
        }
        loss -= (row[y] - m).to_f64() - lse.ln();

        let grow = &mut grad.data_mut()[ni * c..(ni + 1) * c];
        grow[y] = grow[y] - T::one();
        for g in grow.iter_mut() {
            *g = *g * inv_n;
        }
    }
    Ok((loss / n as f64, grad))
}

fn sigmoid<T: Scalar>(x: T) -> T {
    // Split on sign so exp never overflows.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Alternative head: elementwise sigmoid renormalized to sum to one.
pub fn sigmoid_renorm_probs<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>, NeuralError> {
    let (n, c) = check_logits(logits, "sigmoid_renorm")?;
    let mut out = Tensor::zeros(&[n, c]);
    for ni in 0..n {
        let row = &logits.data()[ni * c..(ni + 1) * c];
        let orow = &mut out.data_mut()[ni * c..(ni + 1) * c];
        let mut sum = T::zero();
        for (o, &v) in orow.iter_mut().zip(row) {
            let s = sigmoid(v);
            *o = s;
            sum = sum + s;
        }
        for o in orow.iter_mut() {
            *o = *o / sum;
        }
    }
    Ok(out)
}

/// Mean cross-entropy of the renormalized-sigmoid probabilities. The
/// logit gradient has the closed form `(1 - s_i) * (p_i - y_i) / n`
/// where `s` is the raw sigmoid and `p` the renormalized probability.
pub fn sigmoid_renorm_loss_grad<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(f64, Tensor<T>), NeuralError> {
    let (n, c) = check_logits(logits, "sigmoid_renorm")?;
    check_labels(labels, n, c, "sigmoid_renorm")?;
    let probs = sigmoid_renorm_probs(logits)?;
    let mut grad = Tensor::zeros(&[n, c]);
    let inv_n = T::from_f64(1.0 / n as f64);
    let mut loss = 0.0;
    for (ni, &y) in labels.iter().enumerate() {
        let zrow = &logits.data()[ni * c..(ni + 1) * c];
        let prow = &probs.data()[ni * c..(ni + 1) * c];
        loss -= prow[y].to_f64().ln();
        let grow = &mut grad.data_mut()[ni * c..(ni + 1) * c];
        for i in 0..c {
            let s = sigmoid(zrow[i]);
            let target = if i == y { T::one() } else { T::zero() };
            grow[i] = (T::one() - s) * (prow[i] - target) * inv_n;
        }
    }
    Ok((loss / n as f64, grad))
}

/// Index of the row maximum; ties go to the lowest index.
pub fn argmax_row<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
