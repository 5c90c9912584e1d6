//! Fully connected layer: `out = x W^T + b` with weights stored
//! `[out_features, in_features]` so each output neuron's weights are a
//! contiguous row.

use alloc::vec;
use alloc::vec::Vec;

use super::{NeuralError, Scalar, Tensor};

fn check<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &[T],
) -> Result<(usize, usize, usize), NeuralError> {
    let is = input.shape();
    let ws = weights.shape();
    if is.len() != 2 {
        return Err(NeuralError::BadShape {
            op: "dense",
            expected: "input of rank 2 [n, in_features]",
            got: is.to_vec(),
        });
    }
    if ws.len() != 2 || ws[1] != is[1] {
        return Err(NeuralError::BadShape {
            op: "dense",
            expected: "weights [out_features, in_features] matching the input",
            got: ws.to_vec(),
        });
    }
    if bias.len() != ws[0] {
        return Err(NeuralError::BadArgument {
            op: "dense",
            why: "bias length must equal out_features",
        });
    }
    Ok((is[0], is[1], ws[0]))
}

pub fn dense_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &[T],
) -> Result<Tensor<T>, NeuralError> {
    let (n, fin, fout) = check(input, weights, bias)?;
    let mut out = Tensor::zeros(&[n, fout]);
    let x = input.data();
    let w = weights.data();
    for ni in 0..n {
        let xrow = &x[ni * fin..(ni + 1) * fin];
        let orow = &mut out.data_mut()[ni * fout..(ni + 1) * fout];
        for (o, (wrow, b)) in orow.iter_mut().zip(w.chunks_exact(fin).zip(bias)) {
            let mut acc = *b;
            for (wv, xv) in wrow.iter().zip(xrow) {
                acc = acc + *wv * *xv;
            }
            *o = acc;
        }
    }
    Ok(out)
}

/// Returns `(grad_input, grad_weights, grad_bias)`.
pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Vec<T>), NeuralError> {
    let bias_probe = vec![T::zero(); weights.shape()[0]];
    let (n, fin, fout) = check(input, weights, &bias_probe)?;
    if grad_out.shape() != [n, fout] {
        return Err(NeuralError::BadShape {
            op: "dense_backward",
            expected: "grad_out of shape [n, out_features]",
            got: grad_out.shape().to_vec(),
        });
    }
    let x = input.data();
    let w = weights.data();
    let go = grad_out.data();
    let mut grad_input = Tensor::zeros(&[n, fin]);
    let mut grad_weights = Tensor::zeros(&[fout, fin]);
    let mut grad_bias = vec![T::zero(); fout];

    for ni in 0..n {
        let gorow = &go[ni * fout..(ni + 1) * fout];
        let girow = &mut grad_input.data_mut()[ni * fin..(ni + 1) * fin];
        for (oi, &g) in gorow.iter().enumerate() {
            grad_bias[oi] = grad_bias[oi] + g;
            let wrow = &w[oi * fin..(oi + 1) * fin];
            for (gi, wv) in girow.iter_mut().zip(wrow) {
                *gi = *gi + g * *wv;
            }
        }
    }
    // Second pass for grad_weights keeps both inner loops contiguous.
    for ni in 0..n {
        let xrow = &x[ni * fin..(ni + 1) * fin];
        let gorow = &go[ni * fout..(ni + 1) * fout];
        for (oi, &g) in gorow.iter().enumerate() {
            let gwrow = &mut grad_weights.data_mut()[oi * fin..(oi + 1) * fin];
            for (gw, xv) in gwrow.iter_mut().zip(xrow) {
                *gw = *gw + g * *xv;
            }
        }
    }
    Ok((grad_input, grad_weights, grad_bias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights_pass_input_through() {
        let input = Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let eye = Tensor::from_vec(
            &[3, 3],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let out = dense_forward(&input, &eye, &[0.0; 3]).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn one_by_one_affine() {
        let input = Tensor::from_vec(&[1, 1], vec![3.0]).unwrap();
        let w = Tensor::from_vec(&[1, 1], vec![2.0]).unwrap();
        let out = dense_forward(&input, &w, &[1.0]).unwrap();
        assert_relative_eq!(out.data()[0], 7.0);
    }

    #[test]
    fn shape_validation() {
        let input = Tensor::<f64>::zeros(&[2, 3]);
        let w = Tensor::<f64>::zeros(&[4, 5]);
        assert!(dense_forward(&input, &w, &[0.0; 4]).is_err());
        let w = Tensor::<f64>::zeros(&[4, 3]);
        assert!(dense_forward(&input, &w, &[0.0; 3]).is_err());
        let go_bad = Tensor::<f64>::zeros(&[2, 5]);
        assert!(dense_backward(&input, &w, &go_bad).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        use crate::neural::gradcheck::{finite_diff_check, GradCheckConfig};
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 3;
        let (fin, fout) = (4, 2);
        let x: Vec<f64> = (0..n * fin).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let wv: Vec<f64> = (0..fout * fin).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bv: Vec<f64> = (0..fout).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let weights_out: Vec<f64> = (0..n * fout).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let objective = |x: &[f64], w: &[f64], b: &[f64]| -> f64 {
            let xi = Tensor::from_vec(&[n, fin], x.to_vec()).unwrap();
            let wt = Tensor::from_vec(&[fout, fin], w.to_vec()).unwrap();
            let out = dense_forward(&xi, &wt, b).unwrap();
            out.data().iter().zip(&weights_out).map(|(o, c)| o * c).sum()
        };

        let xi = Tensor::from_vec(&[n, fin], x.clone()).unwrap();
        let wt = Tensor::from_vec(&[fout, fin], wv.clone()).unwrap();
        let go = Tensor::from_vec(&[n, fout], weights_out.clone()).unwrap();
        let (gi, gw, gb) = dense_backward(&xi, &wt, &go).unwrap();

        let cfg = GradCheckConfig::default();
        let r = finite_diff_check(&x, gi.data(), |p| objective(p, &wv, &bv), &cfg).unwrap();
        assert!(r.max_rel_err < 1e-8, "input grad {r:?}");
        let r = finite_diff_check(&wv, gw.data(), |p| objective(&x, p, &bv), &cfg).unwrap();
        assert!(r.max_rel_err < 1e-8, "weight grad {r:?}");
        let r = finite_diff_check(&bv, &gb, |p| objective(&x, &wv, p), &cfg).unwrap();
        assert!(r.max_rel_err < 1e-8, "bias grad {r:?}");
    }
}
