//! 3-D max pooling with a 2x2x2 window and stride 2. Spatial dims must
//! be even. Ties go to the lowest flat input index (the window is
//! scanned in memory order and only a strictly greater value replaces
//! the current maximum), which pins backward routing for equal values.

use alloc::vec;
use alloc::vec::Vec;

use super::{NeuralError, Scalar, Tensor};

/// Returns the pooled tensor and, for every output element, the flat
/// index of the input element that won its window.
pub fn maxpool2_forward<T: Scalar>(
    input: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<usize>), NeuralError> {
    let s = input.shape();
    if s.len() != 5 {
        return Err(NeuralError::BadShape {
            op: "maxpool2",
            expected: "input of rank 5 [n, c, d, h, w]",
            got: s.to_vec(),
        });
    }
    let (n, c, d, h, w) = (s[0], s[1], s[2], s[3], s[4]);
    if d % 2 != 0 || h % 2 != 0 || w % 2 != 0 || d == 0 || h == 0 || w == 0 {
        return Err(NeuralError::BadShape {
            op: "maxpool2",
            expected: "even, non-zero spatial dimensions",
            got: s.to_vec(),
        });
    }
    let (od, oh, ow) = (d / 2, h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, c, od, oh, ow]);
    let mut argmax = vec![0usize; out.len()];
    let x = input.data();
    let plane = h * w;
    let chan = d * plane;

    let mut oi = 0;
    for nc in 0..n * c {
        let base = nc * chan;
        for od_i in 0..od {
            for oh_i in 0..oh {
                for ow_i in 0..ow {
                    let corner = base + (od_i * 2) * plane + (oh_i * 2) * w + ow_i * 2;
                    let mut best_idx = corner;
                    let mut best = x[corner];
                    for kd in 0..2 {
                        for kh in 0..2 {
                            for kw in 0..2 {
                                let idx = corner + kd * plane + kh * w + kw;
                                let v = x[idx];
                                if v > best {
                                    best = v;
                                    best_idx = idx;
                                }
                            }
                        }
                    }
                    out.data_mut()[oi] = best;
                    argmax[oi] = best_idx;
                    oi += 1;
                }
            }
        }
    }
    Ok((out, argmax))
}

/// Routes `grad_out` back to the winners recorded by the forward pass.
pub fn maxpool2_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>, NeuralError> {
    if argmax.len() != grad_out.len() {
        return Err(NeuralError::BadArgument {
            op: "maxpool2_backward",
            why: "argmax length must equal grad_out length",
        });
    }
    let mut grad_input = Tensor::zeros(input_shape);
    let gi = grad_input.data_mut();
    for (g, &idx) in grad_out.data().iter().zip(argmax) {
        if idx >= gi.len() {
            return Err(NeuralError::BadArgument {
                op: "maxpool2_backward",
                why: "argmax index out of range for input shape",
            });
        }
        gi[idx] = gi[idx] + *g;
    }
    Ok(grad_input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn picks_window_maximum() {
        let data: Vec<f64> = (1..=8).map(|v| v as f64).collect();
        let input = Tensor::from_vec(&[1, 1, 2, 2, 2], data).unwrap();
        let (out, argmax) = maxpool2_forward(&input).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1, 1, 1]);
        assert_relative_eq!(out.data()[0], 8.0);
        assert_eq!(argmax[0], 7);
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let input = Tensor::from_vec(&[1, 1, 2, 2, 2], vec![3.0_f64; 8]).unwrap();
        let (out, argmax) = maxpool2_forward(&input).unwrap();
        assert_relative_eq!(out.data()[0], 3.0);
        assert_eq!(argmax[0], 0);
        // All upstream gradient lands on that first element.
        let go = Tensor::from_vec(&[1, 1, 1, 1, 1], vec![2.5]).unwrap();
        let gi = maxpool2_backward(&[1, 1, 2, 2, 2], &argmax, &go).unwrap();
        assert_relative_eq!(gi.data()[0], 2.5);
        assert!(gi.data()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn halves_every_spatial_dimension() {
        let input = Tensor::<f32>::zeros(&[2, 3, 4, 6, 8]);
        let (out, _) = maxpool2_forward(&input).unwrap();
        assert_eq!(out.shape(), &[2, 3, 2, 3, 4]);
    }

    #[test]
    fn rejects_odd_dimensions() {
        let input = Tensor::<f32>::zeros(&[1, 1, 3, 4, 4]);
        assert!(maxpool2_forward(&input).is_err());
        let input = Tensor::<f32>::zeros(&[1, 1, 4, 4]);
        assert!(maxpool2_forward(&input).is_err());
    }

    #[test]
    fn backward_routes_to_the_winner_only() {
        let data = vec![
            0.0, 9.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, // first window, max at idx 1
        ];
        let input = Tensor::from_vec(&[1, 1, 2, 2, 2], data).unwrap();
        let (_, argmax) = maxpool2_forward(&input).unwrap();
        let go = Tensor::from_vec(&[1, 1, 1, 1, 1], vec![1.0]).unwrap();
        let gi = maxpool2_backward(&[1, 1, 2, 2, 2], &argmax, &go).unwrap();
        assert_relative_eq!(gi.data()[1], 1.0);
        assert_relative_eq!(gi.data()[0], 0.0);
    }
}
