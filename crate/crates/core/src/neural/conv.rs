//! 3-D convolution with zero padding and stride 1.
//!
//! Input `[n, c_in, d, h, w]`, kernels `[c_out, c_in, k, k, k]`, bias
//! `[c_out]`, output `[n, c_out, d', h', w']` with `d' = d + 2p - k + 1`
//! and likewise for the other two spatial axes.
//!
//! Both passes copy each sample into an explicitly zero padded volume
//! and embed the output in a volume of the same dimensions. Every
//! kernel tap then touches the whole volume at a single flat offset,
//! so the inner loops are long, dense and branch free; cells that land
//! in the embedding slack are dropped when the result is copied out.

use alloc::vec;
use alloc::vec::Vec;

use super::{NeuralError, Scalar, Tensor};

struct ConvDims {
    n: usize,
    cin: usize,
    d: usize,
    h: usize,
    w: usize,
    cout: usize,
    k: usize,
    od: usize,
    oh: usize,
    ow: usize,
    /// Padded spatial dims shared by the input and output embeddings.
    dp: usize,
    hp: usize,
    wp: usize,
}

impl ConvDims {
    fn vol(&self) -> usize {
        self.dp * self.hp * self.wp
    }
}

fn check_dims<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &[T],
    padding: usize,
) -> Result<ConvDims, NeuralError> {
    let is = input.shape();
    if is.len() != 5 {
        return Err(NeuralError::BadShape {
            op: "conv3d",
            expected: "input of rank 5 [n, c_in, d, h, w]",
            got: is.to_vec(),
        });
    }
    let ks = kernels.shape();
    if ks.len() != 5 || ks[2] != ks[3] || ks[3] != ks[4] {
        return Err(NeuralError::BadShape {
            op: "conv3d",
            expected: "kernels of rank 5 [c_out, c_in, k, k, k]",
            got: ks.to_vec(),
        });
    }
    if ks[1] != is[1] {
        return Err(NeuralError::BadShape {
            op: "conv3d",
            expected: "kernel c_in matching input c_in",
            got: ks.to_vec(),
        });
    }
    if bias.len() != ks[0] {
        return Err(NeuralError::BadArgument {
            op: "conv3d",
            why: "bias length must equal c_out",
        });
    }
    let k = ks[2];
    if k == 0 {
        return Err(NeuralError::BadArgument {
            op: "conv3d",
            why: "kernel size must be >= 1",
        });
    }
    let (d, h, w) = (is[2], is[3], is[4]);
    if d + 2 * padding < k || h + 2 * padding < k || w + 2 * padding < k {
        return Err(NeuralError::BadArgument {
            op: "conv3d",
            why: "kernel larger than padded input",
        });
    }
    Ok(ConvDims {
        n: is[0],
        cin: is[1],
        d,
        h,
        w,
        cout: ks[0],
        k,
        od: d + 2 * padding - k + 1,
        oh: h + 2 * padding - k + 1,
        ow: w + 2 * padding - k + 1,
        dp: d + 2 * padding,
        hp: h + 2 * padding,
        wp: w + 2 * padding,
    })
}

/// `dst += wgt * src` over equal-length slices.
#[inline]
fn axpy<T: Scalar>(dst: &mut [T], wgt: T, src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *d + wgt * *s;
    }
}

/// Dot product with independent partial-sum lanes so the reduction
/// vectorizes; the lane count fixes the summation order.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    const LANES: usize = 16;
    let mut acc = [T::zero(); LANES];
    let mut chunks_a = a.chunks_exact(LANES);
    let mut chunks_b = b.chunks_exact(LANES);
    for (ca, cb) in (&mut chunks_a).zip(&mut chunks_b) {
        for i in 0..LANES {
            acc[i] = acc[i] + ca[i] * cb[i];
        }
    }
    let mut tail = T::zero();
    for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        tail = tail + *x * *y;
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

/// Copy each `[d, h, w]` channel of `src` into the interior of a zero
/// filled `[dp, hp, wp]` volume, all channels concatenated.
fn pad_channels<T: Scalar>(src: &[T], chans: usize, dm: &ConvDims, padding: usize) -> Vec<T> {
    let vol = dm.vol();
    let mut out = vec![T::zero(); chans * vol];
    let plane_in = dm.h * dm.w;
    let plane_p = dm.hp * dm.wp;
    for c in 0..chans {
        for z in 0..dm.d {
            for y in 0..dm.h {
                let s = c * dm.d * plane_in + z * plane_in + y * dm.w;
                let t = c * vol + (z + padding) * plane_p + (y + padding) * dm.wp + padding;
                out[t..t + dm.w].copy_from_slice(&src[s..s + dm.w]);
            }
        }
    }
    out
}

/// Copy each `[od, oh, ow]` channel of `src` into the leading corner of
/// a zero filled `[dp, hp, wp]` volume, all channels concatenated.
fn embed_channels<T: Scalar>(src: &[T], chans: usize, dm: &ConvDims) -> Vec<T> {
    let vol = dm.vol();
    let mut out = vec![T::zero(); chans * vol];
    let plane_o = dm.oh * dm.ow;
    let plane_p = dm.hp * dm.wp;
    for c in 0..chans {
        for z in 0..dm.od {
            for y in 0..dm.oh {
                let s = c * dm.od * plane_o + z * plane_o + y * dm.ow;
                let t = c * vol + z * plane_p + y * dm.wp;
                out[t..t + dm.ow].copy_from_slice(&src[s..s + dm.ow]);
            }
        }
    }
    out
}

pub fn conv3d_forward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &[T],
    padding: usize,
) -> Result<Tensor<T>, NeuralError> {
    let dm = check_dims(input, kernels, bias, padding)?;
    let vol = dm.vol();
    let plane_p = dm.hp * dm.wp;
    let plane_o = dm.oh * dm.ow;
    let in_chan = dm.d * dm.h * dm.w;
    let kvol = dm.k * dm.k * dm.k;

    let mut out = Tensor::zeros(&[dm.n, dm.cout, dm.od, dm.oh, dm.ow]);
    let o = out.data_mut();
    let mut q = vec![T::zero(); vol];

    for n in 0..dm.n {
        let pin = pad_channels(
            &input.data()[n * dm.cin * in_chan..(n + 1) * dm.cin * in_chan],
            dm.cin,
            &dm,
            padding,
        );
        for co in 0..dm.cout {
            for v in q.iter_mut() {
                *v = bias[co];
            }
            for ci in 0..dm.cin {
                let p = &pin[ci * vol..(ci + 1) * vol];
                let k_base = (co * dm.cin + ci) * kvol;
                for kd in 0..dm.k {
                    for kh in 0..dm.k {
                        for kw in 0..dm.k {
                            let delta = kd * plane_p + kh * dm.wp + kw;
                            let wgt = kernels.data()[k_base + kd * dm.k * dm.k + kh * dm.k + kw];
                            axpy(&mut q[..vol - delta], wgt, &p[delta..]);
                        }
                    }
                }
            }
            let out_base = (n * dm.cout + co) * dm.od * plane_o;
            for z in 0..dm.od {
                for y in 0..dm.oh {
                    let s = z * plane_p + y * dm.wp;
                    let t = out_base + z * plane_o + y * dm.ow;
                    o[t..t + dm.ow].copy_from_slice(&q[s..s + dm.ow]);
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of the convolution: returns `(grad_input, grad_kernels,
/// grad_bias)` for the upstream `grad_out`.
pub fn conv3d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    grad_out: &Tensor<T>,
    padding: usize,
) -> Result<(Tensor<T>, Tensor<T>, Vec<T>), NeuralError> {
    let bias_probe = vec![T::zero(); kernels.shape()[0]];
    let dm = check_dims(input, kernels, &bias_probe, padding)?;
    let expected = [dm.n, dm.cout, dm.od, dm.oh, dm.ow];
    if grad_out.shape() != expected {
        return Err(NeuralError::BadShape {
            op: "conv3d_backward",
            expected: "grad_out matching the forward output shape",
            got: grad_out.shape().to_vec(),
        });
    }

    let vol = dm.vol();
    let plane_p = dm.hp * dm.wp;
    let in_chan = dm.d * dm.h * dm.w;
    let out_chan = dm.od * dm.oh * dm.ow;
    let kvol = dm.k * dm.k * dm.k;

    let mut grad_input = Tensor::zeros(input.shape());
    let mut grad_kernels = Tensor::zeros(kernels.shape());
    let mut grad_bias = vec![T::zero(); dm.cout];
    let gk = grad_kernels.data_mut();
    let gi = grad_input.data_mut();

    let mut gp = vec![T::zero(); dm.cin * vol];
    for n in 0..dm.n {
        let pin = pad_channels(
            &input.data()[n * dm.cin * in_chan..(n + 1) * dm.cin * in_chan],
            dm.cin,
            &dm,
            padding,
        );
        let gq = embed_channels(
            &grad_out.data()[n * dm.cout * out_chan..(n + 1) * dm.cout * out_chan],
            dm.cout,
            &dm,
        );
        for v in gp.iter_mut() {
            *v = T::zero();
        }

        for co in 0..dm.cout {
            let g = &gq[co * vol..(co + 1) * vol];
            let mut bsum = T::zero();
            for row in grad_out.data()
                [(n * dm.cout + co) * out_chan..(n * dm.cout + co + 1) * out_chan]
                .chunks(dm.ow)
            {
                bsum = bsum + row.iter().fold(T::zero(), |s, &v| s + v);
            }
            grad_bias[co] = grad_bias[co] + bsum;

            for ci in 0..dm.cin {
                let p = &pin[ci * vol..(ci + 1) * vol];
                let gpc = &mut gp[ci * vol..(ci + 1) * vol];
                let k_base = (co * dm.cin + ci) * kvol;
                for kd in 0..dm.k {
                    for kh in 0..dm.k {
                        for kw in 0..dm.k {
                            let delta = kd * plane_p + kh * dm.wp + kw;
                            let kidx = k_base + kd * dm.k * dm.k + kh * dm.k + kw;
                            let wgt = kernels.data()[kidx];
                            gk[kidx] = gk[kidx] + dot(&g[..vol - delta], &p[delta..]);
                            axpy(&mut gpc[delta..], wgt, &g[..vol - delta]);
                        }
                    }
                }
            }
        }

        // Strip the padding border to recover the input gradient.
        let plane_in = dm.h * dm.w;
        for ci in 0..dm.cin {
            for z in 0..dm.d {
                for y in 0..dm.h {
                    let s = ci * vol + (z + padding) * plane_p + (y + padding) * dm.wp + padding;
                    let t = (n * dm.cin + ci) * in_chan + z * plane_in + y * dm.w;
                    gi[t..t + dm.w].copy_from_slice(&gp[s..s + dm.w]);
                }
            }
        }
    }
    Ok((grad_input, grad_kernels, grad_bias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let data = (0..shape.iter().product::<usize>())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn all_ones_cube_sums_to_eight() {
        let input = Tensor::from_vec(&[1, 1, 2, 2, 2], vec![1.0_f64; 8]).unwrap();
        let kernels = Tensor::from_vec(&[1, 1, 2, 2, 2], vec![1.0; 8]).unwrap();
        let out = conv3d_forward(&input, &kernels, &[0.0], 0).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1, 1, 1]);
        assert_relative_eq!(out.data()[0], 8.0);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = rand_tensor(&[1, 1, 4, 4, 4], &mut rng);
        let mut kdata = vec![0.0_f64; 27];
        kdata[13] = 1.0; // center of the 3x3x3 kernel
        let kernels = Tensor::from_vec(&[1, 1, 3, 3, 3], kdata).unwrap();
        let out = conv3d_forward(&input, &kernels, &[0.0], 1).unwrap();
        assert_eq!(out.shape(), input.shape());
        for (a, b) in out.data().iter().zip(input.data()) {
            assert_relative_eq!(a, b);
        }
    }

    #[test]
    fn output_shape_and_bias() {
        let input = Tensor::<f64>::zeros(&[2, 3, 5, 6, 7]);
        let kernels = Tensor::<f64>::zeros(&[4, 3, 3, 3, 3]);
        let out = conv3d_forward(&input, &kernels, &[1.0, 2.0, 3.0, 4.0], 1).unwrap();
        assert_eq!(out.shape(), &[2, 4, 5, 6, 7]);
        // Zero kernels leave only the bias.
        let plane = 5 * 6 * 7;
        assert_relative_eq!(out.data()[0], 1.0);
        assert_relative_eq!(out.data()[plane], 2.0);
        let out0 = conv3d_forward(&input, &kernels, &[1.0, 2.0, 3.0, 4.0], 0).unwrap();
        assert_eq!(out0.shape(), &[2, 4, 3, 4, 5]);
    }

    #[test]
    fn rejects_bad_shapes() {
        let input = Tensor::<f64>::zeros(&[1, 2, 4, 4, 4]);
        let kernels = Tensor::<f64>::zeros(&[3, 1, 3, 3, 3]);
        assert!(conv3d_forward(&input, &kernels, &[0.0; 3], 1).is_err());
        let kernels = Tensor::<f64>::zeros(&[3, 2, 3, 3, 3]);
        assert!(conv3d_forward(&input, &kernels, &[0.0; 2], 1).is_err());
        let small = Tensor::<f64>::zeros(&[1, 2, 2, 2, 2]);
        let big_k = Tensor::<f64>::zeros(&[1, 2, 5, 5, 5]);
        assert!(conv3d_forward(&small, &big_k, &[0.0], 1).is_err());
        let rank4 = Tensor::<f64>::zeros(&[2, 4, 4, 4]);
        assert!(conv3d_forward(&rank4, &kernels, &[0.0; 3], 1).is_err());
    }

    #[test]
    fn matches_a_naive_per_cell_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &(pad, k) in &[(1usize, 3usize), (0, 3), (0, 2), (2, 3)] {
            let (n, cin, cout, d, h, w) = (2, 3, 2, 4, 5, 3);
            let input = rand_tensor(&[n, cin, d, h, w], &mut rng);
            let kernels = rand_tensor(&[cout, cin, k, k, k], &mut rng);
            let bias: Vec<f64> = (0..cout).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let out = conv3d_forward(&input, &kernels, &bias, pad).unwrap();

            let (od, oh, ow) = (d + 2 * pad - k + 1, h + 2 * pad - k + 1, w + 2 * pad - k + 1);
            assert_eq!(out.shape(), &[n, cout, od, oh, ow]);
            let at = |ni: usize, c: usize, z: isize, y: isize, x: isize| -> f64 {
                if z < 0 || y < 0 || x < 0 || z >= d as isize || y >= h as isize || x >= w as isize
                {
                    return 0.0;
                }
                input.data()
                    [((ni * cin + c) * d + z as usize) * h * w + y as usize * w + x as usize]
            };
            for ni in 0..n {
                for co in 0..cout {
                    for z in 0..od {
                        for y in 0..oh {
                            for x in 0..ow {
                                let mut acc = bias[co];
                                for ci in 0..cin {
                                    for kd in 0..k {
                                        for kh in 0..k {
                                            for kw in 0..k {
                                                let wgt = kernels.data()[(((co * cin + ci) * k
                                                    + kd)
                                                    * k
                                                    + kh)
                                                    * k
                                                    + kw];
                                                acc += wgt
                                                    * at(
                                                        ni,
                                                        ci,
                                                        z as isize + kd as isize - pad as isize,
                                                        y as isize + kh as isize - pad as isize,
                                                        x as isize + kw as isize - pad as isize,
                                                    );
                                            }
                                        }
                                    }
                                }
                                let got = out.data()
                                    [((ni * cout + co) * od + z) * oh * ow + y * ow + x];
                                assert_relative_eq!(got, acc, epsilon = 1e-12);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn convolution_is_linear_in_the_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = rand_tensor(&[1, 2, 4, 4, 4], &mut rng);
        let b = rand_tensor(&[1, 2, 4, 4, 4], &mut rng);
        let kernels = rand_tensor(&[3, 2, 3, 3, 3], &mut rng);
        let bias = vec![0.0; 3];
        let mix_data: Vec<f64> = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| 0.7 * x - 1.3 * y)
            .collect();
        let mix = Tensor::from_vec(a.shape(), mix_data).unwrap();
        let fa = conv3d_forward(&a, &kernels, &bias, 1).unwrap();
        let fb = conv3d_forward(&b, &kernels, &bias, 1).unwrap();
        let fm = conv3d_forward(&mix, &kernels, &bias, 1).unwrap();
        for ((x, y), m) in fa.data().iter().zip(fb.data()).zip(fm.data()) {
            assert_relative_eq!(0.7 * x - 1.3 * y, m, epsilon = 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        use crate::neural::gradcheck::{finite_diff_check, GradCheckConfig};
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let input = rand_tensor(&[2, 2, 3, 3, 3], &mut rng);
        let kernels = rand_tensor(&[2, 2, 3, 3, 3], &mut rng);
        let bias: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect();
        // Scalar objective: weighted sum of outputs, fixed weights.
        let weights: Vec<f64> = {
            let out = conv3d_forward(&input, &kernels, &bias, 1).unwrap();
            (0..out.len()).map(|i| ((i % 7) as f64 - 3.0) / 3.0).collect()
        };
        let objective = |inp: &Tensor<f64>, ker: &Tensor<f64>, b: &[f64]| -> f64 {
            let out = conv3d_forward(inp, ker, b, 1).unwrap();
            out.data().iter().zip(&weights).map(|(o, w)| o * w).sum()
        };
        let go = Tensor::from_vec(
            conv3d_forward(&input, &kernels, &bias, 1).unwrap().shape(),
            weights.clone(),
        )
        .unwrap();
        let (gi, gk, gb) = conv3d_backward(&input, &kernels, &go, 1).unwrap();

        let cfg = GradCheckConfig::default();
        let report = finite_diff_check(
            input.data(),
            gi.data(),
            |p| {
                let t = Tensor::from_vec(input.shape(), p.to_vec()).unwrap();
                objective(&t, &kernels, &bias)
            },
            &cfg,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "input grad {report:?}");

        let report = finite_diff_check(
            kernels.data(),
            gk.data(),
            |p| {
                let t = Tensor::from_vec(kernels.shape(), p.to_vec()).unwrap();
                objective(&input, &t, &bias)
            },
            &cfg,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "kernel grad {report:?}");

        let report = finite_diff_check(
            &bias,
            &gb,
            |p| objective(&input, &kernels, p),
            &cfg,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "bias grad {report:?}");
    }
}
