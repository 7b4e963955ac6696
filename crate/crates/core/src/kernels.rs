//! Direct kernels for the three CPWC paths.
//!
//! These avoid the generality of [`crate::conv2d_oracle`] (fixed 3×3 / 1×1
//! kernels, padding 1 / 0, contiguous inner loops) and are checked against it
//! in tests.

use crate::error::{invalid, Error, Result};
use crate::tensor::{Element, Shape, Tensor};

#[inline]
fn strided_len(len: usize, stride: usize) -> usize {
    (len - 1) / stride + 1
}

/// Valid output range `[lo, hi)` along one axis for kernel tap `k` (pad 1).
#[inline]
fn tap_range(k: usize, in_len: usize, out_len: usize, stride: usize) -> (usize, usize) {
    let lo = if k == 0 { 1 } else { 0 };
    // need o*stride + k - 1 <= in_len - 1
    if in_len < k {
        return (0, 0);
    }
    let hi = ((in_len - k) / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

/// `dst += conv3x3(src, k)` on one plane, zero padding 1.
fn acc_plane<T: Element>(
    src: &[T],
    (h, w): (usize, usize),
    dst: &mut [T],
    (oh, ow): (usize, usize),
    k: &[T],
    stride: usize,
) {
    for ky in 0..3 {
        let (y0, y1) = tap_range(ky, h, oh, stride);
        for kx in 0..3 {
            let (x0, x1) = tap_range(kx, w, ow, stride);
            let wk = k[ky * 3 + kx];
            for oy in y0..y1 {
                let row = &src[(oy * stride + ky - 1) * w..];
                let out = &mut dst[oy * ow..(oy + 1) * ow];
                for ox in x0..x1 {
                    out[ox] += wk * row[ox * stride + kx - 1];
                }
            }
        }
    }
}

/// Adjoint of [`acc_plane`] with respect to `src`.
fn scatter_plane<T: Element>(
    gdst: &[T],
    (oh, ow): (usize, usize),
    gsrc: &mut [T],
    (h, w): (usize, usize),
    k: &[T],
    stride: usize,
) {
    for ky in 0..3 {
        let (y0, y1) = tap_range(ky, h, oh, stride);
        for kx in 0..3 {
            let (x0, x1) = tap_range(kx, w, ow, stride);
            let wk = k[ky * 3 + kx];
            for oy in y0..y1 {
                let g = &gdst[oy * ow..(oy + 1) * ow];
                let row = &mut gsrc[(oy * stride + ky - 1) * w..];
                for ox in x0..x1 {
                    row[ox * stride + kx - 1] += wk * g[ox];
                }
            }
        }
    }
}

/// Adjoint of [`acc_plane`] with respect to `k`, accumulated into `gk`.
fn correlate_plane<T: Element>(
    src: &[T],
    (h, w): (usize, usize),
    gdst: &[T],
    (oh, ow): (usize, usize),
    gk: &mut [T],
    stride: usize,
) {
    for ky in 0..3 {
        let (y0, y1) = tap_range(ky, h, oh, stride);
        for kx in 0..3 {
            let (x0, x1) = tap_range(kx, w, ow, stride);
            let mut acc = T::ZERO;
            for oy in y0..y1 {
                let row = &src[(oy * stride + ky - 1) * w..];
                let g = &gdst[oy * ow..(oy + 1) * ow];
                for ox in x0..x1 {
                    acc += g[ox] * row[ox * stride + kx - 1];
                }
            }
            gk[ky * 3 + kx] += acc;
        }
    }
}

fn check_stride(stride: usize) -> Result<()> {
    if stride == 0 {
        return invalid("stride must be at least 1");
    }
    Ok(())
}

fn check_grad<T: Element>(g: &Tensor<T>, expected: Shape) -> Result<()> {
    if g.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: g.shape().to_string(),
        });
    }
    Ok(())
}

fn pointwise_out_shape<T: Element>(x: &Tensor<T>, w: &[T], z: usize, stride: usize) -> Result<Shape> {
    check_stride(stride)?;
    let s = x.shape();
    if w.len() != z * s.c {
        return Err(Error::ShapeMismatch {
            expected: format!("{} pointwise weights ({z}x{})", z * s.c, s.c),
            actual: format!("{} weights", w.len()),
        });
    }
    Shape::new(s.n, z, strided_len(s.h, stride), strided_len(s.w, stride))
}

/// Samples every `stride`-th pixel of each plane.
fn subsample<T: Element>(x: &Tensor<T>, stride: usize) -> Tensor<T> {
    if stride == 1 {
        return x.clone();
    }
    let s = x.shape();
    let (oh, ow) = (strided_len(s.h, stride), strided_len(s.w, stride));
    let os = Shape { h: oh, w: ow, ..s };
    Tensor::from_fn(os, |n, c, y, xx| x.get(n, c, y * stride, xx * stride))
}

/// 1×1 convolution with `Z × C` weights.
pub fn pointwise_forward<T: Element>(
    x: &Tensor<T>,
    w: &[T],
    z: usize,
    stride: usize,
) -> Result<Tensor<T>> {
    let os = pointwise_out_shape(x, w, z, stride)?;
    let xs = subsample(x, stride);
    let c = xs.shape().c;
    let mut out = Tensor::zeros(os);
    for n in 0..os.n {
        for oz in 0..z {
            let row = &w[oz * c..(oz + 1) * c];
            let start = out.offset(n, oz, 0, 0);
            let dst = &mut out.data_mut()[start..start + os.plane()];
            for (ci, &wk) in row.iter().enumerate() {
                for (d, &v) in dst.iter_mut().zip(xs.plane(n, ci)) {
                    *d += wk * v;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`pointwise_forward`] with respect to `x` and `w`.
pub fn pointwise_backward<T: Element>(
    x: &Tensor<T>,
    w: &[T],
    z: usize,
    stride: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>)> {
    let os = pointwise_out_shape(x, w, z, stride)?;
    check_grad(grad_out, os)?;
    let xs = subsample(x, stride);
    let s = x.shape();
    let c = s.c;
    let mut gw = vec![T::ZERO; w.len()];
    let mut gxs = Tensor::zeros(xs.shape());
    for n in 0..os.n {
        for oz in 0..z {
            let g = grad_out.plane(n, oz);
            for ci in 0..c {
                let xp = xs.plane(n, ci);
                gw[oz * c + ci] += g.iter().zip(xp).map(|(&a, &b)| a * b).sum();
                let wk = w[oz * c + ci];
                for (d, &gv) in gxs.plane_mut(n, ci).iter_mut().zip(g) {
                    *d += wk * gv;
                }
            }
        }
    }
    if stride == 1 {
        return Ok((gxs, gw));
    }
    let mut gx = Tensor::zeros(s);
    for n in 0..s.n {
        for ci in 0..c {
            for oy in 0..os.h {
                for ox in 0..os.w {
                    gx.set(n, ci, oy * stride, ox * stride, gxs.get(n, ci, oy, ox));
                }
            }
        }
    }
    Ok((gx, gw))
}

fn grouped_out_shape<T: Element>(
    x: &Tensor<T>,
    groups: &[Vec<usize>],
    w: &[T],
    stride: usize,
) -> Result<(Shape, Vec<usize>)> {
    check_stride(stride)?;
    let s = x.shape();
    if groups.is_empty() {
        return invalid("at least one group is required");
    }
    let mut offsets = Vec::with_capacity(groups.len());
    let mut total = 0;
    for (i, g) in groups.iter().enumerate() {
        if let Some(&bad) = g.iter().find(|&&c| c >= s.c) {
            return invalid(format!(
                "group {i} lists channel {bad} but input has {} channels",
                s.c
            ));
        }
        offsets.push(total);
        total += 9 * g.len();
    }
    if w.len() != total {
        return Err(Error::ShapeMismatch {
            expected: format!("{total} grouped 3x3 weights"),
            actual: format!("{} weights", w.len()),
        });
    }
    let os = Shape::new(s.n, groups.len(), strided_len(s.h, stride), strided_len(s.w, stride))?;
    Ok((os, offsets))
}

/// One 3×3 filter per group over that group's listed channels, padding 1.
pub fn grouped3x3_forward<T: Element>(
    x: &Tensor<T>,
    groups: &[Vec<usize>],
    w: &[T],
    stride: usize,
) -> Result<Tensor<T>> {
    let (os, offsets) = grouped_out_shape(x, groups, w, stride)?;
    let s = x.shape();
    let mut out = Tensor::zeros(os);
    for n in 0..os.n {
        for (g, chans) in groups.iter().enumerate() {
            let start = out.offset(n, g, 0, 0);
            let dst = &mut out.data_mut()[start..start + os.plane()];
            for (li, &ch) in chans.iter().enumerate() {
                let k = &w[offsets[g] + 9 * li..offsets[g] + 9 * li + 9];
                acc_plane(x.plane(n, ch), (s.h, s.w), dst, (os.h, os.w), k, stride);
            }
        }
    }
    Ok(out)
}

pub fn grouped3x3_backward<T: Element>(
    x: &Tensor<T>,
    groups: &[Vec<usize>],
    w: &[T],
    stride: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>)> {
    let (os, offsets) = grouped_out_shape(x, groups, w, stride)?;
    check_grad(grad_out, os)?;
    let s = x.shape();
    let mut gx = Tensor::zeros(s);
    let mut gw = vec![T::ZERO; w.len()];
    for n in 0..os.n {
        for (g, chans) in groups.iter().enumerate() {
            let gd = grad_out.plane(n, g);
            for (li, &ch) in chans.iter().enumerate() {
                let o = offsets[g] + 9 * li;
                correlate_plane(x.plane(n, ch), (s.h, s.w), gd, (os.h, os.w), &mut gw[o..o + 9], stride);
                scatter_plane(gd, (os.h, os.w), gx.plane_mut(n, ch), (s.h, s.w), &w[o..o + 9], stride);
            }
        }
    }
    Ok((gx, gw))
}

fn identity_groups(c: usize) -> Vec<Vec<usize>> {
    (0..c).map(|i| vec![i]).collect()
}

/// One 3×3 filter per channel, padding 1.
pub fn depthwise3x3_forward<T: Element>(x: &Tensor<T>, w: &[T], stride: usize) -> Result<Tensor<T>> {
    grouped3x3_forward(x, &identity_groups(x.shape().c), w, stride)
}

pub fn depthwise3x3_backward<T: Element>(
    x: &Tensor<T>,
    w: &[T],
    stride: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>)> {
    grouped3x3_backward(x, &identity_groups(x.shape().c), w, stride, grad_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::{conv2d_backward, conv2d_oracle, ConvFilterBank};
    use proptest::prelude::*;

    fn tensor(shape: Shape, vals: &[f64]) -> Tensor<f64> {
        let mut i = 0;
        Tensor::from_fn(shape, |_, _, _, _| {
            i += 1;
            vals[(i * 7919) % vals.len()]
        })
    }

    fn rel(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
        a.max_abs_diff(b) / b.max_abs().max(1e-300)
    }

    fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
        let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        d / b.iter().map(|v| v.abs()).fold(1e-300, f64::max)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn grouped_matches_oracle(
            c in 1usize..6, z in 1usize..6, h in 1usize..7, w in 1usize..7,
            stride in 1usize..4, vals in prop::collection::vec(-1.0f64..1.0, 64),
        ) {
            let plan = crate::group::plan_groups(c, z).unwrap();
            let x = tensor(Shape::new(2, c, h, w).unwrap(), &vals);
            let nw = 9 * plan.total_group_channels();
            let wts: Vec<f64> = (0..nw).map(|i| vals[(i * 31 + 5) % vals.len()]).collect();
            let fast = grouped3x3_forward(&x, plan.groups(), &wts, stride).unwrap();
            let bank = ConvFilterBank::new((3, 3), plan.groups().to_vec(), wts.clone()).unwrap();
            let slow = conv2d_oracle(&x, &bank, stride, 1).unwrap();
            prop_assert!(rel(&fast, &slow) <= 1e-12);

            let g = tensor(fast.shape(), &vals[3..]);
            let (gx, gw) = grouped3x3_backward(&x, plan.groups(), &wts, stride, &g).unwrap();
            let (ogx, ogw) = conv2d_backward(&x, &bank, stride, 1, &g).unwrap();
            prop_assert!(rel(&gx, &ogx) <= 1e-12);
            prop_assert!(rel_vec(&gw, &ogw) <= 1e-12);
        }

        #[test]
        fn pointwise_matches_oracle(
            c in 1usize..6, z in 1usize..6, h in 1usize..7, w in 1usize..7,
            stride in 1usize..4, vals in prop::collection::vec(-1.0f64..1.0, 64),
        ) {
            let x = tensor(Shape::new(2, c, h, w).unwrap(), &vals);
            let wts: Vec<f64> = (0..c * z).map(|i| vals[(i * 17 + 3) % vals.len()]).collect();
            let fast = pointwise_forward(&x, &wts, z, stride).unwrap();
            let bank = ConvFilterBank::dense(c, z, (1, 1), wts.clone()).unwrap();
            let slow = conv2d_oracle(&x, &bank, stride, 0).unwrap();
            prop_assert!(rel(&fast, &slow) <= 1e-12);

            let g = tensor(fast.shape(), &vals[1..]);
            let (gx, gw) = pointwise_backward(&x, &wts, z, stride, &g).unwrap();
            let (ogx, ogw) = conv2d_backward(&x, &bank, stride, 0, &g).unwrap();
            prop_assert!(rel(&gx, &ogx) <= 1e-12);
            prop_assert!(rel_vec(&gw, &ogw) <= 1e-12);
        }
    }

    #[test]
    fn depthwise_keeps_channels_apart() {
        let s = Shape::new(1, 2, 3, 3).unwrap();
        let x = Tensor::from_fn(s, |_, c, _, _| if c == 0 { 1.0f64 } else { 0.0 });
        let mut w = vec![0.0; 18];
        w[9 + 4] = 1.0; // channel 1 identity, channel 0 zero
        let y = depthwise3x3_forward(&x, &w, 1).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_weight_count_is_rejected() {
        let x = Tensor::<f64>::zeros(Shape::new(1, 2, 3, 3).unwrap());
        assert!(pointwise_forward(&x, &[0.0; 5], 3, 1).is_err());
        assert!(grouped3x3_forward(&x, &[vec![0, 1]], &[0.0; 9], 1).is_err());
        assert!(grouped3x3_forward(&x, &[vec![2]], &[0.0; 9], 1).is_err());
        assert!(depthwise3x3_forward(&x, &[0.0; 18], 0).is_err());
    }
}
