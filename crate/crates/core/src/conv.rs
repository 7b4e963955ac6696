use crate::error::{invalid, Error, Result};
use crate::tensor::{Element, Shape, Tensor};

/// A set of convolution filters, each reading an explicit list of input
/// channels.
///
/// Lists may overlap between filters, so one bank can express dense, grouped,
/// depthwise and channel-sharing convolutions alike. Weights are stored filter
/// by filter, then listed channel, then kernel row, then kernel column.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilterBank<T> {
    kernel: (usize, usize),
    channels: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Element> ConvFilterBank<T> {
    pub fn new(kernel: (usize, usize), channels: Vec<Vec<usize>>, weights: Vec<T>) -> Result<Self> {
        if kernel.0 == 0 || kernel.1 == 0 {
            return invalid(format!("kernel must be positive, got {}x{}", kernel.0, kernel.1));
        }
        if channels.is_empty() {
            return invalid("filter bank must contain at least one filter");
        }
        if let Some(i) = channels.iter().position(|c| c.is_empty()) {
            return invalid(format!("filter {i} lists no input channels"));
        }
        let taps = kernel.0 * kernel.1;
        let mut offsets = Vec::with_capacity(channels.len() + 1);
        let mut total = 0;
        for list in &channels {
            offsets.push(total);
            total += list.len() * taps;
        }
        offsets.push(total);
        if weights.len() != total {
            return Err(Error::ShapeMismatch {
                expected: format!("{total} weights"),
                actual: format!("{} weights", weights.len()),
            });
        }
        Ok(Self {
            kernel,
            channels,
            offsets,
            weights,
        })
    }

    /// Standard convolution: every filter reads channels `0..in_channels`.
    pub fn dense(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        weights: Vec<T>,
    ) -> Result<Self> {
        let all: Vec<usize> = (0..in_channels).collect();
        Self::new(kernel, vec![all; out_channels], weights)
    }

    pub fn zeros(kernel: (usize, usize), channels: Vec<Vec<usize>>) -> Result<Self> {
        let taps = kernel.0 * kernel.1;
        let n = channels.iter().map(|c| c.len() * taps).sum();
        Self::new(kernel, channels, vec![T::ZERO; n])
    }

    pub fn count(&self) -> usize {
        self.channels.len()
    }

    pub fn kernel(&self) -> (usize, usize) {
        self.kernel
    }

    pub fn channels(&self) -> &[Vec<usize>] {
        &self.channels
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    #[inline]
    pub fn weight_index(&self, filter: usize, listed: usize, ky: usize, kx: usize) -> usize {
        self.offsets[filter] + (listed * self.kernel.0 + ky) * self.kernel.1 + kx
    }

    fn max_channel(&self) -> usize {
        self.channels.iter().flatten().copied().max().unwrap_or(0)
    }
}

/// Output length of a convolution along one axis.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

fn out_shape<T: Element>(
    x: &Tensor<T>,
    bank: &ConvFilterBank<T>,
    stride: usize,
    padding: usize,
) -> Result<Shape> {
    if stride == 0 {
        return invalid("stride must be at least 1");
    }
    let s = x.shape();
    if bank.max_channel() >= s.c {
        return invalid(format!(
            "filter bank references channel {} but input has {} channels",
            bank.max_channel(),
            s.c
        ));
    }
    let (kh, kw) = bank.kernel();
    match (
        conv_out_dim(s.h, kh, stride, padding),
        conv_out_dim(s.w, kw, stride, padding),
    ) {
        (Some(h), Some(w)) => Shape::new(s.n, bank.count(), h, w),
        _ => invalid(format!(
            "kernel {kh}x{kw} with padding {padding} does not fit input {s}"
        )),
    }
}

/// Reference convolution: direct sum of products over each filter's listed
/// channels and kernel window, zero padded, no bias.
pub fn conv2d_oracle<T: Element>(
    x: &Tensor<T>,
    bank: &ConvFilterBank<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let os = out_shape(x, bank, stride, padding)?;
    let is = x.shape();
    let (kh, kw) = bank.kernel();
    let mut out = Tensor::zeros(os);
    for n in 0..os.n {
        for f in 0..os.c {
            for oy in 0..os.h {
                for ox in 0..os.w {
                    let mut acc = T::ZERO;
                    for (li, &ch) in bank.channels()[f].iter().enumerate() {
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= is.h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= is.w as isize {
                                    continue;
                                }
                                acc += bank.weights()[bank.weight_index(f, li, ky, kx)]
                                    * x.get(n, ch, iy as usize, ix as usize);
                            }
                        }
                    }
                    out.set(n, f, oy, ox, acc);
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`conv2d_oracle`]: gradients with respect to the input and to
/// the bank's weights (same layout as [`ConvFilterBank::weights`]).
pub fn conv2d_backward<T: Element>(
    x: &Tensor<T>,
    bank: &ConvFilterBank<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>)> {
    let os = out_shape(x, bank, stride, padding)?;
    if grad_out.shape() != os {
        return Err(Error::ShapeMismatch {
            expected: os.to_string(),
            actual: grad_out.shape().to_string(),
        });
    }
    let is = x.shape();
    let (kh, kw) = bank.kernel();
    let mut gx = Tensor::zeros(is);
    let mut gw = vec![T::ZERO; bank.weights().len()];
    for n in 0..os.n {
        for f in 0..os.c {
            for oy in 0..os.h {
                for ox in 0..os.w {
                    let g = grad_out.get(n, f, oy, ox);
                    for (li, &ch) in bank.channels()[f].iter().enumerate() {
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= is.h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= is.w as isize {
                                    continue;
                                }
                                let wi = bank.weight_index(f, li, ky, kx);
                                let xi = x.offset(n, ch, iy as usize, ix as usize);
                                gw[wi] += g * x.data()[xi];
                                gx.data_mut()[xi] += g * bank.weights()[wi];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((gx, gw))
}

/// Component-wise sum of two equally shaped tensors.
pub fn add_elementwise<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let mut out = a.clone();
    out.add_assign(b)?;
    Ok(out)
}
