//! Convolution, pooling, dense and dropout layers over `[channel, row, col]`
//! feature maps. Parameters live in a flat slice and are addressed by
//! [`Slot`]s; gradients accumulate into a slice of the same layout.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Uniform};

use super::params::{ParamLayout, Slot};

/// 3×3-style square-kernel convolution, stride 1, with fused ReLU.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub pad: usize,
    /// `[out, in, ki, kj]`
    pub weight: Slot,
    pub bias: Slot,
}

impl Conv2d {
    pub fn new(layout: &mut ParamLayout, name: &str, in_channels: usize, out_channels: usize, kernel: usize, pad: usize) -> Self {
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            pad,
            weight: layout.push(format!("{name}.weight"), &[out_channels, in_channels, kernel, kernel]),
            bias: layout.push(format!("{name}.bias"), &[out_channels]),
        }
    }

    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        (h + 2 * self.pad + 1 - self.kernel, w + 2 * self.pad + 1 - self.kernel)
    }

    fn weights<'p>(&self, p: &'p [f64]) -> ArrayView2<'p, f64> {
        ArrayView2::from_shape((self.out_channels, self.in_channels * self.kernel * self.kernel), self.weight.of(p))
            .expect("slot sized for weight matrix")
    }

    /// `[in·k·k, out_h·out_w]` patch matrix.
    fn im2col(&self, x: ArrayView3<'_, f64>) -> Array2<f64> {
        let (c, h, w) = x.dim();
        let (oh, ow) = self.output_size(h, w);
        let k = self.kernel;
        let mut cols = Array2::zeros((c * k * k, oh * ow));
        for ch in 0..c {
            for ki in 0..k {
                for kj in 0..k {
                    let mut row = cols.row_mut((ch * k + ki) * k + kj);
                    for oy in 0..oh {
                        let Some(iy) = (oy + ki).checked_sub(self.pad).filter(|&v| v < h) else {
                            continue;
                        };
                        for ox in 0..ow {
                            if let Some(ix) = (ox + kj).checked_sub(self.pad).filter(|&v| v < w) {
                                row[oy * ow + ox] = x[[ch, iy, ix]];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &Array2<f64>, h: usize, w: usize) -> Array3<f64> {
        let (oh, ow) = self.output_size(h, w);
        let k = self.kernel;
        let mut dx = Array3::zeros((self.in_channels, h, w));
        for ch in 0..self.in_channels {
            for ki in 0..k {
                for kj in 0..k {
                    let row = cols.row((ch * k + ki) * k + kj);
                    for oy in 0..oh {
                        let Some(iy) = (oy + ki).checked_sub(self.pad).filter(|&v| v < h) else {
                            continue;
                        };
                        for ox in 0..ow {
                            if let Some(ix) = (ox + kj).checked_sub(self.pad).filter(|&v| v < w) {
                                dx[[ch, iy, ix]] += row[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    /// Pre-activation output; `relu` is applied by the caller if wanted.
    pub fn forward_linear(&self, p: &[f64], x: ArrayView3<'_, f64>) -> Array3<f64> {
        let (_, h, w) = x.dim();
        let (oh, ow) = self.output_size(h, w);
        let cols = self.im2col(x);
        let mut out = Array2::zeros((self.out_channels, oh * ow));
        general_mat_mul(1.0, &self.weights(p), &cols, 0.0, &mut out);
        for (mut row, b) in out.rows_mut().into_iter().zip(self.bias.of(p)) {
            row += *b;
        }
        out.into_shape_with_order((self.out_channels, oh, ow)).expect("contiguous")
    }

    pub fn forward(&self, p: &[f64], x: ArrayView3<'_, f64>) -> Array3<f64> {
        let mut y = self.forward_linear(p, x);
        y.mapv_inplace(|v| v.max(0.0));
        y
    }

    /// Backward through the linear part given `dy` w.r.t. the pre-activation.
    pub fn backward_linear(&self, p: &[f64], x: ArrayView3<'_, f64>, dy: &Array3<f64>, g: &mut [f64]) -> Array3<f64> {
        let (_, h, w) = x.dim();
        let (oh, ow) = self.output_size(h, w);
        let cols = self.im2col(x);
        let dy2 = dy
            .view()
            .into_shape_with_order((self.out_channels, oh * ow))
            .expect("contiguous");
        {
            let ck = self.in_channels * self.kernel * self.kernel;
            let mut gw = ArrayViewMut2::from_shape((self.out_channels, ck), self.weight.of_mut(g)).expect("slot");
            general_mat_mul(1.0, &dy2, &cols.t(), 1.0, &mut gw);
        }
        for (gb, row) in self.bias.of_mut(g).iter_mut().zip(dy2.rows()) {
            *gb += row.sum();
        }
        let mut dcols = Array2::zeros(cols.dim());
        general_mat_mul(1.0, &self.weights(p).t(), &dy2, 0.0, &mut dcols);
        self.col2im(&dcols, h, w)
    }

    /// Backward through ReLU and the convolution; `y` is the forward output.
    pub fn backward(&self, p: &[f64], x: ArrayView3<'_, f64>, y: &Array3<f64>, dy: &Array3<f64>, g: &mut [f64]) -> Array3<f64> {
        let mut d = dy.clone();
        relu_mask(&mut d, y);
        self.backward_linear(p, x, &d, g)
    }
}

/// Zeroes `d` wherever the ReLU output `y` is not positive.
pub(crate) fn relu_mask<D: ndarray::Dimension>(d: &mut ndarray::Array<f64, D>, y: &ndarray::Array<f64, D>) {
    d.zip_mut_with(y, |d, &y| {
        if y <= 0.0 {
            *d = 0.0;
        }
    });
}

/// 2×2 max pooling with stride 2; remembers the winning input of each
/// output for gradient routing. Ties go to the first element in row-major
/// order.
pub(crate) fn max_pool(x: &Array3<f64>) -> (Array3<f64>, Vec<usize>) {
    let (c, h, w) = x.dim();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Array3::zeros((c, oh, ow));
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (f64::NEG_INFINITY, 0);
                for dy in 0..2 {
                    for dx in 0..2 {
                        let (y, xx) = (2 * oy + dy, 2 * ox + dx);
                        let v = x[[ch, y, xx]];
                        if v > best.0 {
                            best = (v, (ch * h + y) * w + xx);
                        }
                    }
                }
                out[[ch, oy, ox]] = best.0;
                argmax.push(best.1);
            }
        }
    }
    (out, argmax)
}

pub(crate) fn max_pool_backward(dy: &Array3<f64>, argmax: &[usize], input_dim: (usize, usize, usize)) -> Array3<f64> {
    let mut dx = Array3::zeros(input_dim);
    let flat = dx.as_slice_mut().expect("standard layout");
    for (&d, &i) in dy.iter().zip(argmax) {
        flat[i] += d;
    }
    dx
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out, in]`
    pub weight: Slot,
    pub bias: Slot,
}

impl Dense {
    pub fn new(layout: &mut ParamLayout, name: &str, inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: layout.push(format!("{name}.weight"), &[outputs, inputs]),
            bias: layout.push(format!("{name}.bias"), &[outputs]),
        }
    }

    fn weights<'p>(&self, p: &'p [f64]) -> ArrayView2<'p, f64> {
        ArrayView2::from_shape((self.outputs, self.inputs), self.weight.of(p)).expect("slot")
    }

    pub fn forward(&self, p: &[f64], x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.weights(p).dot(&x) + ArrayView1::from(self.bias.of(p))
    }

    pub fn backward(&self, p: &[f64], x: ArrayView1<'_, f64>, dy: ArrayView1<'_, f64>, g: &mut [f64]) -> Array1<f64> {
        {
            let mut gw = ArrayViewMut2::from_shape((self.outputs, self.inputs), self.weight.of_mut(g)).expect("slot");
            for (mut row, &d) in gw.rows_mut().into_iter().zip(dy) {
                row.scaled_add(d, &x);
            }
        }
        ArrayViewMut1::from(self.bias.of_mut(g)).scaled_add(1.0, &dy);
        self.weights(p).t().dot(&dy)
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else
/// `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng>(rng: &mut R, len: usize, rate: f64) -> Array1<f64> {
    if rate <= 0.0 {
        return Array1::ones(len);
    }
    let keep = Bernoulli::new(1.0 - rate).expect("rate in [0, 1)");
    let scale = 1.0 / (1.0 - rate);
    (0..len).map(|_| if keep.sample(rng) { scale } else { 0.0 }).collect()
}

/// Fills `p` uniformly in `[-limit, limit]`.
pub(crate) fn fill_uniform<R: Rng>(rng: &mut R, p: &mut [f64], limit: f64) {
    if limit > 0.0 {
        let u = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        for v in p {
            *v = u.sample(rng);
        }
    }
}
