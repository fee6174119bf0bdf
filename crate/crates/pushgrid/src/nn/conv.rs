//! Strided 2D convolution (valid padding) via im2col and matrix products.

use super::{orthogonal, Param, ParamSet};
use ndarray::{Array2, Array3, Axis};
use rand_chacha::ChaCha8Rng;

/// Convolution layer over `(channels, height, width)` images. Weights are
/// stored flattened as `c_out × (c_in · k · k)` so the forward pass is a
/// single matrix product against the im2col matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub w: Param,
    pub b: Param,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl Conv2d {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        gain: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Conv2d {
            w: Param::new(orthogonal(c_out, c_in * kernel * kernel, gain, rng)),
            b: Param::zeros(1, c_out),
            c_in,
            c_out,
            kernel,
            stride,
        }
    }

    /// Output spatial size for an input of `(h, w)`.
    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h - self.kernel) / self.stride + 1,
            (w - self.kernel) / self.stride + 1,
        )
    }

    /// Unfold the input into a `(c_in·k·k) × (ho·wo)` matrix.
    fn im2col(&self, x: &Array3<f64>) -> Array2<f64> {
        let (c, h, w) = x.dim();
        assert_eq!(c, self.c_in);
        let (ho, wo) = self.out_size(h, w);
        let k = self.kernel;
        let mut cols = Array2::zeros((c * k * k, ho * wo));
        for ci in 0..c {
            for kr in 0..k {
                for kc in 0..k {
                    let row = (ci * k + kr) * k + kc;
                    for or in 0..ho {
                        let ir = or * self.stride + kr;
                        for oc in 0..wo {
                            let ic = oc * self.stride + kc;
                            cols[[row, or * wo + oc]] = x[[ci, ir, ic]];
                        }
                    }
                }
            }
        }
        cols
    }

    /// Scatter-add the column gradient back onto the input image.
    fn col2im(&self, dcols: &Array2<f64>, h: usize, w: usize) -> Array3<f64> {
        let (ho, wo) = self.out_size(h, w);
        let k = self.kernel;
        let mut dx = Array3::zeros((self.c_in, h, w));
        for ci in 0..self.c_in {
            for kr in 0..k {
                for kc in 0..k {
                    let row = (ci * k + kr) * k + kc;
                    for or in 0..ho {
                        let ir = or * self.stride + kr;
                        for oc in 0..wo {
                            let ic = oc * self.stride + kc;
                            dx[[ci, ir, ic]] += dcols[[row, or * wo + oc]];
                        }
                    }
                }
            }
        }
        dx
    }

    /// Forward pass; returns the output image and the im2col cache.
    pub fn forward(&self, x: &Array3<f64>) -> (Array3<f64>, Array2<f64>) {
        let (_, h, w) = x.dim();
        let (ho, wo) = self.out_size(h, w);
        let cols = self.im2col(x);
        let mut y = self.w.value.dot(&cols); // c_out × (ho·wo)
        for (mut row, &bias) in y.rows_mut().into_iter().zip(self.b.value.row(0)) {
            row.mapv_inplace(|v| v + bias);
        }
        let out = y.into_shape_with_order((self.c_out, ho, wo)).expect("shape");
        (out, cols)
    }

    pub fn forward_nograd(&self, x: &Array3<f64>) -> Array3<f64> {
        self.forward(x).0
    }

    /// Backward pass given the cached im2col matrix. Accumulates parameter
    /// gradients and returns the input gradient.
    pub fn backward(
        &mut self,
        cols: &Array2<f64>,
        dy: &Array3<f64>,
        input_hw: (usize, usize),
    ) -> Array3<f64> {
        let (c_out, ho, wo) = dy.dim();
        assert_eq!(c_out, self.c_out);
        let dym = dy
            .to_owned()
            .into_shape_with_order((c_out, ho * wo))
            .expect("shape");
        self.w.grad += &dym.dot(&cols.t());
        self.b.grad += &dym.sum_axis(Axis(1)).insert_axis(Axis(0));
        let dcols = self.w.value.t().dot(&dym);
        self.col2im(&dcols, input_hw.0, input_hw.1)
    }
}

impl ParamSet for Conv2d {
    fn named_params(&self) -> Vec<(String, &Param)> {
        vec![("w".into(), &self.w), ("b".into(), &self.b)]
    }
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        vec![("w".into(), &mut self.w), ("b".into(), &mut self.b)]
    }
}
