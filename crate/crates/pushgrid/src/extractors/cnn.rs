//! Convolutional grid encoder: three strided 5×5 convolutions over the
//! zero-padded occupancy image, then a linear projection to 64 features.
//! The output depends only on the grid, so it is constant across the steps
//! of an episode segment.

use super::FEATURE_DIM;
use crate::nn::{Conv2d, Linear, Param, ParamSet};
use crate::scene::{OccupancyGrid, PATCH_SIZE};
use ndarray::{Array1, Array2, Array3};
use rand_chacha::ChaCha8Rng;

/// Grid padded up to whole patches: 100×140 cells → 112×144 image.
pub(crate) fn padded_image(grid: &OccupancyGrid) -> Array3<f64> {
    let rows = grid.rows.div_ceil(PATCH_SIZE) * PATCH_SIZE;
    let cols = grid.cols.div_ceil(PATCH_SIZE) * PATCH_SIZE;
    let mut img = Array3::zeros((1, rows, cols));
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            img[[0, r, c]] = f64::from(grid.cells[r * grid.cols + c]);
        }
    }
    img
}

#[derive(Debug, Clone)]
pub struct CnnExtractor {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub conv3: Conv2d,
    pub head: Linear,
}

/// Activations for one segment; the conv stack ran once, the feature is
/// broadcast over the segment's steps.
#[derive(Debug)]
pub struct CnnCache {
    img: Array3<f64>,
    cols1: Array2<f64>,
    act1: Array3<f64>,
    cols2: Array2<f64>,
    act2: Array3<f64>,
    cols3: Array2<f64>,
    act3: Array3<f64>,
    flat: Array2<f64>,
    feature: Array1<f64>,
}

impl CnnExtractor {
    pub fn new(rng: &mut ChaCha8Rng) -> Self {
        let gain = std::f64::consts::SQRT_2;
        CnnExtractor {
            conv1: Conv2d::new(1, 16, 5, 2, gain, rng),
            conv2: Conv2d::new(16, 32, 5, 2, gain, rng),
            conv3: Conv2d::new(32, 32, 5, 4, gain, rng),
            head: Linear::new(32 * 6 * 8, FEATURE_DIM, gain, rng),
        }
    }

    fn stack(&self, grid: &OccupancyGrid) -> CnnCache {
        let img = padded_image(grid);
        let (mut y1, cols1) = self.conv1.forward(&img);
        y1.mapv_inplace(f64::tanh);
        let (mut y2, cols2) = self.conv2.forward(&y1);
        y2.mapv_inplace(f64::tanh);
        let (mut y3, cols3) = self.conv3.forward(&y2);
        y3.mapv_inplace(f64::tanh);
        let n = y3.len();
        let flat = y3
            .to_owned()
            .into_shape_with_order((1, n))
            .expect("flatten");
        let mut feat = self.head.forward(&flat);
        feat.mapv_inplace(f64::tanh);
        let feature = feat.row(0).to_owned();
        CnnCache {
            img,
            cols1,
            act1: y1,
            cols2,
            act2: y2,
            cols3,
            act3: y3,
            flat,
            feature,
        }
    }

    /// Feature vector for a grid (context-independent).
    pub fn grid_feature(&self, grid: &OccupancyGrid) -> Array1<f64> {
        self.stack(grid).feature
    }

    /// Training forward: run the stack once, repeat the feature `t` times.
    pub fn forward_segment(&self, grid: &OccupancyGrid, t: usize) -> (Array2<f64>, CnnCache) {
        let cache = self.stack(grid);
        let mut out = Array2::zeros((t, FEATURE_DIM));
        for ti in 0..t {
            out.row_mut(ti).assign(&cache.feature);
        }
        (out, cache)
    }

    /// Backward for one segment: step gradients sum because the feature was
    /// broadcast.
    pub fn backward_segment(&mut self, cache: &CnnCache, dout: &Array2<f64>) {
        let mut dfeat = Array1::<f64>::zeros(FEATURE_DIM);
        for row in dout.rows() {
            dfeat += &row;
        }
        // Through the output tanh.
        let mut dflat_out = Array2::zeros((1, FEATURE_DIM));
        for (k, d) in dfeat.iter().enumerate() {
            let y = cache.feature[k];
            dflat_out[[0, k]] = d * (1.0 - y * y);
        }
        let dflat = self.head.backward(&cache.flat, &dflat_out);
        let mut d3 = dflat
            .into_shape_with_order(cache.act3.raw_dim())
            .expect("shape");
        d3.zip_mut_with(&cache.act3, |g, &y| *g *= 1.0 - y * y);
        let (h2, w2) = (cache.act2.dim().1, cache.act2.dim().2);
        let mut d2 = self.conv3.backward(&cache.cols3, &d3, (h2, w2));
        d2.zip_mut_with(&cache.act2, |g, &y| *g *= 1.0 - y * y);
        let (h1, w1) = (cache.act1.dim().1, cache.act1.dim().2);
        let mut d1 = self.conv2.backward(&cache.cols2, &d2, (h1, w1));
        d1.zip_mut_with(&cache.act1, |g, &y| *g *= 1.0 - y * y);
        let (h0, w0) = (cache.img.dim().1, cache.img.dim().2);
        let _ = self.conv1.backward(&cache.cols1, &d1, (h0, w0));
    }
}

impl ParamSet for CnnExtractor {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = crate::nn::with_prefix("conv1", self.conv1.named_params());
        out.extend(crate::nn::with_prefix("conv2", self.conv2.named_params()));
        out.extend(crate::nn::with_prefix("conv3", self.conv3.named_params()));
        out.extend(crate::nn::with_prefix("head", self.head.named_params()));
        out
    }
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = crate::nn::with_prefix_mut("conv1", self.conv1.named_params_mut());
        out.extend(crate::nn::with_prefix_mut("conv2", self.conv2.named_params_mut()));
        out.extend(crate::nn::with_prefix_mut("conv3", self.conv3.named_params_mut()));
        out.extend(crate::nn::with_prefix_mut("head", self.head.named_params_mut()));
        out
    }
}
