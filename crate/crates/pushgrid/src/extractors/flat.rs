//! Flat-MLP grid encoder: identical per-patch embedding and feature pipeline
//! as the attention extractor, but the 63 patch features are concatenated
//! (63 · 64 = 4032) and compressed by a large MLP instead of being combined
//! by attention. Deliberately over-parameterized; serves as the ablation
//! baseline for the attention mechanism.

use super::{context_rows, stacked_patch_inputs, EMBED_DIMS, FEATURE_DIM, PATCH_MLP_DIMS};
use crate::nn::{Mlp, MlpCache, Param, ParamSet};
use crate::scene::{decompose_patches, OccupancyGrid, Vec2};
use ndarray::{s, Array1, Array2};
use rand_chacha::ChaCha8Rng;

/// Patches per grid (7 patch rows × 9 patch columns).
const PATCHES: usize = 63;
/// Compression MLP widths over the concatenated patch features.
pub const COMPRESS_DIMS: [usize; 4] = [PATCHES * FEATURE_DIM, 2048, 512, FEATURE_DIM];

#[derive(Debug, Clone)]
pub struct FlatMlpExtractor {
    pub embed: Mlp,
    pub feature: Mlp,
    pub compress: Mlp,
}

#[derive(Debug)]
pub struct FlatCache {
    embed_cache: MlpCache,
    feature_cache: MlpCache,
    compress_cache: MlpCache,
    t: usize,
    p: usize,
}

impl FlatMlpExtractor {
    pub fn new(rng: &mut ChaCha8Rng) -> Self {
        let gain = std::f64::consts::SQRT_2;
        FlatMlpExtractor {
            embed: Mlp::new(&EMBED_DIMS, gain, true, rng),
            feature: Mlp::new(&PATCH_MLP_DIMS, gain, true, rng),
            compress: Mlp::new(&COMPRESS_DIMS, gain, true, rng),
        }
    }

    pub fn embed_patches(&self, patches: &Array2<f64>) -> Array2<f64> {
        self.embed.forward_nograd(patches)
    }

    /// Per-step feature from precomputed embeddings.
    pub fn features(
        &self,
        embeds: &Array2<f64>,
        origins: &[Vec2],
        object: Vec2,
        target: Vec2,
    ) -> Array1<f64> {
        let ctx = context_rows(origins, object, target);
        let p = embeds.nrows();
        let mut x = Array2::zeros((p, embeds.ncols() + ctx.ncols()));
        x.slice_mut(s![.., ..embeds.ncols()]).assign(embeds);
        x.slice_mut(s![.., embeds.ncols()..]).assign(&ctx);
        let f = self.feature.forward_nograd(&x); // p × 64
        let concat = f
            .into_shape_with_order((1, p * FEATURE_DIM))
            .expect("contiguous");
        let y = self.compress.forward_nograd(&concat);
        y.row(0).to_owned()
    }

    /// Training forward over one segment.
    pub fn forward_segment(
        &self,
        grid: &OccupancyGrid,
        contexts: &[(Vec2, Vec2)],
    ) -> (Array2<f64>, FlatCache) {
        let patch_set = decompose_patches(grid);
        let t = contexts.len();
        let p = patch_set.patches.nrows();
        let (embeds, embed_cache) = self.embed.forward(&patch_set.patches);
        let x = stacked_patch_inputs(&embeds, &patch_set.origins, contexts);
        let (features, feature_cache) = self.feature.forward(&x); // (t·p) × 64
        // Row t of the concat matrix is the patch-major flattening of step t.
        let concat = features
            .into_shape_with_order((t, p * FEATURE_DIM))
            .expect("contiguous");
        let (out, compress_cache) = self.compress.forward(&concat);
        (
            out,
            FlatCache {
                embed_cache,
                feature_cache,
                compress_cache,
                t,
                p,
            },
        )
    }

    pub fn backward_segment(&mut self, cache: &FlatCache, dout: &Array2<f64>) {
        let (t, p) = (cache.t, cache.p);
        let dconcat = self.compress.backward(&cache.compress_cache, dout);
        let dfeatures = dconcat
            .into_shape_with_order((t * p, FEATURE_DIM))
            .expect("contiguous");
        let dx = self.feature.backward(&cache.feature_cache, &dfeatures);
        let e = EMBED_DIMS[2];
        let mut dembeds = Array2::zeros((p, e));
        for ti in 0..t {
            dembeds += &dx.slice(s![ti * p..(ti + 1) * p, ..e]);
        }
        self.embed.backward(&cache.embed_cache, &dembeds);
    }
}

impl ParamSet for FlatMlpExtractor {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = crate::nn::with_prefix("embed", self.embed.named_params());
        out.extend(crate::nn::with_prefix("feature", self.feature.named_params()));
        out.extend(crate::nn::with_prefix("compress", self.compress.named_params()));
        out
    }
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = crate::nn::with_prefix_mut("embed", self.embed.named_params_mut());
        out.extend(crate::nn::with_prefix_mut(
            "feature",
            self.feature.named_params_mut(),
        ));
        out.extend(crate::nn::with_prefix_mut(
            "compress",
            self.compress.named_params_mut(),
        ));
        out
    }
}
