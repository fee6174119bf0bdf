//! Location-based attention over occupancy-grid patches.
//!
//! Every patch is embedded once per grid; each step, the embedding is paired
//! with the object/target offsets from the patch origin and pushed through a
//! feature branch and a score branch. The softmax over patch scores yields
//! convex weights, and the output is the weighted sum of patch features, so
//! the result always lies in the convex hull of the per-patch features.

use super::{context_rows, stacked_patch_inputs, EMBED_DIMS, FEATURE_DIM, PATCH_MLP_DIMS};
use crate::nn::{Linear, Mlp, MlpCache, Param, ParamSet};
use crate::scene::{decompose_patches, OccupancyGrid, Vec2};
use ndarray::{s, Array1, Array2};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct AttentionExtractor {
    pub embed: Mlp,
    pub feature: Mlp,
    pub score: Mlp,
    pub score_head: Linear,
}

/// Forward activations for one segment (constant grid, `t` steps).
#[derive(Debug)]
pub struct AttentionCache {
    embed_cache: MlpCache,
    feature_cache: MlpCache,
    score_cache: MlpCache,
    score_features: Array2<f64>,
    features: Array2<f64>,
    weights: Array2<f64>,
    t: usize,
    p: usize,
}

impl AttentionCache {
    /// Attention weights per step (`t × patches`), for inspection.
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }
}

impl AttentionExtractor {
    pub fn new(rng: &mut ChaCha8Rng) -> Self {
        let gain = std::f64::consts::SQRT_2;
        AttentionExtractor {
            embed: Mlp::new(&EMBED_DIMS, gain, true, rng),
            feature: Mlp::new(&PATCH_MLP_DIMS, gain, true, rng),
            score: Mlp::new(&PATCH_MLP_DIMS, gain, true, rng),
            score_head: Linear::new(FEATURE_DIM, 1, 1.0, rng),
        }
    }

    /// Embed all patches of a grid (`patches × 128`). Reusable while the
    /// grid stays frozen.
    pub fn embed_patches(&self, patches: &Array2<f64>) -> Array2<f64> {
        self.embed.forward_nograd(patches)
    }

    /// Per-step feature and attention weights from precomputed embeddings.
    pub fn features(
        &self,
        embeds: &Array2<f64>,
        origins: &[Vec2],
        object: Vec2,
        target: Vec2,
    ) -> (Array1<f64>, Array1<f64>) {
        let ctx = context_rows(origins, object, target);
        let p = embeds.nrows();
        let mut x = Array2::zeros((p, embeds.ncols() + ctx.ncols()));
        x.slice_mut(s![.., ..embeds.ncols()]).assign(embeds);
        x.slice_mut(s![.., embeds.ncols()..]).assign(&ctx);

        let f = self.feature.forward_nograd(&x);
        let sf = self.score.forward_nograd(&x);
        let scores = self.score_head.forward(&sf);
        let w = softmax_1d(scores.column(0).to_owned());
        let out = f.t().dot(&w);
        (out, w)
    }

    /// Training forward over one segment.
    pub fn forward_segment(
        &self,
        grid: &OccupancyGrid,
        contexts: &[(Vec2, Vec2)],
    ) -> (Array2<f64>, AttentionCache) {
        let patch_set = decompose_patches(grid);
        let t = contexts.len();
        let p = patch_set.patches.nrows();
        let (embeds, embed_cache) = self.embed.forward(&patch_set.patches);
        let x = stacked_patch_inputs(&embeds, &patch_set.origins, contexts);
        let (features, feature_cache) = self.feature.forward(&x);
        let (score_features, score_cache) = self.score.forward(&x);
        let scores = self.score_head.forward(&score_features);

        let mut weights = Array2::zeros((t, p));
        let mut out = Array2::zeros((t, FEATURE_DIM));
        for ti in 0..t {
            let row = scores.slice(s![ti * p..(ti + 1) * p, 0]).to_owned();
            let w = softmax_1d(row);
            let block = features.slice(s![ti * p..(ti + 1) * p, ..]);
            out.row_mut(ti).assign(&block.t().dot(&w));
            weights.row_mut(ti).assign(&w);
        }

        (
            out,
            AttentionCache {
                embed_cache,
                feature_cache,
                score_cache,
                score_features,
                features,
                weights,
                t,
                p,
            },
        )
    }

    /// Accumulate gradients for one segment. `dout` is `t × 64`.
    pub fn backward_segment(&mut self, cache: &AttentionCache, dout: &Array2<f64>) {
        let (t, p) = (cache.t, cache.p);
        assert_eq!(dout.nrows(), t);

        // Through the weighted sum: out_t = Σ_i w_ti f_ti.
        let mut dfeatures = Array2::zeros((t * p, FEATURE_DIM));
        let mut dscores = Array2::zeros((t * p, 1));
        for ti in 0..t {
            let d = dout.row(ti);
            let w = cache.weights.row(ti);
            let f = cache.features.slice(s![ti * p..(ti + 1) * p, ..]);
            // dw_i = dout · f_i, then softmax backward to the raw scores.
            let dw: Array1<f64> = f.dot(&d);
            let mix: f64 = dw.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            for i in 0..p {
                dscores[[ti * p + i, 0]] = w[i] * (dw[i] - mix);
                let mut row = dfeatures.row_mut(ti * p + i);
                row.assign(&d);
                row.mapv_inplace(|v| v * w[i]);
            }
        }

        let dscore_features = self.score_head.backward(&cache.score_features, &dscores);
        let dx_score = self.score.backward(&cache.score_cache, &dscore_features);
        let dx_feature = self.feature.backward(&cache.feature_cache, &dfeatures);
        let dx = dx_score + dx_feature;

        // Fold the per-step input gradients back onto the shared embeddings.
        let e = EMBED_DIMS[2];
        let mut dembeds = Array2::zeros((p, e));
        for ti in 0..t {
            dembeds += &dx.slice(s![ti * p..(ti + 1) * p, ..e]);
        }
        self.embed.backward(&cache.embed_cache, &dembeds);
    }
}

fn softmax_1d(mut z: Array1<f64>) -> Array1<f64> {
    let max = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    z.mapv_inplace(|v| (v - max).exp());
    let sum = z.sum();
    z.mapv_inplace(|v| v / sum);
    z
}

impl ParamSet for AttentionExtractor {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = crate::nn::with_prefix("embed", self.embed.named_params());
        out.extend(crate::nn::with_prefix("feature", self.feature.named_params()));
        out.extend(crate::nn::with_prefix("score", self.score.named_params()));
        out.extend(crate::nn::with_prefix("score_head", self.score_head.named_params()));
        out
    }
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = crate::nn::with_prefix_mut("embed", self.embed.named_params_mut());
        out.extend(crate::nn::with_prefix_mut(
            "feature",
            self.feature.named_params_mut(),
        ));
        out.extend(crate::nn::with_prefix_mut(
            "score",
            self.score.named_params_mut(),
        ));
        out.extend(crate::nn::with_prefix_mut(
            "score_head",
            self.score_head.named_params_mut(),
        ));
        out
    }
}
