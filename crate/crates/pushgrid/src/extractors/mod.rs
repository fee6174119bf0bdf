//! Occupancy-grid feature extractors.
//!
//! Three interchangeable encoders map a grid plus the (noisy) object and
//! target positions to a 64-dimensional feature vector:
//!
//! - [`AttentionExtractor`]: embeds each 16×16 patch, scores it against
//!   per-patch location context, and returns the softmax-weighted sum of
//!   per-patch features (the output lives in their convex hull).
//! - [`CnnExtractor`]: three strided convolutions over the padded grid
//!   followed by a linear projection; ignores the location context.
//! - [`FlatMlpExtractor`]: the same per-patch pipeline as attention but with
//!   the 63 patch features concatenated and compressed by a large MLP
//!   instead of attention-weighted (an intentionally over-parameterized
//!   baseline).
//!
//! All extractors separate the grid-only computation (reusable while the
//! grid is frozen within an episode) from the per-step context computation.

mod attention;
mod cnn;
mod flat;

pub use attention::{AttentionCache, AttentionExtractor};
pub use cnn::{CnnCache, CnnExtractor};
pub use flat::{FlatCache, FlatMlpExtractor};

use crate::nn::{Param, ParamSet};
use crate::scene::{decompose_patches, OccupancyGrid, Vec2, PATCH_SIZE};
use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Output feature width shared by all extractors.
pub const FEATURE_DIM: usize = 64;
/// Patch embedding layer widths (input is a flattened 16×16 patch).
pub const EMBED_DIMS: [usize; 3] = [PATCH_SIZE * PATCH_SIZE, 192, 128];
/// Per-patch context: object and target offsets from the patch origin.
pub const CONTEXT_DIM: usize = 4;
/// Widths of the per-patch feature (and score) MLPs.
pub const PATCH_MLP_DIMS: [usize; 4] = [EMBED_DIMS[2] + CONTEXT_DIM, 128, 100, FEATURE_DIM];

/// Which extractor a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    Attention,
    Cnn,
    Mlp,
}

impl std::str::FromStr for ExtractorKind {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "attention" => Ok(ExtractorKind::Attention),
            "cnn" => Ok(ExtractorKind::Cnn),
            "mlp" => Ok(ExtractorKind::Mlp),
            other => Err(crate::error::Error::Config(format!(
                "unknown extractor '{other}' (expected attention, cnn, or mlp)"
            ))),
        }
    }
}

impl std::fmt::Display for ExtractorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExtractorKind::Attention => "attention",
            ExtractorKind::Cnn => "cnn",
            ExtractorKind::Mlp => "mlp",
        };
        f.write_str(s)
    }
}

/// Grid-only precomputation, reusable across steps while the grid is frozen.
#[derive(Debug, Clone)]
pub struct GridEntry {
    /// Patch origins (upper-left corners, meters), row-major.
    pub origins: Vec<Vec2>,
    pub data: GridEntryData,
}

#[derive(Debug, Clone)]
pub enum GridEntryData {
    /// Per-patch embeddings (patches × 128): attention and flat-MLP.
    Embeds(Array2<f64>),
    /// Finished feature vector: CNN (context-independent).
    Feature(Array1<f64>),
}

/// Training-time cache for one episode segment (constant grid, T steps).
#[derive(Debug)]
pub enum SegmentCache {
    Attention(AttentionCache),
    Cnn(CnnCache),
    Flat(FlatCache),
}

/// One of the three grid encoders.
#[derive(Debug, Clone)]
pub enum GridExtractor {
    Attention(AttentionExtractor),
    Cnn(CnnExtractor),
    Flat(FlatMlpExtractor),
}

impl GridExtractor {
    pub fn new(kind: ExtractorKind, rng: &mut ChaCha8Rng) -> Self {
        match kind {
            ExtractorKind::Attention => GridExtractor::Attention(AttentionExtractor::new(rng)),
            ExtractorKind::Cnn => GridExtractor::Cnn(CnnExtractor::new(rng)),
            ExtractorKind::Mlp => GridExtractor::Flat(FlatMlpExtractor::new(rng)),
        }
    }

    pub fn kind(&self) -> ExtractorKind {
        match self {
            GridExtractor::Attention(_) => ExtractorKind::Attention,
            GridExtractor::Cnn(_) => ExtractorKind::Cnn,
            GridExtractor::Flat(_) => ExtractorKind::Mlp,
        }
    }

    /// Grid-only precomputation (the expensive part of the rollout path).
    pub fn grid_entry(&self, grid: &OccupancyGrid) -> GridEntry {
        let patches = decompose_patches(grid);
        let data = match self {
            GridExtractor::Attention(a) => GridEntryData::Embeds(a.embed_patches(&patches.patches)),
            GridExtractor::Flat(m) => GridEntryData::Embeds(m.embed_patches(&patches.patches)),
            GridExtractor::Cnn(c) => GridEntryData::Feature(c.grid_feature(grid)),
        };
        GridEntry {
            origins: patches.origins,
            data,
        }
    }

    /// Per-step feature from a precomputed entry.
    pub fn features(&self, entry: &GridEntry, object: Vec2, target: Vec2) -> Array1<f64> {
        match (self, &entry.data) {
            (GridExtractor::Attention(a), GridEntryData::Embeds(e)) => {
                a.features(e, &entry.origins, object, target).0
            }
            (GridExtractor::Flat(m), GridEntryData::Embeds(e)) => {
                m.features(e, &entry.origins, object, target)
            }
            (GridExtractor::Cnn(_), GridEntryData::Feature(f)) => f.clone(),
            _ => unreachable!("grid entry built by a different extractor kind"),
        }
    }

    /// Training forward over one segment: `contexts[t] = (object, target)`.
    /// Returns the `T × 64` features and the cache for [`Self::backward_segment`].
    pub fn forward_segment(
        &self,
        grid: &OccupancyGrid,
        contexts: &[(Vec2, Vec2)],
    ) -> (Array2<f64>, SegmentCache) {
        match self {
            GridExtractor::Attention(a) => {
                let (y, c) = a.forward_segment(grid, contexts);
                (y, SegmentCache::Attention(c))
            }
            GridExtractor::Cnn(c) => {
                let (y, cache) = c.forward_segment(grid, contexts.len());
                (y, SegmentCache::Cnn(cache))
            }
            GridExtractor::Flat(m) => {
                let (y, c) = m.forward_segment(grid, contexts);
                (y, SegmentCache::Flat(c))
            }
        }
    }

    /// Accumulate parameter gradients for `d(loss)/d(features)` of a segment.
    pub fn backward_segment(&mut self, cache: &SegmentCache, dout: &Array2<f64>) {
        match (self, cache) {
            (GridExtractor::Attention(a), SegmentCache::Attention(c)) => a.backward_segment(c, dout),
            (GridExtractor::Cnn(e), SegmentCache::Cnn(c)) => e.backward_segment(c, dout),
            (GridExtractor::Flat(m), SegmentCache::Flat(c)) => m.backward_segment(c, dout),
            _ => unreachable!("segment cache built by a different extractor kind"),
        }
    }
}

impl ParamSet for GridExtractor {
    fn named_params(&self) -> Vec<(String, &Param)> {
        match self {
            GridExtractor::Attention(a) => a.named_params(),
            GridExtractor::Cnn(c) => c.named_params(),
            GridExtractor::Flat(m) => m.named_params(),
        }
    }
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        match self {
            GridExtractor::Attention(a) => a.named_params_mut(),
            GridExtractor::Cnn(c) => c.named_params_mut(),
            GridExtractor::Flat(m) => m.named_params_mut(),
        }
    }
}

/// Per-patch context rows for one step: `[obj - origin, tgt - origin]`.
pub(crate) fn context_rows(origins: &[Vec2], object: Vec2, target: Vec2) -> Array2<f64> {
    let mut ctx = Array2::zeros((origins.len(), CONTEXT_DIM));
    for (i, o) in origins.iter().enumerate() {
        ctx[[i, 0]] = object.x - o.x;
        ctx[[i, 1]] = object.y - o.y;
        ctx[[i, 2]] = target.x - o.x;
        ctx[[i, 3]] = target.y - o.y;
    }
    ctx
}

/// Stack embeddings and per-step contexts into the `(T·P) × 132` input
/// consumed by the per-patch MLPs, rows grouped by step.
pub(crate) fn stacked_patch_inputs(
    embeds: &Array2<f64>,
    origins: &[Vec2],
    contexts: &[(Vec2, Vec2)],
) -> Array2<f64> {
    let p = embeds.nrows();
    let e = embeds.ncols();
    let t = contexts.len();
    let mut x = Array2::zeros((t * p, e + CONTEXT_DIM));
    for (ti, &(obj, tgt)) in contexts.iter().enumerate() {
        for i in 0..p {
            let mut row = x.row_mut(ti * p + i);
            for (k, v) in embeds.row(i).iter().enumerate() {
                row[k] = *v;
            }
            let o = origins[i];
            row[e] = obj.x - o.x;
            row[e + 1] = obj.y - o.y;
            row[e + 2] = tgt.x - o.x;
            row[e + 3] = tgt.y - o.y;
        }
    }
    x
}
