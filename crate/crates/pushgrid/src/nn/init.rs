//! Weight initialization.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Above this modified-Gram-Schmidt cost (`min² · max` flops), fall back to
/// scaled Gaussian rows, which are near-orthogonal in high dimension.
const MGS_COST_LIMIT: u128 = 1 << 31;

/// Gain-scaled (semi-)orthogonal matrix of shape `rows × cols`.
///
/// A standard Gaussian draw is orthogonalized with modified Gram-Schmidt over
/// the shorter side, so `Q Qᵀ = gain² I` when `rows ≤ cols` and
/// `Qᵀ Q = gain² I` otherwise. Very large matrices (where exact
/// orthogonalization would cost over ~2e9 flops) use `gain / sqrt(cols)`
/// scaled Gaussian entries instead.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let normal = StandardNormal;
    let mut m = Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng));

    let short = rows.min(cols) as u128;
    let long = rows.max(cols) as u128;
    if short * short * long > MGS_COST_LIMIT {
        let scale = gain / (cols as f64).sqrt();
        m.mapv_inplace(|v| v * scale);
        return m;
    }

    if rows <= cols {
        orthogonalize_rows(&mut m);
    } else {
        let mut t = m.t().to_owned();
        orthogonalize_rows(&mut t);
        m = t.t().to_owned();
    }
    if gain != 1.0 {
        m.mapv_inplace(|v| v * gain);
    }
    m
}

/// In-place modified Gram-Schmidt on the rows (rows ≤ cols assumed).
fn orthogonalize_rows(m: &mut Array2<f64>) {
    let rows = m.nrows();
    for i in 0..rows {
        for j in 0..i {
            let (head, mut tail) = m.view_mut().split_at(ndarray::Axis(0), i);
            let prev = head.row(j);
            let mut cur = tail.row_mut(0);
            let proj = cur.dot(&prev);
            cur.scaled_add(-proj, &prev);
        }
        let mut cur = m.row_mut(i);
        let norm = cur.dot(&cur).sqrt();
        if norm > 1e-12 {
            cur.mapv_inplace(|v| v / norm);
        }
    }
}
