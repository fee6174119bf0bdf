//! Fully-connected layers and tanh MLPs with explicit activation caches.

use super::{orthogonal, Param, ParamSet};
use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;

/// `y = x Wᵀ + b` with `W: out × in`, `b: 1 × out`, batched over rows of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Param,
    pub b: Param,
}

impl Linear {
    /// Orthogonal weight init with the given gain; zero biases.
    pub fn new(in_dim: usize, out_dim: usize, gain: f64, rng: &mut ChaCha8Rng) -> Self {
        Linear {
            w: Param::new(orthogonal(out_dim, in_dim, gain, rng)),
            b: Param::zeros(1, out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.value.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.value.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.value.t()) + &self.b.value
    }

    /// Accumulate weight/bias gradients for upstream `dy` and return `dx`.
    /// `x` must be the same input that produced `dy`'s forward pass.
    pub fn backward(&mut self, x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        self.w.grad += &dy.t().dot(x);
        self.b.grad += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&self.w.value)
    }
}

impl ParamSet for Linear {
    fn named_params(&self) -> Vec<(String, &Param)> {
        vec![("w".into(), &self.w), ("b".into(), &self.b)]
    }
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        vec![("w".into(), &mut self.w), ("b".into(), &mut self.b)]
    }
}

/// Stack of linear layers with tanh after every layer, or after every layer
/// but the last when `output_tanh` is false (linear head).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub output_tanh: bool,
}

/// Per-layer inputs and post-activation outputs kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `inputs[i]` is what layer `i` consumed.
    inputs: Vec<Array2<f64>>,
    /// `outputs[i]` is layer `i`'s output after its activation (if any).
    outputs: Vec<Array2<f64>>,
}

impl Mlp {
    /// `dims = [in, h1, ..., out]`; every weight gets the same gain.
    pub fn new(dims: &[usize], gain: f64, output_tanh: bool, rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least one layer");
        let layers = dims
            .windows(2)
            .map(|w| Linear::new(w[0], w[1], gain, rng))
            .collect();
        Mlp {
            layers,
            output_tanh,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    fn activated(&self, layer: usize) -> bool {
        self.output_tanh || layer + 1 < self.layers.len()
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, MlpCache) {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
        };
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cache.inputs.push(cur.clone());
            let mut y = layer.forward(&cur);
            if self.activated(i) {
                y.mapv_inplace(f64::tanh);
            }
            cache.outputs.push(y.clone());
            cur = y;
        }
        (cur, cache)
    }

    /// Forward without building a cache (rollout/evaluation path).
    pub fn forward_nograd(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.forward(&cur);
            if self.activated(i) {
                cur.mapv_inplace(f64::tanh);
            }
        }
        cur
    }

    /// Backpropagate `dy` through the cached pass; accumulates parameter
    /// gradients and returns the gradient w.r.t. the original input.
    pub fn backward(&mut self, cache: &MlpCache, dy: &Array2<f64>) -> Array2<f64> {
        let mut grad = dy.clone();
        for i in (0..self.layers.len()).rev() {
            if self.activated(i) {
                // d tanh(z) = 1 - tanh(z)², using the cached post-activation.
                let y = &cache.outputs[i];
                grad.zip_mut_with(y, |g, &t| *g *= 1.0 - t * t);
            }
            grad = self.layers[i].backward(&cache.inputs[i], &grad);
        }
        grad
    }
}

impl ParamSet for Mlp {
    fn named_params(&self) -> Vec<(String, &Param)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| super::with_prefix(&format!("l{i}"), l.named_params()))
            .collect()
    }
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| super::with_prefix_mut(&format!("l{i}"), l.named_params_mut()))
            .collect()
    }
}

/// Weighted scalar readout used by the gradient-check tests: deterministic
/// loss `L = Σ_ij c_ij y_ij` whose upstream gradient is just `c`.
#[cfg(test)]
pub(crate) fn readout_weights(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    use rand_distr::{Distribution, StandardNormal};
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

#[cfg(test)]
pub(crate) fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

#[cfg(test)]
pub(crate) fn assert_param_grads_match_fd<F>(
    set: &mut dyn ParamSet,
    mut loss: F,
    h: f64,
    tol: f64,
) where
    F: FnMut(&dyn ParamSet) -> f64,
{
    let names: Vec<String> = set.named_params().iter().map(|(n, _)| n.clone()).collect();
    for name in names {
        let shape = {
            let params = set.named_params();
            let (_, p) = params.iter().find(|(n, _)| *n == name).unwrap();
            p.value.raw_dim()
        };
        for r in 0..shape[0] {
            for c in 0..shape[1] {
                let analytic = {
                    let params = set.named_params();
                    let (_, p) = params.iter().find(|(n, _)| *n == name).unwrap();
                    p.grad[[r, c]]
                };
                let mut eval_at = |delta: f64, set: &mut dyn ParamSet| {
                    {
                        let mut params = set.named_params_mut();
                        let (_, p) = params.iter_mut().find(|(n, _)| *n == name).unwrap();
                        p.value[[r, c]] += delta;
                    }
                    let l = loss(set);
                    {
                        let mut params = set.named_params_mut();
                        let (_, p) = params.iter_mut().find(|(n, _)| *n == name).unwrap();
                        p.value[[r, c]] -= delta;
                    }
                    l
                };
                let plus = eval_at(h, set);
                let minus = eval_at(-h, set);
                let numeric = (plus - minus) / (2.0 * h);
                let err = relative_error(analytic, numeric);
                assert!(
                    err < tol,
                    "{name}[{r},{c}]: analytic {analytic:.9e} vs numeric {numeric:.9e} (err {err:.3e})"
                );
            }
        }
    }
}

/// Row-wise softmax helper shared by the categorical heads and attention.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Row-wise log-softmax (numerically stable).
pub fn log_softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        row.mapv_inplace(|v| v - log_sum);
    }
    out
}

/// Softmax over a 1D slice, returned as a fresh vector.
pub fn softmax_slice(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
