//! Dense f64 neural-network building blocks with hand-written reverse-mode
//! gradients: linear layers, tanh MLPs, an LSTM cell, strided 2D convolution,
//! paired categorical action heads, and Adam. Everything is deterministic
//! given the seed; no threading happens inside a single forward/backward.

mod adam;
mod categorical;
mod conv;
mod init;
mod linear;
mod lstm;

pub use adam::{Adam, AdamSnapshot, MomentEntry};
pub use categorical::CategoricalPair;
pub use conv::Conv2d;
pub use init::orthogonal;
pub use linear::{Linear, Mlp, MlpCache};
pub use lstm::{LstmCell, LstmState, LstmStepCache};

use ndarray::Array2;

/// A trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Param {
    pub fn new(value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Param { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Param::new(Array2::zeros((rows, cols)))
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything exposing a fixed-order list of named parameters. The order must
/// be stable across calls and processes: the optimizer, gradient clipping,
/// and checkpoints all walk it.
pub trait ParamSet {
    fn named_params(&self) -> Vec<(String, &Param)>;
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)>;
}

/// Total number of scalar parameters.
pub fn param_count(set: &dyn ParamSet) -> usize {
    set.named_params().iter().map(|(_, p)| p.len()).sum()
}

/// Reset every gradient accumulator to zero.
pub fn zero_grads(set: &mut dyn ParamSet) {
    for (_, p) in set.named_params_mut() {
        p.zero_grad();
    }
}

/// Euclidean norm over all gradients together.
pub fn grad_norm(set: &dyn ParamSet) -> f64 {
    let mut sq = 0.0;
    for (_, p) in set.named_params() {
        sq += p.grad.iter().map(|g| g * g).sum::<f64>();
    }
    sq.sqrt()
}

/// Scale gradients so their joint norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm(set: &mut dyn ParamSet, max_norm: f64) -> f64 {
    let norm = grad_norm(set);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for (_, p) in set.named_params_mut() {
            p.grad.mapv_inplace(|g| g * scale);
        }
    }
    norm
}

/// Prefix every name from a child parameter set (for composite modules).
pub fn with_prefix<'a>(
    prefix: &str,
    params: Vec<(String, &'a Param)>,
) -> Vec<(String, &'a Param)> {
    params
        .into_iter()
        .map(|(n, p)| (format!("{prefix}.{n}"), p))
        .collect()
}

/// Mutable variant of [`with_prefix`].
pub fn with_prefix_mut<'a>(
    prefix: &str,
    params: Vec<(String, &'a mut Param)>,
) -> Vec<(String, &'a mut Param)> {
    params
        .into_iter()
        .map(|(n, p)| (format!("{prefix}.{n}"), p))
        .collect()
}
