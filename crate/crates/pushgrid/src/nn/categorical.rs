//! Paired categorical distributions over discrete per-axis action bins.
//!
//! A policy emits `2·bins` logits per sample; the first `bins` parameterize
//! the x-axis distribution and the rest the y-axis. The joint distribution is
//! the product of the two independent categoricals, so log-probabilities and
//! entropies add.

use super::linear::{log_softmax_rows, softmax_rows};
use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoricalPair {
    pub bins: usize,
}

impl CategoricalPair {
    pub fn new(bins: usize) -> Self {
        CategoricalPair { bins }
    }

    pub fn logit_dim(&self) -> usize {
        2 * self.bins
    }

    fn check(&self, logits: &Array2<f64>) {
        assert_eq!(
            logits.ncols(),
            self.logit_dim(),
            "expected {} logits per row",
            self.logit_dim()
        );
    }

    /// Per-head probabilities, concatenated back into `2·bins` columns.
    pub fn probs(&self, logits: &Array2<f64>) -> Array2<f64> {
        self.check(logits);
        let mut out = Array2::zeros(logits.raw_dim());
        let px = softmax_rows(&logits.slice(s![.., ..self.bins]).to_owned());
        let py = softmax_rows(&logits.slice(s![.., self.bins..]).to_owned());
        out.slice_mut(s![.., ..self.bins]).assign(&px);
        out.slice_mut(s![.., self.bins..]).assign(&py);
        out
    }

    /// Sample one `(bin_x, bin_y)` pair per row, consuming two uniforms per
    /// row in a fixed order.
    pub fn sample(&self, logits: &Array2<f64>, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
        self.check(logits);
        let mut out = Vec::with_capacity(logits.nrows());
        for row in logits.rows() {
            let x = sample_head(&row.as_slice().expect("contiguous")[..self.bins], rng);
            let y = sample_head(&row.as_slice().expect("contiguous")[self.bins..], rng);
            out.push((x, y));
        }
        out
    }

    /// Joint log-probability of each row's chosen pair.
    pub fn log_prob(&self, logits: &Array2<f64>, actions: &[(usize, usize)]) -> Array1<f64> {
        self.check(logits);
        assert_eq!(logits.nrows(), actions.len());
        let lx = log_softmax_rows(&logits.slice(s![.., ..self.bins]).to_owned());
        let ly = log_softmax_rows(&logits.slice(s![.., self.bins..]).to_owned());
        Array1::from_iter(
            actions
                .iter()
                .enumerate()
                .map(|(r, &(ax, ay))| lx[[r, ax]] + ly[[r, ay]]),
        )
    }

    /// Joint entropy per row (sum of the two head entropies).
    pub fn entropy(&self, logits: &Array2<f64>) -> Array1<f64> {
        self.check(logits);
        let lx = log_softmax_rows(&logits.slice(s![.., ..self.bins]).to_owned());
        let ly = log_softmax_rows(&logits.slice(s![.., self.bins..]).to_owned());
        let head = |lp: &Array2<f64>| -> Array1<f64> {
            lp.rows()
                .into_iter()
                .map(|row| -row.iter().map(|&l| l.exp() * l).sum::<f64>())
                .collect()
        };
        head(&lx) + head(&ly)
    }

    /// Per-axis argmax with lowest-index tie-breaking.
    pub fn mode(&self, logits: &Array2<f64>) -> Vec<(usize, usize)> {
        self.check(logits);
        logits
            .rows()
            .into_iter()
            .map(|row| {
                let slice = row.as_slice().expect("contiguous");
                (argmax(&slice[..self.bins]), argmax(&slice[self.bins..]))
            })
            .collect()
    }

    /// Gradient of `Σ_r coeff[r] · log_prob(actions[r])` with respect to the
    /// logits: `coeff · (onehot - p)` per head.
    pub fn log_prob_grad(
        &self,
        logits: &Array2<f64>,
        actions: &[(usize, usize)],
        coeff: &Array1<f64>,
    ) -> Array2<f64> {
        self.check(logits);
        let p = self.probs(logits);
        let mut grad = Array2::zeros(logits.raw_dim());
        for (r, &(ax, ay)) in actions.iter().enumerate() {
            let k = coeff[r];
            for c in 0..self.bins {
                grad[[r, c]] = k * (f64::from(c == ax) - p[[r, c]]);
                grad[[r, self.bins + c]] = k * (f64::from(c == ay) - p[[r, self.bins + c]]);
            }
        }
        grad
    }

    /// Gradient of `Σ_r coeff[r] · entropy(row r)` w.r.t. the logits:
    /// `-coeff · p ⊙ (log p + H_head)` per head.
    pub fn entropy_grad(&self, logits: &Array2<f64>, coeff: &Array1<f64>) -> Array2<f64> {
        self.check(logits);
        let mut grad = Array2::zeros(logits.raw_dim());
        for (r, row) in logits.rows().into_iter().enumerate() {
            let slice = row.as_slice().expect("contiguous");
            for (head, offset) in [(&slice[..self.bins], 0), (&slice[self.bins..], self.bins)] {
                let p = super::linear::softmax_slice(head);
                let h: f64 = -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>();
                for (c, &pc) in p.iter().enumerate() {
                    let lp = if pc > 0.0 { pc.ln() } else { 0.0 };
                    grad[[r, offset + c]] = -coeff[r] * pc * (lp + h);
                }
            }
        }
        grad
    }
}

fn sample_head(logits: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let p = super::linear::softmax_slice(logits);
    let u: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
