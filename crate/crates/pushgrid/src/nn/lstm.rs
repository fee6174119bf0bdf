//! Single-layer LSTM cell with packed gates and backpropagation through time.

use super::{orthogonal, Param, ParamSet};
use ndarray::{s, Array2, Axis};
use rand_chacha::ChaCha8Rng;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// LSTM cell. Weights pack the four gates row-wise in the order
/// input / forget / cell / output: `w_ih: 4H × In`, `w_hh: 4H × H`,
/// `b: 1 × 4H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_ih: Param,
    pub w_hh: Param,
    pub b: Param,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Hidden and cell activations, one row per batch element.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Array2<f64>,
    pub c: Array2<f64>,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        LstmState {
            h: Array2::zeros((batch, hidden)),
            c: Array2::zeros((batch, hidden)),
        }
    }

    /// Zero one batch row (fresh episode boundary).
    pub fn reset_row(&mut self, row: usize) {
        self.h.row_mut(row).fill(0.0);
        self.c.row_mut(row).fill(0.0);
    }

    pub fn batch(&self) -> usize {
        self.h.nrows()
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
}

impl LstmCell {
    /// Orthogonal init (gain 1) on both weight matrices, zero biases.
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        LstmCell {
            w_ih: Param::new(orthogonal(4 * hidden_dim, input_dim, 1.0, rng)),
            w_hh: Param::new(orthogonal(4 * hidden_dim, hidden_dim, 1.0, rng)),
            b: Param::zeros(1, 4 * hidden_dim),
            input_dim,
            hidden_dim,
        }
    }

    fn gates(&self, x: &Array2<f64>, state: &LstmState) -> Array2<f64> {
        x.dot(&self.w_ih.value.t()) + state.h.dot(&self.w_hh.value.t()) + &self.b.value
    }

    /// One time step with cache for BPTT.
    pub fn step(&self, x: &Array2<f64>, state: &LstmState) -> (LstmState, LstmStepCache) {
        let h = self.hidden_dim;
        let z = self.gates(x, state);
        let i = z.slice(s![.., 0..h]).mapv(sigmoid);
        let f = z.slice(s![.., h..2 * h]).mapv(sigmoid);
        let g = z.slice(s![.., 2 * h..3 * h]).mapv(f64::tanh);
        let o = z.slice(s![.., 3 * h..4 * h]).mapv(sigmoid);
        let c_new = &f * &state.c + &i * &g;
        let tanh_c = c_new.mapv(f64::tanh);
        let h_new = &o * &tanh_c;
        let cache = LstmStepCache {
            x: x.clone(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        (
            LstmState {
                h: h_new,
                c: c_new,
            },
            cache,
        )
    }

    /// One time step without caching (rollout/evaluation path).
    pub fn step_nograd(&self, x: &Array2<f64>, state: &LstmState) -> LstmState {
        let h = self.hidden_dim;
        let z = self.gates(x, state);
        let i = z.slice(s![.., 0..h]).mapv(sigmoid);
        let f = z.slice(s![.., h..2 * h]).mapv(sigmoid);
        let g = z.slice(s![.., 2 * h..3 * h]).mapv(f64::tanh);
        let o = z.slice(s![.., 3 * h..4 * h]).mapv(sigmoid);
        let c_new = &f * &state.c + &i * &g;
        let h_new = &o * &c_new.mapv(f64::tanh);
        LstmState {
            h: h_new,
            c: c_new,
        }
    }

    /// Backward through one step. `dh`/`dc` are the gradients flowing into
    /// this step's output state. Accumulates parameter gradients and returns
    /// `(dx, dh_prev, dc_prev)`.
    pub fn backward_step(
        &mut self,
        cache: &LstmStepCache,
        dh: &Array2<f64>,
        dc: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let LstmStepCache {
            x,
            h_prev,
            c_prev,
            i,
            f,
            g,
            o,
            tanh_c,
        } = cache;

        let d_o = dh * tanh_c;
        let dc_total = dc + &(dh * o * &tanh_c.mapv(|t| 1.0 - t * t));
        let d_i = &dc_total * g;
        let d_g = &dc_total * i;
        let d_f = &dc_total * c_prev;
        let dc_prev = &dc_total * f;

        // Through the gate nonlinearities.
        let dz_i = d_i * i * &i.mapv(|v| 1.0 - v);
        let dz_f = d_f * f * &f.mapv(|v| 1.0 - v);
        let dz_g = d_g * &g.mapv(|v| 1.0 - v * v);
        let dz_o = d_o * o * &o.mapv(|v| 1.0 - v);

        let batch = x.nrows();
        let h = self.hidden_dim;
        let mut dz = Array2::zeros((batch, 4 * h));
        dz.slice_mut(s![.., 0..h]).assign(&dz_i);
        dz.slice_mut(s![.., h..2 * h]).assign(&dz_f);
        dz.slice_mut(s![.., 2 * h..3 * h]).assign(&dz_g);
        dz.slice_mut(s![.., 3 * h..4 * h]).assign(&dz_o);

        self.w_ih.grad += &dz.t().dot(x);
        self.w_hh.grad += &dz.t().dot(h_prev);
        self.b.grad += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));

        let dx = dz.dot(&self.w_ih.value);
        let dh_prev = dz.dot(&self.w_hh.value);
        (dx, dh_prev, dc_prev)
    }
}

impl ParamSet for LstmCell {
    fn named_params(&self) -> Vec<(String, &Param)> {
        vec![
            ("w_ih".into(), &self.w_ih),
            ("w_hh".into(), &self.w_hh),
            ("b".into(), &self.b),
        ]
    }
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        vec![
            ("w_ih".into(), &mut self.w_ih),
            ("w_hh".into(), &mut self.w_hh),
            ("b".into(), &mut self.b),
        ]
    }
}
