//! Adam optimizer with bias correction and serializable state.

use super::ParamSet;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    steps: u64,
    /// First/second moment per parameter name.
    moments: HashMap<String, (Array2<f64>, Array2<f64>)>,
}

/// Serializable optimizer state for checkpoints. Moments are stored sorted by
/// parameter name with explicit shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamSnapshot {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: u64,
    pub moments: Vec<MomentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 0,
            moments: HashMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Apply one update from the accumulated gradients (does not zero them).
    pub fn step(&mut self, set: &mut dyn ParamSet) {
        self.steps += 1;
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let bc1 = 1.0 - b1.powi(self.steps as i32);
        let bc2 = 1.0 - b2.powi(self.steps as i32);
        for (name, p) in set.named_params_mut() {
            let (m, v) = self
                .moments
                .entry(name)
                .or_insert_with(|| (Array2::zeros(p.value.raw_dim()), Array2::zeros(p.value.raw_dim())));
            azip(m, v, &mut p.value, &p.grad, |m, v, value, g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *value -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
    }

    pub fn snapshot(&self) -> AdamSnapshot {
        let mut moments: Vec<MomentEntry> = self
            .moments
            .iter()
            .map(|(name, (m, v))| MomentEntry {
                name: name.clone(),
                rows: m.nrows(),
                cols: m.ncols(),
                m: m.iter().copied().collect(),
                v: v.iter().copied().collect(),
            })
            .collect();
        moments.sort_by(|a, b| a.name.cmp(&b.name));
        AdamSnapshot {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            steps: self.steps,
            moments,
        }
    }

    pub fn from_snapshot(snap: &AdamSnapshot) -> Self {
        let moments = snap
            .moments
            .iter()
            .map(|e| {
                let m = Array2::from_shape_vec((e.rows, e.cols), e.m.clone()).expect("shape");
                let v = Array2::from_shape_vec((e.rows, e.cols), e.v.clone()).expect("shape");
                (e.name.clone(), (m, v))
            })
            .collect();
        Adam {
            lr: snap.lr,
            beta1: snap.beta1,
            beta2: snap.beta2,
            eps: snap.eps,
            steps: snap.steps,
            moments,
        }
    }
}

/// Elementwise four-array walk in a fixed row-major order.
fn azip<F>(m: &mut Array2<f64>, v: &mut Array2<f64>, value: &mut Array2<f64>, grad: &Array2<f64>, mut f: F)
where
    F: FnMut(&mut f64, &mut f64, &mut f64, f64),
{
    let g = grad.as_slice().expect("contiguous");
    let ms = m.as_slice_mut().expect("contiguous");
    let vs = v.as_slice_mut().expect("contiguous");
    let xs = value.as_slice_mut().expect("contiguous");
    for i in 0..g.len() {
        f(&mut ms[i], &mut vs[i], &mut xs[i], g[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Linear, Param, ParamSet};
    use super::*;
    use crate::rng::substream;

    struct One {
        p: Param,
    }
    impl ParamSet for One {
        fn named_params(&self) -> Vec<(String, &Param)> {
            vec![("p".into(), &self.p)]
        }
        fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
            vec![("p".into(), &mut self.p)]
        }
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // With constant gradient g, bias correction makes the first update
        // exactly -lr · g / (|g| + eps·sqrt(1-beta2)) ≈ -lr · sign(g).
        let mut set = One {
            p: Param::zeros(1, 2),
        };
        set.p.grad[[0, 0]] = 0.3;
        set.p.grad[[0, 1]] = -4.0;
        let mut opt = Adam::new(1e-3);
        opt.step(&mut set);
        for (i, g) in [(0, 0.3f64), (1, -4.0f64)] {
            let m_hat = g; // m = (1-b1)g, corrected by (1-b1)
            let v_hat = g * g;
            let expected = -1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
            assert!(
                (set.p.value[[0, i]] - expected).abs() < 1e-15,
                "coord {i}: {} vs {expected}",
                set.p.value[[0, i]]
            );
        }
    }

    #[test]
    fn two_steps_match_explicit_moment_recursion() {
        let g1 = 0.5;
        let g2 = -0.2;
        let (b1, b2, lr, eps) = (0.9, 0.999, 1e-2, 1e-8);

        let mut set = One {
            p: Param::zeros(1, 1),
        };
        let mut opt = Adam::new(lr);
        set.p.grad[[0, 0]] = g1;
        opt.step(&mut set);
        set.p.grad.fill(0.0);
        set.p.grad[[0, 0]] = g2;
        opt.step(&mut set);

        // Reference recursion.
        let mut m: f64 = 0.0;
        let mut v: f64 = 0.0;
        let mut theta: f64 = 0.0;
        for (t, g) in [(1, g1), (2, g2)] {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        assert!((set.p.value[[0, 0]] - theta).abs() < 1e-15);
    }

    #[test]
    fn converges_on_quadratic() {
        // Minimize f(w) = Σ (w - 3)² with gradient 2(w - 3).
        let mut set = One {
            p: Param::zeros(2, 2),
        };
        let mut opt = Adam::new(0.05);
        for _ in 0..2000 {
            let g = set.p.value.mapv(|w| 2.0 * (w - 3.0));
            set.p.grad.assign(&g);
            opt.step(&mut set);
        }
        for &w in set.p.value.iter() {
            assert!((w - 3.0).abs() < 1e-3, "w = {w}");
        }
    }

    #[test]
    fn snapshot_round_trip_preserves_updates() {
        let mut rng = substream(50, "adam");
        let mut layer = Linear::new(3, 2, 1.0, &mut rng);
        let mut opt = Adam::new(3e-4);
        // A few updates to populate the moments.
        for k in 0..3 {
            layer.w.grad.fill(0.1 * (k as f64 + 1.0));
            layer.b.grad.fill(-0.05);
            opt.step(&mut layer);
        }
        let snap = opt.snapshot();
        let json = serde_json::to_string(&snap).unwrap();
        let back: AdamSnapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(snap, back);

        let mut restored = Adam::from_snapshot(&back);
        let mut twin = layer.clone();
        layer.w.grad.fill(0.2);
        layer.b.grad.fill(0.3);
        twin.w.grad.fill(0.2);
        twin.b.grad.fill(0.3);
        opt.step(&mut layer);
        restored.step(&mut twin);
        assert_eq!(layer.w.value, twin.w.value);
        assert_eq!(layer.b.value, twin.b.value);
    }
}
