//! Gradient-descent optimisers over flat parameter vectors.
//!
//! Two modes: plain SGD (useful when a test needs the applied update to be
//! an exact linear function of the clipped gradient) and Adam, the default
//! for training. Global-norm gradient clipping happens inside `step` so
//! every caller gets the same contract: the update is computed from the
//! clipped gradient.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    pub fn sgd(lr: f64, max_grad_norm: Option<f64>) -> Optimizer {
        Optimizer {
            kind: OptimizerKind::Sgd,
            lr,
            max_grad_norm,
            beta1: 0.0,
            beta2: 0.0,
            eps: 0.0,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn adam(lr: f64, max_grad_norm: Option<f64>, param_count: usize) -> Optimizer {
        Optimizer {
            kind: OptimizerKind::Adam,
            lr,
            max_grad_norm,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            t: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn new(kind: OptimizerKind, lr: f64, max_grad_norm: Option<f64>, param_count: usize) -> Optimizer {
        match kind {
            OptimizerKind::Sgd => Optimizer::sgd(lr, max_grad_norm),
            OptimizerKind::Adam => Optimizer::adam(lr, max_grad_norm, param_count),
        }
    }

    /// Apply one descent step in place. Returns the pre-clip global gradient
    /// norm so callers can log it.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> f64 {
        assert_eq!(theta.len(), grad.len(), "parameter/gradient length mismatch");
        let norm = global_norm(grad);
        let scale = match self.max_grad_norm {
            Some(cap) if norm > cap && norm > 0.0 => cap / norm,
            _ => 1.0,
        };
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in theta.iter_mut().zip(grad) {
                    *p -= self.lr * scale * g;
                }
            }
            OptimizerKind::Adam => {
                assert_eq!(self.m.len(), theta.len(), "optimizer built for a different model");
                self.t += 1;
                let b1t = 1.0 - self.beta1.powi(self.t as i32);
                let b2t = 1.0 - self.beta2.powi(self.t as i32);
                for i in 0..theta.len() {
                    let g = scale * grad[i];
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    let mh = self.m[i] / b1t;
                    let vh = self.v[i] / b2t;
                    theta[i] -= self.lr * mh / (vh.sqrt() + self.eps);
                }
            }
        }
        norm
    }
}

pub fn global_norm(grad: &[f64]) -> f64 {
    grad.iter().map(|g| g * g).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_without_clipping_is_plain_descent() {
        let mut opt = Optimizer::sgd(0.1, None);
        let mut theta = vec![1.0, -2.0];
        opt.step(&mut theta, &[0.5, -1.0]);
        assert!((theta[0] - 0.95).abs() < 1e-15);
        assert!((theta[1] + 1.9).abs() < 1e-15);
    }

    #[test]
    fn clipped_sgd_update_norm_is_lr_times_cap() {
        // When the raw gradient norm exceeds the cap, the applied SGD update
        // must have norm exactly lr * cap.
        let mut opt = Optimizer::sgd(0.01, Some(0.5));
        let mut theta = vec![0.0; 4];
        let grad = vec![3.0, -4.0, 0.0, 12.0]; // norm 13
        let reported = opt.step(&mut theta, &grad);
        assert!((reported - 13.0).abs() < 1e-12);
        let update_norm = global_norm(&theta);
        assert!((update_norm - 0.01 * 0.5).abs() < 1e-12);
        // Direction is preserved.
        assert!(theta[0] < 0.0 && theta[1] > 0.0 && theta[2] == 0.0 && theta[3] < 0.0);
    }

    #[test]
    fn gradient_below_cap_is_untouched() {
        let mut opt = Optimizer::sgd(1.0, Some(10.0));
        let mut theta = vec![0.0, 0.0];
        opt.step(&mut theta, &[0.3, -0.4]); // norm 0.5 < 10
        assert!((theta[0] + 0.3).abs() < 1e-15);
        assert!((theta[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_roughly_lr() {
        // With bias correction, Adam's first step is lr * g / (|g| + eps),
        // i.e. close to +/- lr regardless of gradient magnitude.
        let mut opt = Optimizer::adam(1e-3, None, 2);
        let mut theta = vec![0.0, 0.0];
        opt.step(&mut theta, &[10.0, -0.01]);
        assert!((theta[0] + 1e-3).abs() < 1e-6);
        assert!((theta[1] - 1e-3).abs() < 1e-6);
    }

    #[test]
    fn adam_state_accumulates_across_steps() {
        let mut opt = Optimizer::adam(0.1, None, 1);
        let mut theta = vec![0.0];
        // Constant gradient: parameter should march monotonically downward.
        let mut prev = theta[0];
        for _ in 0..10 {
            opt.step(&mut theta, &[1.0]);
            assert!(theta[0] < prev);
            prev = theta[0];
        }
    }

    #[test]
    fn zero_lr_changes_nothing() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut opt = Optimizer::new(kind, 0.0, Some(0.5), 3);
            let mut theta = vec![1.0, 2.0, 3.0];
            let before = theta.clone();
            opt.step(&mut theta, &[5.0, -5.0, 5.0]);
            assert_eq!(theta, before);
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point_for_sgd() {
        let mut opt = Optimizer::sgd(0.1, Some(0.5));
        let mut theta = vec![1.0, -1.0];
        let norm = opt.step(&mut theta, &[0.0, 0.0]);
        assert_eq!(norm, 0.0);
        assert_eq!(theta, vec![1.0, -1.0]);
    }
}
