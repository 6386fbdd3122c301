//! Adaptive-moment optimizer with decoupled weight decay and linear
//! learning-rate warmup, plus global-norm gradient clipping.

use crate::error::TensorError;
use crate::tensor::Tensor;
use crate::{lit, Scalar};

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub warmup_steps: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
            warmup_steps: 1000,
        }
    }
}

pub struct Adam<S> {
    pub cfg: AdamConfig,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
    step_count: u64,
}

impl<S: Scalar> Adam<S> {
    pub fn new(cfg: AdamConfig, param_sizes: &[usize]) -> Self {
        Self {
            cfg,
            m: param_sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            v: param_sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Learning rate after `steps` completed updates: linear ramp from 0
    /// over the warmup window, then constant.
    pub fn lr_at(&self, steps: u64) -> f64 {
        if self.cfg.warmup_steps == 0 || steps >= self.cfg.warmup_steps {
            self.cfg.lr
        } else {
            self.cfg.lr * (steps + 1) as f64 / self.cfg.warmup_steps as f64
        }
    }

    /// One bias-corrected update. Weight decay is decoupled: it scales the
    /// parameter directly and never touches the moment estimates.
    pub fn step(
        &mut self,
        params: &mut [Tensor<S>],
        grads: &[&[S]],
    ) -> Result<(), TensorError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TensorError::Invalid {
                op: "adam_step",
                detail: format!(
                    "{} params, {} grads, optimizer tracks {}",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.numel() != g.len() || p.numel() != self.m[i].len() {
                return Err(TensorError::Invalid {
                    op: "adam_step",
                    detail: format!(
                        "param {i}: {} elements, grad {}, state {}",
                        p.numel(),
                        g.len(),
                        self.m[i].len()
                    ),
                });
            }
        }
        let lr = lit::<S>(self.lr_at(self.step_count));
        self.step_count += 1;
        let t = self.step_count as i32;
        let b1 = lit::<S>(self.cfg.beta1);
        let b2 = lit::<S>(self.cfg.beta2);
        let eps = lit::<S>(self.cfg.eps);
        let wd = lit::<S>(self.cfg.weight_decay);
        let bc1 = S::one() - b1.powi(t);
        let bc2 = S::one() - b2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(&mut self.v))
        {
            for (j, pj) in p.data_mut().iter_mut().enumerate() {
                let gj = g[j];
                m[j] = b1 * m[j] + (S::one() - b1) * gj;
                v[j] = b2 * v[j] + (S::one() - b2) * gj * gj;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                *pj = *pj - lr * (mhat / (vhat.sqrt() + eps) + wd * *pj);
            }
        }
        Ok(())
    }
}

/// Scales all gradients in place so the global L2 norm is at most
/// `max_norm`; returns the pre-clip norm.
pub fn clip_global_norm<S: Scalar>(grads: &mut [Vec<S>], max_norm: S) -> S {
    let sq: S = grads
        .iter()
        .map(|g| g.iter().map(|&x| x * x).sum::<S>())
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads {
            for x in g {
                *x = *x * scale;
            }
        }
    }
    norm
}
