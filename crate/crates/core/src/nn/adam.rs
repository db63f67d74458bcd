//! Adam with bias correction.

use super::NnError;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Optimizer state: first/second moment accumulators per parameter and a
/// strictly increasing step count. Moment shapes are fixed by the first
/// `step` call.
pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    moments: Option<Vec<(DMatrix<f64>, DMatrix<f64>)>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Self { cfg, step: 0, moments: None }
    }

    pub fn with_lr(lr: f64) -> Self {
        Self::new(AdamConfig { lr, ..AdamConfig::default() })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update in place. `grads` must match `params` in count and shapes.
    pub fn step(
        &mut self,
        params: &mut [DMatrix<f64>],
        grads: &[DMatrix<f64>],
    ) -> Result<(), NnError> {
        if params.len() != grads.len() {
            return Err(NnError::ShapeMismatch(format!(
                "adam: {} params vs {} grads",
                params.len(),
                grads.len()
            )));
        }
        let moments = self.moments.get_or_insert_with(|| {
            params
                .iter()
                .map(|p| {
                    (DMatrix::zeros(p.nrows(), p.ncols()), DMatrix::zeros(p.nrows(), p.ncols()))
                })
                .collect()
        });
        if moments.len() != params.len() {
            return Err(NnError::ShapeMismatch(format!(
                "adam: optimizer built for {} params, got {}",
                moments.len(),
                params.len()
            )));
        }
        for ((p, g), (m, v)) in params.iter().zip(grads).zip(moments.iter()) {
            if p.shape() != g.shape() || p.shape() != m.shape() || p.shape() != v.shape() {
                return Err(NnError::ShapeMismatch(format!(
                    "adam: param {:?} vs grad {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(moments.iter_mut()) {
            for i in 0..p.len() {
                m[i] = self.cfg.beta1 * m[i] + (1.0 - self.cfg.beta1) * g[i];
                v[i] = self.cfg.beta2 * v[i] + (1.0 - self.cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
            }
        }
        Ok(())
    }
}
