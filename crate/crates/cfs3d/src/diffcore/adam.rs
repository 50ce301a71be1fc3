//! Bias-corrected Adam.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One parameter array, its gradient, and a name for diagnostics.
pub struct AdamEntry<'a> {
    pub name: &'a str,
    pub value: &'a mut [f64],
    pub grad: &'a [f64],
}

/// Adam optimizer state: step counter plus first/second moment arrays, one
/// pair per parameter entry, laid out in the entry order of the first call.
pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Rebuild from checkpointed state.
    pub fn restore(cfg: AdamConfig, step: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Self {
        Adam { cfg, step, m, v }
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Moment arrays, in entry order (for checkpointing).
    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    /// Override the learning rate (for schedules).
    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    /// Apply one update. Entries must arrive in the same order every call;
    /// moment arrays are allocated lazily on the first.
    pub fn step(&mut self, entries: &mut [AdamEntry<'_>]) -> Result<()> {
        if self.m.is_empty() {
            self.m = entries.iter().map(|e| vec![0.0; e.value.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != entries.len() {
            return Err(Error::Dimension(format!(
                "adam state holds {} entries, got {}",
                self.m.len(),
                entries.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for (k, e) in entries.iter_mut().enumerate() {
            if e.value.len() != self.m[k].len() {
                return Err(Error::Dimension(format!(
                    "adam entry {} ({}) changed size: {} vs {}",
                    k,
                    e.name,
                    e.value.len(),
                    self.m[k].len()
                )));
            }
            if let Some(i) = e.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in parameter {} at index {i}",
                    e.name
                )));
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..e.value.len() {
                let g = e.grad[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                e.value[i] -= c.lr * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        Ok(())
    }
}
