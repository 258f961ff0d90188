//! Adam and a reduce-on-plateau learning-rate schedule.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates for a fixed list of parameter tensors.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = sizes.into_iter().collect();
        AdamState {
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update. Parameters whose gradient is `None`
/// are left alone.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[Option<&[f64]>], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (k, p) in params.iter_mut().enumerate() {
        let Some(g) = grads[k] else { continue };
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let mhat = m[i] / c1;
            let vhat = v[i] / c2;
            p[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    /// Absolute improvement a loss needs over the best so far.
    pub threshold: f64,
    pub min_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig { factor: 0.1, patience: 10, threshold: 1e-4, min_lr: 1e-8 }
    }
}

/// Cuts the learning rate after `patience` consecutive epochs without
/// improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct Plateau {
    pub config: PlateauConfig,
    pub best: f64,
    pub bad_epochs: usize,
}

impl Plateau {
    pub fn new(config: PlateauConfig) -> Self {
        Plateau { config, best: f64::INFINITY, bad_epochs: 0 }
    }

    /// Record one validation loss and return the learning rate to use next.
    pub fn step(&mut self, loss: f64, lr: f64) -> f64 {
        if loss < self.best - self.config.threshold {
            self.best = loss;
            self.bad_epochs = 0;
            return lr;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= self.config.patience {
            self.bad_epochs = 0;
            return (lr * self.config.factor).max(self.config.min_lr);
        }
        lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_changes_nothing() {
        let mut w = vec![1.0, -2.0];
        let mut st = AdamState::new([2]);
        adam_step(&mut [&mut w], &[Some(&[0.0, 0.0])], &mut st, &AdamConfig::default());
        assert_eq!(w, [1.0, -2.0]);
        assert_eq!(st.m[0], [0.0, 0.0]);
        assert_eq!(st.v[0], [0.0, 0.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig { lr: 0.01, eps: 0.0, ..AdamConfig::default() };
        let mut w = vec![0.0, 0.0];
        let mut st = AdamState::new([2]);
        adam_step(&mut [&mut w], &[Some(&[3.0, -0.002])], &mut st, &cfg);
        assert!((w[0] + 0.01).abs() < 1e-15 && (w[1] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn scalar_oracle_on_square() {
        // hand-rolled Adam on f(w) = w², f'(w) = 2w
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
        let (mut w_ref, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=3 {
            let g = 2.0 * w_ref;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            w_ref -= lr * mh / (vh.sqrt() + eps);
        }
        let cfg = AdamConfig { lr, ..AdamConfig::default() };
        let mut w = vec![1.0];
        let mut st = AdamState::new([1]);
        for _ in 0..3 {
            let g = [2.0 * w[0]];
            adam_step(&mut [&mut w], &[Some(&g)], &mut st, &cfg);
        }
        assert!((w[0] - w_ref).abs() < 1e-12);
    }

    #[test]
    fn plateau_decreasing_keeps_lr() {
        let mut p = Plateau::new(PlateauConfig::default());
        let mut lr = 1e-3;
        for i in 0..30 {
            lr = p.step(1.0 - 0.01 * i as f64, lr);
        }
        assert_eq!(lr, 1e-3);
    }

    #[test]
    fn plateau_cuts_after_patience() {
        let mut p = Plateau::new(PlateauConfig::default());
        let mut lr = p.step(0.5, 1e-3);
        for k in 1..=10 {
            lr = p.step(0.5, lr);
            if k < 10 {
                assert_eq!(lr, 1e-3, "epoch {k}");
            }
        }
        assert!((lr - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn plateau_floor() {
        let mut p = Plateau::new(PlateauConfig { patience: 1, ..PlateauConfig::default() });
        let mut lr = 1e-8;
        p.step(1.0, lr);
        for _ in 0..5 {
            lr = p.step(1.0, lr);
        }
        assert_eq!(lr, 1e-8);
    }
}
