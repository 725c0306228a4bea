//! Adam moment tracking over a circuit's parameter tensors.

use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{cast, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    /// Global learning rate `eta`.
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.lr > 0.0) {
            return Err(crate::Error::config("adam lr must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(crate::Error::config(format!(
                    "adam {name} must lie in [0, 1), got {b}"
                )));
            }
        }
        if !(self.eps > 0.0) {
            return Err(crate::Error::config("adam eps must be positive"));
        }
        Ok(())
    }
}

/// First/second moment estimates for a fixed set of matrix and vector
/// parameters. `apply` moves parameters *along* the supplied updates (a
/// positive update increases the parameter), so callers hand in Hebbian
/// deltas or negated loss gradients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AdamState<F: Scalar> {
    cfg: AdamConfig,
    step: u64,
    m_mats: Vec<Array2<F>>,
    v_mats: Vec<Array2<F>>,
    m_vecs: Vec<Array1<F>>,
    v_vecs: Vec<Array1<F>>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(cfg: AdamConfig, mat_shapes: &[(usize, usize)], vec_shapes: &[usize]) -> Self {
        AdamState {
            cfg,
            step: 0,
            m_mats: mat_shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v_mats: mat_shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            m_vecs: vec_shapes.iter().map(|&s| Array1::zeros(s)).collect(),
            v_vecs: vec_shapes.iter().map(|&s| Array1::zeros(s)).collect(),
        }
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected step over every parameter tensor.
    pub fn apply(
        &mut self,
        mats: &mut [&mut Array2<F>],
        mat_updates: &[&Array2<F>],
        vecs: &mut [&mut Array1<F>],
        vec_updates: &[&Array1<F>],
    ) {
        assert_eq!(mats.len(), self.m_mats.len());
        assert_eq!(mat_updates.len(), self.m_mats.len());
        assert_eq!(vecs.len(), self.m_vecs.len());
        assert_eq!(vec_updates.len(), self.m_vecs.len());

        self.step += 1;
        let t = self.step as i32;
        let b1: F = cast(self.cfg.beta1);
        let b2: F = cast(self.cfg.beta2);
        let one = F::one();
        let corr1 = one / (one - b1.powi(t));
        let corr2 = one / (one - b2.powi(t));
        let lr: F = cast(self.cfg.lr);
        let eps: F = cast(self.cfg.eps);

        for (((p, g), m), v) in mats
            .iter_mut()
            .zip(mat_updates)
            .zip(&mut self.m_mats)
            .zip(&mut self.v_mats)
        {
            Zip::from(&mut **p)
                .and(*g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    *p = *p + lr * (*m * corr1) / ((*v * corr2).sqrt() + eps);
                });
        }
        for (((p, g), m), v) in vecs
            .iter_mut()
            .zip(vec_updates)
            .zip(&mut self.m_vecs)
            .zip(&mut self.v_vecs)
        {
            Zip::from(&mut **p)
                .and(*g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    *p = *p + lr * (*m * corr1) / ((*v * corr2).sqrt() + eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn state_for(cfg: AdamConfig) -> (AdamState<f64>, Array2<f64>) {
        let state = AdamState::new(cfg, &[(1, 1)], &[]);
        (state, arr2(&[[0.5]]))
    }

    #[test]
    fn zero_update_leaves_parameter_unchanged() {
        let (mut adam, mut p) = state_for(AdamConfig::default());
        let zero = arr2(&[[0.0]]);
        for _ in 0..3 {
            adam.apply(&mut [&mut p], &[&zero], &mut [], &[]);
        }
        assert_eq!(p[[0, 0]], 0.5);
        assert_eq!(adam.steps_taken(), 3);
    }

    #[test]
    fn first_step_moves_by_roughly_signed_lr() {
        // With bias correction the very first step is lr * g / (|g| + eps').
        for g in [0.3, -0.02, 4.0] {
            let cfg = AdamConfig::default();
            let (mut adam, mut p) = state_for(cfg);
            let upd = arr2(&[[g]]);
            adam.apply(&mut [&mut p], &[&upd], &mut [], &[]);
            let moved = p[[0, 0]] - 0.5;
            assert!(
                (moved - cfg.lr * g.signum()).abs() < 1e-6,
                "g={g}: moved {moved}"
            );
        }
    }

    #[test]
    fn default_lr_matches_contract() {
        assert_eq!(AdamConfig::default().lr, 5e-4);
        assert_eq!(AdamConfig::default().eps, 1e-8);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = AdamConfig::default();
        cfg.beta1 = 1.0;
        assert!(cfg.validate().is_err());
        cfg = AdamConfig::default();
        cfg.lr = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn positive_update_increases_parameter() {
        let (mut adam, mut p) = state_for(AdamConfig::default());
        let upd = arr2(&[[2.0]]);
        adam.apply(&mut [&mut p], &[&upd], &mut [], &[]);
        assert!(p[[0, 0]] > 0.5);
    }
}
