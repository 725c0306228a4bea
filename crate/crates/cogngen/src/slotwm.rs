//! Self-recurrent slot working memory.
//!
//! A bank of `M_w` slots, each paired with a fixed random projection `Q^i`.
//! Reading against a latent state `z_t`:
//!
//! ```text
//! k^i = Q^i z_t                                  (key)
//! s^i = mean_j [ r(m^i - k^i)_j + r(k^i - m^i)_j ]   (match score)
//! m_t = [[m^1, s^1], ..., [m^Mw, s^Mw]]          (read-out)
//! ```
//!
//! With `r` the rectifier, `s^i` is the mean L1 distance between slot and key:
//! zero exactly when the slot holds the key of the current state. Writing is
//! an internal action: `ignore` leaves the buffer alone, `store_i` overwrites
//! slot `i` with the key projection of `z_t`. Projections are sampled once and
//! never learned.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ngc::{cast, Scalar};
use crate::{Error, Result};

/// Interpretation of the bracketed term in the match score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Elementwise rectifier: the score is the mean L1 distance.
    Rectifier,
    /// Literal elementwise floor.
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlotConfig {
    /// Slot count `M_w`.
    pub slots: usize,
    /// Slot width `M_d`.
    pub slot_dim: usize,
    pub match_mode: MatchMode,
}

impl Default for SlotConfig {
    fn default() -> Self {
        SlotConfig {
            slots: 1,
            slot_dim: 32,
            match_mode: MatchMode::Rectifier,
        }
    }
}

impl SlotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::config("slot buffer needs at least one slot"));
        }
        if self.slot_dim == 0 {
            return Err(Error::config("slot width must be positive"));
        }
        Ok(())
    }
}

/// The slot bank plus its fixed key projections.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SlotBuffer<F: Scalar> {
    cfg: SlotConfig,
    state_dim: usize,
    projections: Vec<Array2<F>>,
    slots: Vec<Array1<F>>,
}

impl<F: Scalar> SlotBuffer<F> {
    /// Sample the projections `Q^i` from a centered Gaussian with standard
    /// deviation `1/sqrt(D_z)` (keys stay on the scale of the state).
    pub fn new(state_dim: usize, cfg: SlotConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        if state_dim == 0 {
            return Err(Error::config("state dimension must be positive"));
        }
        let std = 1.0 / (state_dim as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let projections = (0..cfg.slots)
            .map(|_| {
                Array2::from_shape_simple_fn((cfg.slot_dim, state_dim), || {
                    cast(normal.sample(rng))
                })
            })
            .collect();
        let slots = (0..cfg.slots).map(|_| Array1::zeros(cfg.slot_dim)).collect();
        Ok(SlotBuffer {
            cfg,
            state_dim,
            projections,
            slots,
        })
    }

    pub fn config(&self) -> &SlotConfig {
        &self.cfg
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Length of the read-out vector `m_t`.
    pub fn output_dim(&self) -> usize {
        self.cfg.slots * (self.cfg.slot_dim + 1)
    }

    /// Number of internal actions: `ignore` plus one store per slot.
    pub fn action_count(&self) -> usize {
        self.cfg.slots + 1
    }

    fn check_state(&self, z: ArrayView1<F>) -> Result<()> {
        if z.len() != self.state_dim {
            return Err(Error::config(format!(
                "state length {} does not match buffer dimension {}",
                z.len(),
                self.state_dim
            )));
        }
        Ok(())
    }

    fn match_score(&self, slot: &Array1<F>, key: &Array1<F>) -> F {
        let mut acc = F::zero();
        for (&m, &k) in slot.iter().zip(key.iter()) {
            let d = m - k;
            acc = acc + self.bracket(d) + self.bracket(-d);
        }
        acc / cast(self.cfg.slot_dim as f64)
    }

    fn bracket(&self, v: F) -> F {
        match self.cfg.match_mode {
            MatchMode::Rectifier => {
                if v > F::zero() {
                    v
                } else {
                    F::zero()
                }
            }
            MatchMode::Floor => v.floor(),
        }
    }

    /// Read-out against `z_t`: slot contents and match scores, concatenated.
    /// Pure with respect to the slots.
    pub fn read(&self, z: ArrayView1<F>) -> Result<Array1<F>> {
        self.check_state(z)?;
        let mut out = Array1::zeros(self.output_dim());
        let width = self.cfg.slot_dim + 1;
        for (i, (slot, q)) in self.slots.iter().zip(&self.projections).enumerate() {
            let key = q.dot(&z);
            let score = self.match_score(slot, &key);
            let mut block = out.slice_mut(ndarray::s![i * width..(i + 1) * width]);
            block.slice_mut(ndarray::s![..self.cfg.slot_dim]).assign(slot);
            block[self.cfg.slot_dim] = score;
        }
        Ok(out)
    }

    /// Apply internal action `a_int`: `0` ignores, `i ≥ 1` stores the slot-`i`
    /// key projection of `z_t` into slot `i`.
    pub fn write(&mut self, a_int: usize, z: ArrayView1<F>) -> Result<()> {
        self.check_state(z)?;
        if a_int > self.cfg.slots {
            return Err(Error::config(format!(
                "internal action {} out of range (0..={})",
                a_int, self.cfg.slots
            )));
        }
        if a_int == 0 {
            return Ok(());
        }
        let i = a_int - 1;
        self.slots[i] = self.projections[i].dot(&z);
        Ok(())
    }

    /// Zero every slot; the projections survive.
    pub fn reset(&mut self) {
        for slot in &mut self.slots {
            slot.fill(F::zero());
        }
    }

    #[cfg(test)]
    pub(crate) fn slot_mut(&mut self, i: usize) -> &mut Array1<F> {
        &mut self.slots[i]
    }

    #[cfg(test)]
    pub(crate) fn projection_mut(&mut self, i: usize) -> &mut Array2<F> {
        &mut self.projections[i]
    }

    #[cfg(test)]
    pub(crate) fn slot(&self, i: usize) -> &Array1<F> {
        &self.slots[i]
    }
}
