//! Motor-action circuit: control vectors, action selection, value targets.
//!
//! The motor NGC circuit reads the latent state `z_t` and the working-memory
//! read-out `m_t` (through the memory projection `M`, rectified after the
//! matmul — `z_t`'s contribution is left linear) and projects two control
//! heads: `c_ext` over the six external actions and `c_int` over the `M_w + 1`
//! slot actions. Action selection is epsilon-greedy per head, ties broken
//! toward the lowest index.
//!
//! Learning is value iteration in NGC clothing: a transition's scalar target
//! is `r_t` at termination and `r_t + gamma * c'[a*]` otherwise, where the
//! live circuit chooses `a*` and a periodically re-frozen copy prices it
//! (decoupling selection from evaluation keeps the bootstrap from inflating).
//! The scalar lands in the selected component of a vector target whose other
//! components copy the model's own current outputs (zero error off-action).
//! Settling against those clamped targets yields Hebbian deltas for every
//! motor parameter, including `M`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::ngc::{cast, CircuitSpec, Clamps, NgcCircuit, NgcConfig, Scalar, StreamSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotorConfig {
    /// Discount on the bootstrapped half of nonterminal targets.
    pub gamma: f64,
    /// Hidden widths, top to bottom: the `z̄³` stage and the two state layers.
    pub hidden: [usize; 3],
    /// Initial exploration rate for the external head.
    pub eps_ext: f64,
    /// Initial exploration rate for the internal head.
    pub eps_int: f64,
    /// Per-episode multiplicative decay on both rates.
    pub eps_decay: f64,
    /// Decay stops here: residual exploration keeps corrective data flowing
    /// even after a policy drifts.
    pub eps_floor: f64,
    /// Updates between re-freezing the bootstrap circuit. Without the frozen
    /// copy the max-bootstrap feeds on its own estimates and the control
    /// values run away.
    pub target_sync: u64,
    pub ngc: NgcConfig,
}

impl Default for MotorConfig {
    fn default() -> Self {
        MotorConfig {
            gamma: 0.95,
            hidden: [512, 512, 512],
            eps_ext: 0.95,
            eps_int: 0.1,
            eps_decay: 0.995,
            eps_floor: 0.05,
            target_sync: 1000,
            ngc: NgcConfig::default(),
        }
    }
}

impl MotorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.eps_ext) || !(0.0..=1.0).contains(&self.eps_int) {
            return Err(Error::config("exploration rates must lie in [0, 1]"));
        }
        if !(self.eps_decay > 0.0 && self.eps_decay <= 1.0) {
            return Err(Error::config("eps_decay must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.eps_floor) {
            return Err(Error::config("eps_floor must lie in [0, 1]"));
        }
        if self.target_sync == 0 {
            return Err(Error::config("target_sync must be positive"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("motor hidden widths must be positive"));
        }
        self.ngc.validate()
    }
}

/// Per-episode epsilon-greedy state for the two heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    eps_ext: f64,
    eps_int: f64,
    decay: f64,
    floor: f64,
}

impl ExplorationSchedule {
    pub fn new(cfg: &MotorConfig) -> Self {
        ExplorationSchedule {
            eps_ext: cfg.eps_ext,
            eps_int: cfg.eps_int,
            decay: cfg.eps_decay,
            floor: cfg.eps_floor,
        }
    }

    pub fn eps_ext(&self) -> f64 {
        self.eps_ext
    }

    pub fn eps_int(&self) -> f64 {
        self.eps_int
    }

    /// Multiplicative decay at an episode boundary, stopping at the floor.
    /// A rate configured below the floor holds its value instead of rising.
    pub fn decay_episode(&mut self) {
        self.eps_ext = (self.eps_ext * self.decay).max(self.floor.min(self.eps_ext));
        self.eps_int = (self.eps_int * self.decay).max(self.floor.min(self.eps_int));
    }

    /// Force both rates to zero (greedy evaluation).
    pub fn freeze(&mut self) {
        self.eps_ext = 0.0;
        self.eps_int = 0.0;
    }
}

/// Argmax with ties broken toward the lowest index.
pub(crate) fn argmax<F: PartialOrd + Copy>(v: ArrayView1<F>) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy selection over both control heads, independently.
pub fn select_actions<F: Scalar>(
    c_ext: ArrayView1<F>,
    c_int: ArrayView1<F>,
    schedule: &ExplorationSchedule,
    rng: &mut impl Rng,
) -> (usize, usize) {
    let a_ext = if schedule.eps_ext() > 0.0 && rng.random::<f64>() < schedule.eps_ext() {
        rng.random_range(0..c_ext.len())
    } else {
        argmax(c_ext)
    };
    let a_int = if schedule.eps_int() > 0.0 && rng.random::<f64>() < schedule.eps_int() {
        rng.random_range(0..c_int.len())
    } else {
        argmax(c_int)
    };
    (a_ext, a_int)
}

/// The motor circuit with its dimensions pinned, plus the frozen copy that
/// supplies bootstrap values for nonterminal targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MotorModel<F: Scalar> {
    cfg: MotorConfig,
    z_dim: usize,
    m_dim: usize,
    n_ext: usize,
    n_int: usize,
    circuit: NgcCircuit<F>,
    frozen: NgcCircuit<F>,
    updates: u64,
}

impl<F: Scalar> MotorModel<F> {
    pub fn new(
        z_dim: usize,
        m_dim: usize,
        n_ext: usize,
        n_int: usize,
        cfg: MotorConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        if z_dim == 0 || m_dim == 0 || n_ext == 0 || n_int == 0 {
            return Err(Error::config("motor dimensions must be positive"));
        }
        let spec = CircuitSpec {
            streams: vec![StreamSpec::raw(z_dim), StreamSpec::raw_rectified(m_dim)],
            hidden: cfg.hidden.to_vec(),
            heads: vec![n_ext, n_int],
        };
        let circuit = NgcCircuit::new(spec, cfg.ngc, rng)?;
        let frozen = circuit.clone();
        Ok(MotorModel {
            cfg,
            z_dim,
            m_dim,
            n_ext,
            n_int,
            circuit,
            frozen,
            updates: 0,
        })
    }

    pub fn config(&self) -> &MotorConfig {
        &self.cfg
    }

    pub fn n_ext(&self) -> usize {
        self.n_ext
    }

    pub fn n_int(&self) -> usize {
        self.n_int
    }

    fn check_batch(&self, z: ArrayView2<F>, m: ArrayView2<F>) -> Result<()> {
        if z.nrows() != self.z_dim || m.nrows() != self.m_dim || z.ncols() != m.ncols() {
            return Err(Error::config(format!(
                "motor inputs ({}, {}) x ({}, {}) do not match dims ({}, {})",
                z.nrows(),
                z.ncols(),
                m.nrows(),
                m.ncols(),
                self.z_dim,
                self.m_dim
            )));
        }
        Ok(())
    }

    /// Control vectors for a batch of (state, read-out) columns.
    pub fn act_batch(&self, z: ArrayView2<F>, m: ArrayView2<F>) -> Result<(Array2<F>, Array2<F>)> {
        self.check_batch(z, m)?;
        let (_, mut heads) = self.circuit.project_batch(&[z, m])?;
        let c_int = heads.pop().expect("two heads");
        let c_ext = heads.pop().expect("two heads");
        Ok((c_ext, c_int))
    }

    /// Control vectors for a single state. Pure.
    pub fn act(&self, z: ArrayView1<F>, m: ArrayView1<F>) -> Result<(Array1<F>, Array1<F>)> {
        let (e, i) = self.act_batch(
            z.insert_axis(Axis(1)),
            m.insert_axis(Axis(1)),
        )?;
        Ok((
            e.index_axis_move(Axis(1), 0),
            i.index_axis_move(Axis(1), 0),
        ))
    }

    /// Value targets for a batch of transitions (one per column).
    ///
    /// Nonterminal columns bootstrap double-estimator style: the live
    /// circuit's control vector at the next state chooses the action, the
    /// frozen circuit's control vector prices it. Terminal columns use the
    /// bare reward. Off-action components copy the live model's current
    /// outputs so only the taken action carries error.
    #[allow(clippy::too_many_arguments)]
    pub fn compute_targets(
        &self,
        z: ArrayView2<F>,
        m: ArrayView2<F>,
        a_ext: &[usize],
        a_int: &[usize],
        r: &[f64],
        z_next: ArrayView2<F>,
        m_next: ArrayView2<F>,
        terminal: &[bool],
    ) -> Result<(Array2<F>, Array2<F>)> {
        self.check_batch(z, m)?;
        self.check_batch(z_next, m_next)?;
        let b = z.ncols();
        if [a_ext.len(), a_int.len(), r.len(), terminal.len()] != [b; 4] {
            return Err(Error::config("target batch fields have mismatched lengths"));
        }
        let (cur_ext, cur_int) = self.act_batch(z, m)?;
        let (live_ext, live_int) = self.act_batch(z_next, m_next)?;
        let (_, mut frozen_heads) = self.frozen.project_batch(&[z_next, m_next])?;
        let next_int = frozen_heads.pop().expect("two heads");
        let next_ext = frozen_heads.pop().expect("two heads");
        let mut t_ext = cur_ext;
        let mut t_int = cur_int;
        let gamma = self.cfg.gamma;
        for j in 0..b {
            if a_ext[j] >= self.n_ext || a_int[j] >= self.n_int {
                return Err(Error::config("transition action index out of range"));
            }
            let scalar = |live_c: ArrayView1<F>, frozen_c: ArrayView1<F>| -> f64 {
                if terminal[j] {
                    r[j]
                } else {
                    let pick = argmax(live_c);
                    r[j] + gamma * frozen_c[pick].to_f64().unwrap_or(0.0)
                }
            };
            t_ext[[a_ext[j], j]] = cast(scalar(live_ext.column(j), next_ext.column(j)));
            t_int[[a_int[j], j]] = cast(scalar(live_int.column(j), next_int.column(j)));
        }
        Ok((t_ext, t_int))
    }

    /// One settling + Hebbian/Adam update against precomputed targets,
    /// re-freezing the bootstrap circuit on schedule. Returns the batch's
    /// final total discrepancy.
    pub fn learn(
        &mut self,
        z: ArrayView2<F>,
        m: ArrayView2<F>,
        t_ext: ArrayView2<F>,
        t_int: ArrayView2<F>,
    ) -> Result<f64> {
        if z.ncols() == 0 {
            return Ok(0.0);
        }
        self.check_batch(z, m)?;
        let report = self
            .circuit
            .settle_and_update(&[z, m], Clamps::heads_only(&[Some(t_ext), Some(t_int)]))?;
        self.updates += 1;
        if self.updates % self.cfg.target_sync == 0 {
            self.frozen = self.circuit.clone();
        }
        Ok(report.final_tod())
    }

    pub fn adam_steps(&self) -> u64 {
        self.circuit.adam_steps()
    }

    #[cfg(test)]
    pub(crate) fn circuit_mut(&mut self) -> &mut NgcCircuit<F> {
        &mut self.circuit
    }

    #[cfg(test)]
    pub(crate) fn refreeze(&mut self) {
        self.frozen = self.circuit.clone();
    }

    #[cfg(test)]
    pub(crate) fn frozen(&self) -> &NgcCircuit<F> {
        &self.frozen
    }

    #[cfg(test)]
    pub(crate) fn circuit(&self) -> &NgcCircuit<F> {
        &self.circuit
    }
}
