//! Forward dynamics model and epistemic reward.
//!
//! An NGC circuit reads the current latent state `z_t` and the one-hot
//! external action and predicts the next latent state. The total discrepancy
//! left after settling against the actually observed `z_{t+1}` is the raw
//! epistemic signal: large when the transition surprised the model, shrinking
//! as the dynamics are learned. The raw value is normalized by its running
//! maximum into `[0, 1]`.
//!
//! A short-term MINERVA filter, cleared every episode, keeps the agent from
//! farming the same surprise twice: if `z_{t+1}` is already familiar
//! (`s_recall > s_theta`) the step is taxed `-0.1` instead of rewarded. The
//! familiarity test always runs before the state is stored, so nothing is
//! familiar on first sight.

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::minerva::{MemoryConfig, TraceMemory};
use crate::ngc::{CircuitSpec, Clamps, NgcCircuit, NgcConfig, Scalar, StreamSpec};
use crate::{Error, Result};

/// Penalty applied when the next state is already familiar this episode.
const FAMILIAR_PENALTY: f64 = -0.1;
/// Running-max seed; avoids dividing by zero before the first surprise.
const R_EP_MAX_INIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsConfig {
    /// Familiarity threshold `s_theta`; recall at or below it counts as novel.
    pub s_theta: f64,
    /// Weight `eta_e` on the normalized epistemic reward.
    pub eta_e: f64,
    /// Hidden layer widths, top to bottom.
    pub hidden: [usize; 2],
    pub ngc: NgcConfig,
    pub filter: MemoryConfig,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            s_theta: 0.95,
            eta_e: 1.0,
            hidden: [128, 128],
            ngc: NgcConfig::default(),
            filter: MemoryConfig::default(),
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta_e) {
            return Err(Error::config("eta_e must lie in [0, 1]"));
        }
        if !(-1.0..=1.0).contains(&self.s_theta) {
            return Err(Error::config("s_theta must lie in [-1, 1]"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("dynamics hidden widths must be positive"));
        }
        self.ngc.validate()?;
        self.filter.validate()
    }
}

/// Raw and normalized epistemic signal for one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epistemic {
    pub raw: f64,
    /// `raw / running_max`, in `[0, 1]`.
    pub normalized: f64,
}

/// Outcome of the familiarity gate for one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateOutcome {
    pub s_recall: f64,
    pub familiar: bool,
    /// The intrinsic contribution: `eta_e * r_ep` or the familiarity penalty.
    pub contribution: f64,
    /// Combined reward `r_in + contribution`.
    pub total: f64,
}

/// NGC dynamics circuit plus the per-episode familiarity filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DynamicsModel<F: Scalar> {
    cfg: DynamicsConfig,
    z_dim: usize,
    action_dim: usize,
    circuit: NgcCircuit<F>,
    filter: TraceMemory<F>,
    r_ep_max: f64,
}

impl<F: Scalar> DynamicsModel<F> {
    pub fn new(
        z_dim: usize,
        action_dim: usize,
        cfg: DynamicsConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let spec = CircuitSpec {
            streams: vec![StreamSpec::raw(action_dim), StreamSpec::raw(z_dim)],
            hidden: cfg.hidden.to_vec(),
            heads: vec![z_dim],
        };
        let circuit = NgcCircuit::new(spec, cfg.ngc, rng)?;
        let filter = TraceMemory::new(z_dim, cfg.filter)?;
        Ok(DynamicsModel {
            cfg,
            z_dim,
            action_dim,
            circuit,
            filter,
            r_ep_max: R_EP_MAX_INIT,
        })
    }

    pub fn config(&self) -> &DynamicsConfig {
        &self.cfg
    }

    pub fn r_ep_max(&self) -> f64 {
        self.r_ep_max
    }

    pub fn filter_len(&self) -> usize {
        self.filter.len()
    }

    fn check_pair(&self, z: ArrayView1<F>, a_ext: ArrayView1<F>) -> Result<()> {
        if z.len() != self.z_dim {
            return Err(Error::config(format!(
                "latent state length {} does not match {}",
                z.len(),
                self.z_dim
            )));
        }
        if a_ext.len() != self.action_dim {
            return Err(Error::config(format!(
                "action vector length {} does not match {}",
                a_ext.len(),
                self.action_dim
            )));
        }
        Ok(())
    }

    /// Ancestral prediction of the next latent state.
    pub fn predict_next(&self, z: ArrayView1<F>, a_ext: ArrayView1<F>) -> Result<Array1<F>> {
        self.check_pair(z, a_ext)?;
        let proj = self.circuit.project(&[a_ext, z])?;
        Ok(proj.heads.into_iter().next().expect("one head"))
    }

    /// Settle against the observed next state and convert the remaining
    /// discrepancy into a normalized epistemic reward. Updates the running
    /// maximum; never touches synapses or the filter.
    pub fn epistemic_reward(
        &mut self,
        z: ArrayView1<F>,
        a_ext: ArrayView1<F>,
        z_next: ArrayView1<F>,
    ) -> Result<Epistemic> {
        self.check_pair(z, a_ext)?;
        let a2 = a_ext.insert_axis(Axis(1));
        let z2 = z.insert_axis(Axis(1));
        let t2 = z_next.insert_axis(Axis(1));
        let report = self
            .circuit
            .settle(&[a2, z2], Clamps::heads_only(&[Some(t2)]))?;
        let raw = report.final_tod();
        if raw > self.r_ep_max {
            self.r_ep_max = raw;
        }
        Ok(Epistemic {
            raw,
            normalized: raw / self.r_ep_max,
        })
    }

    /// Familiarity of a state under the current episode's filter.
    pub fn recall_of(&self, z_next: ArrayView1<F>) -> Result<f64> {
        self.filter.recall_score(z_next)
    }

    /// Gate the epistemic reward by familiarity, remember the state, and
    /// combine with the extrinsic reward.
    pub fn gate_and_combine(
        &mut self,
        r_ep_normalized: f64,
        z_next: ArrayView1<F>,
        r_in: f64,
        rng: &mut impl Rng,
    ) -> Result<GateOutcome> {
        let s_recall = self.filter.recall_score(z_next)?;
        let familiar = s_recall > self.cfg.s_theta;
        let contribution = if familiar {
            FAMILIAR_PENALTY
        } else {
            self.cfg.eta_e * r_ep_normalized
        };
        self.filter.store(z_next, rng)?;
        Ok(GateOutcome {
            s_recall,
            familiar,
            contribution,
            total: r_in + contribution,
        })
    }

    /// Empty the familiarity filter (episode boundary).
    pub fn clear_filter(&mut self) {
        self.filter.clear();
    }

    /// One synaptic update over a batch of transitions (columns). Settles all
    /// columns at once and applies the summed Hebbian deltas through Adam.
    /// An empty batch is a no-op. Returns the batch's final total discrepancy.
    pub fn update(
        &mut self,
        z: ArrayView2<F>,
        a_ext: ArrayView2<F>,
        z_next: ArrayView2<F>,
    ) -> Result<f64> {
        if z.ncols() == 0 {
            return Ok(0.0);
        }
        if z.nrows() != self.z_dim
            || z_next.nrows() != self.z_dim
            || a_ext.nrows() != self.action_dim
            || z.ncols() != a_ext.ncols()
            || z.ncols() != z_next.ncols()
        {
            return Err(Error::config("dynamics batch shapes do not line up"));
        }
        let report = self
            .circuit
            .settle_and_update(&[a_ext, z], Clamps::heads_only(&[Some(z_next)]))?;
        Ok(report.final_tod())
    }

    #[cfg(test)]
    pub(crate) fn circuit_mut(&mut self) -> &mut NgcCircuit<F> {
        &mut self.circuit
    }

    #[cfg(test)]
    pub(crate) fn set_s_theta(&mut self, s_theta: f64) {
        self.cfg.s_theta = s_theta;
    }
}
