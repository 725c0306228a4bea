//! Neural generative coding (NGC) circuits.
//!
//! A circuit is a stack of latent state layers. Each layer `l` emits a
//! prediction of the layer below through predictive synapses `W`, and the
//! mismatch at the layer below is carried back up through separate error
//! synapses `E`. With clamped inputs at the top and (optionally) clamped
//! targets at the bottom, free states relax for `K` steps under
//!
//! ```text
//! z_l <- z_l + beta * (-gamma * z_l - e_l + E * e_below)
//! e_l  = z_l - zbar_l
//! ```
//!
//! where `zbar_l` is the affine prediction from above. After settling,
//! synapses move along locally Hebbian deltas (`delta W = e * phi(z_pre)^T`,
//! `delta E = gamma_e * delta W^T`) applied through Adam. Ancestral projection
//! runs the prediction pass alone, top to bottom, with no settling.
//!
//! Circuits are generic over the float type: `f64` where tests demand tight
//! tolerances, `f32` in the training loops.

mod adam;
mod circuit;

pub use adam::{AdamConfig, AdamState};
pub use circuit::{
    CircuitSpec, Clamps, Deltas, NgcCircuit, Projection, SettleReport, StreamSpec,
};

use ndarray::NdFloat;
use serde::{Deserialize, Serialize};

/// Float types circuits can run on.
pub trait Scalar: NdFloat + Serialize + for<'de> Deserialize<'de> {}
impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lossy cast from `f64` config values into the working float type.
pub(crate) fn cast<F: Scalar>(x: f64) -> F {
    F::from(x).expect("finite f64 casts into any float type")
}

/// One-hot vector of the given length, hot at `index`.
pub fn one_hot<F: Scalar>(len: usize, index: usize) -> ndarray::Array1<F> {
    debug_assert!(index < len);
    let mut v = ndarray::Array1::zeros(len);
    v[index] = F::one();
    v
}

/// Element-wise nonlinearities used for state activations (`phi`) and
/// post-synaptic transforms on input streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    /// Linear rectifier, `max(0, x)`.
    Rectifier,
}

impl Activation {
    #[inline]
    pub fn apply<F: Scalar>(self, x: F) -> F {
        match self {
            Activation::Identity => x,
            Activation::Rectifier => {
                if x > F::zero() {
                    x
                } else {
                    F::zero()
                }
            }
        }
    }

    pub fn map<F: Scalar, D: ndarray::Dimension>(
        self,
        a: &ndarray::Array<F, D>,
    ) -> ndarray::Array<F, D> {
        match self {
            Activation::Identity => a.clone(),
            Activation::Rectifier => a.mapv(|x| if x > F::zero() { x } else { F::zero() }),
        }
    }
}

/// Optional post-update synaptic normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynapticScaling {
    /// Leave synapses as Adam wrote them (modulation masks of all ones).
    Off,
    /// Rescale columns of each `W` (rows of each `E`) to L2 norm at most 1.
    UnitColumns,
}

/// Settling and learning hyperparameters shared by every circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NgcConfig {
    /// Number of settling iterations `K`.
    pub settle_steps: usize,
    /// State update rate `beta` (the discretization `1/tau`).
    pub beta: f64,
    /// Leak `gamma` pulling free states toward zero.
    pub leak: f64,
    /// Scale `gamma_e` on error-synapse updates relative to `W` updates.
    pub error_scale: f64,
    /// Std-dev of the centered Gaussian used to initialize `W` and `E`.
    pub init_std: f64,
    /// State activation `phi` applied between layers.
    pub activation: Activation,
    pub scaling: SynapticScaling,
    pub adam: AdamConfig,
}

impl Default for NgcConfig {
    fn default() -> Self {
        NgcConfig {
            settle_steps: 10,
            beta: 0.1,
            leak: 1e-3,
            error_scale: 0.95,
            init_std: 0.05,
            activation: Activation::Rectifier,
            scaling: SynapticScaling::Off,
            adam: AdamConfig::default(),
        }
    }
}

impl NgcConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.settle_steps == 0 {
            return Err(crate::Error::config("settle_steps must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(crate::Error::config(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if self.leak < 0.0 {
            return Err(crate::Error::config("leak must be non-negative"));
        }
        if !(self.error_scale > 0.0 && self.error_scale <= 1.0) {
            return Err(crate::Error::config("error_scale must lie in (0, 1]"));
        }
        if self.init_std < 0.0 {
            return Err(crate::Error::config("init_std must be non-negative"));
        }
        self.adam.validate()
    }
}
