//! Predictive-processing agent kernel with vector-symbolic memories, plus the
//! gridworld tasks and baseline agents used to exercise it.
//!
//! The crate is organised around a small set of interacting pieces:
//!
//! * [`ngc`] — neural generative coding circuits: iterative settling of latent
//!   state layers against clamped inputs/outputs, Hebbian synaptic updates and
//!   ancestral projection.
//! * [`minerva`] — an instance memory that stores raw trace vectors and answers
//!   cues with similarity-weighted echoes.
//! * [`slotwm`] — a slot working-memory buffer addressed through fixed random
//!   projections.
//! * [`dynamics`] / [`motor`] — the forward-dynamics circuit (epistemic reward
//!   generator) and the motor circuit (action-value heads) built from [`ngc`]
//!   parts.
//! * [`episodic`] — sliding-window episodic storage over [`minerva`] with
//!   hetero-associative episode reconstruction for replay.
//! * [`gridworld`] — partially observable grid tasks with sparse terminal
//!   reward.
//! * [`baselines`] — DQN with optional count/novelty intrinsic bonuses.
//! * [`harness`] — training loops, metrics, reports and checkpoints shared by
//!   the `cogngen` binary.

pub mod baselines;
pub mod dynamics;
pub mod episodic;
pub mod error;
pub mod gridworld;
pub mod harness;
pub mod minerva;
pub mod motor;
pub mod ngc;
pub mod slotwm;
pub mod streams;

pub use error::{Error, Result};
