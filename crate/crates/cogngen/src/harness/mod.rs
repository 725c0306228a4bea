//! Training loops, run configuration, metrics and reports.
//!
//! A run is fully described by a [`RunConfig`] (task, agent, episode budget,
//! seed, module tunables) and is reproducible from it alone: every random
//! consumer draws from its own named stream derived from the run seed, so two
//! runs with the same config produce byte-identical metrics files.
//!
//! Per step the agent side works in two phases. The processing phase encodes
//! the observation, reads working memory, picks the two actions, steps the
//! environment and scores the surprise of what came back; the learning phase
//! (past warm-up, on its own cadence) replays reconstructed episodes and
//! updates the motor and dynamics circuits. Episode boundaries clear the
//! familiarity filter and the slot buffer and decay exploration.

mod baseline_loop;
mod cogngen_loop;
mod metrics;
mod report;

pub mod checkpoint;

pub use cogngen_loop::CogNGenAgent;
pub use metrics::{read_metrics, EpisodeRecord, MetricsWriter, RunMeta, METRICS_SCHEMA};
pub use report::{
    aggregate, format_table, report_dir, smooth, summarize, write_report, ReportRow, RunSummary,
    REPORT_WINDOW,
};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::DqnConfig;
use crate::dynamics::DynamicsConfig;
use crate::gridworld::Task;
use crate::minerva::MemoryConfig;
use crate::motor::MotorConfig;
use crate::slotwm::SlotConfig;
use crate::{Error, Result};

/// Which agent drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "cogngen")]
    CogNGen,
    #[serde(rename = "dqn")]
    Dqn,
    #[serde(rename = "rnd")]
    Rnd,
    #[serde(rename = "bebold")]
    Bebold,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::CogNGen,
        AgentKind::Dqn,
        AgentKind::Rnd,
        AgentKind::Bebold,
    ];

    fn name(&self) -> &'static str {
        match self {
            AgentKind::CogNGen => "cogngen",
            AgentKind::Dqn => "dqn",
            AgentKind::Rnd => "rnd",
            AgentKind::Bebold => "bebold",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown agent '{s}'")))
    }
}

/// Tunables of the full cognitive agent, beyond what the individual module
/// configs carry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CogNGenParams {
    pub slot: SlotConfig,
    pub dynamics: DynamicsConfig,
    pub motor: MotorConfig,
    /// Profile of the declarative episodic store.
    pub memory: MemoryConfig,
    /// Sliding-window length for episodic traces.
    pub window: usize,
    /// Episodes reconstructed per learning step.
    pub k_ep: usize,
    /// Transition pairs drawn from each reconstructed episode.
    pub batch: usize,
    /// Gradient batches drawn per learning step (reusing the reconstruction).
    pub n_batches: usize,
    /// Environment steps between learning steps.
    pub learn_every: u32,
    /// Recorded transitions before learning starts.
    pub warmup: u64,
}

impl Default for CogNGenParams {
    fn default() -> Self {
        CogNGenParams {
            slot: SlotConfig::default(),
            dynamics: DynamicsConfig::default(),
            motor: MotorConfig::default(),
            memory: MemoryConfig::declarative(),
            window: 20,
            k_ep: 2,
            batch: 32,
            n_batches: 4,
            learn_every: 8,
            warmup: 200,
        }
    }
}

impl CogNGenParams {
    pub fn validate(&self) -> Result<()> {
        self.slot.validate()?;
        self.dynamics.validate()?;
        self.motor.validate()?;
        self.memory.validate()?;
        if self.window == 0 {
            return Err(Error::config("episodic window must be positive"));
        }
        if self.k_ep == 0 || self.batch == 0 || self.n_batches == 0 {
            return Err(Error::config(
                "k_ep, batch and n_batches must all be positive",
            ));
        }
        if self.learn_every == 0 {
            return Err(Error::config("learn_every must be positive"));
        }
        Ok(())
    }
}

/// Tunables of the intrinsic-bonus baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    /// Stale-cell penalty magnitude for the count-based bonus.
    pub alpha: f64,
    /// Scale on the intrinsic bonus added to the extrinsic reward.
    pub eta: f64,
    /// Hidden widths of the novelty predictor/target networks.
    pub rnd_hidden: [usize; 2],
    /// Embedding width of the novelty networks.
    pub rnd_embed: usize,
    /// Learning rate of the novelty predictor.
    pub rnd_lr: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            alpha: 0.5,
            eta: 1.0,
            rnd_hidden: [128, 128],
            rnd_embed: 64,
            rnd_lr: 1e-4,
        }
    }
}

/// Everything a run needs; serializable so a run is a JSON document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub task: Task,
    pub agent: AgentKind,
    pub episodes: u32,
    pub seed: u64,
    pub cogngen: CogNGenParams,
    pub dqn: DqnConfig,
    pub baseline: BaselineParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::default_for(Task::R6x6, AgentKind::CogNGen)
    }
}

impl RunConfig {
    /// Desk-scale defaults for a task/agent pair. The memory task gets a
    /// second working-memory slot (cue and junction both need holding). The
    /// episodic store is capped well below its long-term bound so replay
    /// tracks the recent reward landscape (early novelty bonuses age out)
    /// and reconstruction cost stays flat.
    pub fn default_for(task: Task, agent: AgentKind) -> Self {
        let mut cogngen = CogNGenParams::default();
        cogngen.motor.hidden = [256, 256, 256];
        cogngen.memory.capacity = Some(8_000);
        if task == Task::Mem {
            cogngen.slot.slots = 2;
        }
        RunConfig {
            task,
            agent,
            episodes: 2000,
            seed: 1,
            cogngen,
            dqn: DqnConfig::default(),
            baseline: BaselineParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cogngen.validate()?;
        self.dqn.validate()?;
        if !(self.baseline.alpha >= 0.1 && self.baseline.alpha <= 1.0) {
            return Err(Error::config("baseline alpha must lie in [0.1, 1]"));
        }
        if self.baseline.rnd_embed == 0 || self.baseline.rnd_hidden.contains(&0) {
            return Err(Error::config("novelty network widths must be positive"));
        }
        if self.baseline.rnd_lr <= 0.0 || !self.baseline.rnd_lr.is_finite() {
            return Err(Error::config("novelty learning rate must be positive"));
        }
        if self.baseline.eta < 0.0 || !self.baseline.eta.is_finite() {
            return Err(Error::config("intrinsic scale must be non-negative"));
        }
        Ok(())
    }

    /// Canonical metrics file name for this run.
    pub fn metrics_name(&self) -> String {
        format!("{}-{}-seed{}.csv", self.agent, self.task, self.seed)
    }
}

/// Early-stop rule over the trailing window of episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub window: usize,
    pub min_success: f64,
    pub max_norm_len: f64,
}

impl StopRule {
    pub fn satisfied(&self, records: &[EpisodeRecord]) -> bool {
        if records.len() < self.window {
            return false;
        }
        let tail = &records[records.len() - self.window..];
        let succ = tail.iter().filter(|r| r.success).count() as f64 / self.window as f64;
        let len = tail.iter().map(|r| r.norm_length).sum::<f64>() / self.window as f64;
        succ >= self.min_success && len <= self.max_norm_len
    }
}

/// Knobs of a single `train` invocation that are not part of the run's
/// reproducible identity.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Metrics CSV destination; `None` keeps records in memory only.
    pub out: Option<PathBuf>,
    /// Print the grid after every environment step.
    pub render: bool,
    /// Print a progress line to stderr every 50 episodes.
    pub progress: bool,
    /// Stop early once the trailing window satisfies the rule.
    pub stop: Option<StopRule>,
    /// Write the final agent state here (cognitive agent only).
    pub checkpoint: Option<PathBuf>,
}

/// Train one agent on one task and return every episode record.
pub fn train(cfg: &RunConfig, opts: &TrainOptions) -> Result<Vec<EpisodeRecord>> {
    cfg.validate()?;
    match cfg.agent {
        AgentKind::CogNGen => cogngen_loop::run(cfg, opts),
        AgentKind::Dqn | AgentKind::Rnd | AgentKind::Bebold => baseline_loop::run(cfg, opts),
    }
}

fn progress_line(records: &[EpisodeRecord]) -> String {
    let window = records.len().min(100);
    let tail = &records[records.len() - window..];
    let succ = tail.iter().filter(|r| r.success).count() as f64 / window.max(1) as f64;
    let len = tail.iter().map(|r| f64::from(r.length)).sum::<f64>() / window.max(1) as f64;
    format!(
        "[ep {}] last-{window} success {:.0}% mean length {len:.1}",
        records.len(),
        succ * 100.0
    )
}

pub(crate) fn after_episode(
    records: &mut Vec<EpisodeRecord>,
    record: EpisodeRecord,
    writer: &mut Option<MetricsWriter>,
    opts: &TrainOptions,
) -> Result<bool> {
    if let Some(w) = writer {
        w.append(&record)?;
    }
    records.push(record);
    if opts.progress && records.len() % 50 == 0 {
        eprintln!("{}", progress_line(records));
    }
    Ok(match &opts.stop {
        Some(rule) => rule.satisfied(records),
        None => false,
    })
}
