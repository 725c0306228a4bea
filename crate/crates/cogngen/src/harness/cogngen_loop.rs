//! The assembled cognitive agent and its training loop.
//!
//! Wiring order inside one environment step: encode the observation, read the
//! slot buffer against it, query the motor circuit for both control heads,
//! pick actions epsilon-greedily, step the environment, score the observed
//! next state's surprise against the forward model, gate it by familiarity
//! into the combined reward, apply the internal action to the slot buffer and
//! record the transition episodically. Learning replays whole reconstructed
//! episodes on a fixed cadence once enough transitions exist.
//!
//! The agent never asks the environment where it is: only the first-person
//! observation crosses the boundary, and the run fails if the privileged
//! coordinate accessor was touched.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::RngExt;

use crate::dynamics::DynamicsModel;
use crate::episodic::{EpisodicConfig, EpisodicMemory, ReplayBatch, Transition};
use crate::gridworld::{Action, GridEnv, Observation, Task, ENCODED_DIM, N_ACTIONS};
use crate::motor::{select_actions, ExplorationSchedule, MotorModel};
use crate::ngc::{one_hot, Scalar};
use crate::slotwm::SlotBuffer;
use crate::streams::RngStreams;
use crate::{Error, Result};

use super::{after_episode, checkpoint, CogNGenParams, EpisodeRecord, MetricsWriter, RunMeta,
    RunConfig, TrainOptions};

/// The full agent: slot working memory, forward dynamics, motor control and
/// episodic storage, plus the exploration schedule and step counter.
#[derive(Debug, Clone)]
pub struct CogNGenAgent<F: Scalar> {
    pub(crate) params: CogNGenParams,
    pub(crate) task: Task,
    pub(crate) slot: SlotBuffer<F>,
    pub(crate) dynamics: DynamicsModel<F>,
    pub(crate) motor: MotorModel<F>,
    pub(crate) episodic: EpisodicMemory<F>,
    pub(crate) schedule: ExplorationSchedule,
    pub(crate) env_steps: u64,
}

impl<F: Scalar> CogNGenAgent<F> {
    pub fn new(task: Task, params: CogNGenParams, rng: &mut impl Rng) -> Result<Self> {
        params.validate()?;
        let slot = SlotBuffer::new(ENCODED_DIM, params.slot, rng)?;
        let m_dim = slot.output_dim();
        let n_int = slot.action_count();
        let dynamics = DynamicsModel::new(ENCODED_DIM, N_ACTIONS, params.dynamics, rng)?;
        let motor = MotorModel::new(ENCODED_DIM, m_dim, N_ACTIONS, n_int, params.motor, rng)?;
        let episodic = EpisodicMemory::new(EpisodicConfig {
            z_dim: ENCODED_DIM,
            n_ext: N_ACTIONS,
            n_int,
            m_dim,
            window: params.window,
            max_episode_len: task.max_steps() as usize,
            memory: params.memory,
        })?;
        let schedule = ExplorationSchedule::new(&params.motor);
        Ok(CogNGenAgent {
            params,
            task,
            slot,
            dynamics,
            motor,
            episodic,
            schedule,
            env_steps: 0,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn params(&self) -> &CogNGenParams {
        &self.params
    }

    pub fn schedule(&self) -> &ExplorationSchedule {
        &self.schedule
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn motor(&self) -> &MotorModel<F> {
        &self.motor
    }

    pub fn dynamics(&self) -> &DynamicsModel<F> {
        &self.dynamics
    }

    pub fn episodic(&self) -> &EpisodicMemory<F> {
        &self.episodic
    }

    /// Greedy control values for one state; used by evaluation and tests.
    pub fn control_values(&self, obs: &Observation) -> Result<(Array1<F>, Array1<F>)> {
        let z = obs.encode::<F>();
        let m = self.slot.read(z.view())?;
        self.motor.act(z.view(), m.view())
    }

    /// Drive one episode from its first observation to termination.
    pub fn run_episode(
        &mut self,
        env: &mut GridEnv,
        first_obs: Observation,
        explore: &mut impl Rng,
        memory_rng: &mut impl Rng,
        replay_rng: &mut impl Rng,
        render: bool,
    ) -> Result<EpisodeRecord> {
        if env.task() != self.task {
            return Err(Error::config(format!(
                "agent was built for task {} but the environment runs {}",
                self.task,
                env.task()
            )));
        }
        self.slot.reset();
        self.dynamics.clear_filter();
        let eps_ext = self.schedule.eps_ext();
        let eps_int = self.schedule.eps_int();
        let mut z = first_obs.encode::<F>();
        let mut reward = 0.0;
        let mut intrinsic = 0.0;
        let mut length = 0u32;
        loop {
            let m = self.slot.read(z.view())?;
            let (c_ext, c_int) = self.motor.act(z.view(), m.view())?;
            let (a_ext, a_int) = select_actions(c_ext.view(), c_int.view(), &self.schedule, explore);
            let out = env.step(Action::from_index(a_ext)?)?;
            if render {
                println!("{}", env.render_ascii());
            }
            let z_next = out.obs.encode::<F>();
            let a_vec = one_hot::<F>(N_ACTIONS, a_ext);
            let surprise = self
                .dynamics
                .epistemic_reward(z.view(), a_vec.view(), z_next.view())?;
            let gate =
                self.dynamics
                    .gate_and_combine(surprise.normalized, z_next.view(), out.reward, memory_rng)?;
            self.slot.write(a_int, z.view())?;
            self.episodic.record(
                &Transition {
                    z: z.clone(),
                    a_ext,
                    a_int,
                    r: gate.total,
                    m,
                    terminal: out.done,
                },
                memory_rng,
            )?;
            reward += out.reward;
            intrinsic += gate.contribution;
            length += 1;
            self.env_steps += 1;
            if self.env_steps >= self.params.warmup
                && self.env_steps % u64::from(self.params.learn_every) == 0
            {
                self.learn(replay_rng)?;
            }
            if out.done {
                break;
            }
            z = z_next;
        }
        self.schedule.decay_episode();
        self.slot.reset();
        self.dynamics.clear_filter();
        Ok(EpisodeRecord {
            episode: 0,
            reward,
            length,
            norm_length: f64::from(length) / f64::from(env.max_steps()),
            success: reward > 0.0,
            mean_intrinsic: intrinsic / f64::from(length),
            eps_ext,
            eps_int,
        })
    }

    /// One learning step: reconstruct episodes once, then draw `n_batches`
    /// transition batches from them for the motor and dynamics circuits.
    pub fn learn(&mut self, rng: &mut impl Rng) -> Result<()> {
        let episodes = match self.episodic.sample_episodes(self.params.k_ep, rng) {
            Ok(eps) => eps,
            Err(Error::CannotSample) => return Ok(()),
            Err(e) => return Err(e),
        };
        for _ in 0..self.params.n_batches {
            let batch = self
                .episodic
                .make_batch(&episodes, self.params.batch, rng)?;
            if batch.is_empty() {
                break;
            }
            let (t_ext, t_int) = self.motor.compute_targets(
                batch.z.view(),
                batch.m.view(),
                &batch.a_ext,
                &batch.a_int,
                &batch.r,
                batch.z_next.view(),
                batch.m_next.view(),
                &batch.terminal,
            )?;
            self.motor
                .learn(batch.z.view(), batch.m.view(), t_ext.view(), t_int.view())?;
            let (z, a, z_next) = nonterminal_columns(&batch);
            self.dynamics.update(z.view(), a.view(), z_next.view())?;
        }
        Ok(())
    }
}

/// Extract the nonterminal pairs of a batch as dynamics training columns.
fn nonterminal_columns<F: Scalar>(batch: &ReplayBatch<F>) -> (Array2<F>, Array2<F>, Array2<F>) {
    let keep: Vec<usize> = (0..batch.len())
        .filter(|&j| !batch.terminal[j])
        .collect();
    let z_dim = batch.z.nrows();
    let mut z = Array2::zeros((z_dim, keep.len()));
    let mut a = Array2::zeros((N_ACTIONS, keep.len()));
    let mut z_next = Array2::zeros((z_dim, keep.len()));
    for (col, &j) in keep.iter().enumerate() {
        z.column_mut(col).assign(&batch.z.column(j));
        a[[batch.a_ext[j], col]] = F::one();
        z_next.column_mut(col).assign(&batch.z_next.column(j));
    }
    (z, a, z_next)
}

/// Full training run for the cognitive agent.
pub(super) fn run(cfg: &RunConfig, opts: &TrainOptions) -> Result<Vec<EpisodeRecord>> {
    let streams = RngStreams::new(cfg.seed);
    let mut init = streams.stream("init");
    let mut explore = streams.stream("exploration");
    let mut memory_rng = streams.stream("memory");
    let mut replay_rng = streams.stream("replay");
    let mut env_seeds = streams.stream("env");

    let mut agent: CogNGenAgent<f32> = CogNGenAgent::new(cfg.task, cfg.cogngen, &mut init)?;
    let mut env = GridEnv::new(cfg.task, env_seeds.random())?;
    let mut writer = match &opts.out {
        Some(path) => Some(MetricsWriter::create(
            path,
            RunMeta {
                agent: cfg.agent,
                task: cfg.task,
                seed: cfg.seed,
            },
        )?),
        None => None,
    };

    let mut records = Vec::with_capacity(cfg.episodes as usize);
    for episode in 0..cfg.episodes {
        let first = env.reset(env_seeds.random())?;
        let mut record = agent.run_episode(
            &mut env,
            first,
            &mut explore,
            &mut memory_rng,
            &mut replay_rng,
            opts.render,
        )?;
        record.episode = episode;
        if after_episode(&mut records, record, &mut writer, opts)? {
            break;
        }
    }
    if env.coord_queries() != 0 {
        return Err(Error::protocol(
            "cognitive agent touched privileged coordinates",
        ));
    }
    if let Some(path) = &opts.checkpoint {
        checkpoint::save(path, &agent)?;
    }
    Ok(records)
}
