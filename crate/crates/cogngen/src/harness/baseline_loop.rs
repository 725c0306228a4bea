//! Training loop for the value-network baselines.
//!
//! All three baselines share the same Q-learning agent; they differ only in
//! the intrinsic bonus added to the extrinsic reward before a transition
//! enters replay. The count and novelty bonuses are keyed by the agent's grid
//! cell, which the environment exposes through a privileged accessor the
//! cognitive agent never touches.

use rand::RngExt;

use crate::baselines::{
    bebold_intrinsic, rnd_intrinsic, BaselineTransition, CountTables, DqnAgent, RndPair,
};
use crate::gridworld::{Action, GridEnv, ENCODED_DIM, N_ACTIONS};
use crate::streams::RngStreams;
use crate::Result;

use super::{after_episode, AgentKind, EpisodeRecord, MetricsWriter, RunConfig, RunMeta,
    TrainOptions};

enum Bonus {
    None,
    Count(CountTables),
    Novelty(CountTables, RndPair),
}

impl Bonus {
    fn begin_episode(&mut self, env: &mut GridEnv) {
        match self {
            Bonus::None => {}
            Bonus::Count(tables) | Bonus::Novelty(tables, _) => {
                tables.begin_episode(env.agent_coord());
            }
        }
    }

    fn score(
        &mut self,
        env: &mut GridEnv,
        here: &mut (i32, i32),
        z_next: ndarray::ArrayView1<f32>,
    ) -> f64 {
        match self {
            Bonus::None => 0.0,
            Bonus::Count(tables) => {
                let to = env.agent_coord();
                let r = bebold_intrinsic(tables, *here, to);
                *here = to;
                r
            }
            Bonus::Novelty(tables, pair) => {
                let to = env.agent_coord();
                *here = to;
                rnd_intrinsic(pair, tables, to, z_next)
            }
        }
    }
}

pub(super) fn run(cfg: &RunConfig, opts: &TrainOptions) -> Result<Vec<EpisodeRecord>> {
    let streams = RngStreams::new(cfg.seed);
    let mut init = streams.stream("init");
    let mut explore = streams.stream("exploration");
    let mut replay_rng = streams.stream("replay");
    let mut env_seeds = streams.stream("env");

    let mut agent = DqnAgent::new(ENCODED_DIM, N_ACTIONS, cfg.dqn, &mut init)?;
    let mut bonus = match cfg.agent {
        AgentKind::Dqn => Bonus::None,
        AgentKind::Bebold => Bonus::Count(CountTables::new(cfg.baseline.alpha)?),
        AgentKind::Rnd => Bonus::Novelty(
            CountTables::new(cfg.baseline.alpha)?,
            RndPair::new(
                ENCODED_DIM,
                cfg.baseline.rnd_hidden,
                cfg.baseline.rnd_embed,
                cfg.baseline.rnd_lr,
                &mut init,
            )?,
        ),
        AgentKind::CogNGen => unreachable!("dispatched to the cognitive loop"),
    };
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

    let max_steps = f64::from(env.max_steps());
    let mut records = Vec::with_capacity(cfg.episodes as usize);
    for episode in 0..cfg.episodes {
        let first = env.reset(env_seeds.random())?;
        bonus.begin_episode(&mut env);
        let mut here = match bonus {
            Bonus::None => (0, 0),
            _ => env.agent_coord(),
        };
        let eps = agent.eps();
        let mut z = first.encode::<f32>();
        let mut reward = 0.0;
        let mut intrinsic = 0.0;
        let mut length = 0u32;
        loop {
            let a = agent.act(z.view(), &mut explore);
            let out = env.step(Action::from_index(a)?)?;
            if opts.render {
                println!("{}", env.render_ascii());
            }
            let z_next = out.obs.encode::<f32>();
            let r_i = cfg.baseline.eta * bonus.score(&mut env, &mut here, z_next.view());
            agent.observe(BaselineTransition {
                z,
                a,
                r: (out.reward + r_i) as f32,
                z_next: z_next.clone(),
                done: out.done,
            });
            agent.maybe_train(&mut replay_rng);
            reward += out.reward;
            intrinsic += r_i;
            length += 1;
            if out.done {
                break;
            }
            z = z_next;
        }
        agent.end_episode();
        let record = EpisodeRecord {
            episode,
            reward,
            length,
            norm_length: f64::from(length) / max_steps,
            success: reward > 0.0,
            mean_intrinsic: intrinsic / f64::from(length),
            eps_ext: eps,
            eps_int: 0.0,
        };
        if after_episode(&mut records, record, &mut writer, opts)? {
            break;
        }
    }
    Ok(records)
}
