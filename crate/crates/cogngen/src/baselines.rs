//! Comparison agents: vanilla DQN with experience replay plus two intrinsic
//! reward variants — count-based first-visit bonuses over agent coordinates
//! and random-network-distillation novelty.
//!
//! These agents consume the same 147-element view encoding as the main
//! architecture, but the intrinsic variants additionally key visit counts by
//! the agent's world x-y coordinate — privileged global information the main
//! agent never touches (the environment counts such queries so runs can
//! prove it).
//!
//! The networks are plain rectifier MLPs trained by backpropagation with the
//! shared Adam optimizer; weights start from a centered scaled-uniform
//! fan-in scheme.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::ngc::{AdamConfig, AdamState};
use crate::{Error, Result};

/// Rectifier MLP over `f32` with Adam state, trained by backprop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    w: Vec<Array2<f32>>,
    b: Vec<Array1<f32>>,
    adam: AdamState<f32>,
}

impl Mlp {
    /// `sizes` = [input, hidden.., output]; hidden layers are rectified,
    /// the output layer is linear.
    pub fn new(sizes: &[usize], lr: f64, rng: &mut impl Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("mlp needs at least two positive layer sizes"));
        }
        let mut w = Vec::new();
        let mut b = Vec::new();
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            w.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                (rng.random::<f64>() * 2.0 * bound - bound) as f32
            }));
            b.push(Array1::zeros(fan_out));
        }
        let mat_shapes: Vec<(usize, usize)> = w.iter().map(|m| m.dim()).collect();
        let vec_shapes: Vec<usize> = b.iter().map(|v| v.len()).collect();
        let adam = AdamState::new(
            AdamConfig {
                lr,
                ..AdamConfig::default()
            },
            &mat_shapes,
            &vec_shapes,
        );
        Ok(Mlp { w, b, adam })
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.last().expect("nonempty").nrows()
    }

    pub fn forward(&self, x: ArrayView1<f32>) -> Array1<f32> {
        let x2 = x.insert_axis(Axis(1));
        self.forward_batch(x2).index_axis_move(Axis(1), 0)
    }

    /// Columns are samples.
    pub fn forward_batch(&self, x: ArrayView2<f32>) -> Array2<f32> {
        self.activations(x).pop().expect("at least one layer")
    }

    /// Post-activation values for every layer after the input.
    fn activations(&self, x: ArrayView2<f32>) -> Vec<Array2<f32>> {
        let n = self.w.len();
        let mut acts = Vec::with_capacity(n);
        let mut cur = x.to_owned();
        for (k, (w, b)) in self.w.iter().zip(&self.b).enumerate() {
            let mut h = w.dot(&cur);
            for mut col in h.columns_mut() {
                col += b;
            }
            if k + 1 < n {
                h.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(h.clone());
            cur = h;
        }
        acts
    }

    /// Backpropagate from an output-side gradient `d_out` (out_dim x batch)
    /// and take one Adam step downhill.
    fn descend(&mut self, x: ArrayView2<f32>, d_out: Array2<f32>) {
        let acts = self.activations(x);
        let n = self.w.len();
        let mut gw: Vec<Array2<f32>> = Vec::with_capacity(n);
        let mut gb: Vec<Array1<f32>> = Vec::with_capacity(n);
        let mut delta = d_out;
        for k in (0..n).rev() {
            let below: ArrayView2<f32> = if k == 0 { x } else { acts[k - 1].view() };
            gw.push(delta.dot(&below.t()));
            gb.push(delta.sum_axis(Axis(1)));
            if k > 0 {
                let mut back = self.w[k].t().dot(&delta);
                back.zip_mut_with(&acts[k - 1], |d, &h| {
                    if h <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        gw.reverse();
        gb.reverse();
        // Adam applies ascent steps, so hand it the negated gradients.
        for g in &mut gw {
            g.mapv_inplace(|v| -v);
        }
        for g in &mut gb {
            g.mapv_inplace(|v| -v);
        }
        let mut mats: Vec<&mut Array2<f32>> = self.w.iter_mut().collect();
        let mat_refs: Vec<&Array2<f32>> = gw.iter().collect();
        let mut vecs: Vec<&mut Array1<f32>> = self.b.iter_mut().collect();
        let vec_refs: Vec<&Array1<f32>> = gb.iter().collect();
        self.adam.apply(&mut mats, &mat_refs, &mut vecs, &vec_refs);
    }

    /// One TD/regression step on the selected-action components only.
    /// Returns the mean squared error over the batch.
    pub fn q_step(&mut self, x: ArrayView2<f32>, actions: &[usize], targets: &[f32]) -> f32 {
        let batch = x.ncols();
        assert_eq!(actions.len(), batch);
        assert_eq!(targets.len(), batch);
        let q = self.forward_batch(x);
        let mut d = Array2::zeros(q.dim());
        let mut loss = 0.0;
        for j in 0..batch {
            let diff = q[[actions[j], j]] - targets[j];
            loss += diff * diff;
            d[[actions[j], j]] = 2.0 * diff / batch as f32;
        }
        self.descend(x, d);
        loss / batch as f32
    }

    /// One full-output regression step toward `y`; returns mean `||.||^2`.
    pub fn regress_step(&mut self, x: ArrayView2<f32>, y: ArrayView2<f32>) -> f32 {
        let batch = x.ncols() as f32;
        let out = self.forward_batch(x);
        let diff = &out - &y;
        let loss = diff.iter().map(|v| v * v).sum::<f32>() / batch;
        self.descend(x, diff.mapv(|v| 2.0 * v / batch));
        loss
    }

    /// Copy another network's parameters, keeping this optimizer state.
    pub fn copy_weights_from(&mut self, other: &Mlp) {
        for (dst, src) in self.w.iter_mut().zip(&other.w) {
            dst.assign(src);
        }
        for (dst, src) in self.b.iter_mut().zip(&other.b) {
            dst.assign(src);
        }
    }

    /// Order-stable parameter checksum for immutability assertions.
    pub fn checksum(&self) -> f64 {
        let mut acc = 0.0f64;
        for (i, w) in self.w.iter().enumerate() {
            acc += w.iter().map(|&v| v as f64).sum::<f64>() * (i + 1) as f64;
        }
        for (i, b) in self.b.iter().enumerate() {
            acc += b.iter().map(|&v| v as f64).sum::<f64>() * (i + 101) as f64;
        }
        acc
    }

    #[cfg(test)]
    pub(crate) fn weight_bounds_hold(&self) -> bool {
        self.w.iter().all(|w| {
            let bound = (6.0 / w.ncols() as f64).sqrt() as f32;
            w.iter().all(|&v| v.abs() <= bound)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub hidden: [usize; 2],
    pub replay_capacity: usize,
    pub batch: usize,
    /// Gradient steps between target-network syncs.
    pub target_sync: u64,
    pub gamma: f64,
    pub lr: f64,
    pub eps0: f64,
    pub eps_decay: f64,
    pub eps_floor: f64,
    /// Replay size required before training starts.
    pub warmup: usize,
    /// Environment steps between gradient steps.
    pub train_every: u32,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            hidden: [256, 256],
            replay_capacity: 50_000,
            batch: 64,
            target_sync: 500,
            gamma: 0.95,
            lr: 5e-4,
            eps0: 1.0,
            eps_decay: 0.995,
            eps_floor: 0.05,
            warmup: 1_000,
            train_every: 4,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1)"));
        }
        if self.batch == 0 || self.replay_capacity < self.batch {
            return Err(Error::config("replay must hold at least one batch"));
        }
        if self.target_sync == 0 || self.train_every == 0 {
            return Err(Error::config("sync and train cadences must be positive"));
        }
        if !(0.0..=1.0).contains(&self.eps0) || !(0.0..=1.0).contains(&self.eps_floor) {
            return Err(Error::config("exploration rates must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BaselineTransition {
    pub z: Array1<f32>,
    pub a: usize,
    pub r: f32,
    pub z_next: Array1<f32>,
    pub done: bool,
}

/// Fixed-capacity uniform replay ring.
#[derive(Debug, Clone)]
pub struct Replay {
    buf: Vec<BaselineTransition>,
    capacity: usize,
    next: usize,
}

impl Replay {
    pub fn new(capacity: usize) -> Self {
        Replay {
            buf: Vec::new(),
            capacity,
            next: 0,
        }
    }

    pub fn push(&mut self, t: BaselineTransition) {
        if self.buf.len() < self.capacity {
            self.buf.push(t);
        } else {
            self.buf[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn sample<'a>(&'a self, n: usize, rng: &mut impl Rng) -> Vec<&'a BaselineTransition> {
        (0..n)
            .map(|_| &self.buf[rng.random_range(0..self.buf.len())])
            .collect()
    }
}

/// Deep Q-network agent with target network and epsilon-greedy exploration.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    cfg: DqnConfig,
    online: Mlp,
    target: Mlp,
    replay: Replay,
    eps: f64,
    grad_steps: u64,
    env_steps: u64,
    n_actions: usize,
}

impl DqnAgent {
    pub fn new(input: usize, n_actions: usize, cfg: DqnConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let sizes = [input, cfg.hidden[0], cfg.hidden[1], n_actions];
        let online = Mlp::new(&sizes, cfg.lr, rng)?;
        let target = online.clone();
        Ok(DqnAgent {
            online,
            target,
            replay: Replay::new(cfg.replay_capacity),
            eps: cfg.eps0,
            grad_steps: 0,
            env_steps: 0,
            n_actions,
            cfg,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    pub fn q_values(&self, z: ArrayView1<f32>) -> Array1<f32> {
        self.online.forward(z)
    }

    pub fn act(&self, z: ArrayView1<f32>, rng: &mut impl Rng) -> usize {
        if self.eps > 0.0 && rng.random::<f64>() < self.eps {
            rng.random_range(0..self.n_actions)
        } else {
            let q = self.online.forward(z);
            let mut best = 0;
            for i in 1..q.len() {
                if q[i] > q[best] {
                    best = i;
                }
            }
            best
        }
    }

    pub fn observe(&mut self, t: BaselineTransition) {
        self.replay.push(t);
        self.env_steps += 1;
    }

    /// Bellman targets against the frozen target network; terminal
    /// transitions use the bare reward.
    fn targets(&self, batch: &[&BaselineTransition]) -> Vec<f32> {
        batch
            .iter()
            .map(|t| {
                if t.done {
                    t.r
                } else {
                    let q = self.target.forward(t.z_next.view());
                    let best = q.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b));
                    t.r + self.cfg.gamma as f32 * best
                }
            })
            .collect()
    }

    /// One training opportunity per environment step; honors the warm-up,
    /// cadence, and target-sync schedules. Returns the TD loss if a
    /// gradient step ran.
    pub fn maybe_train(&mut self, rng: &mut impl Rng) -> Option<f32> {
        if self.replay.len() < self.cfg.warmup.max(self.cfg.batch) {
            return None;
        }
        if self.env_steps % self.cfg.train_every as u64 != 0 {
            return None;
        }
        let batch = self.replay.sample(self.cfg.batch, rng);
        let targets = self.targets(&batch);
        let mut x = Array2::zeros((self.online.input_dim(), batch.len()));
        let mut actions = Vec::with_capacity(batch.len());
        for (j, t) in batch.iter().enumerate() {
            x.column_mut(j).assign(&t.z);
            actions.push(t.a);
        }
        let loss = self.online.q_step(x.view(), &actions, &targets);
        self.grad_steps += 1;
        if self.grad_steps % self.cfg.target_sync == 0 {
            self.target.copy_weights_from(&self.online);
        }
        Some(loss)
    }

    pub fn end_episode(&mut self) {
        self.eps = (self.eps * self.cfg.eps_decay).max(self.cfg.eps_floor);
    }

    #[cfg(test)]
    pub(crate) fn online_mut(&mut self) -> &mut Mlp {
        &mut self.online
    }

    #[cfg(test)]
    pub(crate) fn networks_equal(&self) -> bool {
        self.online.checksum() == self.target.checksum()
    }
}

/// Global and per-episode visit counts keyed by agent coordinate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CountTables {
    n: HashMap<(i32, i32), u32>,
    ne: HashMap<(i32, i32), u32>,
    alpha: f64,
}

impl CountTables {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.1..=1.0).contains(&alpha) {
            return Err(Error::config("alpha must lie in [0.1, 1]"));
        }
        Ok(CountTables {
            n: HashMap::new(),
            ne: HashMap::new(),
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Clear episodic counts and register the spawn cell.
    pub fn begin_episode(&mut self, start: (i32, i32)) {
        self.ne.clear();
        self.visit(start);
    }

    /// Count an arrival; returns the post-increment (global, episodic) pair.
    pub fn visit(&mut self, cell: (i32, i32)) -> (u32, u32) {
        let n = self.n.entry(cell).or_insert(0);
        *n += 1;
        let ne = self.ne.entry(cell).or_insert(0);
        *ne += 1;
        (*n, *ne)
    }

    pub fn global_count(&self, cell: (i32, i32)) -> u32 {
        self.n.get(&cell).copied().unwrap_or(0)
    }

    pub fn episodic_count(&self, cell: (i32, i32)) -> u32 {
        self.ne.get(&cell).copied().unwrap_or(0)
    }

    pub fn episodic_is_empty(&self) -> bool {
        self.ne.is_empty()
    }
}

/// Count-based first-visit bonus: the difference of inverse global visit
/// counts, gated to first in-episode arrivals; anything else is penalized.
pub fn bebold_intrinsic(tables: &mut CountTables, from: (i32, i32), to: (i32, i32)) -> f64 {
    let (n_to, ne_to) = tables.visit(to);
    let n_from = tables.global_count(from).max(1);
    let raw = (1.0 / n_to as f64 - 1.0 / n_from as f64).max(0.0);
    let raw = if ne_to == 1 { raw } else { 0.0 };
    if raw > 0.0 {
        raw
    } else {
        -tables.alpha()
    }
}

/// Predictor / frozen-target pair for novelty by distillation error.
#[derive(Debug, Clone)]
pub struct RndPair {
    predictor: Mlp,
    target: Mlp,
}

impl RndPair {
    pub fn new(input: usize, hidden: [usize; 2], embed: usize, lr: f64, rng: &mut impl Rng) -> Result<Self> {
        let sizes = [input, hidden[0], hidden[1], embed];
        let predictor = Mlp::new(&sizes, lr, rng)?;
        let target = Mlp::new(&sizes, lr, rng)?;
        Ok(RndPair { predictor, target })
    }

    pub fn distillation_error(&self, z: ArrayView1<f32>) -> f64 {
        let p = self.predictor.forward(z);
        let t = self.target.forward(z);
        p.iter()
            .zip(t.iter())
            .map(|(a, b)| {
                let d = (a - b) as f64;
                d * d
            })
            .sum()
    }

    pub fn target_checksum(&self) -> f64 {
        self.target.checksum()
    }

    /// One regression step pulling the predictor toward the frozen target
    /// on `z`.
    pub fn train_predictor(&mut self, z: ArrayView1<f32>) -> f32 {
        let x = z.insert_axis(Axis(1));
        let y = self.target.forward_batch(x);
        self.predictor.regress_step(x, y.view())
    }

    /// Copy the target weights into the predictor, forcing zero distillation
    /// error. Useful as a fixture when checking the novelty fallback branch.
    pub fn collapse_predictor_onto_target(&mut self) {
        self.predictor.copy_weights_from(&self.target);
    }
}

/// Distillation-error bonus on first in-episode visits; the predictor is
/// trained on the new state after the reward is computed.
pub fn rnd_intrinsic(
    pair: &mut RndPair,
    tables: &mut CountTables,
    to: (i32, i32),
    z_next: ArrayView1<f32>,
) -> f64 {
    let (_, ne_to) = tables.visit(to);
    let raw = if ne_to == 1 {
        pair.distillation_error(z_next)
    } else {
        0.0
    };
    let out = if raw > 0.0 { raw } else { -tables.alpha() };
    pair.train_predictor(z_next);
    out
}
