//! Episodic memory: sliding-window trace construction over transitions,
//! instance storage, hetero-associative episode resampling and replay batches.
//!
//! Every environment step appends the latest transition to a window of the
//! last `L` transitions and stores the flattened window as one trace. Episode
//! openers are additionally kept in a start buffer `S0`. Sampling seeds a
//! fresh window with a random start, then repeatedly shifts the window,
//! zeroes the vacated last slot, and lets the trace memory complete it —
//! with a sharp activation power the completion is effectively
//! nearest-neighbor recall of the stored sequence. Reconstructed episodes are
//! cut into adjacent-pair mini-batches for the motor and dynamics circuits.
//!
//! A transition is flattened as `[z | a_ext | a_int | r | m | terminal]`;
//! the slot read-out `m` and the 0/1 terminal flag ride along so replay can
//! rebuild motor inputs and stop cleanly at episode boundaries.

use std::collections::{HashMap, VecDeque};

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::minerva::{MemoryConfig, MemoryStats, TraceMemory};
use crate::ngc::{cast, Scalar};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"CGEPI1\0\0";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodicConfig {
    pub z_dim: usize,
    pub n_ext: usize,
    pub n_int: usize,
    pub m_dim: usize,
    /// Window length `L`: how many recent transitions each trace spans.
    pub window: usize,
    /// Hard bound on reconstructed episode length.
    pub max_episode_len: usize,
    pub memory: MemoryConfig,
}

impl Default for EpisodicConfig {
    fn default() -> Self {
        EpisodicConfig {
            z_dim: 147,
            n_ext: 6,
            n_int: 2,
            m_dim: 33,
            window: 20,
            max_episode_len: 360,
            memory: MemoryConfig::declarative(),
        }
    }
}

impl EpisodicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.z_dim == 0 || self.n_ext == 0 || self.n_int == 0 || self.m_dim == 0 {
            return Err(Error::config("episodic field dimensions must be positive"));
        }
        if self.window == 0 {
            return Err(Error::config("window length must be positive"));
        }
        if self.max_episode_len == 0 {
            return Err(Error::config("max_episode_len must be positive"));
        }
        Ok(())
    }

    /// Flattened length of one transition.
    pub fn transition_len(&self) -> usize {
        self.z_dim + self.n_ext + self.n_int + 1 + self.m_dim + 1
    }

    /// Flattened length of one stored window.
    pub fn trace_len(&self) -> usize {
        self.window * self.transition_len()
    }
}

/// One complete agent transition, actions held as indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<F: Scalar> {
    pub z: Array1<F>,
    pub a_ext: usize,
    pub a_int: usize,
    pub r: f64,
    pub m: Array1<F>,
    pub terminal: bool,
}

/// A transition parsed back out of a (possibly reconstructed) flat vector.
#[derive(Debug, Clone)]
pub struct ParsedTransition<F: Scalar> {
    pub z: Array1<F>,
    pub a_ext: usize,
    pub a_int: usize,
    pub r: f64,
    pub m: Array1<F>,
    pub terminal: bool,
}

/// Adjacent-pair replay batch, one column per pair.
#[derive(Debug, Clone)]
pub struct ReplayBatch<F: Scalar> {
    pub z: Array2<F>,
    pub m: Array2<F>,
    pub a_ext: Vec<usize>,
    pub a_int: Vec<usize>,
    pub r: Vec<f64>,
    pub z_next: Array2<F>,
    pub m_next: Array2<F>,
    pub terminal: Vec<bool>,
}

impl<F: Scalar> ReplayBatch<F> {
    pub fn len(&self) -> usize {
        self.terminal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
struct StartEntry<F: Scalar> {
    episode: u64,
    trace: Vec<F>,
}

#[derive(Serialize)]
#[serde(bound = "")]
struct SidecarRef<'a, F: Scalar> {
    cfg: &'a EpisodicConfig,
    window: &'a Vec<F>,
    starts: &'a Vec<StartEntry<F>>,
    start_index: &'a HashMap<u64, usize>,
    trace_episodes: &'a VecDeque<u64>,
    episode_counts: &'a HashMap<u64, u32>,
    next_episode: u64,
    episode_open: bool,
}

#[derive(Deserialize)]
#[serde(bound = "")]
struct SidecarOwned<F: Scalar> {
    cfg: EpisodicConfig,
    window: Vec<F>,
    starts: Vec<StartEntry<F>>,
    start_index: HashMap<u64, usize>,
    trace_episodes: VecDeque<u64>,
    episode_counts: HashMap<u64, u32>,
    next_episode: u64,
    episode_open: bool,
}

/// Window-based episodic store with episode-aware eviction bookkeeping.
#[derive(Debug, Clone)]
pub struct EpisodicMemory<F: Scalar> {
    cfg: EpisodicConfig,
    window: Vec<F>,
    memory: TraceMemory<F>,
    starts: Vec<StartEntry<F>>,
    start_index: HashMap<u64, usize>,
    trace_episodes: VecDeque<u64>,
    episode_counts: HashMap<u64, u32>,
    next_episode: u64,
    episode_open: bool,
}

impl<F: Scalar> EpisodicMemory<F> {
    pub fn new(cfg: EpisodicConfig) -> Result<Self> {
        cfg.validate()?;
        let memory = TraceMemory::new(cfg.trace_len(), cfg.memory)?;
        Ok(EpisodicMemory {
            window: vec![F::zero(); cfg.trace_len()],
            memory,
            starts: Vec::new(),
            start_index: HashMap::new(),
            trace_episodes: VecDeque::new(),
            episode_counts: HashMap::new(),
            next_episode: 0,
            episode_open: false,
            cfg,
        })
    }

    pub fn config(&self) -> &EpisodicConfig {
        &self.cfg
    }

    pub fn trace_count(&self) -> usize {
        self.memory.len()
    }

    pub fn start_count(&self) -> usize {
        self.starts.len()
    }

    pub fn memory_stats(&self) -> MemoryStats {
        self.memory.stats()
    }

    fn check_transition(&self, t: &Transition<F>) -> Result<()> {
        if t.z.len() != self.cfg.z_dim || t.m.len() != self.cfg.m_dim {
            return Err(Error::config(format!(
                "transition fields ({}, {}) do not match configured ({}, {})",
                t.z.len(),
                t.m.len(),
                self.cfg.z_dim,
                self.cfg.m_dim
            )));
        }
        if t.a_ext >= self.cfg.n_ext || t.a_int >= self.cfg.n_int {
            return Err(Error::config("transition action index out of range"));
        }
        if !t.r.is_finite() {
            return Err(Error::config("transition reward must be finite"));
        }
        Ok(())
    }

    /// Flatten a transition into `[z | a_ext | a_int | r | m | terminal]`.
    pub fn flatten(&self, t: &Transition<F>) -> Result<Array1<F>> {
        self.check_transition(t)?;
        let c = &self.cfg;
        let mut out = Array1::zeros(c.transition_len());
        let mut at = 0;
        out.slice_mut(ndarray::s![at..at + c.z_dim]).assign(&t.z);
        at += c.z_dim;
        out[at + t.a_ext] = F::one();
        at += c.n_ext;
        out[at + t.a_int] = F::one();
        at += c.n_int;
        out[at] = cast(t.r);
        at += 1;
        out.slice_mut(ndarray::s![at..at + c.m_dim]).assign(&t.m);
        at += c.m_dim;
        out[at] = if t.terminal { F::one() } else { F::zero() };
        Ok(out)
    }

    /// Parse a flat transition vector, re-normalizing one-hots by argmax.
    pub fn parse(&self, flat: ArrayView1<F>) -> Result<ParsedTransition<F>> {
        let c = &self.cfg;
        if flat.len() != c.transition_len() {
            return Err(Error::config("flat transition has the wrong length"));
        }
        let argmax = |v: ArrayView1<F>| {
            let mut best = 0;
            for (i, x) in v.iter().enumerate().skip(1) {
                if *x > v[best] {
                    best = i;
                }
            }
            best
        };
        let mut at = 0;
        let z = flat.slice(ndarray::s![at..at + c.z_dim]).to_owned();
        at += c.z_dim;
        let a_ext = argmax(flat.slice(ndarray::s![at..at + c.n_ext]));
        at += c.n_ext;
        let a_int = argmax(flat.slice(ndarray::s![at..at + c.n_int]));
        at += c.n_int;
        let r = flat[at].to_f64().unwrap_or(0.0);
        at += 1;
        let m = flat.slice(ndarray::s![at..at + c.m_dim]).to_owned();
        at += c.m_dim;
        let terminal = flat[at].to_f64().unwrap_or(0.0) >= 0.5;
        Ok(ParsedTransition {
            z,
            a_ext,
            a_int,
            r,
            m,
            terminal,
        })
    }

    /// Record one transition: update `S0`, slide the window, store the
    /// flattened window, and reset the window after a terminal step.
    pub fn record(&mut self, t: &Transition<F>, rng: &mut impl Rng) -> Result<()> {
        let flat = self.flatten(t)?;
        let t_len = self.cfg.transition_len();

        if !self.episode_open {
            let id = self.next_episode;
            self.next_episode += 1;
            self.episode_open = true;
            self.start_index.insert(id, self.starts.len());
            self.starts.push(StartEntry {
                episode: id,
                trace: flat.to_vec(),
            });
            self.episode_counts.insert(id, 0);
        }
        let id = self.next_episode - 1;

        self.window.copy_within(t_len.., 0);
        let tail = self.window.len() - t_len;
        self.window[tail..].copy_from_slice(flat.as_slice().expect("contiguous"));

        let outcome = self
            .memory
            .store(ArrayView1::from(&self.window[..]), rng)?;
        if outcome.evicted {
            self.handle_eviction();
        }
        self.trace_episodes.push_back(id);
        *self.episode_counts.entry(id).or_insert(0) += 1;

        if t.terminal {
            self.window.fill(F::zero());
            self.episode_open = false;
        }
        Ok(())
    }

    fn handle_eviction(&mut self) {
        let evicted = self
            .trace_episodes
            .pop_front()
            .expect("eviction implies stored traces");
        let count = self
            .episode_counts
            .get_mut(&evicted)
            .expect("every stored trace has a counted episode");
        *count -= 1;
        if *count == 0 {
            self.episode_counts.remove(&evicted);
            if let Some(idx) = self.start_index.remove(&evicted) {
                self.starts.swap_remove(idx);
                if idx < self.starts.len() {
                    self.start_index.insert(self.starts[idx].episode, idx);
                }
            }
        }
    }

    /// Reconstruct `k_ep` episodes by seeded hetero-associative completion.
    /// Each episode is a sequence of flat transition vectors.
    pub fn sample_episodes(&self, k_ep: usize, rng: &mut impl Rng) -> Result<Vec<Vec<Array1<F>>>> {
        if k_ep == 0 {
            return Ok(Vec::new());
        }
        if self.starts.is_empty() {
            return Err(Error::CannotSample);
        }
        let t_len = self.cfg.transition_len();
        let trace_len = self.cfg.trace_len();
        let mut episodes = Vec::with_capacity(k_ep);
        for _ in 0..k_ep {
            let seed = &self.starts[rng.random_range(0..self.starts.len())];
            let mut window = vec![F::zero(); trace_len];
            window[trace_len - t_len..].copy_from_slice(&seed.trace);
            let mut episode = vec![Array1::from_vec(seed.trace.clone())];
            while episode.len() < self.cfg.max_episode_len {
                let last = episode.last().expect("seeded");
                if last[t_len - 1].to_f64().unwrap_or(0.0) >= 0.5 {
                    break;
                }
                window.copy_within(t_len.., 0);
                let tail = trace_len - t_len;
                window[tail..].fill(F::zero());
                let echo = self.memory.retrieve(ArrayView1::from(&window[..]))?;
                if echo.total_activation <= 0.0 {
                    break;
                }
                let next: Array1<F> = echo
                    .vector
                    .slice(ndarray::s![tail..])
                    .mapv(|v| cast(v / echo.total_activation));
                window[tail..].copy_from_slice(next.as_slice().expect("contiguous"));
                episode.push(next);
            }
            episodes.push(episode);
        }
        Ok(episodes)
    }

    /// Cut reconstructed episodes into `b` adjacent pairs each. The closing
    /// pair of a terminal episode bootstraps nothing, so its next-state
    /// fields are zero columns.
    pub fn make_batch(
        &self,
        episodes: &[Vec<Array1<F>>],
        b: usize,
        rng: &mut impl Rng,
    ) -> Result<ReplayBatch<F>> {
        let c = &self.cfg;
        let mut parsed: Vec<Vec<ParsedTransition<F>>> = Vec::with_capacity(episodes.len());
        let mut pair_total = 0;
        for ep in episodes {
            let p: Vec<ParsedTransition<F>> = ep
                .iter()
                .map(|flat| self.parse(flat.view()))
                .collect::<Result<_>>()?;
            let n_pairs = pair_count(&p);
            if n_pairs > 0 {
                pair_total += b;
            }
            parsed.push(p);
        }
        let mut batch = ReplayBatch {
            z: Array2::zeros((c.z_dim, pair_total)),
            m: Array2::zeros((c.m_dim, pair_total)),
            a_ext: Vec::with_capacity(pair_total),
            a_int: Vec::with_capacity(pair_total),
            r: Vec::with_capacity(pair_total),
            z_next: Array2::zeros((c.z_dim, pair_total)),
            m_next: Array2::zeros((c.m_dim, pair_total)),
            terminal: Vec::with_capacity(pair_total),
        };
        let mut col = 0;
        for p in &parsed {
            let n_pairs = pair_count(p);
            if n_pairs == 0 {
                continue;
            }
            for j in sample_indices(n_pairs, b, rng) {
                let t = &p[j];
                batch.z.column_mut(col).assign(&t.z);
                batch.m.column_mut(col).assign(&t.m);
                batch.a_ext.push(t.a_ext);
                batch.a_int.push(t.a_int);
                batch.r.push(t.r);
                batch.terminal.push(t.terminal);
                if j + 1 < p.len() {
                    batch.z_next.column_mut(col).assign(&p[j + 1].z);
                    batch.m_next.column_mut(col).assign(&p[j + 1].m);
                }
                col += 1;
            }
        }
        Ok(batch)
    }

    /// Serialize everything (bookkeeping as JSON, traces in the compact
    /// binary table format) into one stream.
    pub fn write_binary(&self, w: &mut impl std::io::Write) -> Result<()> {
        w.write_all(MAGIC)?;
        let meta = serde_json::to_vec(&SidecarRef {
            cfg: &self.cfg,
            window: &self.window,
            starts: &self.starts,
            start_index: &self.start_index,
            trace_episodes: &self.trace_episodes,
            episode_counts: &self.episode_counts,
            next_episode: self.next_episode,
            episode_open: self.episode_open,
        })?;
        w.write_all(&(meta.len() as u64).to_le_bytes())?;
        w.write_all(&meta)?;
        self.memory.write_binary(w)
    }

    pub fn read_binary(r: &mut impl std::io::Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::protocol("bad episodic store magic"));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut meta = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut meta)?;
        let side: SidecarOwned<F> = serde_json::from_slice(&meta)?;
        side.cfg.validate()?;
        let memory = TraceMemory::read_binary(r, side.cfg.memory)?;
        if memory.dim() != side.cfg.trace_len() {
            return Err(Error::protocol("trace table does not match episodic config"));
        }
        if memory.len() != side.trace_episodes.len() {
            return Err(Error::protocol("episode tags do not match trace count"));
        }
        Ok(EpisodicMemory {
            cfg: side.cfg,
            window: side.window,
            memory,
            starts: side.starts,
            start_index: side.start_index,
            trace_episodes: side.trace_episodes,
            episode_counts: side.episode_counts,
            next_episode: side.next_episode,
            episode_open: side.episode_open,
        })
    }

    #[cfg(test)]
    pub(crate) fn window_slice(&self) -> &[F] {
        &self.window
    }

    #[cfg(test)]
    pub(crate) fn starts_coherent(&self) -> bool {
        self.starts
            .iter()
            .all(|s| self.episode_counts.get(&s.episode).copied().unwrap_or(0) >= 1)
    }

    #[cfg(test)]
    pub(crate) fn start_episode_ids(&self) -> Vec<u64> {
        self.starts.iter().map(|s| s.episode).collect()
    }
}

/// Pair slots in a parsed episode: every adjacent pair, plus the dangling
/// terminal transition (paired with a dummy next state).
fn pair_count<F: Scalar>(p: &[ParsedTransition<F>]) -> usize {
    match p.last() {
        None => 0,
        Some(last) if last.terminal => p.len(),
        Some(_) => p.len() - 1,
    }
}

/// `b` indices from `0..n`: distinct when possible, with replacement when
/// `n < b`.
fn sample_indices(n: usize, b: usize, rng: &mut impl Rng) -> Vec<usize> {
    if n >= b {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..b {
            let j = rng.random_range(i..n);
            pool.swap(i, j);
        }
        pool.truncate(b);
        pool
    } else {
        (0..b).map(|_| rng.random_range(0..n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn seeded(n: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(n)
    }

    fn small_cfg() -> EpisodicConfig {
        EpisodicConfig {
            z_dim: 8,
            n_ext: 3,
            n_int: 2,
            m_dim: 4,
            window: 4,
            max_episode_len: 16,
            memory: MemoryConfig {
                power: 100,
                ..MemoryConfig::default()
            },
        }
    }

    fn transition(cfg: &EpisodicConfig, tag: f64, terminal: bool) -> Transition<f64> {
        Transition {
            z: Array1::from_shape_fn(cfg.z_dim, |i| tag + 0.1 * i as f64),
            a_ext: (tag.abs() as usize) % cfg.n_ext,
            a_int: (tag.abs() as usize) % cfg.n_int,
            r: if terminal { 1.0 } else { 0.0 },
            m: Array1::from_shape_fn(cfg.m_dim, |i| -tag + 0.2 * i as f64),
            terminal,
        }
    }

    fn random_transition(
        cfg: &EpisodicConfig,
        terminal: bool,
        rng: &mut ChaCha12Rng,
    ) -> Transition<f64> {
        Transition {
            z: Array1::from_shape_fn(cfg.z_dim, |_| rng.random::<f64>() * 2.0 - 1.0),
            a_ext: rng.random_range(0..cfg.n_ext),
            a_int: rng.random_range(0..cfg.n_int),
            r: if terminal { 1.0 } else { 0.0 },
            m: Array1::from_shape_fn(cfg.m_dim, |_| rng.random::<f64>() * 2.0 - 1.0),
            terminal,
        }
    }

    #[test]
    fn first_transition_registers_start_and_trace() {
        let cfg = small_cfg();
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(0);
        epi.record(&transition(&cfg, 1.0, false), &mut rng).unwrap();
        assert_eq!(epi.start_count(), 1);
        assert_eq!(epi.trace_count(), 1);
    }

    #[test]
    fn one_trace_per_step_and_window_slides() {
        let cfg = small_cfg();
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(1);
        let t_len = cfg.transition_len();
        let flats: Vec<Array1<f64>> = (0..3)
            .map(|k| epi.flatten(&transition(&cfg, k as f64, false)).unwrap())
            .collect();
        for k in 0..3 {
            epi.record(&transition(&cfg, k as f64, false), &mut rng)
                .unwrap();
        }
        assert_eq!(epi.trace_count(), 3);
        assert_eq!(epi.start_count(), 1);
        let w = epi.window_slice();
        // L = 4, three transitions recorded: one zero slot then the three.
        assert!(w[..t_len].iter().all(|&x| x == 0.0));
        for (k, flat) in flats.iter().enumerate() {
            let at = (k + 1) * t_len;
            assert_eq!(&w[at..at + t_len], flat.as_slice().unwrap());
        }
    }

    #[test]
    fn terminal_reinitializes_the_window() {
        let cfg = small_cfg();
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(2);
        epi.record(&transition(&cfg, 1.0, false), &mut rng).unwrap();
        epi.record(&transition(&cfg, 2.0, true), &mut rng).unwrap();
        assert!(epi.window_slice().iter().all(|&x| x == 0.0));
        epi.record(&transition(&cfg, 3.0, false), &mut rng).unwrap();
        assert_eq!(epi.start_count(), 2);
        let t_len = cfg.transition_len();
        let w = epi.window_slice();
        assert!(w[..3 * t_len].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_episode_reconstructs_exactly() {
        let cfg = small_cfg();
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(3);
        let ts: Vec<Transition<f64>> = (0..5)
            .map(|k| random_transition(&cfg, k == 4, &mut rng))
            .collect();
        let flats: Vec<Array1<f64>> = ts.iter().map(|t| epi.flatten(t).unwrap()).collect();
        for t in &ts {
            epi.record(t, &mut rng).unwrap();
        }
        let eps = epi.sample_episodes(1, &mut rng).unwrap();
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].len(), 5);
        for (got, want) in eps[0].iter().zip(&flats) {
            let err = got
                .iter()
                .zip(want.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "reconstruction error {err}");
        }
    }

    #[test]
    fn zero_requests_and_empty_store() {
        let cfg = small_cfg();
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(4);
        assert!(epi.sample_episodes(0, &mut rng).unwrap().is_empty());
        assert!(matches!(
            epi.sample_episodes(1, &mut rng),
            Err(Error::CannotSample)
        ));
        epi.record(&transition(&cfg, 1.0, false), &mut rng).unwrap();
        assert_eq!(epi.sample_episodes(3, &mut rng).unwrap().len(), 3);
    }

    #[test]
    fn reconstruction_respects_length_bound() {
        let cfg = EpisodicConfig {
            max_episode_len: 6,
            ..small_cfg()
        };
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(5);
        for _ in 0..12 {
            let t = random_transition(&cfg, false, &mut rng);
            epi.record(&t, &mut rng).unwrap();
        }
        let eps = epi.sample_episodes(2, &mut rng).unwrap();
        for ep in &eps {
            assert!(ep.len() <= 6);
        }
    }

    #[test]
    fn eviction_drops_stale_starts() {
        let cfg = EpisodicConfig {
            memory: MemoryConfig {
                power: 100,
                capacity: Some(4),
                ..MemoryConfig::default()
            },
            ..small_cfg()
        };
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(6);
        for k in 0..3 {
            epi.record(&transition(&cfg, k as f64, k == 2), &mut rng)
                .unwrap();
        }
        for k in 0..3 {
            epi.record(&transition(&cfg, 10.0 + k as f64, k == 2), &mut rng)
                .unwrap();
        }
        // Six stores into capacity 4: episode 0 has lost 2 of 3 traces.
        assert_eq!(epi.start_count(), 2);
        assert!(epi.starts_coherent());
        for k in 0..3 {
            epi.record(&transition(&cfg, 20.0 + k as f64, k == 2), &mut rng)
                .unwrap();
        }
        // Nine stores: all of episode 0 and two of episode 1 are gone.
        assert_eq!(epi.start_episode_ids(), vec![2, 1]);
        assert!(epi.starts_coherent());
    }

    #[test]
    fn batch_shape_and_replacement_rules() {
        let cfg = small_cfg();
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(7);
        let t = random_transition(&cfg, true, &mut rng);
        epi.record(&t, &mut rng).unwrap();
        for k in 0..4 {
            let t = random_transition(&cfg, k == 3, &mut rng);
            epi.record(&t, &mut rng).unwrap();
        }
        let eps = epi.sample_episodes(2, &mut rng).unwrap();
        let batch = epi.make_batch(&eps, 4, &mut rng).unwrap();
        assert_eq!(batch.len(), 8);
        assert_eq!(batch.z.ncols(), 8);
        for (j, &term) in batch.terminal.iter().enumerate() {
            if term {
                assert!(batch.z_next.column(j).iter().all(|&x| x == 0.0));
            }
        }
        // A length-1 terminal episode yields its single pair b times.
        let single = epi
            .sample_episodes(8, &mut rng)
            .unwrap()
            .into_iter()
            .find(|ep| ep.len() == 1)
            .expect("the one-step episode should be sampled");
        let batch = epi.make_batch(&[single], 4, &mut rng).unwrap();
        assert_eq!(batch.len(), 4);
        assert!(batch.terminal.iter().all(|&t| t));
        for j in 1..4 {
            assert_eq!(batch.z.column(j), batch.z.column(0));
        }
    }

    #[test]
    fn parse_renormalizes_noisy_one_hots() {
        let cfg = small_cfg();
        let epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let t = Transition {
            z: Array1::zeros(cfg.z_dim),
            a_ext: 2,
            a_int: 1,
            r: 0.5,
            m: Array1::zeros(cfg.m_dim),
            terminal: false,
        };
        let mut flat = epi.flatten(&t).unwrap();
        for x in flat.iter_mut() {
            *x += 0.03;
        }
        let p = epi.parse(flat.view()).unwrap();
        assert_eq!(p.a_ext, 2);
        assert_eq!(p.a_int, 1);
        assert!(!p.terminal);
        assert!((p.r - 0.53).abs() < 1e-12);
    }

    #[test]
    fn pairs_never_span_episode_boundaries() {
        let cfg = small_cfg();
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(8);
        // Episode A: z == 1.0 everywhere; episode B: z == 2.0.
        for k in 0..3 {
            epi.record(
                &Transition {
                    z: Array1::from_elem(cfg.z_dim, 1.0),
                    a_ext: 0,
                    a_int: 0,
                    r: 0.0,
                    m: Array1::zeros(cfg.m_dim),
                    terminal: k == 2,
                },
                &mut rng,
            )
            .unwrap();
        }
        for k in 0..3 {
            epi.record(
                &Transition {
                    z: Array1::from_elem(cfg.z_dim, 2.0),
                    a_ext: 1,
                    a_int: 1,
                    r: 0.0,
                    m: Array1::zeros(cfg.m_dim),
                    terminal: k == 2,
                },
                &mut rng,
            )
            .unwrap();
        }
        let eps = epi.sample_episodes(6, &mut rng).unwrap();
        let batch = epi.make_batch(&eps, 8, &mut rng).unwrap();
        for j in 0..batch.len() {
            if batch.terminal[j] {
                continue;
            }
            let a = batch.z[[0, j]].round();
            let b = batch.z_next[[0, j]].round();
            assert_eq!(a, b, "pair {j} mixes episodes");
        }
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let cfg = small_cfg();
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(9);
        for e in 0..3 {
            for k in 0..4 {
                epi.record(&transition(&cfg, (4 * e + k) as f64, k == 3), &mut rng)
                    .unwrap();
            }
        }
        let run = |seed: u64, epi: &EpisodicMemory<f64>| {
            let mut rng = seeded(seed);
            let eps = epi.sample_episodes(2, &mut rng).unwrap();
            epi.make_batch(&eps, 3, &mut rng).unwrap()
        };
        let a = run(42, &epi);
        let b = run(42, &epi);
        assert_eq!(a.z, b.z);
        assert_eq!(a.a_ext, b.a_ext);
        assert_eq!(a.r, b.r);
        assert_eq!(a.terminal, b.terminal);
    }

    #[test]
    fn exact_recall_regime_is_faithful() {
        let cfg = EpisodicConfig {
            z_dim: 147,
            n_ext: 6,
            n_int: 2,
            m_dim: 33,
            window: 20,
            max_episode_len: 12,
            memory: MemoryConfig {
                power: 100,
                ..MemoryConfig::default()
            },
        };
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(10);
        let mut stored: Vec<Vec<Array1<f64>>> = Vec::new();
        for _ in 0..20 {
            let mut flats = Vec::new();
            for k in 0..5 {
                let t = random_transition(&cfg, k == 4, &mut rng);
                flats.push(epi.flatten(&t).unwrap());
                epi.record(&t, &mut rng).unwrap();
            }
            stored.push(flats);
        }
        let eps = epi.sample_episodes(40, &mut rng).unwrap();
        let mut total = 0usize;
        let mut faithful = 0usize;
        for ep in &eps {
            let first = &ep[0];
            let original = stored
                .iter()
                .find(|fl| {
                    fl[0]
                        .iter()
                        .zip(first.iter())
                        .all(|(a, b)| (a - b).abs() < 1e-9)
                })
                .expect("seed comes from S0");
            assert_eq!(ep.len(), original.len());
            for (got, want) in ep.iter().zip(original) {
                total += 1;
                let dot: f64 = got.iter().zip(want.iter()).map(|(a, b)| a * b).sum();
                let na: f64 = got.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nb: f64 = want.iter().map(|a| a * a).sum::<f64>().sqrt();
                if dot / (na * nb) >= 0.999 {
                    faithful += 1;
                }
            }
        }
        assert!(total >= 40 * 5);
        let fidelity = faithful as f64 / total as f64;
        assert!(fidelity >= 0.95, "fidelity {fidelity}");
    }

    #[test]
    fn binary_round_trip_preserves_everything() {
        let cfg = small_cfg();
        let mut epi = EpisodicMemory::<f32>::new(cfg).unwrap();
        let mut rng = seeded(11);
        for e in 0..2 {
            for k in 0..3 {
                epi.record(&{
                    let t = transition(&cfg, (3 * e + k) as f64, k == 2);
                    Transition {
                        z: t.z.mapv(|x| x as f32),
                        a_ext: t.a_ext,
                        a_int: t.a_int,
                        r: t.r,
                        m: t.m.mapv(|x| x as f32),
                        terminal: t.terminal,
                    }
                }, &mut rng)
                .unwrap();
            }
        }
        let mut buf = Vec::new();
        epi.write_binary(&mut buf).unwrap();
        let back = EpisodicMemory::<f32>::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back.trace_count(), epi.trace_count());
        assert_eq!(back.start_count(), epi.start_count());
        let a = epi.sample_episodes(2, &mut seeded(1)).unwrap();
        let b = back.sample_episodes(2, &mut seeded(1)).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn rejects_malformed_transitions() {
        let cfg = small_cfg();
        let mut epi = EpisodicMemory::<f64>::new(cfg).unwrap();
        let mut rng = seeded(12);
        let mut t = transition(&cfg, 1.0, false);
        t.a_ext = cfg.n_ext;
        assert!(epi.record(&t, &mut rng).is_err());
        let mut t = transition(&cfg, 1.0, false);
        t.r = f64::NAN;
        assert!(epi.record(&t, &mut rng).is_err());
        let mut t = transition(&cfg, 1.0, false);
        t.z = Array1::zeros(cfg.z_dim + 1);
        assert!(epi.record(&t, &mut rng).is_err());
    }
}
