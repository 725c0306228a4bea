//! MINERVA 2 instance memory.
//!
//! Every experience is a row in a growing trace table. Retrieval probes the
//! whole table at once: each trace is activated by its cosine similarity to
//! the cue raised to an odd-acting power `p`, and the echo is the
//! activation-weighted sum of all traces,
//!
//! ```text
//! e = sum_i cos(cue, t_i)^p * t_i
//! ```
//!
//! Low powers (the classic cube) blend related traces; high powers (`p = 100`
//! in the declarative store) make retrieval nearly winner-take-all. Because an
//! even power would promote opposed traces, negative similarities are masked
//! to zero by default. Storage can probabilistically zero individual elements
//! ("forgetting"), and a bounded table evicts its oldest row first.
//!
//! Traces are stored in the working float type `F`; similarity and echo
//! arithmetic always run in `f64`.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::{Rng, RngExt};
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::ngc::Scalar;
use crate::{Error, Result};

/// Activations with magnitude below this floor are skipped during echo
/// accumulation. It only needs to cut off underflow noise: at `p = 100` the
/// echo is normalized by the total activation downstream, so even tiny
/// absolute activations carry the retrieval as long as their ratios do.
const ACTIVATION_FLOOR: f64 = 1e-250;

/// Rows whose activation is below this fraction of the strongest one are
/// dropped from the echo sum; their contribution is beneath `f64` roundoff of
/// the dominant terms, and skipping them keeps the accumulation pass linear in
/// the handful of traces that actually shape the echo.
const ECHO_SIGNIFICANCE: f64 = 1e-16;

/// How a familiarity score is computed from the trace table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecallMode {
    /// Maximum raw cosine between the probe and any trace.
    MaxCosine,
    /// Cosine between the probe and the echo it retrieves.
    EchoCosine,
}

/// Tunables for one memory instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryConfig {
    /// Activation exponent `p`.
    pub power: u32,
    /// Per-element zeroing probability applied across the table once per store.
    pub forget_rate: f64,
    /// Maximum trace count; `None` grows without bound.
    pub capacity: Option<usize>,
    /// Zero out activations whose cosine is negative.
    pub mask_negative_similarity: bool,
    pub recall: RecallMode,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            power: 3,
            forget_rate: 0.0,
            capacity: None,
            mask_negative_similarity: true,
            recall: RecallMode::MaxCosine,
        }
    }
}

impl MemoryConfig {
    /// The long-term declarative profile: sharp retrieval, slow decay, bounded.
    pub fn declarative() -> Self {
        MemoryConfig {
            power: 100,
            forget_rate: 1e-4,
            capacity: Some(100_000),
            ..MemoryConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.power == 0 {
            return Err(Error::config("memory power must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.forget_rate) {
            return Err(Error::config(format!(
                "forget_rate must lie in [0, 1), got {}",
                self.forget_rate
            )));
        }
        if self.capacity == Some(0) {
            return Err(Error::config("memory capacity must be positive"));
        }
        Ok(())
    }
}

/// Result of one store call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreOutcome {
    /// True when the oldest trace was evicted to make room.
    pub evicted: bool,
}

/// An activation-weighted readout of the whole table.
#[derive(Debug, Clone)]
pub struct Echo {
    pub vector: Array1<f64>,
    /// Sum of all (unskipped) activations; divides the echo into a blend.
    pub total_activation: f64,
    pub max_activation: f64,
}

/// Summary counters for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryStats {
    pub rows: usize,
    pub dim: usize,
    pub capacity: Option<usize>,
    pub stores: u64,
    pub evictions: u64,
    pub zero_elements: usize,
    pub min_norm: f64,
    pub mean_norm: f64,
    pub max_norm: f64,
}

/// A MINERVA 2 trace table over working float type `F`.
///
/// Rows live in a flat ring buffer; logical index 0 is always the oldest
/// surviving trace. L2 norms are cached in `f64` and patched incrementally
/// when forgetting zeroes an element.
///
/// The serde representation is meant for small tables (filters, unit tests);
/// bulk tables go through [`Self::write_binary`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TraceMemory<F: Scalar> {
    cfg: MemoryConfig,
    dim: usize,
    data: Vec<F>,
    norms: Vec<f64>,
    /// Physical row index of the logically oldest trace.
    start: usize,
    stores: u64,
    evictions: u64,
}

impl<F: Scalar> TraceMemory<F> {
    pub fn new(dim: usize, cfg: MemoryConfig) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(Error::config("trace dimension must be positive"));
        }
        Ok(TraceMemory {
            cfg,
            dim,
            data: Vec::new(),
            norms: Vec::new(),
            start: 0,
            stores: 0,
            evictions: 0,
        })
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    fn physical(&self, logical: usize) -> usize {
        let rows = self.len();
        debug_assert!(logical < rows);
        let p = self.start + logical;
        if p >= rows {
            p - rows
        } else {
            p
        }
    }

    /// Trace at logical position `i` (0 = oldest surviving).
    pub fn trace(&self, i: usize) -> ArrayView1<'_, F> {
        let off = self.physical(i) * self.dim;
        ArrayView1::from(&self.data[off..off + self.dim])
    }

    #[cfg(test)]
    pub(crate) fn cached_norm(&self, i: usize) -> f64 {
        self.norms[self.physical(i)]
    }

    /// Append a trace, run one forgetting round over the table, evict the
    /// oldest row if the capacity would be exceeded.
    pub fn store(&mut self, trace: ArrayView1<F>, rng: &mut impl Rng) -> Result<StoreOutcome> {
        if trace.len() != self.dim {
            return Err(Error::config(format!(
                "trace length {} does not match memory dimension {}",
                trace.len(),
                self.dim
            )));
        }
        let at_capacity = self.cfg.capacity == Some(self.len());
        let (row, evicted) = if at_capacity {
            let row = self.start;
            self.start = (self.start + 1) % self.len();
            self.evictions += 1;
            (row, true)
        } else {
            self.norms.push(0.0);
            self.data.extend(std::iter::repeat_n(F::zero(), self.dim));
            (self.norms.len() - 1, false)
        };
        let off = row * self.dim;
        let mut sq = 0.0f64;
        for (slot, &v) in self.data[off..off + self.dim].iter_mut().zip(trace.iter()) {
            *slot = v;
            let x = v.to_f64().unwrap_or(0.0);
            sq += x * x;
        }
        self.norms[row] = sq.sqrt();
        self.stores += 1;
        self.forget(rng);
        Ok(StoreOutcome { evicted })
    }

    /// Store the observation-minus-prediction difference; a perfect prediction
    /// leaves the table untouched.
    pub fn store_discrepancy(
        &mut self,
        observation: ArrayView1<F>,
        prediction: ArrayView1<F>,
        rng: &mut impl Rng,
    ) -> Result<Option<StoreOutcome>> {
        if observation.len() != self.dim || prediction.len() != self.dim {
            return Err(Error::config(
                "observation/prediction length does not match memory dimension",
            ));
        }
        let diff = &observation - &prediction;
        if diff.iter().all(|v| *v == F::zero()) {
            return Ok(None);
        }
        self.store(diff.view(), rng).map(Some)
    }

    /// One forgetting round: each stored element is zeroed with probability
    /// `forget_rate`, realized as a binomial count of uniform positions.
    fn forget(&mut self, rng: &mut impl Rng) {
        let f = self.cfg.forget_rate;
        if f == 0.0 || self.data.is_empty() {
            return;
        }
        let n = (self.len() * self.dim) as u64;
        let hits = Binomial::new(n, f).expect("validated rate").sample(rng);
        for _ in 0..hits {
            let pos = rng.random_range(0..n) as usize;
            let old = self.data[pos].to_f64().unwrap_or(0.0);
            if old != 0.0 {
                self.data[pos] = F::zero();
                let row = pos / self.dim;
                let sq = (self.norms[row] * self.norms[row] - old * old).max(0.0);
                self.norms[row] = sq.sqrt();
            }
        }
    }

    fn checked_norm(&self, cue: ArrayView1<F>) -> Result<f64> {
        if cue.len() != self.dim {
            return Err(Error::config(format!(
                "cue length {} does not match memory dimension {}",
                cue.len(),
                self.dim
            )));
        }
        Ok(cue
            .iter()
            .map(|v| {
                let x = v.to_f64().unwrap_or(0.0);
                x * x
            })
            .sum::<f64>()
            .sqrt())
    }

    /// Dot product of the cue against every physical row in one mat-vec pass.
    fn dots(&self, cue: ArrayView1<F>) -> Array1<F> {
        let rows = ArrayView2::from_shape((self.len(), self.dim), &self.data)
            .expect("ring buffer holds len*dim elements");
        rows.dot(&cue)
    }

    /// Probe the table and return the raw (unnormalized) echo.
    pub fn retrieve(&self, cue: ArrayView1<F>) -> Result<Echo> {
        if self.is_empty() {
            return Err(Error::EmptyMemory);
        }
        let cue_norm = self.checked_norm(cue)?;
        let dots = self.dots(cue);
        let power = self.cfg.power as i32;
        let mut act = vec![0.0f64; self.len()];
        let mut total = 0.0f64;
        let mut max_a = 0.0f64;
        let mut max_abs = 0.0f64;
        for (row, a_slot) in act.iter_mut().enumerate() {
            let denom = cue_norm * self.norms[row];
            let cos = if denom > 0.0 {
                dots[row].to_f64().unwrap_or(0.0) / denom
            } else {
                0.0
            };
            if self.cfg.mask_negative_similarity && cos < 0.0 {
                continue;
            }
            let a = cos.powi(power);
            if a.abs() < ACTIVATION_FLOOR {
                continue;
            }
            total += a;
            if a > max_a {
                max_a = a;
            }
            if a.abs() > max_abs {
                max_abs = a.abs();
            }
            *a_slot = a;
        }
        let mut echo = vec![0.0f64; self.dim];
        let cutoff = max_abs * ECHO_SIGNIFICANCE;
        for (row, &a) in act.iter().enumerate() {
            if a.abs() < cutoff || a == 0.0 {
                continue;
            }
            let off = row * self.dim;
            for (e, &t) in echo.iter_mut().zip(&self.data[off..off + self.dim]) {
                *e += a * t.to_f64().unwrap_or(0.0);
            }
        }
        Ok(Echo {
            vector: Array1::from_vec(echo),
            total_activation: total,
            max_activation: max_a,
        })
    }

    /// Familiarity of `probe`, in `[-1, 1]`; an empty table knows nothing and
    /// returns the `-1` sentinel.
    pub fn recall_score(&self, probe: ArrayView1<F>) -> Result<f64> {
        if self.is_empty() {
            return Ok(-1.0);
        }
        let norm = self.checked_norm(probe)?;
        match self.cfg.recall {
            RecallMode::MaxCosine => {
                let dots = self.dots(probe);
                let mut best = f64::NEG_INFINITY;
                for (row, d) in dots.iter().enumerate() {
                    let denom = norm * self.norms[row];
                    let cos = if denom > 0.0 {
                        d.to_f64().unwrap_or(0.0) / denom
                    } else {
                        0.0
                    };
                    if cos > best {
                        best = cos;
                    }
                }
                Ok(best)
            }
            RecallMode::EchoCosine => {
                let echo = self.retrieve(probe)?;
                let e = echo.vector.as_slice().expect("contiguous");
                let dot: f64 = e
                    .iter()
                    .zip(probe.iter())
                    .map(|(a, b)| a * b.to_f64().unwrap_or(0.0))
                    .sum();
                let en = e.iter().map(|x| x * x).sum::<f64>().sqrt();
                if en * norm > 0.0 {
                    Ok((dot / (en * norm)).clamp(-1.0, 1.0))
                } else {
                    Ok(0.0)
                }
            }
        }
    }

    pub fn clear(&mut self) {
        self.data.clear();
        self.norms.clear();
        self.start = 0;
    }

    pub fn stats(&self) -> MemoryStats {
        let zero_elements = self.data.iter().filter(|v| **v == F::zero()).count();
        let (mut min, mut max, mut sum) = (f64::INFINITY, 0.0f64, 0.0f64);
        for &n in &self.norms {
            min = min.min(n);
            max = max.max(n);
            sum += n;
        }
        MemoryStats {
            rows: self.len(),
            dim: self.dim,
            capacity: self.cfg.capacity,
            stores: self.stores,
            evictions: self.evictions,
            zero_elements,
            min_norm: if self.norms.is_empty() { 0.0 } else { min },
            mean_norm: if self.norms.is_empty() {
                0.0
            } else {
                sum / self.len() as f64
            },
            max_norm: max,
        }
    }

    /// Serialize the table to a compact binary block (little-endian).
    pub fn write_binary(&self, w: &mut impl std::io::Write) -> Result<()> {
        w.write_all(b"CGMEM1")?;
        let elem = std::mem::size_of::<F>() as u32;
        w.write_all(&elem.to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.stores.to_le_bytes())?;
        w.write_all(&self.evictions.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.dim * 8);
        for i in 0..self.len() {
            buf.clear();
            for &v in self.trace(i).iter() {
                buf.extend_from_slice(&v.to_f64().unwrap_or(0.0).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    /// Rebuild a table from [`Self::write_binary`] output. Norms are
    /// recomputed from the stored values.
    pub fn read_binary(r: &mut impl std::io::Read, cfg: MemoryConfig) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != b"CGMEM1" {
            return Err(Error::protocol("bad memory block magic"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let dim = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let rows = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let stores = u64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let evictions = u64::from_le_bytes(b8);
        let mut mem = TraceMemory::new(dim, cfg)?;
        if let Some(cap) = cfg.capacity {
            if rows > cap {
                return Err(Error::protocol("memory block exceeds configured capacity"));
            }
        }
        mem.stores = stores;
        mem.evictions = evictions;
        mem.data.reserve(rows * dim);
        mem.norms.reserve(rows);
        for _ in 0..rows {
            let mut sq = 0.0f64;
            for _ in 0..dim {
                r.read_exact(&mut b8)?;
                let x = f64::from_le_bytes(b8);
                sq += x * x;
                mem.data.push(crate::ngc::cast(x));
            }
            mem.norms.push(sq.sqrt());
        }
        Ok(mem)
    }
}
