//! The circuit itself: layered states, settling, projection, Hebbian deltas.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{cast, Activation, AdamState, NgcConfig, Scalar, SynapticScaling};
use crate::{Error, Result};

/// Hard ceiling on state magnitudes during settling; beyond this the circuit
/// is declared divergent and the step aborts.
const DIVERGENCE_LIMIT: f64 = 1e6;

/// One clamped input feeding the top layer's prediction.
///
/// The stream contributes `post(W_s * pre(x_s))` to the top prediction. Plain
/// chain circuits use `pre = phi, post = identity`; composite circuits feed
/// raw vectors in (`pre = identity`) and may rectify after the matmul.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub dim: usize,
    pub pre: Activation,
    pub post: Activation,
}

impl StreamSpec {
    pub fn raw(dim: usize) -> Self {
        StreamSpec {
            dim,
            pre: Activation::Identity,
            post: Activation::Identity,
        }
    }

    pub fn raw_rectified(dim: usize) -> Self {
        StreamSpec {
            dim,
            pre: Activation::Identity,
            post: Activation::Rectifier,
        }
    }
}

/// Layer layout: input streams at the top, a chain of hidden state layers,
/// and one or more output heads predicted from the bottom hidden layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub streams: Vec<StreamSpec>,
    /// Hidden layer widths, listed top to bottom.
    pub hidden: Vec<usize>,
    pub heads: Vec<usize>,
}

impl CircuitSpec {
    /// A plain chain `input -> hidden... -> output` where the input enters
    /// through `phi` like any other layer state.
    pub fn chain(input: usize, hidden: &[usize], output: usize, phi: Activation) -> Self {
        CircuitSpec {
            streams: vec![StreamSpec {
                dim: input,
                pre: phi,
                post: Activation::Identity,
            }],
            hidden: hidden.to_vec(),
            heads: vec![output],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.streams.is_empty() || self.hidden.is_empty() || self.heads.is_empty() {
            return Err(Error::config(
                "circuit needs at least one stream, one hidden layer and one head",
            ));
        }
        if self
            .streams
            .iter()
            .map(|s| s.dim)
            .chain(self.hidden.iter().copied())
            .chain(self.heads.iter().copied())
            .any(|d| d == 0)
        {
            return Err(Error::config("circuit layer widths must be positive"));
        }
        Ok(())
    }
}

/// Ancestral projection output for a single input column.
#[derive(Debug, Clone)]
pub struct Projection<F> {
    pub hidden: Vec<Array1<F>>,
    pub heads: Vec<Array1<F>>,
}

/// Total discrepancy measured at initialization and after each settling step.
#[derive(Debug, Clone)]
pub struct SettleReport {
    pub tod: Vec<f64>,
}

impl SettleReport {
    pub fn final_tod(&self) -> f64 {
        *self.tod.last().expect("report holds at least one entry")
    }
}

/// Hebbian parameter deltas in the circuit's canonical parameter order
/// (stream `W`s, chain `W`s, head `W`s, chain `E`s, head `E`s; then biases).
#[derive(Debug, Clone)]
pub struct Deltas<F> {
    pub mats: Vec<Array2<F>>,
    pub vecs: Vec<Array1<F>>,
}

/// Optional clamps applied during settling, by layer position. Empty slices
/// mean "nothing clamped". Input streams are always clamped by construction.
#[derive(Debug, Default, Clone, Copy)]
pub struct Clamps<'a, F> {
    pub hidden: &'a [Option<ArrayView2<'a, F>>],
    pub heads: &'a [Option<ArrayView2<'a, F>>],
}

impl<'a, F> Clamps<'a, F> {
    pub fn heads_only(heads: &'a [Option<ArrayView2<'a, F>>]) -> Self {
        Clamps { hidden: &[], heads }
    }
}

#[derive(Debug, Clone)]
struct Settled<F> {
    zs: Vec<Array2<F>>,
    phi_z: Vec<Array2<F>>,
    es: Vec<Array2<F>>,
    head_es: Vec<Array2<F>>,
    pre_x: Vec<Array2<F>>,
    tod: f64,
}

/// A generative-coding circuit with learned predictive (`W`) and error (`E`)
/// synapses plus per-layer prediction biases.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NgcCircuit<F: Scalar> {
    cfg: NgcConfig,
    spec: CircuitSpec,
    stream_w: Vec<Array2<F>>,
    chain_w: Vec<Array2<F>>,
    head_w: Vec<Array2<F>>,
    chain_e: Vec<Array2<F>>,
    head_e: Vec<Array2<F>>,
    hidden_b: Vec<Array1<F>>,
    head_b: Vec<Array1<F>>,
    adam: AdamState<F>,
    #[serde(skip)]
    settled: Option<Settled<F>>,
}

impl<F: Scalar> NgcCircuit<F> {
    pub fn new(spec: CircuitSpec, cfg: NgcConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        spec.validate()?;

        let std = cfg.init_std;
        let top = spec.hidden[0];
        let bottom = *spec.hidden.last().expect("validated non-empty");
        let stream_w: Vec<_> = spec
            .streams
            .iter()
            .map(|s| gaussian_mat((top, s.dim), std, rng))
            .collect();
        let chain_w: Vec<_> = spec
            .hidden
            .windows(2)
            .map(|w| gaussian_mat((w[1], w[0]), std, rng))
            .collect();
        let head_w: Vec<_> = spec
            .heads
            .iter()
            .map(|&h| gaussian_mat((h, bottom), std, rng))
            .collect();
        let chain_e: Vec<_> = spec
            .hidden
            .windows(2)
            .map(|w| gaussian_mat((w[0], w[1]), std, rng))
            .collect();
        let head_e: Vec<_> = spec
            .heads
            .iter()
            .map(|&h| gaussian_mat((bottom, h), std, rng))
            .collect();
        let hidden_b: Vec<_> = spec.hidden.iter().map(|&h| Array1::zeros(h)).collect();
        let head_b: Vec<_> = spec.heads.iter().map(|&h| Array1::zeros(h)).collect();

        let mat_shapes: Vec<_> = stream_w
            .iter()
            .chain(&chain_w)
            .chain(&head_w)
            .chain(&chain_e)
            .chain(&head_e)
            .map(|m| m.dim())
            .collect();
        let vec_shapes: Vec<_> = hidden_b.iter().chain(&head_b).map(|b| b.len()).collect();
        let adam = AdamState::new(cfg.adam, &mat_shapes, &vec_shapes);

        Ok(NgcCircuit {
            cfg,
            spec,
            stream_w,
            chain_w,
            head_w,
            chain_e,
            head_e,
            hidden_b,
            head_b,
            adam,
            settled: None,
        })
    }

    pub fn config(&self) -> &NgcConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    fn n_hidden(&self) -> usize {
        self.spec.hidden.len()
    }

    fn check_inputs(&self, inputs: &[ArrayView2<F>]) -> Result<usize> {
        if inputs.len() != self.spec.streams.len() {
            return Err(Error::config(format!(
                "expected {} input streams, got {}",
                self.spec.streams.len(),
                inputs.len()
            )));
        }
        let batch = inputs.first().map(|x| x.ncols()).unwrap_or(0);
        for (x, s) in inputs.iter().zip(&self.spec.streams) {
            if x.nrows() != s.dim || x.ncols() != batch {
                return Err(Error::config(format!(
                    "input stream shape {:?} does not match (dim {}, batch {})",
                    x.dim(),
                    s.dim,
                    batch
                )));
            }
        }
        if batch == 0 {
            return Err(Error::config("batch must contain at least one column"));
        }
        Ok(batch)
    }

    /// Pre-activated inputs and the (constant) top-layer prediction they induce.
    fn top_prediction(&self, inputs: &[ArrayView2<F>], batch: usize) -> (Vec<Array2<F>>, Array2<F>) {
        let top = self.spec.hidden[0];
        let mut zbar0 = Array2::zeros((top, batch));
        let mut pre_x = Vec::with_capacity(inputs.len());
        for ((x, s), w) in inputs.iter().zip(&self.spec.streams).zip(&self.stream_w) {
            let px = s.pre.map(&x.to_owned());
            let mut contrib = w.dot(&px);
            if s.post != Activation::Identity {
                contrib.mapv_inplace(|v| s.post.apply(v));
            }
            zbar0 += &contrib;
            pre_x.push(px);
        }
        zbar0 += &self.hidden_b[0].view().insert_axis(Axis(1));
        (pre_x, zbar0)
    }

    /// Ancestral projection: one prediction sweep from the clamped inputs down
    /// to the heads. Pure; the circuit's stored settle state is untouched.
    pub fn project_batch(&self, inputs: &[ArrayView2<F>]) -> Result<(Vec<Array2<F>>, Vec<Array2<F>>)> {
        let batch = self.check_inputs(inputs)?;
        let (_, zbar0) = self.top_prediction(inputs, batch);
        let mut hidden = Vec::with_capacity(self.n_hidden());
        hidden.push(zbar0);
        for i in 1..self.n_hidden() {
            let phi = self.cfg.activation.map(&hidden[i - 1]);
            let mut z = self.chain_w[i - 1].dot(&phi);
            z += &self.hidden_b[i].view().insert_axis(Axis(1));
            hidden.push(z);
        }
        let phi_last = self.cfg.activation.map(hidden.last().expect("non-empty"));
        let heads = self
            .head_w
            .iter()
            .zip(&self.head_b)
            .map(|(w, b)| {
                let mut c = w.dot(&phi_last);
                c += &b.view().insert_axis(Axis(1));
                c
            })
            .collect();
        Ok((hidden, heads))
    }

    /// Single-column convenience wrapper around [`Self::project_batch`].
    pub fn project(&self, inputs: &[ndarray::ArrayView1<F>]) -> Result<Projection<F>> {
        let cols: Vec<Array2<F>> = inputs
            .iter()
            .map(|v| v.to_owned().insert_axis(Axis(1)))
            .collect();
        let views: Vec<ArrayView2<F>> = cols.iter().map(|c| c.view()).collect();
        let (hidden, heads) = self.project_batch(&views)?;
        Ok(Projection {
            hidden: hidden.into_iter().map(|m| m.index_axis_move(Axis(1), 0)).collect(),
            heads: heads.into_iter().map(|m| m.index_axis_move(Axis(1), 0)).collect(),
        })
    }

    /// Relax free states for `K` steps against the clamped inputs/targets,
    /// leaving a consistent (state, error) pair stored for Hebbian updates.
    ///
    /// Free hidden layers start from their ancestral projection; unclamped
    /// heads simply track their predictions (zero error). Returns the total
    /// discrepancy at initialization and after every step.
    pub fn settle(&mut self, inputs: &[ArrayView2<F>], clamps: Clamps<'_, F>) -> Result<SettleReport> {
        let batch = self.check_inputs(inputs)?;
        let n = self.n_hidden();
        if !clamps.hidden.is_empty() && clamps.hidden.len() != n {
            return Err(Error::config("hidden clamp list length mismatch"));
        }
        if !clamps.heads.is_empty() && clamps.heads.len() != self.spec.heads.len() {
            return Err(Error::config("head clamp list length mismatch"));
        }
        let hidden_clamp = |i: usize| clamps.hidden.get(i).copied().flatten();
        let head_clamp = |h: usize| clamps.heads.get(h).copied().flatten();
        for i in 0..n {
            if let Some(c) = hidden_clamp(i) {
                if c.dim() != (self.spec.hidden[i], batch) {
                    return Err(Error::config(format!(
                        "hidden clamp {i} shape {:?} mismatch",
                        c.dim()
                    )));
                }
            }
        }
        for h in 0..self.spec.heads.len() {
            if let Some(c) = head_clamp(h) {
                if c.dim() != (self.spec.heads[h], batch) {
                    return Err(Error::config(format!(
                        "head clamp {h} shape {:?} mismatch",
                        c.dim()
                    )));
                }
            }
        }

        let (pre_x, zbar0) = self.top_prediction(inputs, batch);

        // Initialize states from the ancestral projection, overriding clamped
        // layers with their clamped values.
        let mut zs: Vec<Array2<F>> = Vec::with_capacity(n);
        for i in 0..n {
            let projected = if i == 0 {
                zbar0.clone()
            } else {
                let phi = self.cfg.activation.map(&zs[i - 1]);
                let mut z = self.chain_w[i - 1].dot(&phi);
                z += &self.hidden_b[i].view().insert_axis(Axis(1));
                z
            };
            zs.push(match hidden_clamp(i) {
                Some(c) => c.to_owned(),
                None => projected,
            });
        }
        let head_states: Vec<Option<Array2<F>>> = (0..self.spec.heads.len())
            .map(|h| head_clamp(h).map(|c| c.to_owned()))
            .collect();

        let mut phi_z: Vec<Array2<F>> = zs.iter().map(|z| self.cfg.activation.map(z)).collect();
        let mut zbar: Vec<Array2<F>> = zs.iter().map(|z| Array2::zeros(z.raw_dim())).collect();
        let mut es: Vec<Array2<F>> = zs.iter().map(|z| Array2::zeros(z.raw_dim())).collect();
        let mut cs: Vec<Array2<F>> = self
            .spec
            .heads
            .iter()
            .map(|&h| Array2::zeros((h, batch)))
            .collect();
        let mut head_es = cs.clone();
        let mut up: Vec<Array2<F>> = zs.iter().map(|z| Array2::zeros(z.raw_dim())).collect();

        let one = F::one();
        let zero = F::zero();
        let beta: F = cast(self.cfg.beta);
        let leak: F = cast(self.cfg.leak);
        let act = self.cfg.activation;

        let refresh =
            |zs: &[Array2<F>], phi_z: &mut [Array2<F>], zbar: &mut [Array2<F>], es: &mut [Array2<F>], cs: &mut [Array2<F>], head_es: &mut [Array2<F>]| {
                for (p, z) in phi_z.iter_mut().zip(zs) {
                    ndarray::Zip::from(p).and(z).for_each(|p, &z| *p = act.apply(z));
                }
                zbar[0].assign(&zbar0);
                for i in 1..n {
                    general_mat_mul(one, &self.chain_w[i - 1], &phi_z[i - 1], zero, &mut zbar[i]);
                    zbar[i] += &self.hidden_b[i].view().insert_axis(Axis(1));
                }
                for i in 0..n {
                    ndarray::Zip::from(&mut es[i])
                        .and(&zs[i])
                        .and(&zbar[i])
                        .for_each(|e, &z, &p| *e = z - p);
                }
                let mut tod = 0.0f64;
                for e in es.iter() {
                    tod += e.iter().map(|&x| { let x = x.to_f64().unwrap_or(f64::INFINITY); x * x }).sum::<f64>();
                }
                for h in 0..cs.len() {
                    general_mat_mul(one, &self.head_w[h], &phi_z[n - 1], zero, &mut cs[h]);
                    cs[h] += &self.head_b[h].view().insert_axis(Axis(1));
                    match &head_states[h] {
                        Some(target) => {
                            ndarray::Zip::from(&mut head_es[h])
                                .and(target)
                                .and(&cs[h])
                                .for_each(|e, &t, &c| *e = t - c);
                            tod += head_es[h]
                                .iter()
                                .map(|&x| { let x = x.to_f64().unwrap_or(f64::INFINITY); x * x })
                                .sum::<f64>();
                        }
                        None => head_es[h].fill(zero),
                    }
                }
                tod
            };

        let mut tod_trace = Vec::with_capacity(self.cfg.settle_steps + 1);
        tod_trace.push(refresh(&zs, &mut phi_z, &mut zbar, &mut es, &mut cs, &mut head_es));

        for _ in 0..self.cfg.settle_steps {
            // Mismatch pressure from below: the layer's own error plus the
            // error of whatever it predicts, carried up through E.
            for i in 0..n {
                if i + 1 < n {
                    general_mat_mul(one, &self.chain_e[i], &es[i + 1], zero, &mut up[i]);
                } else {
                    up[i].fill(zero);
                    for h in 0..self.spec.heads.len() {
                        if head_states[h].is_some() {
                            general_mat_mul(one, &self.head_e[h], &head_es[h], one, &mut up[i]);
                        }
                    }
                }
            }
            let mut max_abs = 0.0f64;
            for i in 0..n {
                if hidden_clamp(i).is_some() {
                    continue;
                }
                ndarray::Zip::from(&mut zs[i])
                    .and(&es[i])
                    .and(&up[i])
                    .for_each(|z, &e, &u| *z = *z + beta * (-leak * *z - e + u));
                for &z in zs[i].iter() {
                    let a = z.to_f64().unwrap_or(f64::INFINITY).abs();
                    if a > max_abs {
                        max_abs = a;
                    }
                }
            }
            if max_abs > DIVERGENCE_LIMIT || !max_abs.is_finite() {
                self.settled = None;
                return Err(Error::Divergence {
                    context: "ngc settle",
                    value: max_abs,
                });
            }
            tod_trace.push(refresh(&zs, &mut phi_z, &mut zbar, &mut es, &mut cs, &mut head_es));
        }

        let tod = *tod_trace.last().expect("trace non-empty");
        self.settled = Some(Settled {
            zs,
            phi_z,
            es,
            head_es,
            pre_x,
            tod,
        });
        Ok(SettleReport { tod: tod_trace })
    }

    /// Total discrepancy of the most recent [`Self::settle`] call.
    pub fn last_discrepancy(&self) -> Option<f64> {
        self.settled.as_ref().map(|s| s.tod)
    }

    /// Hidden state columns from the most recent settle (top to bottom).
    pub fn settled_states(&self) -> Option<&[Array2<F>]> {
        self.settled.as_ref().map(|s| s.zs.as_slice())
    }

    /// Hebbian deltas from the stored settle state, in canonical order.
    pub fn hebbian_deltas(&self) -> Result<Deltas<F>> {
        let s = self
            .settled
            .as_ref()
            .ok_or_else(|| Error::protocol("hebbian_deltas requires a prior settle"))?;
        let n = self.n_hidden();
        let gamma_e: F = cast(self.cfg.error_scale);

        let mut mats = Vec::with_capacity(
            self.stream_w.len() + 2 * self.chain_w.len() + 2 * self.head_w.len(),
        );
        for px in &s.pre_x {
            mats.push(s.es[0].dot(&px.t()));
        }
        let chain_start = mats.len();
        for i in 0..self.chain_w.len() {
            mats.push(s.es[i + 1].dot(&s.phi_z[i].t()));
        }
        let head_start = mats.len();
        for h in 0..self.head_w.len() {
            mats.push(s.head_es[h].dot(&s.phi_z[n - 1].t()));
        }
        for i in chain_start..chain_start + self.chain_w.len() {
            mats.push(mats[i].t().to_owned() * gamma_e);
        }
        for h in head_start..head_start + self.head_w.len() {
            mats.push(mats[h].t().to_owned() * gamma_e);
        }

        let mut vecs = Vec::with_capacity(n + self.head_b.len());
        for e in &s.es {
            vecs.push(e.sum_axis(Axis(1)));
        }
        for e in &s.head_es {
            vecs.push(e.sum_axis(Axis(1)));
        }
        Ok(Deltas { mats, vecs })
    }

    /// Adam step along the supplied deltas, then optional synaptic scaling.
    pub fn apply_update(&mut self, deltas: &Deltas<F>) {
        let mut mats: Vec<&mut Array2<F>> = self
            .stream_w
            .iter_mut()
            .chain(self.chain_w.iter_mut())
            .chain(self.head_w.iter_mut())
            .chain(self.chain_e.iter_mut())
            .chain(self.head_e.iter_mut())
            .collect();
        let mat_refs: Vec<&Array2<F>> = deltas.mats.iter().collect();
        let mut vecs: Vec<&mut Array1<F>> = self
            .hidden_b
            .iter_mut()
            .chain(self.head_b.iter_mut())
            .collect();
        let vec_refs: Vec<&Array1<F>> = deltas.vecs.iter().collect();
        self.adam.apply(&mut mats, &mat_refs, &mut vecs, &vec_refs);

        if self.cfg.scaling == SynapticScaling::UnitColumns {
            for w in self
                .stream_w
                .iter_mut()
                .chain(self.chain_w.iter_mut())
                .chain(self.head_w.iter_mut())
            {
                scale_columns_to_unit(w);
            }
            for e in self.chain_e.iter_mut().chain(self.head_e.iter_mut()) {
                let mut t = e.view_mut().reversed_axes();
                scale_columns_to_unit_view(&mut t);
            }
        }
    }

    /// Settle on a batch and immediately apply the resulting Hebbian update.
    pub fn settle_and_update(
        &mut self,
        inputs: &[ArrayView2<F>],
        clamps: Clamps<'_, F>,
    ) -> Result<SettleReport> {
        let report = self.settle(inputs, clamps)?;
        let deltas = self.hebbian_deltas()?;
        self.apply_update(&deltas);
        Ok(report)
    }

    pub fn adam_steps(&self) -> u64 {
        self.adam.steps_taken()
    }

    // Direct parameter access, for hand-built circuits and diagnostics.
    pub fn stream_w_mut(&mut self, s: usize) -> &mut Array2<F> {
        &mut self.stream_w[s]
    }
    pub fn chain_w_mut(&mut self, i: usize) -> &mut Array2<F> {
        &mut self.chain_w[i]
    }
    pub fn head_w_mut(&mut self, h: usize) -> &mut Array2<F> {
        &mut self.head_w[h]
    }
    pub fn chain_e_mut(&mut self, i: usize) -> &mut Array2<F> {
        &mut self.chain_e[i]
    }
    pub fn head_e_mut(&mut self, h: usize) -> &mut Array2<F> {
        &mut self.head_e[h]
    }
    pub fn hidden_b_mut(&mut self, i: usize) -> &mut Array1<F> {
        &mut self.hidden_b[i]
    }
    pub fn head_b_mut(&mut self, h: usize) -> &mut Array1<F> {
        &mut self.head_b[h]
    }
    #[cfg(test)]
    pub(crate) fn all_mats(&self) -> Vec<&Array2<F>> {
        self.stream_w
            .iter()
            .chain(&self.chain_w)
            .chain(&self.head_w)
            .chain(&self.chain_e)
            .chain(&self.head_e)
            .collect()
    }
    #[cfg(test)]
    pub(crate) fn all_vecs(&self) -> Vec<&Array1<F>> {
        self.hidden_b.iter().chain(&self.head_b).collect()
    }
}

fn gaussian_mat<F: Scalar>(shape: (usize, usize), std: f64, rng: &mut impl Rng) -> Array2<F> {
    if std == 0.0 {
        return Array2::zeros(shape);
    }
    let normal = Normal::new(0.0, std).expect("validated std");
    Array2::from_shape_simple_fn(shape, || cast(normal.sample(rng)))
}

fn scale_columns_to_unit<F: Scalar>(w: &mut Array2<F>) {
    let mut view = w.view_mut();
    scale_columns_to_unit_view(&mut view);
}

fn scale_columns_to_unit_view<F: Scalar>(w: &mut ndarray::ArrayViewMut2<F>) {
    let one = F::one();
    for mut col in w.columns_mut() {
        let norm = col.iter().fold(F::zero(), |acc, &x| acc + x * x).sqrt();
        if norm > one {
            let inv = one / norm;
            col.mapv_inplace(|x| x * inv);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngc::AdamConfig;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::RngExt;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn seeded(n: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(n)
    }

    fn col(v: &[f64]) -> Array2<f64> {
        Array1::from_vec(v.to_vec()).insert_axis(Axis(1))
    }

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    struct ScalarParams {
        w_in: f64,
        w_out: f64,
        e_syn: f64,
        b_h: f64,
        b_o: f64,
    }

    fn scalar_circuit(p: &ScalarParams, cfg: NgcConfig) -> NgcCircuit<f64> {
        let spec = CircuitSpec::chain(1, &[1], 1, cfg.activation);
        let mut cfg = cfg;
        cfg.init_std = 0.0;
        let mut c = NgcCircuit::new(spec, cfg, &mut seeded(0)).unwrap();
        c.stream_w_mut(0)[[0, 0]] = p.w_in;
        c.head_w_mut(0)[[0, 0]] = p.w_out;
        c.head_e_mut(0)[[0, 0]] = p.e_syn;
        c.hidden_b_mut(0)[0] = p.b_h;
        c.head_b_mut(0)[0] = p.b_o;
        c
    }

    /// Hand iteration of the scalar circuit: one clamped input, one free state,
    /// one clamped output. Written against the update equations directly.
    fn scalar_oracle(p: &ScalarParams, cfg: &NgcConfig, x: f64, target: f64) -> (f64, Vec<f64>) {
        let act = |v: f64| match cfg.activation {
            Activation::Identity => v,
            Activation::Rectifier => v.max(0.0),
        };
        let zbar0 = p.w_in * act(x) + p.b_h;
        let errors = |z: f64| {
            let e_h = z - zbar0;
            let e_o = target - (p.w_out * act(z) + p.b_o);
            (e_h, e_o)
        };
        let mut z = zbar0;
        let (mut e_h, mut e_o) = errors(z);
        let mut tods = vec![e_h * e_h + e_o * e_o];
        for _ in 0..cfg.settle_steps {
            z += cfg.beta * (-cfg.leak * z - e_h + p.e_syn * e_o);
            let e = errors(z);
            e_h = e.0;
            e_o = e.1;
            tods.push(e_h * e_h + e_o * e_o);
        }
        (z, tods)
    }

    fn settle_scalar(
        p: &ScalarParams,
        cfg: NgcConfig,
        x: f64,
        target: f64,
    ) -> (NgcCircuit<f64>, SettleReport) {
        let mut c = scalar_circuit(p, cfg);
        let xs = col(&[x]);
        let ts = col(&[target]);
        let report = c
            .settle(&[xs.view()], Clamps::heads_only(&[Some(ts.view())]))
            .unwrap();
        (c, report)
    }

    #[test]
    fn settle_matches_scalar_hand_iteration() {
        let cases: [(Activation, ScalarParams, f64, f64, f64, f64); 5] = [
            (
                Activation::Rectifier,
                ScalarParams { w_in: 1.0, w_out: 1.0, e_syn: 1.0, b_h: 0.0, b_o: 0.0 },
                1.0,
                0.0,
                0.1,
                0.0,
            ),
            (
                Activation::Rectifier,
                ScalarParams { w_in: 0.7, w_out: -1.2, e_syn: 0.4, b_h: 0.1, b_o: -0.2 },
                0.8,
                0.5,
                0.1,
                1e-3,
            ),
            (
                Activation::Identity,
                ScalarParams { w_in: -0.5, w_out: 0.9, e_syn: -0.8, b_h: 0.0, b_o: 0.3 },
                -1.0,
                0.25,
                0.05,
                0.01,
            ),
            (
                Activation::Rectifier,
                ScalarParams { w_in: -0.5, w_out: 0.9, e_syn: 0.8, b_h: -0.3, b_o: 0.3 },
                1.0,
                0.25,
                0.2,
                0.0,
            ),
            (
                Activation::Identity,
                ScalarParams { w_in: 1.3, w_out: 0.6, e_syn: 0.6, b_h: 0.2, b_o: -0.1 },
                0.4,
                -0.7,
                0.15,
                5e-3,
            ),
        ];
        for (activation, p, x, target, beta, leak) in cases {
            let cfg = NgcConfig {
                activation,
                beta,
                leak,
                ..NgcConfig::default()
            };
            let (want_z, want_tods) = scalar_oracle(&p, &cfg, x, target);
            let (c, report) = settle_scalar(&p, cfg, x, target);
            assert_eq!(report.tod.len(), want_tods.len());
            for (got, want) in report.tod.iter().zip(&want_tods) {
                assert!((got - want).abs() < 1e-12, "tod {got} vs {want}");
            }
            let got_z = c.settled_states().unwrap()[0][[0, 0]];
            assert!((got_z - want_z).abs() < 1e-12, "state {got_z} vs {want_z}");
            assert_eq!(c.last_discrepancy(), Some(report.final_tod()));
        }
    }

    #[test]
    fn canonical_scalar_trajectory_first_steps() {
        let p = ScalarParams { w_in: 1.0, w_out: 1.0, e_syn: 1.0, b_h: 0.0, b_o: 0.0 };
        let cfg = |k: usize| NgcConfig {
            settle_steps: k,
            beta: 0.1,
            leak: 0.0,
            activation: Activation::Rectifier,
            ..NgcConfig::default()
        };
        let (c1, _) = settle_scalar(&p, cfg(1), 1.0, 0.0);
        assert!((c1.settled_states().unwrap()[0][[0, 0]] - 0.9).abs() < 1e-15);
        let (c2, report) = settle_scalar(&p, cfg(2), 1.0, 0.0);
        assert!((c2.settled_states().unwrap()[0][[0, 0]] - 0.82).abs() < 1e-15);
        let want = [1.0, 0.82, 0.7048];
        for (got, want) in report.tod.iter().zip(&want) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn settle_report_has_initial_plus_k_entries() {
        let p = ScalarParams { w_in: 1.0, w_out: 1.0, e_syn: 1.0, b_h: 0.0, b_o: 0.0 };
        let cfg = NgcConfig {
            settle_steps: 7,
            ..NgcConfig::default()
        };
        let (_, report) = settle_scalar(&p, cfg, 1.0, 0.0);
        assert_eq!(report.tod.len(), 8);
    }

    #[test]
    fn no_clamp_no_leak_settle_is_ancestral_projection() {
        let cfg = NgcConfig {
            leak: 0.0,
            ..NgcConfig::default()
        };
        let spec = CircuitSpec::chain(4, &[6, 5], 3, Activation::Rectifier);
        let mut c = NgcCircuit::<f64>::new(spec, cfg, &mut seeded(7)).unwrap();
        let x = col(&[0.3, -0.8, 1.2, 0.05]);
        let (hidden, _) = c.project_batch(&[x.view()]).unwrap();
        let report = c.settle(&[x.view()], Clamps::default()).unwrap();
        for tod in &report.tod {
            assert_eq!(*tod, 0.0);
        }
        let states = c.settled_states().unwrap();
        for (z, h) in states.iter().zip(&hidden) {
            assert!(max_abs_diff(z, h) < 1e-14);
        }
    }

    #[test]
    fn zero_error_fixed_point_is_stationary() {
        let cfg = NgcConfig {
            leak: 0.0,
            ..NgcConfig::default()
        };
        let spec = CircuitSpec::chain(5, &[8, 6], 4, Activation::Rectifier);
        let mut c = NgcCircuit::<f64>::new(spec, cfg, &mut seeded(11)).unwrap();
        let x = col(&[0.4, -0.2, 0.9, 0.1, -0.6]);
        let (_, heads) = c.project_batch(&[x.view()]).unwrap();
        let target = heads[0].clone();
        let report = c
            .settle(&[x.view()], Clamps::heads_only(&[Some(target.view())]))
            .unwrap();
        assert!(report.final_tod() < 1e-18);
        let deltas = c.hebbian_deltas().unwrap();
        for m in &deltas.mats {
            assert!(m.iter().all(|v| v.abs() < 1e-12));
        }
        for v in &deltas.vecs {
            assert!(v.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn hebbian_deltas_are_outer_products() {
        let cfg = NgcConfig {
            settle_steps: 1,
            leak: 0.0,
            error_scale: 0.5,
            init_std: 0.0,
            activation: Activation::Identity,
            ..NgcConfig::default()
        };
        let spec = CircuitSpec::chain(2, &[2], 2, Activation::Identity);
        let mut c = NgcCircuit::<f64>::new(spec, cfg, &mut seeded(0)).unwrap();
        let x = col(&[5.0, 6.0]);
        let zc = col(&[3.0, 4.0]);
        let tc = col(&[1.0, 2.0]);
        c.settle(
            &[x.view()],
            Clamps {
                hidden: &[Some(zc.view())],
                heads: &[Some(tc.view())],
            },
        )
        .unwrap();
        let deltas = c.hebbian_deltas().unwrap();
        assert_eq!(deltas.mats.len(), 3);
        assert_eq!(deltas.mats[0], array![[15.0, 18.0], [20.0, 24.0]]);
        assert_eq!(deltas.mats[1], array![[3.0, 4.0], [6.0, 8.0]]);
        assert_eq!(deltas.mats[2], array![[1.5, 3.0], [2.0, 4.0]]);
        assert_eq!(deltas.vecs.len(), 2);
        assert_eq!(deltas.vecs[0], array![3.0, 4.0]);
        assert_eq!(deltas.vecs[1], array![1.0, 2.0]);
    }

    #[test]
    fn hebbian_presynaptic_terms_respect_stream_and_state_transforms() {
        let cfg = NgcConfig {
            settle_steps: 1,
            leak: 0.0,
            error_scale: 0.5,
            init_std: 0.0,
            activation: Activation::Rectifier,
            ..NgcConfig::default()
        };
        let spec = CircuitSpec {
            streams: vec![StreamSpec::raw(2)],
            hidden: vec![2],
            heads: vec![2],
        };
        let mut c = NgcCircuit::<f64>::new(spec, cfg, &mut seeded(0)).unwrap();
        let x = col(&[-5.0, 6.0]);
        let zc = col(&[3.0, -4.0]);
        let tc = col(&[1.0, 2.0]);
        c.settle(
            &[x.view()],
            Clamps {
                hidden: &[Some(zc.view())],
                heads: &[Some(tc.view())],
            },
        )
        .unwrap();
        let deltas = c.hebbian_deltas().unwrap();
        // Raw stream: presynaptic term keeps the negative input component.
        assert_eq!(deltas.mats[0], array![[-15.0, 18.0], [20.0, -24.0]]);
        // Head synapses see the rectified state, so the -4 column is dark.
        assert_eq!(deltas.mats[1], array![[3.0, 0.0], [6.0, 0.0]]);
        assert_eq!(deltas.mats[2], array![[1.5, 3.0], [0.0, 0.0]]);
        assert_eq!(deltas.vecs[0], array![3.0, -4.0]);
        assert_eq!(deltas.vecs[1], array![1.0, 2.0]);
    }

    #[test]
    fn batched_settle_matches_per_column_settles() {
        let spec = CircuitSpec::chain(3, &[5, 4], 2, Activation::Rectifier);
        let mut c = NgcCircuit::<f64>::new(spec, NgcConfig::default(), &mut seeded(3)).unwrap();
        let xs = [
            col(&[0.2, -0.4, 0.7]),
            col(&[-1.0, 0.3, 0.5]),
            col(&[0.0, 0.9, -0.2]),
        ];
        let ts = [col(&[0.5, -0.5]), col(&[0.1, 0.2]), col(&[-0.3, 0.8])];

        let mut batch_x = Array2::zeros((3, 3));
        let mut batch_t = Array2::zeros((2, 3));
        for j in 0..3 {
            batch_x.column_mut(j).assign(&xs[j].column(0));
            batch_t.column_mut(j).assign(&ts[j].column(0));
        }
        let report = c
            .settle(&[batch_x.view()], Clamps::heads_only(&[Some(batch_t.view())]))
            .unwrap();
        let batch_states: Vec<Array2<f64>> =
            c.settled_states().unwrap().iter().cloned().collect();
        let batch_deltas = c.hebbian_deltas().unwrap();

        let mut tod_sum = 0.0;
        let mut delta_sums: Option<Deltas<f64>> = None;
        for j in 0..3 {
            let r = c
                .settle(&[xs[j].view()], Clamps::heads_only(&[Some(ts[j].view())]))
                .unwrap();
            tod_sum += r.final_tod();
            for (layer, z) in c.settled_states().unwrap().iter().enumerate() {
                let batch_col = batch_states[layer].column(j).to_owned().insert_axis(Axis(1));
                assert!(max_abs_diff(&z.to_owned(), &batch_col) < 1e-12);
            }
            let d = c.hebbian_deltas().unwrap();
            delta_sums = Some(match delta_sums {
                None => d,
                Some(mut acc) => {
                    for (a, b) in acc.mats.iter_mut().zip(&d.mats) {
                        *a += b;
                    }
                    for (a, b) in acc.vecs.iter_mut().zip(&d.vecs) {
                        *a += b;
                    }
                    acc
                }
            });
        }
        assert!((report.final_tod() - tod_sum).abs() < 1e-9);
        let sums = delta_sums.unwrap();
        for (a, b) in batch_deltas.mats.iter().zip(&sums.mats) {
            assert!(max_abs_diff(a, b) < 1e-9);
        }
        for (a, b) in batch_deltas.vecs.iter().zip(&sums.vecs) {
            let diff = a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-9);
        }
    }

    #[test]
    fn projection_is_affine_chain() {
        let cfg = NgcConfig {
            init_std: 0.0,
            activation: Activation::Identity,
            ..NgcConfig::default()
        };
        let spec = CircuitSpec::chain(2, &[2], 2, Activation::Identity);
        let mut c = NgcCircuit::<f64>::new(spec, cfg, &mut seeded(0)).unwrap();
        c.stream_w_mut(0).assign(&array![[1.0, 2.0], [3.0, 4.0]]);
        c.head_w_mut(0).assign(&array![[1.0, 0.0], [0.0, 1.0]]);
        let x = array![1.0, 1.0];
        let proj = c.project(&[x.view()]).unwrap();
        assert_eq!(proj.hidden[0], array![3.0, 7.0]);
        assert_eq!(proj.heads[0], array![3.0, 7.0]);

        // With all synapses dark, each layer's projection is its bias.
        let spec = CircuitSpec::chain(2, &[2, 3], 2, Activation::Identity);
        let cfg = NgcConfig {
            init_std: 0.0,
            activation: Activation::Identity,
            ..NgcConfig::default()
        };
        let mut c = NgcCircuit::<f64>::new(spec, cfg, &mut seeded(0)).unwrap();
        c.hidden_b_mut(0).assign(&array![0.5, -0.5]);
        c.hidden_b_mut(1).assign(&array![1.0, 2.0, 3.0]);
        c.head_b_mut(0).assign(&array![-1.0, 4.0]);
        let proj = c.project(&[x.view()]).unwrap();
        assert_eq!(proj.hidden[0], array![0.5, -0.5]);
        assert_eq!(proj.hidden[1], array![1.0, 2.0, 3.0]);
        assert_eq!(proj.heads[0], array![-1.0, 4.0]);
    }

    #[test]
    fn composite_stream_transforms_apply() {
        let cfg = NgcConfig {
            init_std: 0.0,
            activation: Activation::Identity,
            ..NgcConfig::default()
        };
        let spec = CircuitSpec {
            streams: vec![StreamSpec::raw(1), StreamSpec::raw_rectified(1)],
            hidden: vec![1],
            heads: vec![1],
        };
        let mut c = NgcCircuit::<f64>::new(spec, cfg, &mut seeded(0)).unwrap();
        c.stream_w_mut(0)[[0, 0]] = 2.0;
        c.stream_w_mut(1)[[0, 0]] = -3.0;
        let a = array![0.5];
        let pos = array![1.0];
        let neg = array![-1.0];
        let proj = c.project(&[a.view(), pos.view()]).unwrap();
        assert_eq!(proj.hidden[0], array![1.0]);
        let proj = c.project(&[a.view(), neg.view()]).unwrap();
        assert_eq!(proj.hidden[0], array![4.0]);
    }

    #[test]
    fn tod_sums_squared_errors_across_layers() {
        let cfg = NgcConfig {
            init_std: 0.0,
            leak: 0.0,
            ..NgcConfig::default()
        };
        let spec = CircuitSpec {
            streams: vec![StreamSpec::raw(1)],
            hidden: vec![1],
            heads: vec![2],
        };
        let mut c = NgcCircuit::<f64>::new(spec, cfg, &mut seeded(0)).unwrap();
        let x = col(&[0.0]);
        let zc = col(&[3.0]);
        let tc = col(&[1.0, -2.0]);
        let report = c
            .settle(
                &[x.view()],
                Clamps {
                    hidden: &[Some(zc.view())],
                    heads: &[Some(tc.view())],
                },
            )
            .unwrap();
        assert_eq!(report.tod.len(), 11);
        for tod in &report.tod {
            assert!((tod - 14.0).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_head_settle_only_learns_clamped_heads() {
        let spec = CircuitSpec {
            streams: vec![StreamSpec::raw(3), StreamSpec::raw_rectified(2)],
            hidden: vec![5, 4],
            heads: vec![2, 3],
        };
        let mut c = NgcCircuit::<f64>::new(spec, NgcConfig::default(), &mut seeded(5)).unwrap();
        let x0 = col(&[0.1, -0.2, 0.3]);
        let x1 = col(&[0.4, 0.5]);
        let t0 = col(&[1.0, -1.0]);
        c.settle(
            &[x0.view(), x1.view()],
            Clamps::heads_only(&[Some(t0.view()), None]),
        )
        .unwrap();
        let deltas = c.hebbian_deltas().unwrap();
        let shapes: Vec<(usize, usize)> = deltas.mats.iter().map(|m| m.dim()).collect();
        assert_eq!(
            shapes,
            vec![(5, 3), (5, 2), (4, 5), (2, 4), (3, 4), (5, 4), (4, 2), (4, 3)]
        );
        let lens: Vec<usize> = deltas.vecs.iter().map(|v| v.len()).collect();
        assert_eq!(lens, vec![5, 4, 2, 3]);
        // The unclamped head carries zero error, so its synapses stay put.
        assert!(deltas.mats[4].iter().all(|v| *v == 0.0));
        assert!(deltas.mats[7].iter().all(|v| *v == 0.0));
        assert!(deltas.vecs[3].iter().all(|v| *v == 0.0));
        // The clamped head does move.
        assert!(deltas.mats[3].iter().any(|v| v.abs() > 1e-6));
    }

    #[test]
    fn divergent_settle_reports_error() {
        let p = ScalarParams { w_in: 1.0, w_out: 60.0, e_syn: 60.0, b_h: 0.0, b_o: 0.0 };
        let cfg = NgcConfig {
            beta: 1.0,
            leak: 0.0,
            activation: Activation::Identity,
            ..NgcConfig::default()
        };
        let mut c = scalar_circuit(&p, cfg);
        let x = col(&[1.0]);
        let t = col(&[1.0]);
        let got = c.settle(&[x.view()], Clamps::heads_only(&[Some(t.view())]));
        assert!(matches!(got, Err(Error::Divergence { .. })));
        assert!(c.settled_states().is_none());
    }

    #[test]
    fn hebbian_requires_settle() {
        let spec = CircuitSpec::chain(2, &[2], 1, Activation::Rectifier);
        let c = NgcCircuit::<f64>::new(spec, NgcConfig::default(), &mut seeded(0)).unwrap();
        assert!(matches!(c.hebbian_deltas(), Err(Error::Protocol(_))));
    }

    #[test]
    fn settle_and_project_leave_parameters_untouched() {
        let spec = CircuitSpec::chain(3, &[4, 4], 2, Activation::Rectifier);
        let mut c = NgcCircuit::<f64>::new(spec, NgcConfig::default(), &mut seeded(9)).unwrap();
        let before: Vec<Array2<f64>> = c.all_mats().into_iter().cloned().collect();
        let x = col(&[0.1, 0.2, 0.3]);
        let t = col(&[1.0, -1.0]);
        c.settle(&[x.view()], Clamps::heads_only(&[Some(t.view())]))
            .unwrap();
        c.project(&[x.column(0)]).unwrap();
        let after: Vec<Array2<f64>> = c.all_mats().into_iter().cloned().collect();
        for (a, b) in before.iter().zip(&after) {
            assert_eq!(a, b);
        }
        assert_eq!(c.adam_steps(), 0);
        let deltas = c.hebbian_deltas().unwrap();
        c.apply_update(&deltas);
        assert_eq!(c.adam_steps(), 1);
        let moved: Vec<Array2<f64>> = c.all_mats().into_iter().cloned().collect();
        assert!(moved.iter().zip(&after).any(|(a, b)| a != b));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let bad = [
            NgcConfig { settle_steps: 0, ..NgcConfig::default() },
            NgcConfig { beta: 0.0, ..NgcConfig::default() },
            NgcConfig { beta: 1.5, ..NgcConfig::default() },
            NgcConfig { leak: -0.1, ..NgcConfig::default() },
            NgcConfig { error_scale: 0.0, ..NgcConfig::default() },
            NgcConfig { init_std: -1.0, ..NgcConfig::default() },
        ];
        for cfg in bad {
            let spec = CircuitSpec::chain(2, &[2], 1, Activation::Rectifier);
            assert!(NgcCircuit::<f64>::new(spec, cfg, &mut seeded(0)).is_err());
        }

        let empty_hidden = CircuitSpec {
            streams: vec![StreamSpec::raw(2)],
            hidden: vec![],
            heads: vec![1],
        };
        assert!(NgcCircuit::<f64>::new(empty_hidden, NgcConfig::default(), &mut seeded(0)).is_err());
        let zero_width = CircuitSpec {
            streams: vec![StreamSpec::raw(0)],
            hidden: vec![2],
            heads: vec![1],
        };
        assert!(NgcCircuit::<f64>::new(zero_width, NgcConfig::default(), &mut seeded(0)).is_err());

        let spec = CircuitSpec::chain(2, &[2], 1, Activation::Rectifier);
        let mut c = NgcCircuit::<f64>::new(spec, NgcConfig::default(), &mut seeded(0)).unwrap();
        let x3 = col(&[1.0, 2.0, 3.0]);
        assert!(c.project_batch(&[x3.view()]).is_err());
        let x2 = col(&[1.0, 2.0]);
        assert!(c.project_batch(&[x2.view(), x2.view()]).is_err());
        let bad_clamp = col(&[1.0, 2.0, 3.0]);
        assert!(c
            .settle(&[x2.view()], Clamps::heads_only(&[Some(bad_clamp.view())]))
            .is_err());
    }

    #[test]
    fn serde_roundtrip_preserves_behavior() {
        let spec = CircuitSpec::chain(3, &[4], 2, Activation::Rectifier);
        let mut c = NgcCircuit::<f32>::new(spec, NgcConfig::default(), &mut seeded(13)).unwrap();
        let x = Array1::from_vec(vec![0.3f32, -0.1, 0.8]).insert_axis(Axis(1));
        let t = Array1::from_vec(vec![1.0f32, 0.5]).insert_axis(Axis(1));
        for _ in 0..2 {
            c.settle_and_update(&[x.view()], Clamps::heads_only(&[Some(t.view())]))
                .unwrap();
        }
        let json = serde_json::to_string(&c).unwrap();
        let back: NgcCircuit<f32> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.adam_steps(), 2);
        let a = c.project(&[x.column(0)]).unwrap();
        let b = back.project(&[x.column(0)]).unwrap();
        assert_eq!(a.heads[0], b.heads[0]);
        assert_eq!(a.hidden[0], b.hidden[0]);
        // Settle state is transient and does not survive the round trip.
        assert!(matches!(back.hebbian_deltas(), Err(Error::Protocol(_))));
    }

    #[test]
    fn unit_column_scaling_caps_synapse_norms() {
        let cfg = NgcConfig {
            scaling: SynapticScaling::UnitColumns,
            adam: AdamConfig {
                lr: 0.5,
                ..AdamConfig::default()
            },
            ..NgcConfig::default()
        };
        let spec = CircuitSpec::chain(2, &[2], 2, Activation::Identity);
        let mut c = NgcCircuit::<f64>::new(spec, cfg, &mut seeded(17)).unwrap();
        let x = col(&[1.0, 1.0]);
        let t = col(&[10.0, -10.0]);
        for _ in 0..3 {
            c.settle_and_update(&[x.view()], Clamps::heads_only(&[Some(t.view())]))
                .unwrap();
        }
        let mats = c.all_mats();
        for w in &mats[..2] {
            for col in w.columns() {
                let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(norm <= 1.0 + 1e-9, "column norm {norm}");
            }
        }
        for row in mats[2].rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= 1.0 + 1e-9, "row norm {norm}");
        }
    }

    #[test]
    fn training_reduces_discrepancy_on_fixed_batch() {
        let spec = CircuitSpec::chain(6, &[12, 12], 3, Activation::Rectifier);
        let teacher_cfg = NgcConfig {
            init_std: 0.3,
            ..NgcConfig::default()
        };
        let mut rng = seeded(23);
        let teacher = NgcCircuit::<f64>::new(spec.clone(), teacher_cfg, &mut rng).unwrap();
        let x = Array2::from_shape_simple_fn((6, 8), || rng.random::<f64>());
        let (_, heads) = teacher.project_batch(&[x.view()]).unwrap();
        let y = heads[0].clone();

        let cfg = NgcConfig {
            adam: AdamConfig {
                lr: 2e-3,
                ..AdamConfig::default()
            },
            ..NgcConfig::default()
        };
        let mut student = NgcCircuit::<f64>::new(spec, cfg, &mut rng).unwrap();
        let mut first = None;
        let mut last = 0.0;
        for _ in 0..150 {
            let report = student
                .settle_and_update(&[x.view()], Clamps::heads_only(&[Some(y.view())]))
                .unwrap();
            last = report.final_tod();
            first.get_or_insert(last);
        }
        let first = first.unwrap();
        assert!(
            last < 0.35 * first,
            "discrepancy {first} only fell to {last}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        /// With tied error synapses (`E = W^T`), identity states and no leak,
        /// each settling step is gradient descent on the total discrepancy, so
        /// the trace must be non-increasing at any stable step size.
        #[test]
        fn tied_weight_settling_never_increases_discrepancy(
            sw in prop::array::uniform4(-1.0f64..1.0),
            cw in prop::array::uniform4(-1.0f64..1.0),
            hw in prop::array::uniform4(-1.0f64..1.0),
            x in prop::array::uniform2(-1.0f64..1.0),
            t in prop::array::uniform2(-1.0f64..1.0),
            beta in 0.005f64..0.05,
        ) {
            let cfg = NgcConfig {
                beta,
                leak: 0.0,
                settle_steps: 15,
                init_std: 0.0,
                activation: Activation::Identity,
                ..NgcConfig::default()
            };
            let spec = CircuitSpec::chain(2, &[2, 2], 2, Activation::Identity);
            let mut c = NgcCircuit::<f64>::new(spec, cfg, &mut seeded(1)).unwrap();
            let sw = Array2::from_shape_vec((2, 2), sw.to_vec()).unwrap();
            let cw = Array2::from_shape_vec((2, 2), cw.to_vec()).unwrap();
            let hw = Array2::from_shape_vec((2, 2), hw.to_vec()).unwrap();
            c.stream_w_mut(0).assign(&sw);
            c.chain_w_mut(0).assign(&cw);
            c.head_w_mut(0).assign(&hw);
            c.chain_e_mut(0).assign(&cw.t());
            c.head_e_mut(0).assign(&hw.t());
            let xs = col(&x);
            let ts = col(&t);
            let report = c
                .settle(&[xs.view()], Clamps::heads_only(&[Some(ts.view())]))
                .unwrap();
            for w in report.tod.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "tod rose from {} to {}", w[0], w[1]);
            }
        }
    }
}
