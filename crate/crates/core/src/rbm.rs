//! Restricted Boltzmann machine with a Bernoulli hidden layer and either a
//! Bernoulli or a Gaussian visible layer.
//!
//! The energy is
//!
//! ```text
//! E(v, h) = -Σ_i a_i(v_i) - Σ_μ b_μ h_μ - Σ_iμ W_iμ (v_i / σ_i²) h_μ
//! ```
//!
//! with `a_i(v) = loc_i · v` for Bernoulli units and
//! `a_i(v) = -(v - loc_i)² / (2σ_i²)` for Gaussian units. The visible scale is
//! stored as `log σ_i` and is pinned to zero for Bernoulli layers. Sampling at
//! inverse temperature `β` draws from `exp(-βE) / Z(β)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unit type of a layer. Hidden layers are always Bernoulli.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Bernoulli,
    Gaussian,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Bernoulli => "bernoulli",
            LayerKind::Gaussian => "gaussian",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bernoulli" => Some(LayerKind::Bernoulli),
            "gaussian" => Some(LayerKind::Gaussian),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RbmError {
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("inverse temperature must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("model too large for exact enumeration: {0}")]
    TooLarge(String),
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_beta(beta: f64) -> Result<(), RbmError> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(RbmError::InvalidBeta(beta))
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), RbmError> {
    if expected == got {
        Ok(())
    } else {
        Err(RbmError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}

/// A joint configuration of both layers.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub v: Array1<f64>,
    pub h: Array1<f64>,
}

impl State {
    pub fn new(v: Array1<f64>, h: Array1<f64>) -> Self {
        Self { v, h }
    }
}

/// A batch of joint states stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBatch {
    pub v: Array2<f64>,
    pub h: Array2<f64>,
}

impl StateBatch {
    pub fn new(v: Array2<f64>, h: Array2<f64>) -> Self {
        assert_eq!(v.nrows(), h.nrows(), "visible and hidden row counts differ");
        Self { v, h }
    }

    pub fn from_states(states: &[State]) -> Self {
        let nv = states.first().map_or(0, |s| s.v.len());
        let nh = states.first().map_or(0, |s| s.h.len());
        let mut v = Array2::zeros((states.len(), nv));
        let mut h = Array2::zeros((states.len(), nh));
        for (i, s) in states.iter().enumerate() {
            v.row_mut(i).assign(&s.v);
            h.row_mut(i).assign(&s.h);
        }
        Self { v, h }
    }

    pub fn len(&self) -> usize {
        self.v.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state(&self, i: usize) -> State {
        State::new(self.v.row(i).to_owned(), self.h.row(i).to_owned())
    }
}

/// Conditional distribution of the visible layer given the hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleConditional {
    /// Bernoulli: `p(v_i = 1 | h)`. Gaussian: conditional mean.
    pub mean: Array1<f64>,
    /// Conditional variance for Gaussian units, `None` for Bernoulli.
    pub variance: Option<Array1<f64>>,
}

/// All learnable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmModel {
    pub visible_kind: LayerKind,
    pub visible_loc: Array1<f64>,
    /// `log σ_i`; identically zero for Bernoulli visible units.
    pub visible_log_scale: Array1<f64>,
    pub hidden_bias: Array1<f64>,
    /// `n_visible × n_hidden`, row-major.
    pub weights: Array2<f64>,
}

impl RbmModel {
    pub fn zeros(visible_kind: LayerKind, n_visible: usize, n_hidden: usize) -> Self {
        Self {
            visible_kind,
            visible_loc: Array1::zeros(n_visible),
            visible_log_scale: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
            weights: Array2::zeros((n_visible, n_hidden)),
        }
    }

    /// Zero biases, unit scales and `N(0, weight_std²)` weights.
    pub fn random<R: Rng + ?Sized>(
        visible_kind: LayerKind,
        n_visible: usize,
        n_hidden: usize,
        weight_std: f64,
        rng: &mut R,
    ) -> Self {
        let mut model = Self::zeros(visible_kind, n_visible, n_hidden);
        if weight_std > 0.0 {
            let normal = Normal::new(0.0, weight_std).expect("weight std is positive");
            model.weights.mapv_inplace(|_| normal.sample(rng));
        }
        model
    }

    /// Sets the visible biases (and Gaussian scales) from data statistics so the
    /// untrained model already matches the per-unit marginals.
    pub fn fit_visible_to(&mut self, data: ArrayView2<f64>, min_std: f64) {
        let n = data.nrows().max(1) as f64;
        for i in 0..self.n_visible() {
            let col = data.column(i);
            let mean = col.sum() / n;
            match self.visible_kind {
                LayerKind::Bernoulli => {
                    let p = mean.clamp(1e-3, 1.0 - 1e-3);
                    self.visible_loc[i] = (p / (1.0 - p)).ln();
                }
                LayerKind::Gaussian => {
                    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                    self.visible_loc[i] = mean;
                    self.visible_log_scale[i] = var.sqrt().max(min_std).ln();
                }
            }
        }
    }

    pub fn n_visible(&self) -> usize {
        self.visible_loc.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    /// `1 / σ_i²` per visible unit.
    pub fn inv_variance(&self) -> Array1<f64> {
        self.visible_log_scale.mapv(|s| (-2.0 * s).exp())
    }

    pub fn is_finite(&self) -> bool {
        self.visible_loc.iter().all(|x| x.is_finite())
            && self.visible_log_scale.iter().all(|x| x.is_finite())
            && self.hidden_bias.iter().all(|x| x.is_finite())
            && self.weights.iter().all(|x| x.is_finite())
    }

    fn check_state(&self, v: ArrayView1<f64>, h: ArrayView1<f64>) -> Result<(), RbmError> {
        check_len("visible state", self.n_visible(), v.len())?;
        check_len("hidden state", self.n_hidden(), h.len())
    }

    /// `E(v, h)`.
    pub fn energy(&self, v: ArrayView1<f64>, h: ArrayView1<f64>) -> Result<f64, RbmError> {
        self.check_state(v, h)?;
        let inv_var = self.inv_variance();
        let mut e = 0.0;
        for i in 0..self.n_visible() {
            e -= match self.visible_kind {
                LayerKind::Bernoulli => self.visible_loc[i] * v[i],
                LayerKind::Gaussian => -0.5 * (v[i] - self.visible_loc[i]).powi(2) * inv_var[i],
            };
        }
        e -= self.hidden_bias.dot(&h);
        for i in 0..self.n_visible() {
            let coupling = self.weights.row(i).dot(&h);
            e -= v[i] * inv_var[i] * coupling;
        }
        Ok(e)
    }

    pub fn state_energy(&self, s: &State) -> Result<f64, RbmError> {
        self.energy(s.v.view(), s.h.view())
    }

    /// Per-unit means of `p(h_μ = 1 | v)` at inverse temperature `beta`.
    pub fn hidden_conditional(&self, v: ArrayView1<f64>, beta: f64) -> Result<Array1<f64>, RbmError> {
        check_len("visible state", self.n_visible(), v.len())?;
        check_beta(beta)?;
        let kernel = GibbsKernel::new(self);
        let mut field = vec![0.0; self.n_hidden()];
        kernel.hidden_field(v.as_slice().expect("contiguous"), &mut field);
        Ok(field.into_iter().map(|x| sigmoid(beta * x)).collect())
    }

    /// Parameters of `p(v_i | h)` at inverse temperature `beta`.
    pub fn visible_conditional(
        &self,
        h: ArrayView1<f64>,
        beta: f64,
    ) -> Result<VisibleConditional, RbmError> {
        check_len("hidden state", self.n_hidden(), h.len())?;
        check_beta(beta)?;
        let kernel = GibbsKernel::new(self);
        let mut coupling = vec![0.0; self.n_visible()];
        kernel.visible_coupling(h.as_slice().expect("contiguous"), &mut coupling);
        match self.visible_kind {
            LayerKind::Bernoulli => Ok(VisibleConditional {
                mean: (0..self.n_visible())
                    .map(|i| sigmoid(beta * (self.visible_loc[i] + coupling[i] * kernel.inv_var[i])))
                    .collect(),
                variance: None,
            }),
            LayerKind::Gaussian => Ok(VisibleConditional {
                mean: (0..self.n_visible())
                    .map(|i| self.visible_loc[i] + coupling[i])
                    .collect(),
                variance: Some(kernel.inv_var.iter().map(|iv| 1.0 / (iv * beta)).collect()),
            }),
        }
    }

    /// Mean of `p(v | h)` at `β = 1`, row by row.
    pub fn visible_means(&self, h: ArrayView2<f64>) -> Array2<f64> {
        let kernel = GibbsKernel::new(self);
        let mut out = Array2::zeros((h.nrows(), self.n_visible()));
        let mut coupling = vec![0.0; self.n_visible()];
        for (r, hrow) in h.rows().into_iter().enumerate() {
            kernel.visible_coupling(hrow.as_slice().expect("contiguous"), &mut coupling);
            for i in 0..self.n_visible() {
                out[[r, i]] = match self.visible_kind {
                    LayerKind::Bernoulli => {
                        sigmoid(self.visible_loc[i] + coupling[i] * kernel.inv_var[i])
                    }
                    LayerKind::Gaussian => self.visible_loc[i] + coupling[i],
                };
            }
        }
        out
    }

    pub fn sample_hidden<R: Rng + ?Sized>(
        &self,
        v: ArrayView1<f64>,
        beta: f64,
        rng: &mut R,
    ) -> Result<Array1<f64>, RbmError> {
        check_len("visible state", self.n_visible(), v.len())?;
        check_beta(beta)?;
        let mut kernel = GibbsKernel::new(self);
        let mut h = vec![0.0; self.n_hidden()];
        kernel.sample_hidden(v.as_slice().expect("contiguous"), beta, &mut h, rng);
        Ok(Array1::from(h))
    }

    pub fn sample_visible<R: Rng + ?Sized>(
        &self,
        h: ArrayView1<f64>,
        beta: f64,
        rng: &mut R,
    ) -> Result<Array1<f64>, RbmError> {
        check_len("hidden state", self.n_hidden(), h.len())?;
        check_beta(beta)?;
        let mut kernel = GibbsKernel::new(self);
        let mut v = vec![0.0; self.n_visible()];
        kernel.sample_visible(h.as_slice().expect("contiguous"), beta, &mut v, rng);
        Ok(Array1::from(v))
    }

    /// One block-Gibbs sweep: resample `h | v`, then `v | h`.
    pub fn gibbs_step<R: Rng + ?Sized>(
        &self,
        state: &State,
        beta: f64,
        rng: &mut R,
    ) -> Result<State, RbmError> {
        self.check_state(state.v.view(), state.h.view())?;
        check_beta(beta)?;
        let mut kernel = GibbsKernel::new(self);
        let mut v = state.v.to_vec();
        let mut h = state.h.to_vec();
        kernel.gibbs_step(&mut v, &mut h, beta, rng);
        Ok(State::new(Array1::from(v), Array1::from(h)))
    }

    /// `-∂E/∂θ` for every parameter at state `s`.
    pub fn neg_energy_grad(&self, s: &State) -> Result<GradientBundle, RbmError> {
        self.check_state(s.v.view(), s.h.view())?;
        let mut out = GradientBundle::zeros_like(self);
        let inv_var = self.inv_variance();
        self.accumulate_neg_energy_grad(
            inv_var.as_slice().expect("contiguous"),
            s.v.as_slice().expect("contiguous"),
            s.h.as_slice().expect("contiguous"),
            1.0,
            &mut out,
        );
        Ok(out)
    }

    /// `out += coef · (-∂E/∂θ)(v, h)`. Dimensions are the caller's responsibility.
    pub(crate) fn accumulate_neg_energy_grad(
        &self,
        inv_var: &[f64],
        v: &[f64],
        h: &[f64],
        coef: f64,
        out: &mut GradientBundle,
    ) {
        let nh = self.n_hidden();
        let gb = out.hidden_bias.as_slice_mut().expect("contiguous");
        for (g, &hm) in gb.iter_mut().zip(h) {
            *g += coef * hm;
        }
        let gw = out.weights.as_slice_mut().expect("contiguous");
        let w = self.weights.as_slice().expect("contiguous");
        for i in 0..self.n_visible() {
            let x = v[i] * inv_var[i];
            if x != 0.0 {
                let a = coef * x;
                for (g, &hm) in gw[i * nh..(i + 1) * nh].iter_mut().zip(h) {
                    *g += a * hm;
                }
            }
            match self.visible_kind {
                LayerKind::Bernoulli => out.visible_loc[i] += coef * v[i],
                LayerKind::Gaussian => {
                    let d = v[i] - self.visible_loc[i];
                    out.visible_loc[i] += coef * d * inv_var[i];
                    let coupling: f64 = w[i * nh..(i + 1) * nh]
                        .iter()
                        .zip(h)
                        .map(|(wi, hm)| wi * hm)
                        .sum();
                    out.visible_log_scale[i] +=
                        coef * (d * d * inv_var[i] - 2.0 * v[i] * coupling * inv_var[i]);
                }
            }
        }
    }

    /// Critic features: `p(h_μ = 1 | v)` at `β = 1`.
    pub fn hidden_mean_activation(&self, v: ArrayView1<f64>) -> Result<Array1<f64>, RbmError> {
        self.hidden_conditional(v, 1.0)
    }

    /// [`Self::hidden_mean_activation`] applied to every row.
    pub fn hidden_mean_activations(&self, v: ArrayView2<f64>) -> Result<Array2<f64>, RbmError> {
        check_len("visible state", self.n_visible(), v.ncols())?;
        let kernel = GibbsKernel::new(self);
        let mut out = Array2::zeros((v.nrows(), self.n_hidden()));
        let mut field = vec![0.0; self.n_hidden()];
        for (r, row) in v.rows().into_iter().enumerate() {
            let row = row.to_vec();
            kernel.hidden_field(&row, &mut field);
            for (o, &f) in out.row_mut(r).iter_mut().zip(&field) {
                *o = sigmoid(f);
            }
        }
        Ok(out)
    }

    /// `log Z(β)` by exhaustive enumeration.
    ///
    /// Bernoulli visible layers enumerate every joint state and are limited to
    /// 20 units in total. Gaussian visible layers enumerate `h` (at most 20
    /// units) and integrate `v` in closed form.
    pub fn exact_log_partition(&self, beta: f64) -> Result<f64, RbmError> {
        check_beta(beta)?;
        let nv = self.n_visible();
        let nh = self.n_hidden();
        let mut acc = LogSumExp::default();
        match self.visible_kind {
            LayerKind::Bernoulli => {
                if nv + nh > 20 {
                    return Err(RbmError::TooLarge(format!(
                        "{nv} visible + {nh} hidden Bernoulli units (limit 20)"
                    )));
                }
                let mut v = Array1::zeros(nv);
                let mut h = Array1::zeros(nh);
                for vbits in 0u64..(1 << nv) {
                    fill_bits(vbits, v.as_slice_mut().expect("contiguous"));
                    for hbits in 0u64..(1 << nh) {
                        fill_bits(hbits, h.as_slice_mut().expect("contiguous"));
                        acc.push(-beta * self.energy(v.view(), h.view())?);
                    }
                }
            }
            LayerKind::Gaussian => {
                if nh > 20 {
                    return Err(RbmError::TooLarge(format!("{nh} hidden units (limit 20)")));
                }
                let inv_var = self.inv_variance();
                let mut h = Array1::zeros(nh);
                for hbits in 0u64..(1 << nh) {
                    fill_bits(hbits, h.as_slice_mut().expect("contiguous"));
                    let mut term = beta * self.hidden_bias.dot(&h);
                    for i in 0..nv {
                        let loc = self.visible_loc[i];
                        let c = self.weights.row(i).dot(&h);
                        term += 0.5 * (2.0 * std::f64::consts::PI / (inv_var[i] * beta)).ln()
                            + beta * ((loc + c).powi(2) - loc * loc) * inv_var[i] / 2.0;
                    }
                    acc.push(term);
                }
            }
        }
        Ok(acc.value())
    }

    /// Sampling helper that caches the derived quantities of the frozen model.
    pub fn kernel(&self) -> GibbsKernel<'_> {
        GibbsKernel::new(self)
    }
}

fn fill_bits(bits: u64, out: &mut [f64]) {
    for (k, x) in out.iter_mut().enumerate() {
        *x = ((bits >> k) & 1) as f64;
    }
}

#[derive(Default)]
struct LogSumExp {
    max: f64,
    sum: f64,
    any: bool,
}

impl LogSumExp {
    fn push(&mut self, x: f64) {
        if !self.any {
            self.max = x;
            self.sum = 1.0;
            self.any = true;
        } else if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Sampling kernel for a frozen model.
///
/// Both the single-state API on [`RbmModel`] and the particle population go
/// through this type, so every path performs the same floating point
/// operations in the same order.
pub struct GibbsKernel<'a> {
    model: &'a RbmModel,
    inv_var: Vec<f64>,
    std: Vec<f64>,
    /// `n_hidden × n_visible`.
    weights_t: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> GibbsKernel<'a> {
    pub fn new(model: &'a RbmModel) -> Self {
        let nv = model.n_visible();
        let nh = model.n_hidden();
        let mut weights_t = vec![0.0; nv * nh];
        for i in 0..nv {
            for m in 0..nh {
                weights_t[m * nv + i] = model.weights[[i, m]];
            }
        }
        let inv_var: Vec<f64> = model.inv_variance().to_vec();
        let std = model.visible_log_scale.iter().map(|s| s.exp()).collect();
        Self {
            model,
            inv_var,
            std,
            weights_t,
            scratch: vec![0.0; nv.max(nh)],
        }
    }

    pub fn model(&self) -> &RbmModel {
        self.model
    }

    /// `b_μ + Σ_i W_iμ v_i / σ_i²`.
    pub fn hidden_field(&self, v: &[f64], out: &mut [f64]) {
        let nh = self.model.n_hidden();
        out.copy_from_slice(self.model.hidden_bias.as_slice().expect("contiguous"));
        let w = self.model.weights.as_slice().expect("contiguous");
        for (i, &vi) in v.iter().enumerate() {
            let x = vi * self.inv_var[i];
            if x != 0.0 {
                for (o, &wi) in out.iter_mut().zip(&w[i * nh..(i + 1) * nh]) {
                    *o += x * wi;
                }
            }
        }
    }

    /// `Σ_μ W_iμ h_μ`.
    pub fn visible_coupling(&self, h: &[f64], out: &mut [f64]) {
        let nv = self.model.n_visible();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (m, &hm) in h.iter().enumerate() {
            if hm != 0.0 {
                for (o, &wt) in out.iter_mut().zip(&self.weights_t[m * nv..(m + 1) * nv]) {
                    *o += hm * wt;
                }
            }
        }
    }

    pub fn sample_hidden<R: Rng + ?Sized>(&mut self, v: &[f64], beta: f64, h: &mut [f64], rng: &mut R) {
        let nh = h.len();
        let mut field = std::mem::take(&mut self.scratch);
        self.hidden_field(v, &mut field[..nh]);
        for (hm, &f) in h.iter_mut().zip(&field[..nh]) {
            let p = sigmoid(beta * f);
            *hm = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
        }
        self.scratch = field;
    }

    pub fn sample_visible<R: Rng + ?Sized>(&mut self, h: &[f64], beta: f64, v: &mut [f64], rng: &mut R) {
        let nv = v.len();
        let mut coupling = std::mem::take(&mut self.scratch);
        self.visible_coupling(h, &mut coupling[..nv]);
        let loc = self.model.visible_loc.as_slice().expect("contiguous");
        match self.model.visible_kind {
            LayerKind::Bernoulli => {
                for i in 0..nv {
                    let p = sigmoid(beta * (loc[i] + coupling[i] * self.inv_var[i]));
                    v[i] = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                }
            }
            LayerKind::Gaussian => {
                let temper = beta.sqrt();
                for i in 0..nv {
                    let z: f64 = StandardNormal.sample(rng);
                    v[i] = loc[i] + coupling[i] + self.std[i] / temper * z;
                }
            }
        }
        self.scratch = coupling;
    }

    pub fn gibbs_step<R: Rng + ?Sized>(&mut self, v: &mut [f64], h: &mut [f64], beta: f64, rng: &mut R) {
        self.sample_hidden(v, beta, h, rng);
        self.sample_visible(h, beta, v, rng);
    }
}

/// Parameter-shaped accumulator mirroring [`RbmModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub visible_loc: Array1<f64>,
    pub visible_log_scale: Array1<f64>,
    pub hidden_bias: Array1<f64>,
    pub weights: Array2<f64>,
}

impl GradientBundle {
    pub fn zeros_like(model: &RbmModel) -> Self {
        Self {
            visible_loc: Array1::zeros(model.n_visible()),
            visible_log_scale: Array1::zeros(model.n_visible()),
            hidden_bias: Array1::zeros(model.n_hidden()),
            weights: Array2::zeros(model.weights.raw_dim()),
        }
    }

    pub fn scaled(mut self, a: f64) -> Self {
        self.for_each_mut(|x| *x *= a);
        self
    }

    /// `self += a · other`.
    pub fn add_scaled(&mut self, other: &GradientBundle, a: f64) {
        self.visible_loc.scaled_add(a, &other.visible_loc);
        self.visible_log_scale.scaled_add(a, &other.visible_log_scale);
        self.hidden_bias.scaled_add(a, &other.hidden_bias);
        self.weights.scaled_add(a, &other.weights);
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.visible_loc.iter_mut().for_each(&mut f);
        self.visible_log_scale.iter_mut().for_each(&mut f);
        self.hidden_bias.iter_mut().for_each(&mut f);
        self.weights.iter_mut().for_each(&mut f);
    }

    /// All entries in a fixed order: loc, log-scale, hidden bias, weights (row-major).
    pub fn values(&self) -> Vec<f64> {
        self.visible_loc
            .iter()
            .chain(self.visible_log_scale.iter())
            .chain(self.hidden_bias.iter())
            .chain(self.weights.iter())
            .copied()
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn shape_matches(&self, model: &RbmModel) -> bool {
        self.visible_loc.len() == model.n_visible()
            && self.visible_log_scale.len() == model.n_visible()
            && self.hidden_bias.len() == model.n_hidden()
            && self.weights.raw_dim() == model.weights.raw_dim()
    }
}
