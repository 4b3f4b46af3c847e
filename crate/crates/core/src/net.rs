//! Feedforward score network `s(x) = sigma_L(W_L sigma_{L-1}(... sigma_1(W_1 x)))`,
//! optionally with a bias added to every pre-activation, with exact input
//! Jacobians and the exact gradient of the empirical
//! score-matching loss
//!
//! ```text
//! J(theta) = 1/N sum_i [ tr(grad_x s(x_i)) + 1/2 |s(x_i)|^2 ]
//! ```
//!
//! The input Jacobian is carried forward layer by layer as
//! `J_l = diag(sigma_l'(z_l)) W_l J_{l-1}`, and the loss gradient is obtained
//! by a reverse sweep over the recorded forward quantities (pre-activations,
//! layer outputs and the Jacobian products). Because the trace term depends on
//! `sigma'`, its gradient needs `sigma''`, which every [`Activation`] provides
//! in closed form.

use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::operator_norm;
use crate::rng::rng_from_seed;
use crate::score::{check_cols, check_len, ScoreModel};

/// Rows per work unit when evaluating losses and gradients. Fixed so that the
/// reduction order, and hence every bit of the result, does not depend on the
/// number of worker threads.
pub const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Softplus,
    /// `softplus(z) - ln 2`, which vanishes at the origin.
    ShiftedSoftplus,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Softplus => softplus(z),
            Activation::ShiftedSoftplus => softplus(z) - std::f64::consts::LN_2,
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    #[inline]
    pub fn d1(self, z: f64) -> f64 {
        match self {
            Activation::Softplus | Activation::ShiftedSoftplus => logistic(z),
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    #[inline]
    pub fn d2(self, z: f64) -> f64 {
        match self {
            Activation::Softplus | Activation::ShiftedSoftplus => {
                let l = logistic(z);
                l * (1.0 - l)
            }
            Activation::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Identity => 0.0,
        }
    }

    fn is_identity(self) -> bool {
        self == Activation::Identity
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Gradient with the same layout as [`MlpScoreNet::params`]: one matrix per
/// weight, then one `1 x d_l` row per bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub layers: Vec<Array2<f64>>,
}

impl ParamGrad {
    pub fn zeros_like(net: &MlpScoreNet) -> Self {
        Self {
            layers: net.params.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn add_assign(&mut self, other: &ParamGrad) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            *a += b;
        }
    }

    fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            *l *= c;
        }
    }
}

/// Realised norms of one weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerNorms {
    pub spectral: f64,
    /// Sum over columns of the column 2-norms.
    pub l21: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpScoreNet {
    dims: Vec<usize>,
    /// `W_1 .. W_L`, followed by `b_1 .. b_L` as `1 x d_l` rows if present.
    params: Vec<Array2<f64>>,
    activations: Vec<Activation>,
    has_bias: bool,
}

impl MlpScoreNet {
    /// Builds a network from explicit weights; `weights[l]` has shape
    /// `d_{l+1} x d_l`.
    pub fn new(weights: Vec<Array2<f64>>, activations: Vec<Activation>) -> Result<Self> {
        Self::build(weights, None, activations)
    }

    /// Same as [`Self::new`] with `biases[l]` added to the pre-activation of
    /// layer `l + 1`.
    pub fn with_biases(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        activations: Vec<Activation>,
    ) -> Result<Self> {
        Self::build(weights, Some(biases), activations)
    }

    fn build(
        weights: Vec<Array2<f64>>,
        biases: Option<Vec<Array1<f64>>>,
        activations: Vec<Activation>,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        if weights.len() != activations.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weight matrices but {} activations",
                weights.len(),
                activations.len()
            )));
        }
        let mut dims = vec![weights[0].ncols()];
        for (l, w) in weights.iter().enumerate() {
            if w.ncols() != *dims.last().unwrap() {
                return Err(Error::InvalidArgument(format!(
                    "layer {} expects input width {}, previous layer has {}",
                    l + 1,
                    w.ncols(),
                    dims.last().unwrap()
                )));
            }
            if w.nrows() == 0 {
                return Err(Error::InvalidArgument(format!("layer {} has zero width", l + 1)));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("weights"));
            }
            dims.push(w.nrows());
        }
        if dims[0] != *dims.last().unwrap() {
            return Err(Error::InvalidArgument(format!(
                "output width {} differs from input width {}",
                dims.last().unwrap(),
                dims[0]
            )));
        }
        let has_bias = biases.is_some();
        let mut params = weights;
        if let Some(biases) = biases {
            if biases.len() != params.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} weight matrices but {} bias vectors",
                    params.len(),
                    biases.len()
                )));
            }
            for (l, b) in biases.into_iter().enumerate() {
                if b.len() != dims[l + 1] {
                    return Err(Error::DimensionMismatch {
                        expected: dims[l + 1],
                        got: b.len(),
                    });
                }
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("biases"));
                }
                params.push(b.insert_axis(Axis(0)));
            }
        }
        Ok(Self {
            dims,
            params,
            activations,
            has_bias,
        })
    }

    /// Glorot-uniform initialisation: layer `l` is drawn from
    /// `U(-a, a)` with `a = sqrt(6 / (d_in + d_out))`.
    pub fn init(dims: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<Self> {
        Self::init_with_bias(dims, hidden, output, false, seed)
    }

    /// [`Self::init`], plus zero-initialised biases when `bias` is set.
    pub fn init_with_bias(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        bias: bool,
        seed: u64,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument("dims needs at least [d_0, d_L]".into()));
        }
        let mut rng = rng_from_seed(seed);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut activations = Vec::with_capacity(dims.len() - 1);
        for (l, pair) in dims.windows(2).enumerate() {
            let (d_in, d_out) = (pair[0], pair[1]);
            let a = (6.0 / (d_in + d_out) as f64).sqrt();
            weights.push(Array2::from_shape_fn((d_out, d_in), |_| rng.random_range(-a..=a)));
            activations.push(if l + 2 == dims.len() { output } else { hidden });
        }
        if bias {
            let biases = dims[1..].iter().map(|&d| Array1::zeros(d)).collect();
            Self::with_biases(weights, biases, activations)
        } else {
            Self::new(weights, activations)
        }
    }

    /// `[d_0, ..., d_L]`.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn depth(&self) -> usize {
        self.activations.len()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.params[..self.depth()]
    }

    pub fn has_bias(&self) -> bool {
        self.has_bias
    }

    /// Bias of layer `l + 1`, if the network has biases.
    pub fn bias(&self, l: usize) -> Option<ArrayView1<'_, f64>> {
        self.has_bias.then(|| self.params[self.depth() + l].row(0))
    }

    /// Every trainable array: weights, then bias rows.
    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|w| w.len()).sum()
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    /// Pre-activation of layer `l + 1` for a single input.
    fn pre_activation(&self, l: usize, h: &Array1<f64>) -> Array1<f64> {
        let z = self.params[l].dot(h);
        match self.bias(l) {
            Some(b) => z + &b,
            None => z,
        }
    }

    /// Pre-activations of layer `l + 1` for a batch of rows.
    fn pre_activation_batch(&self, l: usize, h: ArrayView2<'_, f64>) -> Array2<f64> {
        let z = h.dot(&self.params[l].t());
        if self.has_bias {
            z + &self.params[self.depth() + l]
        } else {
            z
        }
    }

    pub fn layer_norms(&self) -> Vec<LayerNorms> {
        self.weights()
            .iter()
            .map(|w| LayerNorms {
                spectral: operator_norm(w.view()),
                l21: w
                    .axis_iter(Axis(1))
                    .map(|c| c.dot(&c).sqrt())
                    .sum(),
            })
            .collect()
    }

    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_len(x, self.input_dim())?;
        let mut h = x.to_owned();
        for (l, act) in self.activations.iter().enumerate() {
            h = self.pre_activation(l, &h).mapv_into(|z| act.value(z));
        }
        Ok(h)
    }

    /// Forward pass on every row of `xs`.
    pub fn forward_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_cols(xs, self.input_dim())?;
        let mut h = xs.to_owned();
        for (l, act) in self.activations.iter().enumerate() {
            h = self.pre_activation_batch(l, h.view());
            if !act.is_identity() {
                h.mapv_inplace(|z| act.value(z));
            }
        }
        Ok(h)
    }

    /// `grad_x s(x)` as the ordered product
    /// `diag(sigma_L'(z_L)) W_L ... diag(sigma_1'(z_1)) W_1`.
    pub fn input_jacobian(&self, x: ArrayView1<'_, f64>) -> Result<Array2<f64>> {
        check_len(x, self.input_dim())?;
        let d = self.input_dim();
        let mut h = x.to_owned();
        let mut jac = Array2::<f64>::eye(d);
        for (l, act) in self.activations.iter().enumerate() {
            let w = &self.params[l];
            let z = self.pre_activation(l, &h);
            jac = w.dot(&jac);
            for (mut row, &zi) in jac.outer_iter_mut().zip(z.iter()) {
                row *= act.d1(zi);
            }
            h = z.mapv_into(|v| act.value(v));
        }
        Ok(jac)
    }

    pub fn jacobian_trace(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(self.input_jacobian(x)?.diag().sum())
    }

    /// Empirical score-matching loss over the rows of `batch`.
    pub fn empirical_sm_loss(&self, batch: ArrayView2<'_, f64>) -> Result<f64> {
        self.check_batch(batch)?;
        let parts: Vec<f64> = chunks(batch)
            .into_par_iter()
            .map(|c| Tape::record(self, c).loss_sum())
            .collect();
        Ok(parts.iter().sum::<f64>() / batch.nrows() as f64)
    }

    /// Exact gradient of [`Self::empirical_sm_loss`] with respect to every
    /// parameter, laid out as [`Self::params`].
    pub fn sm_loss_grad(&self, batch: ArrayView2<'_, f64>) -> Result<ParamGrad> {
        Ok(self.loss_and_grad(batch)?.1)
    }

    pub fn loss_and_grad(&self, batch: ArrayView2<'_, f64>) -> Result<(f64, ParamGrad)> {
        self.loss_and_grad_weighted(batch, 1.0)
    }

    /// Loss gradient with the trace term's contribution multiplied by
    /// `trace_weight`. Only meant for the gradient-check mutation canary.
    #[doc(hidden)]
    pub fn loss_and_grad_weighted(
        &self,
        batch: ArrayView2<'_, f64>,
        trace_weight: f64,
    ) -> Result<(f64, ParamGrad)> {
        self.check_batch(batch)?;
        let parts: Vec<(f64, ParamGrad)> = chunks(batch)
            .into_par_iter()
            .map(|c| {
                let tape = Tape::record(self, c);
                (tape.loss_sum(), tape.backward(self, trace_weight))
            })
            .collect();
        let n = batch.nrows() as f64;
        let mut loss = 0.0;
        let mut grad = ParamGrad::zeros_like(self);
        for (l, g) in &parts {
            loss += l;
            grad.add_assign(g);
        }
        grad.scale(1.0 / n);
        Ok((loss / n, grad))
    }

    /// Monte-Carlo Fisher divergence `1/(2N) sum |s(x_i) - oracle(x_i)|^2`.
    pub fn fisher_divergence(
        &self,
        samples: ArrayView2<'_, f64>,
        oracle: &dyn ScoreModel,
    ) -> Result<f64> {
        fisher_divergence(self, samples, oracle)
    }

    fn check_batch(&self, batch: ArrayView2<'_, f64>) -> Result<()> {
        if batch.nrows() == 0 {
            return Err(Error::EmptySampleSet);
        }
        check_cols(batch, self.input_dim())
    }

    pub fn to_checkpoint(&self, seed: u64, train_meta: serde_json::Value) -> Checkpoint {
        Checkpoint {
            dims: self.dims.clone(),
            activations: self.activations.clone(),
            weights: self
                .weights()
                .iter()
                .map(|w| w.outer_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: self
                .has_bias
                .then(|| (0..self.depth()).map(|l| self.bias(l).unwrap().to_vec()).collect()),
            seed,
            train_meta,
        }
    }
}

impl ScoreModel for MlpScoreNet {
    fn dim(&self) -> usize {
        self.input_dim()
    }

    fn score(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.forward(x)
    }

    fn score_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.forward_batch(xs)
    }
}

/// `1/(2N) sum_i |model(x_i) - oracle(x_i)|^2`.
pub fn fisher_divergence(
    model: &dyn ScoreModel,
    samples: ArrayView2<'_, f64>,
    oracle: &dyn ScoreModel,
) -> Result<f64> {
    if samples.nrows() == 0 {
        return Err(Error::EmptySampleSet);
    }
    let mut total = 0.0;
    for c in chunks(samples) {
        let diff = model.score_batch(c)? - oracle.score_batch(c)?;
        total += diff.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(0.5 * total / samples.nrows() as f64)
}

pub(crate) fn chunks<'a>(batch: ArrayView2<'a, f64>) -> Vec<ArrayView2<'a, f64>> {
    let n = batch.nrows();
    (0..n)
        .step_by(EVAL_CHUNK)
        .map(|start| batch.slice_move(s![start..(start + EVAL_CHUNK).min(n), ..]))
        .collect()
}

/// Forward quantities of one chunk. Jacobians are stored transposed and
/// stacked: row `b * D + k` of `jt[l]` is `d h_l / d x_k` for sample `b`.
struct Tape<'a> {
    input: ArrayView2<'a, f64>,
    rows: usize,
    dim: usize,
    /// Pre-activations `z_l`, `B x d_l`.
    z: Vec<Array2<f64>>,
    /// Layer outputs `h_l` for `l = 1..=L`, `B x d_l`.
    h: Vec<Array2<f64>>,
    /// `(W_l J_{l-1})^T` stacked, `B*D x d_l`.
    at: Vec<Array2<f64>>,
    /// `J_l^T` stacked, `B*D x d_l`.
    jt: Vec<Array2<f64>>,
}

impl<'a> Tape<'a> {
    fn record(net: &MlpScoreNet, input: ArrayView2<'a, f64>) -> Self {
        let rows = input.nrows();
        let dim = net.input_dim();
        let depth = net.depth();
        let mut tape = Tape {
            input,
            rows,
            dim,
            z: Vec::with_capacity(depth),
            h: Vec::with_capacity(depth),
            at: Vec::with_capacity(depth),
            jt: Vec::with_capacity(depth),
        };
        for (l, (w, act)) in net.weights().iter().zip(&net.activations).enumerate() {
            let z = if l == 0 {
                net.pre_activation_batch(0, input)
            } else {
                net.pre_activation_batch(l, tape.h[l - 1].view())
            };
            let at = if l == 0 {
                // J_0 = I, so every sample's block of A_1^T is W_1^T.
                let wt = w.t();
                let mut at = Array2::zeros((rows * dim, w.nrows()));
                for b in 0..rows {
                    at.slice_mut(s![b * dim..(b + 1) * dim, ..]).assign(&wt);
                }
                at
            } else {
                tape.jt[l - 1].dot(&w.t())
            };
            let mut jt = at.clone();
            let h = if act.is_identity() {
                z.clone()
            } else {
                let d1 = z.mapv(|v| act.d1(v));
                scale_blocks(jt.view_mut(), d1.view(), dim);
                z.mapv(|v| act.value(v))
            };
            tape.z.push(z);
            tape.h.push(h);
            tape.at.push(at);
            tape.jt.push(jt);
        }
        tape
    }

    fn output(&self) -> &Array2<f64> {
        self.h.last().unwrap()
    }

    fn trace_sum(&self) -> f64 {
        let jt = self.jt.last().unwrap();
        let dim = self.dim;
        (0..self.rows)
            .map(|b| (0..dim).map(|k| jt[[b * dim + k, k]]).sum::<f64>())
            .sum()
    }

    /// Sum over the chunk of `tr(J) + |s|^2 / 2`.
    fn loss_sum(&self) -> f64 {
        let sq: f64 = self.output().iter().map(|v| v * v).sum();
        self.trace_sum() + 0.5 * sq
    }

    /// Gradient of [`Self::loss_sum`].
    fn backward(&self, net: &MlpScoreNet, trace_weight: f64) -> ParamGrad {
        let (rows, dim) = (self.rows, self.dim);
        let depth = net.depth();
        let mut grads: Vec<Array2<f64>> = Vec::with_capacity(depth);
        let mut bias_grads: Vec<Array2<f64>> = Vec::with_capacity(depth);

        let mut h_bar = self.output().clone();
        let mut j_bar = Array2::<f64>::zeros((rows * dim, dim));
        for b in 0..rows {
            for k in 0..dim {
                j_bar[[b * dim + k, k]] = trace_weight;
            }
        }

        for l in (0..depth).rev() {
            let w = &net.params[l];
            let act = net.activations[l];
            let z = &self.z[l];

            let (a_bar, z_bar) = if act.is_identity() {
                (j_bar, h_bar)
            } else {
                let d1 = z.mapv(|v| act.d1(v));
                let d2 = z.mapv(|v| act.d2(v));
                // Contraction of J-bar with A per sample: sum_k Jbar[bk,i] A[bk,i].
                let width = w.nrows();
                let jb3 = j_bar.view().into_shape_with_order((rows, dim, width)).unwrap();
                let at3 = self.at[l].view().into_shape_with_order((rows, dim, width)).unwrap();
                let r = (&jb3 * &at3).sum_axis(Axis(1));
                let z_bar = &d1 * &h_bar + &d2 * &r;
                let mut a_bar = j_bar;
                scale_blocks(a_bar.view_mut(), d1.view(), dim);
                (a_bar, z_bar)
            };

            let prev_h = if l == 0 { self.input } else { self.h[l - 1].view() };
            let mut gw = z_bar.t().dot(&prev_h);
            if l == 0 {
                // J_0^T blocks are identities: column k collects rows b*D + k.
                let a3 = a_bar.view().into_shape_with_order((rows, dim, w.nrows())).unwrap();
                let summed = a3.sum_axis(Axis(0));
                gw += &summed.t();
            } else {
                gw += &a_bar.t().dot(&self.jt[l - 1]);
            }
            grads.push(gw);
            if net.has_bias {
                bias_grads.push(z_bar.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }

            if l > 0 {
                h_bar = z_bar.dot(w);
                j_bar = a_bar.dot(w);
            } else {
                break;
            }
        }
        grads.reverse();
        bias_grads.reverse();
        grads.extend(bias_grads);
        ParamGrad { layers: grads }
    }
}

/// Multiplies each `D`-row block `b` of a stacked matrix by `scale[b, :]`
/// column-wise.
fn scale_blocks(mut stacked: ArrayViewMut2<'_, f64>, scale: ArrayView2<'_, f64>, dim: usize) {
    let rows = scale.nrows();
    let width = scale.ncols();
    let mut s3 = stacked
        .view_mut()
        .into_shape_with_order((rows, dim, width))
        .unwrap();
    s3 *= &scale.insert_axis(Axis(1));
}

/// On-disk form of a trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
    /// Row-major `weights[layer][row][col]`.
    pub weights: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biases: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    #[serde(default)]
    pub train_meta: serde_json::Value,
}

impl Checkpoint {
    pub fn to_net(&self) -> Result<MlpScoreNet> {
        let mut weights = Vec::with_capacity(self.weights.len());
        for (l, rows) in self.weights.iter().enumerate() {
            let r = rows.len();
            let c = rows.first().map_or(0, |row| row.len());
            if rows.iter().any(|row| row.len() != c) {
                return Err(Error::InvalidArgument(format!("ragged weight matrix in layer {}", l + 1)));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            weights.push(
                Array2::from_shape_vec((r, c), flat)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?,
            );
        }
        let net = match &self.biases {
            Some(b) => MlpScoreNet::with_biases(
                weights,
                b.iter().map(|v| Array1::from(v.clone())).collect(),
                self.activations.clone(),
            )?,
            None => MlpScoreNet::new(weights, self.activations.clone())?,
        };
        if net.dims() != self.dims.as_slice() {
            return Err(Error::InvalidArgument(format!(
                "checkpoint dims {:?} disagree with weight shapes {:?}",
                self.dims,
                net.dims()
            )));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
