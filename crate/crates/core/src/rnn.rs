//! Recurrent flow interpolator.
//!
//! The architecture repeatedly applies a normalized edge-space shift
//! operator to the masked input flow and threads the resulting sequence
//! through a small recurrence:
//!
//! ```text
//! x_k = (S / lambda_max) x_{k-1}
//! H_k = sigma(x_k u^T + H_{k-1} V)        H_0 = 0
//! o_k = sigma(H_k w)
//! ```
//!
//! with `sigma` the soft-thresholding nonlinearity (one trainable threshold
//! for the hidden update, one for the output). Because `sigma` is odd, the
//! output is equivariant to edge reorientation: flipping the input flow and
//! conjugating the shift operator flips the output. Substituting relu breaks
//! the property, which the tests exercise as a negative control.
//!
//! Training minimizes the mean squared error on a set of artificially masked
//! edges, resampled every optimizer step, so a single partially observed
//! flow is already a usable training set.

use crate::datagen::Dataset;
use crate::graph::{FlowSignal, GraphError, ShiftKind, ShiftOperator};
use crate::nn::{
    gaussian_matrix, gaussian_vector, soft_threshold, soft_threshold_mat, Adam, AdamConfig,
    NnError, Tape, Var, INIT_STD,
};
use crate::rng::{derive_rng, PURPOSE_PARAM_INIT, PURPOSE_STEP_MASK, PURPOSE_VAL_MASK};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RnnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty artificial mask")]
    EmptyMask,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("shift kind {0} not supported by the flow RNN (edge-space operators only)")]
    UnsupportedShift(ShiftKind),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Observed edges and the artificially masked training subset.
///
/// `artificial` (the training mask) is always a subset of `observed`; both
/// are kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    observed: Vec<usize>,
    artificial: Vec<usize>,
}

impl MaskSet {
    pub fn new(
        mut observed: Vec<usize>,
        mut artificial: Vec<usize>,
        num_edges: usize,
    ) -> Result<Self, RnnError> {
        observed.sort_unstable();
        observed.dedup();
        artificial.sort_unstable();
        artificial.dedup();
        if let Some(&e) = observed.iter().find(|&&e| e >= num_edges) {
            return Err(RnnError::InvalidMask(format!(
                "observed edge {e} out of range for {num_edges} edges"
            )));
        }
        for &e in &artificial {
            if observed.binary_search(&e).is_err() {
                return Err(RnnError::InvalidMask(format!(
                    "artificial mask edge {e} is not observed"
                )));
            }
        }
        Ok(Self { observed, artificial })
    }

    pub fn all_observed(num_edges: usize) -> Self {
        Self { observed: (0..num_edges).collect(), artificial: Vec::new() }
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn artificial(&self) -> &[usize] {
        &self.artificial
    }

    /// Complement of the observed set.
    pub fn unobserved(&self, num_edges: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut it = self.observed.iter().peekable();
        for e in 0..num_edges {
            if it.peek() == Some(&&e) {
                it.next();
            } else {
                out.push(e);
            }
        }
        out
    }

    /// Edges the training forward pass sees: observed minus artificial.
    pub fn training_input_edges(&self) -> Vec<usize> {
        self.observed
            .iter()
            .copied()
            .filter(|e| self.artificial.binary_search(e).is_err())
            .collect()
    }
}

/// Trainable weights of the recurrence, plus its depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnParams {
    pub u: DVector<f64>,
    pub v: DMatrix<f64>,
    pub w: DVector<f64>,
    pub tau_hidden: f64,
    pub tau_out: f64,
    pub k_steps: usize,
}

impl RnnParams {
    /// Gaussian init (std 0.1) with thresholds at 0.01.
    pub fn init(f_dim: usize, k_steps: usize, seed: u64) -> Self {
        assert!(f_dim >= 1 && k_steps >= 1, "f_dim and k_steps must be positive");
        let mut rng = derive_rng(seed, PURPOSE_PARAM_INIT, 0);
        Self {
            u: gaussian_vector(f_dim, INIT_STD, &mut rng),
            v: gaussian_matrix(f_dim, f_dim, INIT_STD, &mut rng),
            w: gaussian_vector(f_dim, INIT_STD, &mut rng),
            tau_hidden: 0.01,
            tau_out: 0.01,
            k_steps,
        }
    }

    pub fn zeros(f_dim: usize, k_steps: usize) -> Self {
        Self {
            u: DVector::zeros(f_dim),
            v: DMatrix::zeros(f_dim, f_dim),
            w: DVector::zeros(f_dim),
            tau_hidden: 0.0,
            tau_out: 0.0,
            k_steps,
        }
    }

    pub fn f_dim(&self) -> usize {
        self.u.len()
    }

    pub(crate) fn to_param_vec(&self) -> Vec<DMatrix<f64>> {
        let f = self.f_dim();
        vec![
            DMatrix::from_column_slice(f, 1, self.u.as_slice()),
            self.v.clone(),
            DMatrix::from_column_slice(f, 1, self.w.as_slice()),
            DMatrix::from_element(1, 1, self.tau_hidden),
            DMatrix::from_element(1, 1, self.tau_out),
        ]
    }

    pub(crate) fn from_param_vec(params: &[DMatrix<f64>], k_steps: usize) -> Self {
        Self {
            u: DVector::from_column_slice(params[0].as_slice()),
            v: params[1].clone(),
            w: DVector::from_column_slice(params[2].as_slice()),
            tau_hidden: params[3][(0, 0)],
            tau_out: params[4][(0, 0)],
            k_steps,
        }
    }
}

/// Nonlinearity selector; `Relu` exists as the equivariance counterexample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    SoftThreshold,
    Relu,
}

fn check_edge_operator(s: &ShiftOperator, f_len: usize) -> Result<(), RnnError> {
    if s.kind() == ShiftKind::Node {
        return Err(RnnError::UnsupportedShift(s.kind()));
    }
    if s.dim() != f_len {
        return Err(RnnError::DimensionMismatch { expected: s.dim(), got: f_len });
    }
    Ok(())
}

/// Runs the recurrence on an already-masked input (unobserved entries zero)
/// and returns the final output `o_K`.
pub fn rnn_forward(
    f_in: &FlowSignal,
    s: &ShiftOperator,
    p: &RnnParams,
) -> Result<FlowSignal, RnnError> {
    rnn_forward_with(f_in, s, p, Activation::SoftThreshold)
}

/// Forward pass with an explicit nonlinearity choice.
pub fn rnn_forward_with(
    f_in: &FlowSignal,
    s: &ShiftOperator,
    p: &RnnParams,
    activation: Activation,
) -> Result<FlowSignal, RnnError> {
    check_edge_operator(s, f_in.len())?;
    let e = f_in.len();
    let f_dim = p.f_dim();
    let sigma_mat = |m: &DMatrix<f64>, tau: f64| match activation {
        Activation::SoftThreshold => soft_threshold_mat(m, tau),
        Activation::Relu => m.map(|v| v.max(0.0)),
    };
    let sigma_vec = |x: &DVector<f64>, tau: f64| match activation {
        Activation::SoftThreshold => soft_threshold(x, tau),
        Activation::Relu => x.map(|v| v.max(0.0)),
    };
    let mut x = f_in.values().clone();
    let mut h = DMatrix::zeros(e, f_dim);
    for _ in 0..p.k_steps {
        x = s.apply_normalized(&x);
        let pre = &x * p.u.transpose() + &h * &p.v;
        h = sigma_mat(&pre, p.tau_hidden);
    }
    let out = sigma_vec(&(&h * &p.w), p.tau_out);
    Ok(FlowSignal::new(out))
}

struct TapeBindings {
    u: Var,
    v: Var,
    w: Var,
    tau_h: Var,
    tau_o: Var,
    loss: Var,
}

/// Builds the training loss on a tape: mask the flow to `observed minus
/// artificial`, run the recurrence, and take the mean squared error over the
/// artificial mask.
fn build_loss_tape(
    tape: &mut Tape,
    f_true: &FlowSignal,
    s: &ShiftOperator,
    m: &MaskSet,
    p: &RnnParams,
) -> Result<TapeBindings, RnnError> {
    check_edge_operator(s, f_true.len())?;
    if m.artificial().is_empty() {
        return Err(RnnError::EmptyMask);
    }
    let e = f_true.len();
    let masked = f_true.masked(&m.training_input_edges());

    // the x sequence carries no parameters; precompute it outside the tape
    let mut xs = Vec::with_capacity(p.k_steps);
    let mut x = masked.values().clone();
    for _ in 0..p.k_steps {
        x = s.apply_normalized(&x);
        xs.push(x.clone());
    }

    let pv = p.to_param_vec();
    let u = tape.input(pv[0].clone());
    let v = tape.input(pv[1].clone());
    let w = tape.input(pv[2].clone());
    let tau_h = tape.input(pv[3].clone());
    let tau_o = tape.input(pv[4].clone());

    let mut h = tape.input(DMatrix::zeros(e, p.f_dim()));
    for xk in &xs {
        let xk_var = tape.input_vector(xk.clone());
        let xu = tape.outer(xk_var, u)?;
        let hv = tape.matmul(h, v)?;
        let pre = tape.add(xu, hv)?;
        h = tape.soft_threshold(pre, tau_h)?;
    }
    let hw = tape.matmul(h, w)?;
    let o = tape.soft_threshold(hw, tau_o)?;
    let loss = tape.masked_mse(o, f_true.values(), m.artificial())?;
    Ok(TapeBindings { u, v, w, tau_h, tau_o, loss })
}

/// Training loss: mask, forward, mean squared error on the artificial set.
pub fn rnn_loss(
    f_true: &FlowSignal,
    p: &RnnParams,
    s: &ShiftOperator,
    m: &MaskSet,
) -> Result<f64, RnnError> {
    if m.artificial().is_empty() {
        return Err(RnnError::EmptyMask);
    }
    let masked = f_true.masked(&m.training_input_edges());
    let out = rnn_forward(&masked, s, p)?;
    let sum: f64 = m
        .artificial()
        .iter()
        .map(|&e| (f_true.get(e) - out.get(e)).powi(2))
        .sum();
    Ok(sum / m.artificial().len() as f64)
}

/// Loss plus gradients in optimizer order `[u, V, w, tau_hidden, tau_out]`.
pub fn rnn_loss_and_grads(
    f_true: &FlowSignal,
    p: &RnnParams,
    s: &ShiftOperator,
    m: &MaskSet,
) -> Result<(f64, Vec<DMatrix<f64>>), RnnError> {
    let mut tape = Tape::new();
    let b = build_loss_tape(&mut tape, f_true, s, m, p)?;
    tape.backward(b.loss)?;
    let grads = vec![
        tape.grad(b.u).clone(),
        tape.grad(b.v).clone(),
        tape.grad(b.w).clone(),
        tape.grad(b.tau_h).clone(),
        tape.grad(b.tau_o).clone(),
    ];
    Ok((tape.scalar_value(b.loss), grads))
}

/// Loss tape kink margin at the given parameters; used to pick
/// finite-difference-safe points in the gradient fidelity tests.
pub fn rnn_loss_kink_margin(
    f_true: &FlowSignal,
    p: &RnnParams,
    s: &ShiftOperator,
    m: &MaskSet,
) -> Result<f64, RnnError> {
    let mut tape = Tape::new();
    let _ = build_loss_tape(&mut tape, f_true, s, m, p)?;
    Ok(tape.kink_margin())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnnTrainConfig {
    pub f_dim: usize,
    pub k_steps: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Fraction of the observed set resampled as the artificial mask each
    /// optimizer step (at least one edge).
    pub mask_fraction: f64,
    /// Fraction of the observed set held as a fixed per-record validation
    /// mask; the returned parameters minimize this validation loss. Zero
    /// disables tracking and returns the final parameters.
    pub val_fraction: f64,
}

impl Default for RnnTrainConfig {
    fn default() -> Self {
        Self { f_dim: 16, k_steps: 8, epochs: 20, lr: 1e-3, mask_fraction: 0.1, val_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RnnEpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedRnn {
    pub params: RnnParams,
    pub history: Vec<RnnEpochStats>,
}

pub(crate) fn sample_subset(set: &[usize], fraction: f64, rng: &mut impl rand::Rng) -> Vec<usize> {
    let k = ((fraction * set.len() as f64).floor() as usize).clamp(1, set.len());
    let mut pool: Vec<usize> = set.to_vec();
    pool.partial_shuffle(rng, k);
    let mut out: Vec<usize> = pool[..k].to_vec();
    out.sort_unstable();
    out
}

/// Trains the interpolator with Adam, one flow per optimizer step, cycling
/// through the dataset in order. The artificial mask is resampled per step;
/// the per-record validation masks are fixed up front. Deterministic given
/// the seed.
pub fn train_interpolator(
    data: &Dataset,
    s: &ShiftOperator,
    cfg: &RnnTrainConfig,
    seed: u64,
) -> Result<TrainedRnn, RnnError> {
    if data.records.is_empty() {
        return Err(RnnError::EmptyDataset);
    }
    let e = s.dim();
    let observed_sets: Vec<Vec<usize>> = data
        .records
        .iter()
        .map(|r| match &r.mask {
            Some(m) => m.observed().to_vec(),
            None => (0..e).collect(),
        })
        .collect();
    for (i, r) in data.records.iter().enumerate() {
        if r.flow.len() != e {
            return Err(RnnError::DimensionMismatch { expected: e, got: r.flow.len() });
        }
        if observed_sets[i].is_empty() {
            return Err(RnnError::EmptyMask);
        }
    }

    let params = RnnParams::init(cfg.f_dim, cfg.k_steps, seed);
    let mut param_vec = params.to_param_vec();
    let mut adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() });

    let val_masks: Option<Vec<MaskSet>> = if cfg.val_fraction > 0.0 {
        let masks = data
            .records
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let mut rng = derive_rng(seed, PURPOSE_VAL_MASK, i as u64);
                let psi = sample_subset(&observed_sets[i], cfg.val_fraction, &mut rng);
                MaskSet::new(observed_sets[i].clone(), psi, e)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Some(masks)
    } else {
        None
    };

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, RnnParams)> = None;
    let mut step: u64 = 0;
    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for (i, record) in data.records.iter().enumerate() {
            let mut rng = derive_rng(seed, PURPOSE_STEP_MASK, step);
            let psi = sample_subset(&observed_sets[i], cfg.mask_fraction, &mut rng);
            let mask = MaskSet::new(observed_sets[i].clone(), psi, e)?;
            let current = RnnParams::from_param_vec(&param_vec, cfg.k_steps);
            let (loss, grads) = rnn_loss_and_grads(&record.flow, &current, s, &mask)?;
            adam.step(&mut param_vec, &grads)?;
            epoch_loss += loss;
            step += 1;
        }
        let train_loss = epoch_loss / data.records.len() as f64;
        let val_loss = if let Some(masks) = &val_masks {
            let current = RnnParams::from_param_vec(&param_vec, cfg.k_steps);
            let mut total = 0.0;
            for (record, mask) in data.records.iter().zip(masks) {
                total += rnn_loss(&record.flow, &current, s, mask)?;
            }
            let v = total / data.records.len() as f64;
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, current));
            }
            Some(v)
        } else {
            None
        };
        history.push(RnnEpochStats { epoch, train_loss, val_loss });
    }

    let final_params = RnnParams::from_param_vec(&param_vec, cfg.k_steps);
    let params = match best {
        Some((_, p)) => p,
        None => final_params,
    };
    Ok(TrainedRnn { params, history })
}

/// Fills in a partially observed flow: observed entries pass through
/// untouched, unobserved entries take the model output.
pub fn interpolate(
    f_obs: &FlowSignal,
    observed: &[usize],
    s: &ShiftOperator,
    p: &RnnParams,
) -> Result<FlowSignal, RnnError> {
    check_edge_operator(s, f_obs.len())?;
    let masked = f_obs.masked(observed);
    let out = rnn_forward(&masked, s, p)?;
    let mut values = out.values().clone();
    for &e in observed {
        if e >= values.len() {
            return Err(RnnError::InvalidMask(format!("observed edge {e} out of range")));
        }
        values[e] = f_obs.get(e);
    }
    Ok(FlowSignal::new(values))
}
