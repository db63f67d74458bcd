//! Aggregation classifier for source localization.
//!
//! A signal is summarized by its trajectory under repeated application of a
//! normalized shift operator, observed at a fixed set of indices: row `i` of
//! the aggregation sequence is the value at the i-th selected index after
//! 0, 1, 2, ... shifts. A small 1-D CNN with relu, a global max-pool, and a
//! softmax head turns the sequence into class probabilities.
//!
//! Two invariance facts drive the tests here: with the selected indices
//! orientation-fixed, the sequence (and hence the output) does not change
//! under reorientation of the remaining edges; and for an arbitrary
//! reorientation, negating the first-layer filter slices of the flipped
//! selected channels ([`rotate_params`]) reproduces the original output
//! exactly.

use crate::datagen::Dataset;
use crate::graph::{
    hodge_decompose, FlipMatrix, FlowSignal, Graph, GraphError, ShiftKind, ShiftOperator,
};
use crate::nn::{gaussian_matrix, Adam, AdamConfig, NnError, Tape, Var, INIT_STD};
use crate::rng::{derive_rng, PURPOSE_EPOCH_SHUFFLE, PURPOSE_PARAM_INIT};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgnnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape chain broken: {0}")]
    ShapeChainBroken(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("record {0} has no label")]
    MissingLabel(usize),
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Ordered row-selection: which signal indices are observed during
/// aggregation. Works over edge space or node space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMatrix {
    selected: Vec<usize>,
    dim: usize,
}

impl SelectionMatrix {
    pub fn new(selected: Vec<usize>, dim: usize) -> Result<Self, AgnnError> {
        let mut seen = std::collections::HashSet::new();
        for &i in &selected {
            if i >= dim {
                return Err(AgnnError::InvalidSelection(format!(
                    "index {i} out of range for dimension {dim}"
                )));
            }
            if !seen.insert(i) {
                return Err(AgnnError::InvalidSelection(format!("duplicate index {i}")));
            }
        }
        if selected.is_empty() {
            return Err(AgnnError::InvalidSelection("no indices selected".into()));
        }
        Ok(Self { selected, dim })
    }

    /// The `k` edges with the largest endpoint degree sum, ties broken by
    /// edge index.
    pub fn highest_degree_edges(g: &Graph, k: usize) -> Result<Self, AgnnError> {
        let deg = g.degrees();
        let mut order: Vec<usize> = (0..g.num_edges()).collect();
        order.sort_by_key(|&e| {
            let (t, h) = g.edge(e);
            (std::cmp::Reverse(deg[t] + deg[h]), e)
        });
        order.truncate(k.min(g.num_edges()));
        Self::new(order, g.num_edges())
    }

    /// The `k` highest-degree nodes, ties broken by node id; for the
    /// node-space variant.
    pub fn highest_degree_nodes(g: &Graph, k: usize) -> Result<Self, AgnnError> {
        let deg = g.degrees();
        let mut order: Vec<usize> = (0..g.num_nodes()).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(deg[v]), v));
        order.truncate(k.min(g.num_nodes()));
        Self::new(order, g.num_nodes())
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn k(&self) -> usize {
        self.selected.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `C x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.selected.len(), self.selected.iter().map(|&i| x[i]))
    }

    /// Diagonal of `C F C^T`: the flip signs restricted to the selection.
    pub fn flip_restriction(&self, f: &FlipMatrix) -> Result<DVector<f64>, AgnnError> {
        if f.len() != self.dim {
            return Err(AgnnError::DimensionMismatch { expected: self.dim, got: f.len() });
        }
        Ok(DVector::from_iterator(
            self.selected.len(),
            self.selected.iter().map(|&i| f.sign(i)),
        ))
    }
}

/// Trajectory matrix: row `i`, column `j` is the value at selected index `i`
/// after `j` normalized shift applications. Column 0 is the raw signal at
/// the selected indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AggSequence {
    data: DMatrix<f64>,
}

impl AggSequence {
    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }
}

/// Full aggregation depth: `dim - 1` shift applications.
pub fn full_depth(signal_dim: usize) -> usize {
    signal_dim.saturating_sub(1)
}

/// Collects the trajectory of `signal` under `depth` successive normalized
/// shift applications, observed at the selected indices. Matrix powers are
/// never materialized.
pub fn aggregate_sample_vec(
    signal: &DVector<f64>,
    s: &ShiftOperator,
    c: &SelectionMatrix,
    depth: usize,
) -> Result<AggSequence, AgnnError> {
    if signal.len() != s.dim() {
        return Err(AgnnError::DimensionMismatch { expected: s.dim(), got: signal.len() });
    }
    if c.dim() != s.dim() {
        return Err(AgnnError::DimensionMismatch { expected: s.dim(), got: c.dim() });
    }
    let mut data = DMatrix::zeros(c.k(), depth + 1);
    let mut x = signal.clone();
    data.set_column(0, &c.apply(&x));
    for j in 1..=depth {
        x = s.apply_normalized(&x);
        data.set_column(j, &c.apply(&x));
    }
    Ok(AggSequence { data })
}

/// [`aggregate_sample_vec`] for edge flows.
pub fn aggregate_sample(
    f: &FlowSignal,
    s: &ShiftOperator,
    c: &SelectionMatrix,
    depth: usize,
) -> Result<AggSequence, AgnnError> {
    aggregate_sample_vec(f.values(), s, c, depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub out_channels: usize,
    pub kernel_width: usize,
    pub stride: usize,
}

/// Architecture of the CNN head: a conv+relu stack, a global max-pool, and
/// an affine layer to `classes` logits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnSpec {
    pub in_channels: usize,
    pub in_len: usize,
    pub conv: Vec<ConvLayerSpec>,
    pub classes: usize,
}

impl CnnSpec {
    /// Default head: two conv layers (kernel 8, stride 4) widening to 32
    /// then 64 channels.
    pub fn default_head(in_channels: usize, in_len: usize, classes: usize) -> Self {
        Self {
            in_channels,
            in_len,
            conv: vec![
                ConvLayerSpec { out_channels: 32, kernel_width: 8, stride: 4 },
                ConvLayerSpec { out_channels: 64, kernel_width: 8, stride: 4 },
            ],
            classes,
        }
    }

    /// Per-layer output (channels, length), verifying the shapes chain all
    /// the way to the classifier.
    pub fn layer_shapes(&self) -> Result<Vec<(usize, usize)>, AgnnError> {
        if self.classes == 0 {
            return Err(AgnnError::ShapeChainBroken("zero classes".into()));
        }
        let mut shapes = Vec::with_capacity(self.conv.len());
        let (mut ch, mut len) = (self.in_channels, self.in_len);
        if ch == 0 || len == 0 {
            return Err(AgnnError::ShapeChainBroken(format!("empty input {ch}x{len}")));
        }
        for (i, layer) in self.conv.iter().enumerate() {
            if layer.kernel_width == 0 || layer.stride == 0 || layer.out_channels == 0 {
                return Err(AgnnError::ShapeChainBroken(format!(
                    "layer {i}: degenerate spec {layer:?}"
                )));
            }
            if len < layer.kernel_width {
                return Err(AgnnError::ShapeChainBroken(format!(
                    "layer {i}: input length {len} shorter than kernel {}",
                    layer.kernel_width
                )));
            }
            len = (len - layer.kernel_width) / layer.stride + 1;
            ch = layer.out_channels;
            shapes.push((ch, len));
        }
        Ok(shapes)
    }
}

/// Trainable CNN parameters: one flattened filter bank per conv layer
/// (`out_channels x in_channels * kernel_width`), then the affine head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnParams {
    pub spec: CnnSpec,
    pub conv_weights: Vec<DMatrix<f64>>,
    pub fc_weight: DMatrix<f64>,
    pub fc_bias: DVector<f64>,
}

impl CnnParams {
    /// Gaussian init (std 0.1) for every parameter, in declaration order.
    pub fn init(spec: CnnSpec, seed: u64) -> Result<Self, AgnnError> {
        let shapes = spec.layer_shapes()?;
        let mut rng = derive_rng(seed, PURPOSE_PARAM_INIT, 1);
        let mut conv_weights = Vec::with_capacity(spec.conv.len());
        let mut in_ch = spec.in_channels;
        for layer in &spec.conv {
            conv_weights.push(gaussian_matrix(
                layer.out_channels,
                in_ch * layer.kernel_width,
                INIT_STD,
                &mut rng,
            ));
            in_ch = layer.out_channels;
        }
        let final_ch = shapes.last().map(|&(c, _)| c).unwrap_or(spec.in_channels);
        let fc_weight = gaussian_matrix(spec.classes, final_ch, INIT_STD, &mut rng);
        let fc_bias =
            gaussian_matrix(spec.classes, 1, INIT_STD, &mut rng).column(0).clone_owned();
        Ok(Self { spec, conv_weights, fc_weight, fc_bias })
    }

    pub(crate) fn to_param_vec(&self) -> Vec<DMatrix<f64>> {
        let mut out = self.conv_weights.clone();
        out.push(self.fc_weight.clone());
        let n = self.fc_bias.len();
        out.push(DMatrix::from_column_slice(n, 1, self.fc_bias.as_slice()));
        out
    }

    pub(crate) fn from_param_vec(spec: CnnSpec, params: &[DMatrix<f64>]) -> Self {
        let n_conv = spec.conv.len();
        Self {
            spec,
            conv_weights: params[..n_conv].to_vec(),
            fc_weight: params[n_conv].clone(),
            fc_bias: DVector::from_column_slice(params[n_conv + 1].as_slice()),
        }
    }
}

struct LogitBindings {
    params: Vec<Var>,
    logits: Var,
}

fn build_logits_tape(
    tape: &mut Tape,
    seq: &AggSequence,
    p: &CnnParams,
) -> Result<LogitBindings, AgnnError> {
    if seq.channels() != p.spec.in_channels || seq.len() != p.spec.in_len {
        return Err(AgnnError::DimensionMismatch {
            expected: p.spec.in_channels * p.spec.in_len,
            got: seq.channels() * seq.len(),
        });
    }
    p.spec.layer_shapes()?;
    let mut x = tape.input(seq.data().clone());
    let mut params = Vec::new();
    for (layer, w) in p.spec.conv.iter().zip(&p.conv_weights) {
        let w_var = tape.input(w.clone());
        params.push(w_var);
        let c = tape.conv1d(x, w_var, layer.kernel_width, layer.stride)?;
        x = tape.relu(c);
    }
    let width = tape.value(x).ncols();
    let pooled = tape.max_pool1d(x, width)?;
    let flat = tape.flatten(pooled);
    let w_fc = tape.input(p.fc_weight.clone());
    let b_fc = {
        let n = p.fc_bias.len();
        tape.input(DMatrix::from_column_slice(n, 1, p.fc_bias.as_slice()))
    };
    params.push(w_fc);
    params.push(b_fc);
    let logits = tape.affine(w_fc, flat, b_fc)?;
    Ok(LogitBindings { params, logits })
}

fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|v| (v - m).exp());
    let sum: f64 = exps.sum();
    exps / sum
}

/// Class probabilities for one aggregation sequence.
pub fn agnn_forward(seq: &AggSequence, p: &CnnParams) -> Result<DVector<f64>, AgnnError> {
    let mut tape = Tape::new();
    let b = build_logits_tape(&mut tape, seq, p)?;
    let logits = tape.value(b.logits).column(0).clone_owned();
    Ok(softmax(&logits))
}

/// Most probable class (first index on ties).
pub fn classify(seq: &AggSequence, p: &CnnParams) -> Result<usize, AgnnError> {
    let probs = agnn_forward(seq, p)?;
    let mut best = 0;
    for i in 1..probs.len() {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Parameters that reproduce the original output on flipped inputs: the
/// first-layer filter slice for input channel `i` is scaled by the flip sign
/// of the i-th selected edge; every other layer is untouched.
pub fn rotate_params(
    p: &CnnParams,
    f: &FlipMatrix,
    c: &SelectionMatrix,
) -> Result<CnnParams, AgnnError> {
    let signs = c.flip_restriction(f)?;
    if c.k() != p.spec.in_channels {
        return Err(AgnnError::DimensionMismatch { expected: p.spec.in_channels, got: c.k() });
    }
    let mut out = p.clone();
    if let (Some(w0), Some(layer)) = (out.conv_weights.first_mut(), p.spec.conv.first()) {
        let kw = layer.kernel_width;
        for (i, &sign) in signs.iter().enumerate() {
            for col in (i * kw)..((i + 1) * kw) {
                for row in 0..w0.nrows() {
                    w0[(row, col)] *= sign;
                }
            }
        }
    }
    Ok(out)
}

/// Least-squares node potentials for a flow: the minimum-norm solution of
/// `B^T phi = f`, shifted to mean zero.
pub fn estimate_potentials(f: &FlowSignal, g: &Graph) -> Result<DVector<f64>, AgnnError> {
    if !g.is_connected() {
        return Err(AgnnError::Graph(GraphError::DisconnectedGraph));
    }
    let d = hodge_decompose(f, g)?;
    let mut phi = d.potentials;
    let mean = phi.mean();
    phi.add_scalar_mut(-mean);
    Ok(phi)
}

/// Turns dataset flows into the signals each shift kind consumes: raw flows
/// for the Hodge operator, absolute values for the orientation-blind
/// linegraph operator, estimated node potentials for the node operator.
pub fn prepare_signals(data: &Dataset, kind: ShiftKind) -> Result<Vec<DVector<f64>>, AgnnError> {
    data.records
        .iter()
        .map(|r| match kind {
            ShiftKind::Hodge => Ok(r.flow.values().clone()),
            ShiftKind::Linegraph => Ok(r.flow.abs().values().clone()),
            ShiftKind::Node => estimate_potentials(&r.flow, data.graph.as_ref()),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgnnTrainConfig {
    pub k_sel: usize,
    /// Number of shift applications (the sequence has `agg_depth + 1`
    /// columns). Capped at the full depth of the signal space.
    pub agg_depth: usize,
    pub conv: Vec<ConvLayerSpec>,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for AgnnTrainConfig {
    fn default() -> Self {
        Self {
            k_sel: 5,
            agg_depth: 63,
            conv: vec![
                ConvLayerSpec { out_channels: 32, kernel_width: 8, stride: 4 },
                ConvLayerSpec { out_channels: 64, kernel_width: 8, stride: 4 },
            ],
            epochs: 10,
            lr: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgnnEpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedAgnn {
    pub params: CnnParams,
    pub curve: Vec<AgnnEpochStats>,
}

fn cross_entropy_step(
    seq: &AggSequence,
    label: usize,
    spec: &CnnSpec,
    param_vec: &[DMatrix<f64>],
) -> Result<(f64, Vec<DMatrix<f64>>), AgnnError> {
    let params = CnnParams::from_param_vec(spec.clone(), param_vec);
    let mut tape = Tape::new();
    let b = build_logits_tape(&mut tape, seq, &params)?;
    let loss = tape.softmax_cross_entropy(b.logits, label).map_err(|e| match e {
        NnError::LabelOutOfRange { label, classes } => AgnnError::LabelOutOfRange { label, classes },
        other => AgnnError::Nn(other),
    })?;
    tape.backward(loss)?;
    let grads = b.params.iter().map(|&v| tape.grad(v).clone()).collect();
    Ok((tape.scalar_value(loss), grads))
}

/// Cross-entropy loss and gradients for one sequence at the given
/// parameters; exposed for the gradient fidelity checks.
pub fn agnn_loss_and_grads(
    seq: &AggSequence,
    label: usize,
    p: &CnnParams,
) -> Result<(f64, Vec<DMatrix<f64>>), AgnnError> {
    cross_entropy_step(seq, label, &p.spec, &p.to_param_vec())
}

/// Kink margin of the loss at the given parameters (relu and max-pool
/// boundaries).
pub fn agnn_loss_kink_margin(
    seq: &AggSequence,
    label: usize,
    p: &CnnParams,
) -> Result<f64, AgnnError> {
    let mut tape = Tape::new();
    let b = build_logits_tape(&mut tape, seq, p)?;
    let _ = tape.softmax_cross_entropy(b.logits, label)?;
    Ok(tape.kink_margin())
}

/// Pre-aggregated training data: sequences plus labels.
pub struct AggregatedData {
    pub sequences: Vec<AggSequence>,
    pub labels: Vec<usize>,
}

/// Aggregates a labeled dataset for a shift kind, applying the per-kind
/// signal transform ([`prepare_signals`]).
pub fn aggregate_dataset(
    data: &Dataset,
    s: &ShiftOperator,
    c: &SelectionMatrix,
    depth: usize,
    classes: usize,
) -> Result<AggregatedData, AgnnError> {
    let signals = prepare_signals(data, s.kind())?;
    let mut sequences = Vec::with_capacity(signals.len());
    let mut labels = Vec::with_capacity(signals.len());
    for (i, (signal, record)) in signals.iter().zip(&data.records).enumerate() {
        let label = record.label.ok_or(AgnnError::MissingLabel(i))?;
        if label >= classes {
            return Err(AgnnError::LabelOutOfRange { label, classes });
        }
        sequences.push(aggregate_sample_vec(signal, s, c, depth)?);
        labels.push(label);
    }
    Ok(AggregatedData { sequences, labels })
}

/// Accuracy of the classifier over pre-aggregated data.
pub fn evaluate_accuracy(data: &AggregatedData, p: &CnnParams) -> Result<f64, AgnnError> {
    if data.sequences.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (seq, &label) in data.sequences.iter().zip(&data.labels) {
        if classify(seq, p)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.sequences.len() as f64)
}

/// Trains the classifier with Adam on per-sample softmax cross-entropy,
/// shuffling the visit order each epoch. Logs per-epoch test accuracy when
/// a test set is supplied. Deterministic given the seed.
pub fn train_classifier(
    data: &Dataset,
    test: Option<&Dataset>,
    classes: usize,
    s: &ShiftOperator,
    c: &SelectionMatrix,
    cfg: &AgnnTrainConfig,
    seed: u64,
) -> Result<TrainedAgnn, AgnnError> {
    if data.is_empty() {
        return Err(AgnnError::EmptyDataset);
    }
    let depth = cfg.agg_depth.min(full_depth(s.dim()));
    let train = aggregate_dataset(data, s, c, depth, classes)?;
    let test_agg = test.map(|t| aggregate_dataset(t, s, c, depth, classes)).transpose()?;

    let spec = CnnSpec {
        in_channels: c.k(),
        in_len: depth + 1,
        conv: cfg.conv.clone(),
        classes,
    };
    let params = CnnParams::init(spec.clone(), seed)?;
    let mut param_vec = params.to_param_vec();
    let mut adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() });

    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train.sequences.len()).collect();
        let mut rng = derive_rng(seed, PURPOSE_EPOCH_SHUFFLE, epoch as u64);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let (loss, grads) =
                cross_entropy_step(&train.sequences[i], train.labels[i], &spec, &param_vec)?;
            adam.step(&mut param_vec, &grads)?;
            epoch_loss += loss;
        }
        let train_loss = epoch_loss / train.sequences.len() as f64;
        let test_accuracy = match &test_agg {
            Some(t) => {
                let current = CnnParams::from_param_vec(spec.clone(), &param_vec);
                Some(evaluate_accuracy(t, &current)?)
            }
            None => None,
        };
        curve.push(AgnnEpochStats { epoch, train_loss, test_accuracy });
    }
    Ok(TrainedAgnn { params: CnnParams::from_param_vec(spec, &param_vec), curve })
}
