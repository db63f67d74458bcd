//! The autodiff tape.
//!
//! Values are computed eagerly as ops are recorded; `backward` runs one
//! reverse sweep over the record. Supported ops are exactly what the two
//! architectures in this crate need: matrix multiply, outer product,
//! elementwise add/scale, soft-thresholding with a trainable threshold,
//! relu, valid 1-D convolution with stride, non-overlapping max-pooling,
//! flatten, softmax cross-entropy, and masked mean-squared error.
//!
//! Subgradient conventions: `relu'(0) = 0`; the soft-threshold derivative is
//! 0 on the closed dead zone `|x| <= |tau|`; max-pool ties route to the
//! first maximizer.

use super::{soft_threshold_scalar, NnError};
use nalgebra::{DMatrix, DVector};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Input,
    Add(usize, usize),
    Scale(usize, f64),
    MatMul(usize, usize),
    Outer(usize, usize),
    SoftThreshold { x: usize, tau: usize },
    Relu(usize),
    Conv1d { x: usize, w: usize, kernel_width: usize, stride: usize },
    MaxPool1d { x: usize, width: usize, argmax: Vec<usize> },
    Flatten(usize),
    SoftmaxCrossEntropy { logits: usize, label: usize, probs: DVector<f64> },
    MaskedMse { pred: usize, target: DVector<f64>, idx: Vec<usize> },
    SumSquares(usize),
}

/// Append-only reverse-mode computation graph.
pub struct Tape {
    values: Vec<DMatrix<f64>>,
    grads: Vec<DMatrix<f64>>,
    ops: Vec<Op>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { values: Vec::new(), grads: Vec::new(), ops: Vec::new() }
    }

    fn push(&mut self, value: DMatrix<f64>, op: Op) -> Var {
        let id = self.values.len();
        self.grads.push(DMatrix::zeros(value.nrows(), value.ncols()));
        self.values.push(value);
        self.ops.push(op);
        Var(id)
    }

    /// Registers a leaf. Gradients are accumulated for every leaf; callers
    /// simply ignore the ones they do not train.
    pub fn input(&mut self, value: DMatrix<f64>) -> Var {
        self.push(value, Op::Input)
    }

    /// Leaf from a column vector.
    pub fn input_vector(&mut self, value: DVector<f64>) -> Var {
        let n = value.len();
        self.input(DMatrix::from_column_slice(n, 1, value.as_slice()))
    }

    /// Leaf holding a single scalar (1x1).
    pub fn input_scalar(&mut self, value: f64) -> Var {
        self.input(DMatrix::from_element(1, 1, value))
    }

    pub fn value(&self, v: Var) -> &DMatrix<f64> {
        &self.values[v.0]
    }

    pub fn grad(&self, v: Var) -> &DMatrix<f64> {
        &self.grads[v.0]
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.values[v.0][(0, 0)]
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        (self.values[v.0].nrows(), self.values[v.0].ncols())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::ShapeMismatch(format!(
                "add: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let value = &self.values[a.0] + &self.values[b.0];
        Ok(self.push(value, Op::Add(a.0, b.0)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = &self.values[a.0] * factor;
        self.push(value, Op::Scale(a.0, factor))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (_, ak) = self.shape(a);
        let (bk, _) = self.shape(b);
        if ak != bk {
            return Err(NnError::ShapeMismatch(format!(
                "matmul: {:?} * {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let value = &self.values[a.0] * &self.values[b.0];
        Ok(self.push(value, Op::MatMul(a.0, b.0)))
    }

    /// Outer product of two column vectors: `a b^T`.
    pub fn outer(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        if self.shape(a).1 != 1 || self.shape(b).1 != 1 {
            return Err(NnError::ShapeMismatch(format!(
                "outer expects column vectors, got {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let value = &self.values[a.0] * self.values[b.0].transpose();
        Ok(self.push(value, Op::Outer(a.0, b.0)))
    }

    /// Elementwise soft-thresholding with a trainable scalar threshold
    /// (`tau` must be 1x1; the effective threshold is `|tau|`).
    pub fn soft_threshold(&mut self, x: Var, tau: Var) -> Result<Var, NnError> {
        if self.shape(tau) != (1, 1) {
            return Err(NnError::ShapeMismatch(format!(
                "soft_threshold: tau must be 1x1, got {:?}",
                self.shape(tau)
            )));
        }
        let t = self.values[tau.0][(0, 0)];
        let value = self.values[x.0].map(|v| soft_threshold_scalar(v, t));
        Ok(self.push(value, Op::SoftThreshold { x: x.0, tau: tau.0 }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.values[x.0].map(|v| v.max(0.0));
        self.push(value, Op::Relu(x.0))
    }

    /// Valid 1-D convolution. `x` is channels x length; `w` is a filter bank
    /// of shape `out_channels x (in_channels * kernel_width)`.
    pub fn conv1d(
        &mut self,
        x: Var,
        w: Var,
        kernel_width: usize,
        stride: usize,
    ) -> Result<Var, NnError> {
        let (c_in, len) = self.shape(x);
        let (c_out, wk) = self.shape(w);
        if kernel_width == 0 || stride == 0 || wk != c_in * kernel_width {
            return Err(NnError::ShapeMismatch(format!(
                "conv1d: weights {c_out}x{wk} incompatible with {c_in} input channels and kernel {kernel_width}"
            )));
        }
        if len < kernel_width {
            return Err(NnError::ShapeMismatch(format!(
                "conv1d: input length {len} shorter than kernel {kernel_width}"
            )));
        }
        let out_len = (len - kernel_width) / stride + 1;
        let mut value = DMatrix::zeros(c_out, out_len);
        {
            let xv = &self.values[x.0];
            let wv = &self.values[w.0];
            for o in 0..c_out {
                for t in 0..out_len {
                    let mut acc = 0.0;
                    for c in 0..c_in {
                        for k in 0..kernel_width {
                            acc += wv[(o, c * kernel_width + k)] * xv[(c, t * stride + k)];
                        }
                    }
                    value[(o, t)] = acc;
                }
            }
        }
        Ok(self.push(value, Op::Conv1d { x: x.0, w: w.0, kernel_width, stride }))
    }

    /// Non-overlapping max-pooling along the length axis; a trailing
    /// remainder shorter than `width` is dropped.
    pub fn max_pool1d(&mut self, x: Var, width: usize) -> Result<Var, NnError> {
        let (c, len) = self.shape(x);
        if width == 0 || len < width {
            return Err(NnError::ShapeMismatch(format!(
                "max_pool1d: width {width} does not fit length {len}"
            )));
        }
        let out_len = len / width;
        let mut value = DMatrix::zeros(c, out_len);
        let mut argmax = vec![0usize; c * out_len];
        {
            let xv = &self.values[x.0];
            for ch in 0..c {
                for t in 0..out_len {
                    let mut best = xv[(ch, t * width)];
                    let mut best_k = t * width;
                    for k in (t * width + 1)..((t + 1) * width) {
                        if xv[(ch, k)] > best {
                            best = xv[(ch, k)];
                            best_k = k;
                        }
                    }
                    value[(ch, t)] = best;
                    argmax[ch * out_len + t] = best_k;
                }
            }
        }
        Ok(self.push(value, Op::MaxPool1d { x: x.0, width, argmax }))
    }

    /// Reshape to a column vector (column-major order).
    pub fn flatten(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let value = DMatrix::from_column_slice(r * c, 1, self.values[x.0].as_slice());
        self.push(value, Op::Flatten(x.0))
    }

    /// Fully-connected affine layer `w x + b` for a column vector `x`.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var, NnError> {
        let wx = self.matmul(w, x)?;
        self.add(wx, b)
    }

    /// Numerically stable fused softmax + cross-entropy against a class
    /// label. `logits` must be a column vector.
    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var, NnError> {
        let (n, cols) = self.shape(logits);
        if cols != 1 {
            return Err(NnError::ShapeMismatch(format!(
                "softmax_cross_entropy: logits must be a column vector, got {:?}",
                self.shape(logits)
            )));
        }
        if label >= n {
            return Err(NnError::LabelOutOfRange { label, classes: n });
        }
        let z = self.values[logits.0].column(0).clone_owned();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps = z.map(|v| (v - m).exp());
        let sum: f64 = exps.sum();
        let probs = exps / sum;
        let loss = sum.ln() + m - z[label];
        let value = DMatrix::from_element(1, 1, loss);
        Ok(self.push(value, Op::SoftmaxCrossEntropy { logits: logits.0, label, probs }))
    }

    /// Mean squared error over the index set `idx`:
    /// `(1/|idx|) * sum_{i in idx} (pred[i] - target[i])^2`.
    /// The target is a constant, not a differentiable node.
    pub fn masked_mse(
        &mut self,
        pred: Var,
        target: &DVector<f64>,
        idx: &[usize],
    ) -> Result<Var, NnError> {
        let (n, cols) = self.shape(pred);
        if cols != 1 || target.len() != n {
            return Err(NnError::ShapeMismatch(format!(
                "masked_mse: pred {:?} vs target length {}",
                self.shape(pred),
                target.len()
            )));
        }
        if idx.is_empty() {
            return Err(NnError::EmptyMask);
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(NnError::ShapeMismatch(format!(
                "masked_mse: index {bad} out of range for length {n}"
            )));
        }
        let p = &self.values[pred.0];
        let mse = idx
            .iter()
            .map(|&i| (p[(i, 0)] - target[i]).powi(2))
            .sum::<f64>()
            / idx.len() as f64;
        let value = DMatrix::from_element(1, 1, mse);
        Ok(self.push(
            value,
            Op::MaskedMse { pred: pred.0, target: target.clone(), idx: idx.to_vec() },
        ))
    }

    /// Sum of squared entries, reduced to a scalar.
    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s: f64 = self.values[x.0].iter().map(|v| v * v).sum();
        let value = DMatrix::from_element(1, 1, s);
        self.push(value, Op::SumSquares(x.0))
    }

    /// Smallest distance of any recorded nonlinearity input to its kink
    /// (soft-threshold dead-zone boundary, relu zero, or max-pool tie).
    /// Infinite when no nonlinearity was recorded. Gradient checks use this
    /// to reject points where finite differences straddle a kink.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for op in &self.ops {
            match op {
                Op::SoftThreshold { x, tau } => {
                    let t = self.values[*tau][(0, 0)].abs();
                    for v in self.values[*x].iter() {
                        margin = margin.min((v.abs() - t).abs());
                    }
                }
                Op::Relu(x) => {
                    for v in self.values[*x].iter() {
                        margin = margin.min(v.abs());
                    }
                }
                Op::MaxPool1d { x, width, argmax } => {
                    let xv = &self.values[*x];
                    let out_len = xv.ncols() / width;
                    for ch in 0..xv.nrows() {
                        for t in 0..out_len {
                            let best_k = argmax[ch * out_len + t];
                            let best = xv[(ch, best_k)];
                            for k in (t * width)..((t + 1) * width) {
                                if k != best_k {
                                    margin = margin.min(best - xv[(ch, k)]);
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        margin
    }

    /// Reverse sweep from a scalar output; fills gradients for every node.
    /// The tape is append-only, so creation order is already topological and
    /// each node is visited exactly once.
    pub fn backward(&mut self, out: Var) -> Result<(), NnError> {
        let (r, c) = self.shape(out);
        if (r, c) != (1, 1) {
            return Err(NnError::NonScalarOutput { rows: r, cols: c });
        }
        for g in &mut self.grads {
            g.fill(0.0);
        }
        self.grads[out.0][(0, 0)] = 1.0;

        for i in (0..self.ops.len()).rev() {
            let go = self.grads[i].clone();
            match &self.ops[i] {
                Op::Input => {}
                Op::Add(a, b) => {
                    self.grads[*a] += &go;
                    self.grads[*b] += &go;
                }
                Op::Scale(a, factor) => {
                    self.grads[*a] += &go * *factor;
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = &go * self.values[b].transpose();
                    let db = self.values[a].transpose() * &go;
                    self.grads[a] += da;
                    self.grads[b] += db;
                }
                Op::Outer(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = &go * &self.values[b];
                    let db = go.transpose() * &self.values[a];
                    self.grads[a] += da;
                    self.grads[b] += db;
                }
                Op::SoftThreshold { x, tau } => {
                    let (x, tau) = (*x, *tau);
                    let t_raw = self.values[tau][(0, 0)];
                    let t = t_raw.abs();
                    let t_sign = if t_raw > 0.0 {
                        1.0
                    } else if t_raw < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    let xv = self.values[x].clone();
                    let mut dtau = 0.0;
                    {
                        let gx = &mut self.grads[x];
                        for (idx, v) in xv.iter().enumerate() {
                            if v.abs() > t {
                                let g = go[idx];
                                gx[idx] += g;
                                dtau -= v.signum() * t_sign * g;
                            }
                        }
                    }
                    self.grads[tau][(0, 0)] += dtau;
                }
                Op::Relu(x) => {
                    let x = *x;
                    let xv = self.values[x].clone();
                    let gx = &mut self.grads[x];
                    for (idx, v) in xv.iter().enumerate() {
                        if *v > 0.0 {
                            gx[idx] += go[idx];
                        }
                    }
                }
                Op::Conv1d { x, w, kernel_width, stride } => {
                    let (x, w, kw, st) = (*x, *w, *kernel_width, *stride);
                    let (c_in, _) = (self.values[x].nrows(), self.values[x].ncols());
                    let c_out = self.values[w].nrows();
                    let out_len = go.ncols();
                    let xv = self.values[x].clone();
                    let wv = self.values[w].clone();
                    for o in 0..c_out {
                        for t in 0..out_len {
                            let g = go[(o, t)];
                            if g == 0.0 {
                                continue;
                            }
                            for c in 0..c_in {
                                for k in 0..kw {
                                    self.grads[w][(o, c * kw + k)] += g * xv[(c, t * st + k)];
                                    self.grads[x][(c, t * st + k)] += g * wv[(o, c * kw + k)];
                                }
                            }
                        }
                    }
                }
                Op::MaxPool1d { x, width: _, argmax } => {
                    let x = *x;
                    let out_len = go.ncols();
                    for ch in 0..go.nrows() {
                        for t in 0..out_len {
                            let k = argmax[ch * out_len + t];
                            self.grads[x][(ch, k)] += go[(ch, t)];
                        }
                    }
                }
                Op::Flatten(x) => {
                    let x = *x;
                    let gx = &mut self.grads[x];
                    for (idx, g) in go.iter().enumerate() {
                        gx[idx] += g;
                    }
                }
                Op::SoftmaxCrossEntropy { logits, label, probs } => {
                    let (logits, label) = (*logits, *label);
                    let g = go[(0, 0)];
                    let probs = probs.clone();
                    let gl = &mut self.grads[logits];
                    for i in 0..probs.len() {
                        let indicator = if i == label { 1.0 } else { 0.0 };
                        gl[(i, 0)] += g * (probs[i] - indicator);
                    }
                }
                Op::MaskedMse { pred, target, idx } => {
                    let pred = *pred;
                    let g = go[(0, 0)];
                    let scale = 2.0 / idx.len() as f64;
                    let pv = self.values[pred].clone();
                    let target = target.clone();
                    let idx = idx.clone();
                    let gp = &mut self.grads[pred];
                    for &i in &idx {
                        gp[(i, 0)] += g * scale * (pv[(i, 0)] - target[i]);
                    }
                }
                Op::SumSquares(x) => {
                    let x = *x;
                    let g = go[(0, 0)];
                    let xv = self.values[x].clone();
                    self.grads[x] += xv * (2.0 * g);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sum_squares_gradient() {
        // y = ||x||^2 at x = (1, 2) -> grad (2, 4)
        let mut t = Tape::new();
        let x = t.input_vector(DVector::from_vec(vec![1.0, 2.0]));
        let y = t.sum_squares(x);
        assert_eq!(t.scalar_value(y), 5.0);
        t.backward(y).unwrap();
        assert_eq!(t.grad(x).as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn soft_threshold_gradients_in_linear_region() {
        // y = st(x, tau) at x=2, tau=1: dy/dx = 1, dy/dtau = -1
        let mut t = Tape::new();
        let x = t.input_scalar(2.0);
        let tau = t.input_scalar(1.0);
        let y = t.soft_threshold(x, tau).unwrap();
        assert_eq!(t.scalar_value(y), 1.0);
        t.backward(y).unwrap();
        assert_eq!(t.grad(x)[(0, 0)], 1.0);
        assert_eq!(t.grad(tau)[(0, 0)], -1.0);
    }

    #[test]
    fn soft_threshold_gradient_zero_in_dead_zone() {
        let mut t = Tape::new();
        let x = t.input_scalar(0.3);
        let tau = t.input_scalar(1.0);
        let y = t.soft_threshold(x, tau).unwrap();
        t.backward(y).unwrap();
        assert_eq!(t.grad(x)[(0, 0)], 0.0);
        assert_eq!(t.grad(tau)[(0, 0)], 0.0);
    }

    #[test]
    fn softmax_cross_entropy_symmetric_two_class() {
        // logits (0, 0), label 0: loss = ln 2, grad = (-0.5, 0.5)
        let mut t = Tape::new();
        let logits = t.input_vector(DVector::from_vec(vec![0.0, 0.0]));
        let loss = t.softmax_cross_entropy(logits, 0).unwrap();
        assert_relative_eq!(t.scalar_value(loss), 2.0_f64.ln(), epsilon = 1e-12);
        t.backward(loss).unwrap();
        assert_relative_eq!(t.grad(logits)[(0, 0)], -0.5, epsilon = 1e-12);
        assert_relative_eq!(t.grad(logits)[(1, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn label_out_of_range_rejected() {
        let mut t = Tape::new();
        let logits = t.input_vector(DVector::from_vec(vec![0.0, 0.0]));
        assert!(matches!(
            t.softmax_cross_entropy(logits, 2),
            Err(NnError::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn matmul_gradients() {
        // y = sum((A x)^2) with hand-checkable numbers
        let mut t = Tape::new();
        let a = t.input(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let x = t.input_vector(DVector::from_vec(vec![1.0, 1.0]));
        let ax = t.matmul(a, x).unwrap();
        let y = t.sum_squares(ax);
        t.backward(y).unwrap();
        // Ax = (3, 7); dy/d(Ax) = (6, 14); dA = dy * x^T; dx = A^T dy
        assert_eq!(t.grad(a).as_slice(), DMatrix::from_row_slice(2, 2, &[6.0, 6.0, 14.0, 14.0]).as_slice());
        assert_eq!(t.grad(x).as_slice(), &[6.0 + 42.0, 12.0 + 56.0]);
    }

    #[test]
    fn outer_product_gradients() {
        let mut t = Tape::new();
        let a = t.input_vector(DVector::from_vec(vec![1.0, -2.0]));
        let b = t.input_vector(DVector::from_vec(vec![3.0, 0.5, 1.0]));
        let m = t.outer(a, b).unwrap();
        assert_eq!(t.value(m)[(1, 0)], -6.0);
        let y = t.sum_squares(m);
        t.backward(y).unwrap();
        // d/da_i = 2 a_i ||b||^2, d/db_j = 2 b_j ||a||^2
        let b2 = 9.0 + 0.25 + 1.0;
        let a2 = 1.0 + 4.0;
        assert_relative_eq!(t.grad(a)[(0, 0)], 2.0 * 1.0 * b2, epsilon = 1e-12);
        assert_relative_eq!(t.grad(b)[(1, 0)], 2.0 * 0.5 * a2, epsilon = 1e-12);
    }

    #[test]
    fn masked_mse_value_and_gradient() {
        let mut t = Tape::new();
        let pred = t.input_vector(DVector::from_vec(vec![1.0, 5.0, 2.0]));
        let target = DVector::from_vec(vec![0.0, 2.0, 2.0]);
        let loss = t.masked_mse(pred, &target, &[0, 1]).unwrap();
        // errors (1, 3) -> mean of squares = 5
        assert_eq!(t.scalar_value(loss), 5.0);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(pred).as_slice(), &[1.0, 3.0, 0.0]);
    }

    #[test]
    fn masked_mse_empty_mask_rejected() {
        let mut t = Tape::new();
        let pred = t.input_vector(DVector::from_vec(vec![1.0]));
        let target = DVector::from_vec(vec![0.0]);
        assert!(matches!(t.masked_mse(pred, &target, &[]), Err(NnError::EmptyMask)));
    }

    #[test]
    fn conv_pool_flatten_shapes_and_gradient_flow() {
        let mut t = Tape::new();
        // 2 channels, length 6, kernel 3, stride 1 -> 1x4 out
        let x = t.input(DMatrix::from_row_slice(
            2,
            6,
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.5, 0.0, -0.5, 0.0, 0.5, 0.0],
        ));
        let w = t.input(DMatrix::from_row_slice(1, 6, &[1.0, 0.0, -1.0, 2.0, 0.0, 1.0]));
        let c = t.conv1d(x, w, 3, 1).unwrap();
        assert_eq!(t.value(c).shape(), (1, 4));
        let p = t.max_pool1d(c, 2).unwrap();
        assert_eq!(t.value(p).shape(), (1, 2));
        let f = t.flatten(p);
        let y = t.sum_squares(f);
        t.backward(y).unwrap();
        assert!(t.grad(w).iter().any(|&g| g != 0.0));
        assert!(t.grad(x).iter().any(|&g| g != 0.0));
    }

    #[test]
    fn conv_stride_output_length() {
        let mut t = Tape::new();
        let x = t.input(DMatrix::zeros(1, 15));
        let w = t.input(DMatrix::zeros(4, 8));
        let c = t.conv1d(x, w, 8, 4).unwrap();
        assert_eq!(t.value(c).shape(), (4, 2));
    }

    #[test]
    fn shape_mismatch_reported() {
        let mut t = Tape::new();
        let a = t.input(DMatrix::zeros(2, 2));
        let b = t.input(DMatrix::zeros(3, 2));
        assert!(t.add(a, b).is_err());
        assert!(t.matmul(b, b).is_err());
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::new();
        let a = t.input(DMatrix::zeros(2, 2));
        assert!(matches!(
            t.backward(a),
            Err(NnError::NonScalarOutput { rows: 2, cols: 2 })
        ));
    }

    #[test]
    fn max_pool_tie_routes_to_first() {
        let mut t = Tape::new();
        let x = t.input(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
        let p = t.max_pool1d(x, 2).unwrap();
        let y = t.sum_squares(p);
        t.backward(y).unwrap();
        assert_eq!(t.grad(x).as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn kink_margin_reports_nearest_boundary() {
        let mut t = Tape::new();
        let x = t.input_vector(DVector::from_vec(vec![1.5, -0.2]));
        let tau = t.input_scalar(1.0);
        let _ = t.soft_threshold(x, tau).unwrap();
        // |1.5| - 1 = 0.5, |-0.2| - 1 = -0.8 -> margin 0.5 min 0.8 = 0.5
        assert_relative_eq!(t.kink_margin(), 0.5, epsilon = 1e-12);
    }
}
