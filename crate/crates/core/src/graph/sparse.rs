//! Sparse symmetric matrices in CSR form, plus the two iterative solvers the
//! rest of the crate leans on: power iteration for the dominant eigenvalue
//! and conjugate gradients for consistent positive-semidefinite systems.

use super::{FlipMatrix, GraphError};
use crate::rng::{derive_rng, splitmix64};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;

const SYMMETRY_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;
const POWER_RESTARTS: usize = 3;
// Fixed internal seed for the power-iteration start vector.
const POWER_SEED: u64 = 0x5eed_0f0e_0001_ab1e;

/// Symmetric sparse matrix with a fixed, sorted CSR layout.
///
/// Construction checks symmetry to within 1e-12 and drops explicit zeros;
/// the entry order is deterministic, which keeps every downstream
/// computation reproducible bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from coordinate triplets, summing duplicates.
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(GraphError::DimensionMismatch { expected: dim, got: i.max(j) + 1 });
            }
            *map.entry((i, j)).or_insert(0.0) += v;
        }
        map.retain(|_, v| *v != 0.0);
        for (&(i, j), &v) in &map {
            let vt = map.get(&(j, i)).copied().unwrap_or(0.0);
            if (v - vt).abs() > SYMMETRY_TOL {
                return Err(GraphError::NotSymmetric { i, j, tol: SYMMETRY_TOL });
            }
        }
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(map.len());
        let mut values = Vec::with_capacity(map.len());
        for (&(i, j), &v) in &map {
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { dim, row_ptr, col_idx, values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, 1.0))).expect("identity is symmetric")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.dim, "matvec dimension");
        let mut out = DVector::zeros(self.dim);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            out[i] = acc;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }

    /// Entrywise scaling; the layout is preserved.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out
    }

    /// `M + c I`.
    pub fn shifted(&self, c: f64) -> Self {
        let triplets = self
            .iter_entries()
            .chain((0..self.dim).map(|i| (i, i, c)));
        Self::from_triplets(self.dim, triplets).expect("shift preserves symmetry")
    }

    /// `F M F` for a diagonal flip; entry (i, j) is scaled by
    /// `sign(i) * sign(j)` exactly, so the sparsity layout and the spectrum
    /// are both unchanged.
    pub fn conjugated(&self, flip: &FlipMatrix) -> Result<Self, GraphError> {
        if flip.len() != self.dim {
            return Err(GraphError::DimensionMismatch { expected: self.dim, got: flip.len() });
        }
        let mut out = self.clone();
        for i in 0..self.dim {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                out.values[k] *= flip.sign(i) * flip.sign(out.col_idx[k]);
            }
        }
        Ok(out)
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    /// Dominant eigenvalue by power iteration with a deterministic seeded
    /// start vector.
    ///
    /// Convergence is declared when the residual `||Mx - lambda x||` drops
    /// below `tol * max(lambda, 1)`; for a symmetric matrix this bounds the
    /// distance from `lambda` to the spectrum. A zero matrix yields 0 by
    /// convention.
    pub fn max_eigenvalue(&self, tol: f64) -> Result<f64, GraphError> {
        if self.dim == 0 || self.values.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let mut rng = derive_rng(POWER_SEED, splitmix64(self.dim as u64), 0);
        'restart: for _ in 0..POWER_RESTARTS {
            let mut x = DVector::from_iterator(
                self.dim,
                (0..self.dim).map(|_| StandardNormal.sample(&mut rng)),
            );
            let norm = x.norm();
            if norm == 0.0 {
                continue 'restart;
            }
            x /= norm;
            for _ in 0..POWER_MAX_ITER {
                let y = self.matvec(&x);
                let lambda = x.dot(&y);
                let residual = (&y - &x * lambda).norm();
                if residual <= tol * lambda.abs().max(1.0) {
                    return Ok(lambda);
                }
                let ny = y.norm();
                if ny == 0.0 {
                    // start vector fell in the kernel; try a fresh one
                    continue 'restart;
                }
                x = y / ny;
            }
            return Err(GraphError::NonConvergence(POWER_MAX_ITER));
        }
        Err(GraphError::NonConvergence(POWER_MAX_ITER))
    }
}

pub(crate) struct CgOutcome {
    pub solution: DVector<f64>,
    pub residual_norm: f64,
    pub converged: bool,
}

/// Conjugate gradients for a consistent symmetric positive-semidefinite
/// system, started from zero. For singular consistent systems the iterates
/// stay in the range of the operator, so the minimum-norm solution comes out.
pub(crate) fn conjugate_gradient<F>(
    apply: F,
    b: &DVector<f64>,
    tol_abs: f64,
    max_iter: usize,
) -> CgOutcome
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = b.len();
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut rs = r.dot(&r);
    if rs.sqrt() <= tol_abs {
        return CgOutcome { solution: x, residual_norm: rs.sqrt(), converged: true };
    }
    let mut p = r.clone();
    for _ in 0..max_iter {
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            // direction in the kernel; nothing further to gain
            break;
        }
        let alpha = rs / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rs_new = r.dot(&r);
        if rs_new.sqrt() <= tol_abs {
            return CgOutcome { solution: x, residual_norm: rs_new.sqrt(), converged: true };
        }
        p = &r + &p * (rs_new / rs);
        rs = rs_new;
    }
    let res = r.norm();
    CgOutcome { solution: x, residual_norm: res, converged: res <= tol_abs }
}
