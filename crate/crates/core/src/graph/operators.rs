//! Graph-derived shift operators.
//!
//! Three Laplacians act as shift operators here: the node-space graph
//! Laplacian `L0 = D - A = B B^T`, the edge-space Hodge Laplacian
//! `L1 = B^T B`, and the linegraph Laplacian (the graph Laplacian of the
//! graph whose nodes are the original edges, adjacent when they share an
//! endpoint). [`ShiftOperator`] bundles a Laplacian with its dominant
//! eigenvalue so repeated normalized applications stay non-expansive.

use super::{Graph, GraphError, SparseSymMatrix};
use crate::graph::FlipMatrix;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

const EIG_TOL: f64 = 1e-8;
// Inflation applied to the power-iteration estimate before it is used as a
// normalizer, guaranteeing ||M / lambda_max|| <= 1.
const LAMBDA_INFLATION: f64 = 1e-6;

impl Graph {
    /// Unweighted adjacency matrix.
    pub fn adjacency(&self) -> SparseSymMatrix {
        let triplets = self
            .edges()
            .iter()
            .flat_map(|&(t, h)| [(t, h, 1.0), (h, t, 1.0)]);
        SparseSymMatrix::from_triplets(self.num_nodes(), triplets)
            .expect("adjacency is symmetric")
    }

    /// Node-space graph Laplacian `L0 = D - A`.
    pub fn graph_laplacian(&self) -> SparseSymMatrix {
        let triplets = self.edges().iter().flat_map(|&(t, h)| {
            [
                (t, t, 1.0),
                (h, h, 1.0),
                (t, h, -1.0),
                (h, t, -1.0),
            ]
        });
        SparseSymMatrix::from_triplets(self.num_nodes(), triplets)
            .expect("graph Laplacian is symmetric")
    }

    /// Edge-space Hodge Laplacian `L1 = B^T B`.
    ///
    /// Every diagonal entry is 2 (each edge has two endpoints); the entry for
    /// two distinct edges sharing a node v is `B[v,e] * B[v,e']`.
    pub fn hodge_laplacian(&self) -> SparseSymMatrix {
        let e = self.num_edges();
        let mut triplets: Vec<(usize, usize, f64)> =
            (0..e).map(|i| (i, i, 2.0)).collect();
        for list in self.incidence_lists() {
            for (a, &(e1, s1)) in list.iter().enumerate() {
                for &(e2, s2) in list.iter().skip(a + 1) {
                    triplets.push((e1, e2, s1 * s2));
                    triplets.push((e2, e1, s1 * s2));
                }
            }
        }
        SparseSymMatrix::from_triplets(e, triplets).expect("Hodge Laplacian is symmetric")
    }

    /// Graph Laplacian of the unweighted linegraph: original edges become
    /// nodes, adjacent when they share an endpoint. Orientation plays no
    /// role in this construction.
    pub fn linegraph_laplacian(&self) -> SparseSymMatrix {
        let e = self.num_edges();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for list in self.incidence_lists() {
            for (a, &(e1, _)) in list.iter().enumerate() {
                for &(e2, _) in list.iter().skip(a + 1) {
                    triplets.push((e1, e1, 1.0));
                    triplets.push((e2, e2, 1.0));
                    triplets.push((e1, e2, -1.0));
                    triplets.push((e2, e1, -1.0));
                }
            }
        }
        SparseSymMatrix::from_triplets(e, triplets).expect("linegraph Laplacian is symmetric")
    }
}

/// Which Laplacian a [`ShiftOperator`] wraps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    Hodge,
    Linegraph,
    Node,
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ShiftKind::Hodge => "hodge",
            ShiftKind::Linegraph => "linegraph",
            ShiftKind::Node => "node",
        };
        f.write_str(s)
    }
}

impl FromStr for ShiftKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hodge" => Ok(ShiftKind::Hodge),
            "linegraph" => Ok(ShiftKind::Linegraph),
            "node" => Ok(ShiftKind::Node),
            other => Err(format!("unknown shift kind `{other}` (expected hodge|linegraph|node)")),
        }
    }
}

/// A named Laplacian together with a cached dominant-eigenvalue bound.
///
/// `lambda_max` is the power-iteration estimate inflated by 1e-6, so it is
/// an upper bound on the spectral radius up to that relative slack and
/// `apply_normalized` never expands a vector.
#[derive(Debug, Clone)]
pub struct ShiftOperator {
    kind: ShiftKind,
    matrix: SparseSymMatrix,
    lambda_max: f64,
}

impl ShiftOperator {
    pub fn new(kind: ShiftKind, g: &Graph) -> Result<Self, GraphError> {
        let matrix = match kind {
            ShiftKind::Hodge => g.hodge_laplacian(),
            ShiftKind::Linegraph => g.linegraph_laplacian(),
            ShiftKind::Node => g.graph_laplacian(),
        };
        Self::from_matrix(kind, matrix)
    }

    /// Wraps an arbitrary symmetric PSD matrix, computing the normalizer.
    pub fn from_matrix(kind: ShiftKind, matrix: SparseSymMatrix) -> Result<Self, GraphError> {
        let raw = matrix.max_eigenvalue(EIG_TOL)?;
        let lambda_max = if raw > 0.0 { raw * (1.0 + LAMBDA_INFLATION) } else { 0.0 };
        Ok(Self { kind, matrix, lambda_max })
    }

    /// Wraps a matrix with a caller-supplied eigenvalue bound. Useful when
    /// the bound is known exactly (identity, conjugated operators).
    pub fn with_lambda(kind: ShiftKind, matrix: SparseSymMatrix, lambda_max: f64) -> Self {
        Self { kind, matrix, lambda_max }
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    fn normalizer(&self) -> f64 {
        if self.lambda_max > 0.0 {
            self.lambda_max
        } else {
            1.0
        }
    }

    /// `S x` (raw, unnormalized).
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matrix.matvec(x)
    }

    /// `(S / lambda_max) x`; the workhorse of both architectures.
    pub fn apply_normalized(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matrix.matvec(x) / self.normalizer()
    }

    /// The operator with its matrix pre-divided by the normalizer.
    pub fn normalized(&self) -> ShiftOperator {
        ShiftOperator {
            kind: self.kind,
            matrix: self.matrix.scaled(1.0 / self.normalizer()),
            lambda_max: if self.lambda_max > 0.0 { 1.0 } else { 0.0 },
        }
    }

    /// `F S F` with the eigenvalue bound carried over unchanged
    /// (conjugation by a flip preserves the spectrum exactly).
    pub fn conjugated(&self, flip: &FlipMatrix) -> Result<ShiftOperator, GraphError> {
        Ok(ShiftOperator {
            kind: self.kind,
            matrix: self.matrix.conjugated(flip)?,
            lambda_max: self.lambda_max,
        })
    }
}

/// Polynomial graph filter: `sum_k coeffs[k] * S^k x`, evaluated by iterated
/// sparse application in ascending k, never materializing matrix powers.
pub fn poly_filter(
    coeffs: &[f64],
    s: &ShiftOperator,
    x: &DVector<f64>,
) -> Result<DVector<f64>, GraphError> {
    if x.len() != s.dim() {
        return Err(GraphError::DimensionMismatch { expected: s.dim(), got: x.len() });
    }
    let mut acc = DVector::zeros(x.len());
    let mut power = x.clone();
    for (k, &c) in coeffs.iter().enumerate() {
        if k > 0 {
            power = s.apply(&power);
        }
        acc.axpy(c, &power, 1.0);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn triangle() -> Graph {
        Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn graph_laplacian_of_triangle() {
        let l0 = triangle().graph_laplacian().to_dense();
        let expected =
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert_eq!(l0, expected);
    }

    #[test]
    fn graph_laplacian_of_single_edge() {
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        let l0 = g.graph_laplacian().to_dense();
        assert_eq!(l0, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn graph_laplacian_of_edgeless_graph_is_zero() {
        let g = Graph::new(3, vec![]).unwrap();
        assert_eq!(g.graph_laplacian().to_dense(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn hodge_laplacian_of_triangle() {
        let l1 = triangle().hodge_laplacian().to_dense();
        let expected =
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 1.0, -1.0, 2.0, 1.0, 1.0, 1.0, 2.0]);
        assert_eq!(l1, expected);
    }

    #[test]
    fn hodge_laplacian_of_single_edge() {
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        assert_eq!(g.hodge_laplacian().to_dense(), DMatrix::from_element(1, 1, 2.0));
    }

    #[test]
    fn hodge_laplacian_of_disjoint_edges_is_diagonal() {
        let g = Graph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        let l1 = g.hodge_laplacian().to_dense();
        assert_eq!(l1, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));
    }

    #[test]
    fn hodge_equals_incidence_gram() {
        let g = triangle();
        let b = g.incidence().to_dense();
        let l1 = g.hodge_laplacian().to_dense();
        assert_relative_eq!(l1, b.transpose() * &b, epsilon = 1e-12);
    }

    #[test]
    fn linegraph_laplacian_of_triangle_is_k3_laplacian() {
        let l = triangle().linegraph_laplacian().to_dense();
        let expected =
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert_eq!(l, expected);
    }

    #[test]
    fn linegraph_laplacian_of_path() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let l = g.linegraph_laplacian().to_dense();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn linegraph_laplacian_of_disjoint_edges_is_zero() {
        let g = Graph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.linegraph_laplacian().to_dense(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn shift_operator_normalized_apply_is_nonexpansive() {
        let s = ShiftOperator::new(ShiftKind::Hodge, &triangle()).unwrap();
        assert_relative_eq!(s.lambda_max(), 3.0, epsilon = 1e-5);
        let mut rng = crate::rng::derive_rng(3, 0, 0);
        for _ in 0..20 {
            let x = DVector::from_fn(3, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
            let x = &x / x.norm();
            assert!(s.apply_normalized(&x).norm() <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn poly_filter_identity_coefficients() {
        let s = ShiftOperator::new(ShiftKind::Hodge, &triangle()).unwrap();
        let x = DVector::from_vec(vec![0.3, -0.7, 2.0]);
        let y = poly_filter(&[1.0], &s, &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn poly_filter_hodge_annihilates_cyclic_flow() {
        let s = ShiftOperator::new(ShiftKind::Hodge, &triangle()).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0, -1.0]);
        let y = poly_filter(&[0.0, 1.0], &s, &x).unwrap();
        assert!(y.norm() < 1e-12);
    }

    #[test]
    fn poly_filter_scaling() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let s = ShiftOperator::new(ShiftKind::Hodge, &g).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let y = poly_filter(&[2.0, 0.0, 0.0], &s, &x).unwrap();
        assert_eq!(y, DVector::from_vec(vec![2.0, 4.0]));
    }

    #[test]
    fn poly_filter_rejects_dimension_mismatch() {
        let s = ShiftOperator::new(ShiftKind::Hodge, &triangle()).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            poly_filter(&[1.0], &s, &x),
            Err(GraphError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn conjugated_triangle_hodge_flips_off_diagonals() {
        let g = triangle();
        let f = FlipMatrix::new(vec![-1.0, 1.0, 1.0]).unwrap();
        let l1f = g.hodge_laplacian().conjugated(&f).unwrap().to_dense();
        let expected =
            DMatrix::from_row_slice(3, 3, &[2.0, 1.0, -1.0, 1.0, 2.0, 1.0, -1.0, 1.0, 2.0]);
        assert_eq!(l1f, expected);
    }

    #[test]
    fn conjugated_matrix_matches_flipped_graph_construction() {
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)]).unwrap();
        let f = FlipMatrix::new(vec![1.0, -1.0, 1.0, -1.0, -1.0]).unwrap();
        let via_conjugation = g.hodge_laplacian().conjugated(&f).unwrap();
        let via_flipped_graph = g.flipped(&f).unwrap().hodge_laplacian();
        assert_eq!(via_conjugation.to_dense(), via_flipped_graph.to_dense());
    }
}
