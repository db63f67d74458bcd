//! Graphs, flow signals, and the discrete operators derived from them.
//!
//! A [`Graph`] is a simple undirected graph whose edge list order fixes both
//! the edge indexing and a reference orientation (each listed pair is read
//! tail -> head). Orientation is bookkeeping, not direction: a [`FlowSignal`]
//! value is negated when the edge it sits on is reoriented, so the same
//! physical flow has many (graph, signal) representations related by a
//! [`FlipMatrix`].

mod decompose;
mod operators;
mod sparse;
mod spectral;

pub use decompose::{hodge_decompose, HodgeDecomposition};
pub use operators::{poly_filter, ShiftKind, ShiftOperator};
pub use sparse::SparseSymMatrix;
pub(crate) use sparse::conjugate_gradient;
pub use spectral::spectral_embedding;

use nalgebra::{DMatrix, DVector};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge between nodes {0} and {1}")]
    DuplicateEdge(usize, usize),
    #[error("node id {id} out of range for {num_nodes} nodes")]
    NodeIdOutOfRange { id: usize, num_nodes: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix not symmetric within {tol:e} at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize, tol: f64 },
    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("graph is not connected")]
    DisconnectedGraph,
    #[error("embedding dimension {dim} too large for {num_nodes} nodes")]
    DimTooLarge { dim: usize, num_nodes: usize },
    #[error("flip sign entries must be +1 or -1, got {0}")]
    InvalidFlipSign(f64),
}

/// Simple undirected graph with a fixed edge indexing and orientation.
///
/// Edge `e` points from `edges[e].0` (tail) to `edges[e].1` (head). The list
/// order is preserved exactly as given at construction; it defines the edge
/// index space every other type in this crate is aligned to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate undirected edges, and
    /// out-of-range node ids.
    pub fn new(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let mut seen = HashSet::with_capacity(edges.len());
        for &(tail, head) in &edges {
            if tail >= num_nodes {
                return Err(GraphError::NodeIdOutOfRange { id: tail, num_nodes });
            }
            if head >= num_nodes {
                return Err(GraphError::NodeIdOutOfRange { id: head, num_nodes });
            }
            if tail == head {
                return Err(GraphError::SelfLoop(tail));
            }
            let key = (tail.min(head), tail.max(head));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(tail, head));
            }
        }
        Ok(Self { num_nodes, edges })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Node degrees under the undirected interpretation.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_nodes];
        for &(t, h) in &self.edges {
            deg[t] += 1;
            deg[h] += 1;
        }
        deg
    }

    /// Incident edges per node, with the orientation sign the incidence
    /// matrix assigns there (-1 at the tail, +1 at the head).
    pub(crate) fn incidence_lists(&self) -> Vec<Vec<(usize, f64)>> {
        let mut lists = vec![Vec::new(); self.num_nodes];
        for (e, &(t, h)) in self.edges.iter().enumerate() {
            lists[t].push((e, -1.0));
            lists[h].push((e, 1.0));
        }
        lists
    }

    pub fn is_connected(&self) -> bool {
        if self.num_nodes <= 1 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(t, h) in &self.edges {
            adj[t].push(h);
            adj[h].push(t);
        }
        let mut seen = vec![false; self.num_nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.num_nodes
    }

    pub fn incidence(&self) -> IncidenceMatrix<'_> {
        IncidenceMatrix { graph: self }
    }

    /// The same graph with every edge whose flip sign is -1 reoriented
    /// (tail and head swapped). Edge indexing is unchanged.
    pub fn flipped(&self, flip: &FlipMatrix) -> Result<Graph, GraphError> {
        if flip.len() != self.num_edges() {
            return Err(GraphError::DimensionMismatch {
                expected: self.num_edges(),
                got: flip.len(),
            });
        }
        let edges = self
            .edges
            .iter()
            .zip(flip.signs().iter())
            .map(|(&(t, h), &s)| if s < 0.0 { (h, t) } else { (t, h) })
            .collect();
        Ok(Graph { num_nodes: self.num_nodes, edges })
    }
}

/// View of the node-by-edge incidence matrix `B` of a graph.
///
/// Column `e` holds -1 at the tail of edge `e` and +1 at its head. The view
/// applies `B` and its transpose without materializing the matrix.
#[derive(Debug, Clone, Copy)]
pub struct IncidenceMatrix<'a> {
    graph: &'a Graph,
}

impl IncidenceMatrix<'_> {
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn entry(&self, node: usize, e: usize) -> f64 {
        let (t, h) = self.graph.edge(e);
        if node == t {
            -1.0
        } else if node == h {
            1.0
        } else {
            0.0
        }
    }

    /// `B f`: net flow imbalance (divergence) at each node.
    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        assert_eq!(f.len(), self.num_edges(), "incidence apply: edge dim");
        let mut out = DVector::zeros(self.num_nodes());
        for (e, &(t, h)) in self.graph.edges.iter().enumerate() {
            out[t] -= f[e];
            out[h] += f[e];
        }
        out
    }

    /// `B^T phi`: the gradient flow induced by node potentials `phi`.
    pub fn apply_transpose(&self, phi: &DVector<f64>) -> DVector<f64> {
        assert_eq!(phi.len(), self.num_nodes(), "incidence apply_transpose: node dim");
        let mut out = DVector::zeros(self.num_edges());
        for (e, &(t, h)) in self.graph.edges.iter().enumerate() {
            out[e] = phi[h] - phi[t];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.num_nodes(), self.num_edges());
        for (e, &(t, h)) in self.graph.edges.iter().enumerate() {
            m[(t, e)] = -1.0;
            m[(h, e)] = 1.0;
        }
        m
    }
}

/// A real value per oriented edge; the signal type everything here consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSignal {
    values: DVector<f64>,
}

impl FlowSignal {
    pub fn new(values: DVector<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()), "flow entries must be finite");
        Self { values }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self::new(DVector::from_vec(values))
    }

    pub fn zeros(num_edges: usize) -> Self {
        Self { values: DVector::zeros(num_edges) }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn get(&self, e: usize) -> f64 {
        self.values[e]
    }

    /// Entrywise absolute value (what orientation-blind methods consume).
    pub fn abs(&self) -> FlowSignal {
        FlowSignal { values: self.values.map(f64::abs) }
    }

    /// Copy with every entry outside `observed` set to zero.
    pub fn masked(&self, observed: &[usize]) -> FlowSignal {
        let mut out = DVector::zeros(self.values.len());
        for &e in observed {
            out[e] = self.values[e];
        }
        FlowSignal { values: out }
    }
}

/// Diagonal +-1 reorientation matrix `F`; self-inverse by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipMatrix {
    signs: DVector<f64>,
}

impl FlipMatrix {
    pub fn new(signs: Vec<f64>) -> Result<Self, GraphError> {
        for &s in &signs {
            if s != 1.0 && s != -1.0 {
                return Err(GraphError::InvalidFlipSign(s));
            }
        }
        Ok(Self { signs: DVector::from_vec(signs) })
    }

    pub fn identity(num_edges: usize) -> Self {
        Self { signs: DVector::from_element(num_edges, 1.0) }
    }

    /// Uniformly random signs; handy for equivariance checks.
    pub fn random(num_edges: usize, rng: &mut impl rand::Rng) -> Self {
        let signs = (0..num_edges)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Self { signs: DVector::from_vec(signs) }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.len() == 0
    }

    pub fn sign(&self, e: usize) -> f64 {
        self.signs[e]
    }

    pub fn signs(&self) -> &DVector<f64> {
        &self.signs
    }

    pub fn apply(&self, f: &FlowSignal) -> Result<FlowSignal, GraphError> {
        Ok(FlowSignal::new(self.apply_vec(f.values())?))
    }

    pub fn apply_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>, GraphError> {
        if x.len() != self.signs.len() {
            return Err(GraphError::DimensionMismatch { expected: self.signs.len(), got: x.len() });
        }
        Ok(x.component_mul(&self.signs))
    }

    /// `F M F`: conjugation flips the sign of entry (i, j) when exactly one
    /// of the two edges is reoriented. The spectrum is unchanged.
    pub fn conjugate(&self, m: &SparseSymMatrix) -> Result<SparseSymMatrix, GraphError> {
        m.conjugated(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_builds_with_edge_order_preserved() {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (0, 2)]);
    }

    #[test]
    fn single_edge_path() {
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn self_loop_rejected() {
        assert!(matches!(
            Graph::new(1, vec![(0, 0)]),
            Err(GraphError::SelfLoop(0))
        ));
    }

    #[test]
    fn duplicate_edge_rejected_in_either_orientation() {
        assert!(matches!(
            Graph::new(3, vec![(0, 1), (1, 0)]),
            Err(GraphError::DuplicateEdge(1, 0))
        ));
        assert!(matches!(
            Graph::new(3, vec![(0, 1), (0, 1)]),
            Err(GraphError::DuplicateEdge(0, 1))
        ));
    }

    #[test]
    fn out_of_range_node_rejected() {
        assert!(matches!(
            Graph::new(2, vec![(0, 5)]),
            Err(GraphError::NodeIdOutOfRange { id: 5, num_nodes: 2 })
        ));
    }

    #[test]
    fn incidence_of_triangle_matches_hand_computation() {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let b = g.incidence().to_dense();
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[-1.0, 0.0, -1.0, 1.0, -1.0, 0.0, 0.0, 1.0, 1.0],
        );
        assert_eq!(b, expected);
    }

    #[test]
    fn incidence_of_single_edge() {
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        let b = g.incidence().to_dense();
        assert_eq!(b, DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]));
    }

    #[test]
    fn incidence_of_edgeless_graph_is_n_by_zero() {
        let g = Graph::new(4, vec![]).unwrap();
        let b = g.incidence().to_dense();
        assert_eq!(b.nrows(), 4);
        assert_eq!(b.ncols(), 0);
    }

    #[test]
    fn flip_application_and_self_inverse() {
        let f = FlipMatrix::new(vec![-1.0, 1.0, 1.0]).unwrap();
        let flow = FlowSignal::from_vec(vec![2.0, 3.0, 4.0]);
        let flipped = f.apply(&flow).unwrap();
        assert_eq!(flipped.values().as_slice(), &[-2.0, 3.0, 4.0]);
        let back = f.apply(&flipped).unwrap();
        assert_eq!(back, flow);
    }

    #[test]
    fn identity_flip_leaves_flow_unchanged() {
        let f = FlipMatrix::identity(3);
        let flow = FlowSignal::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(f.apply(&flow).unwrap(), flow);
    }

    #[test]
    fn invalid_flip_sign_rejected() {
        assert!(matches!(
            FlipMatrix::new(vec![0.5]),
            Err(GraphError::InvalidFlipSign(_))
        ));
    }

    #[test]
    fn flipped_graph_swaps_endpoints() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let f = FlipMatrix::new(vec![-1.0, 1.0]).unwrap();
        let gf = g.flipped(&f).unwrap();
        assert_eq!(gf.edges(), &[(1, 0), (1, 2)]);
    }

    #[test]
    fn connectivity_detection() {
        let g = Graph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        assert!(!g.is_connected());
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!(g.is_connected());
        assert!(Graph::new(1, vec![]).unwrap().is_connected());
    }

    #[test]
    fn divergence_and_gradient_are_adjoint() {
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let b = g.incidence();
        let f = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let phi = DVector::from_vec(vec![0.5, 1.0, -1.0, 2.0]);
        let lhs = b.apply(&f).dot(&phi);
        let rhs = f.dot(&b.apply_transpose(&phi));
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
