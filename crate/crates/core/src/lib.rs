//! Signal processing and learning on graph edge flows.
//!
//! Flow signals live on the oriented edges of a graph and are skew-symmetric
//! under orientation reversal. This crate builds the discrete operators that
//! act on them (incidence, graph/Hodge/linegraph Laplacians), decomposes
//! flows into cyclic and gradient parts, and provides two small neural
//! architectures driven by the Hodge Laplacian as a shift operator:
//!
//! * a recurrent interpolator that fills in unobserved edge values
//!   ([`rnn`]), and
//! * an aggregation classifier that localizes the source community of a
//!   diffusion-induced flow ([`agnn`]).
//!
//! Non-neural baselines (divergence-minimizing completion and spectral
//! kriging) live in [`baselines`], seeded synthetic data generators in
//! [`datagen`], and the plain-text file formats in [`io`].
//!
//! Everything is deterministic given explicit seeds; see [`rng`] for the
//! seeding scheme.

pub mod agnn;
pub mod baselines;
pub mod datagen;
pub mod graph;
pub mod io;
pub mod nn;
pub mod rng;
pub mod rnn;

pub use graph::{
    FlipMatrix, FlowSignal, Graph, GraphError, HodgeDecomposition, IncidenceMatrix, ShiftKind,
    ShiftOperator, SparseSymMatrix,
};
