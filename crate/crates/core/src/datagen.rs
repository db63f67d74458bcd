//! Seeded synthetic data: planted-partition graphs, diffusion-induced
//! flows, cyclic/gradient noise families, and observation masks.
//!
//! Every generator is a pure function of its configuration and seed.
//! Per-record randomness comes from independent derived streams (see
//! [`crate::rng`]), so records can be generated in any order or in parallel
//! without changing the output.

use crate::graph::{FlowSignal, Graph, GraphError, SparseSymMatrix};
use crate::rng::{derive_rng, PURPOSE_GRAPH, PURPOSE_MASK, PURPOSE_RECORD};
use crate::rnn::{MaskSet, RnnError};
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

const CONNECT_RETRIES: usize = 100;
const EIG_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("probability {0} outside [0, 1] or p < q")]
    InvalidProbability(f64),
    #[error("fraction {0} outside [0, 1)")]
    InvalidFraction(f64),
    #[error("could not draw a connected graph after {attempts} attempts{hint}")]
    DisconnectedAfterRetries { attempts: usize, hint: String },
    #[error("node {id} out of range for {num_nodes} nodes")]
    NodeOutOfRange { id: usize, num_nodes: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Mask(#[from] RnnError),
}

/// A graph with a known community assignment.
#[derive(Debug, Clone)]
pub struct PartitionedGraph {
    pub graph: Arc<Graph>,
    pub community_of: Vec<usize>,
    pub num_communities: usize,
}

impl PartitionedGraph {
    /// Node lists per community, in node-id order.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_communities];
        for (node, &c) in self.community_of.iter().enumerate() {
            out[c].push(node);
        }
        out
    }
}

/// Per-record provenance for diffusion-induced flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceMeta {
    pub source: usize,
    pub t: usize,
}

/// One flow sample with optional label, mask, and provenance.
#[derive(Debug, Clone)]
pub struct Record {
    pub flow: FlowSignal,
    pub label: Option<usize>,
    pub mask: Option<MaskSet>,
    pub meta: Option<SourceMeta>,
}

/// A labeled collection of flows over a shared graph.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Arc<Graph>,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(graph: Arc<Graph>, records: Vec<Record>) -> Self {
        Self { graph, records }
    }

    pub fn single(graph: Arc<Graph>, flow: FlowSignal) -> Self {
        Self::from_flows(graph, vec![flow])
    }

    pub fn from_flows(graph: Arc<Graph>, flows: Vec<FlowSignal>) -> Self {
        let records = flows
            .into_iter()
            .map(|flow| Record { flow, label: None, mask: None, meta: None })
            .collect();
        Self { graph, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Prefix view sharing the same graph; used for nested training sizes.
    pub fn prefix(&self, n: usize) -> Dataset {
        Dataset { graph: self.graph.clone(), records: self.records[..n.min(self.len())].to_vec() }
    }
}

/// Draws a planted-partition graph: `k` communities of `nodes_per` nodes,
/// intra-community edge probability `p`, inter-community probability `q`.
/// Redraws (up to a bounded retry count) until connected.
pub fn planted_partition(
    k: usize,
    nodes_per: usize,
    p: f64,
    q: f64,
    seed: u64,
) -> Result<PartitionedGraph, DatagenError> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) || q > p {
        return Err(DatagenError::InvalidProbability(if q > p { q } else { p.max(q) }));
    }
    let n = k * nodes_per;
    if k > 1 && q == 0.0 {
        return Err(DatagenError::DisconnectedAfterRetries {
            attempts: 0,
            hint: ": q = 0 cannot connect distinct communities".into(),
        });
    }
    if k == 1 && p == 0.0 && nodes_per > 1 {
        return Err(DatagenError::DisconnectedAfterRetries {
            attempts: 0,
            hint: ": p = 0 cannot connect a single community".into(),
        });
    }
    let community_of: Vec<usize> = (0..n).map(|v| v / nodes_per).collect();
    for attempt in 0..CONNECT_RETRIES {
        let mut rng = derive_rng(seed, PURPOSE_GRAPH, attempt as u64);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let prob = if community_of[i] == community_of[j] { p } else { q };
                if rng.random::<f64>() < prob {
                    edges.push((i, j));
                }
            }
        }
        let graph = Graph::new(n, edges)?;
        if graph.is_connected() {
            return Ok(PartitionedGraph {
                graph: Arc::new(graph),
                community_of,
                num_communities: k,
            });
        }
    }
    Err(DatagenError::DisconnectedAfterRetries { attempts: CONNECT_RETRIES, hint: String::new() })
}

/// Largest eigenvalue of the adjacency matrix.
///
/// The adjacency matrix is indefinite, so power iteration runs on the
/// shifted matrix `A + d_max I` (positive semidefinite by Gershgorin) and
/// the shift is subtracted back out.
pub fn adjacency_lambda_max(g: &Graph) -> Result<f64, GraphError> {
    if g.num_edges() == 0 {
        return Ok(0.0);
    }
    let d_max = g.degrees().into_iter().max().unwrap_or(0) as f64;
    let shifted = g.adjacency().shifted(d_max);
    Ok(shifted.max_eigenvalue(EIG_TOL)? - d_max)
}

fn gaussian(n: usize, std: f64, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        std * v
    })
}

/// Diffusion-induced flow: node potentials `(A / lambda_1)^t delta_v` turned
/// into a gradient flow through the incidence matrix, plus Gaussian noise of
/// absolute standard deviation `noise_std`. Returns the flow and the
/// community label of the source.
pub fn diffusion_flow(
    pg: &PartitionedGraph,
    v: usize,
    t: usize,
    noise_std: f64,
    seed: u64,
) -> Result<(FlowSignal, usize), DatagenError> {
    let g = pg.graph.as_ref();
    let n = g.num_nodes();
    if v >= n {
        return Err(DatagenError::NodeOutOfRange { id: v, num_nodes: n });
    }
    let lambda = adjacency_lambda_max(g)?;
    let adj = g.adjacency();
    let clean = diffusion_flow_clean(g, &adj, lambda, v, t);
    let mut rng = derive_rng(seed, PURPOSE_RECORD, 0);
    let noise = gaussian(g.num_edges(), noise_std, &mut rng);
    Ok((FlowSignal::new(clean + noise), pg.community_of[v]))
}

fn diffusion_flow_clean(
    g: &Graph,
    adj: &SparseSymMatrix,
    lambda: f64,
    v: usize,
    t: usize,
) -> DVector<f64> {
    let mut x = DVector::zeros(g.num_nodes());
    x[v] = 1.0;
    let norm = if lambda > 0.0 { lambda } else { 1.0 };
    for _ in 0..t {
        x = adj.matvec(&x) / norm;
    }
    g.incidence().apply_transpose(&x)
}

/// Source nodes eligible per community: the top ceil(10%) by degree,
/// ties broken by node id.
pub fn top_degree_sources(pg: &PartitionedGraph) -> Vec<Vec<usize>> {
    let deg = pg.graph.degrees();
    pg.communities()
        .iter()
        .map(|members| {
            let mut sorted: Vec<usize> = members.clone();
            sorted.sort_by_key(|&v| (std::cmp::Reverse(deg[v]), v));
            let take = members.len().div_ceil(10).max(1);
            let mut top: Vec<usize> = sorted.into_iter().take(take).collect();
            top.sort_unstable();
            top
        })
        .collect()
}

/// Generates a labeled source-localization dataset. Per signal: a community
/// chosen uniformly, a source chosen uniformly among that community's
/// top-degree nodes, a diffusion time uniform in `t_range` (inclusive), and
/// additive noise with std `noise_rel * ||clean||_inf`.
pub fn localization_dataset(
    pg: &PartitionedGraph,
    n_signals: usize,
    t_range: (usize, usize),
    noise_rel: f64,
    seed: u64,
) -> Result<Dataset, DatagenError> {
    let g = pg.graph.as_ref();
    let lambda = adjacency_lambda_max(g)?;
    let adj = g.adjacency();
    let sources = top_degree_sources(pg);
    let (t_lo, t_hi) = t_range;
    let mut records = Vec::with_capacity(n_signals);
    for i in 0..n_signals {
        let mut rng = derive_rng(seed, PURPOSE_RECORD, i as u64);
        let community = rng.random_range(0..pg.num_communities);
        let pool = &sources[community];
        let v = pool[rng.random_range(0..pool.len())];
        let t = rng.random_range(t_lo..=t_hi);
        let clean = diffusion_flow_clean(g, &adj, lambda, v, t);
        let noise_std = noise_rel * clean.amax();
        let noise = gaussian(g.num_edges(), noise_std, &mut rng);
        records.push(Record {
            flow: FlowSignal::new(clean + noise),
            label: Some(community),
            mask: None,
            meta: Some(SourceMeta { source: v, t }),
        });
    }
    Ok(Dataset::new(pg.graph.clone(), records))
}

/// Applies `(I - L0 / lambda_max(L0))^order` to a node vector: repeated
/// low-pass smoothing in the graph-frequency sense.
fn smooth_node_vector(
    l0: &SparseSymMatrix,
    lambda: f64,
    order: usize,
    mut x: DVector<f64>,
) -> DVector<f64> {
    let norm = if lambda > 0.0 { lambda } else { 1.0 };
    for _ in 0..order {
        x = &x - l0.matvec(&x) / norm;
    }
    x
}

/// Noisy copies of a base flow: cyclic Gaussian noise (projected onto the
/// kernel of the Hodge Laplacian) plus smooth gradient noise built from
/// low-passed node potentials.
pub fn noisy_flow_family(
    f_base: &FlowSignal,
    g: &Arc<Graph>,
    n: usize,
    cyclic_std: f64,
    gradient_std: f64,
    smooth_order: usize,
    seed: u64,
) -> Result<Dataset, DatagenError> {
    if f_base.len() != g.num_edges() {
        return Err(GraphError::DimensionMismatch {
            expected: g.num_edges(),
            got: f_base.len(),
        }
        .into());
    }
    let l0 = g.graph_laplacian();
    let lambda0 = l0.max_eigenvalue(EIG_TOL)?;
    let b = g.incidence();
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = derive_rng(seed, PURPOSE_RECORD, i as u64);
        let eta = gaussian(g.num_edges(), cyclic_std, &mut rng);
        let cyc = crate::graph::hodge_decompose(&FlowSignal::new(eta), g)?.cyclic;
        let zeta = gaussian(g.num_nodes(), gradient_std, &mut rng);
        let smooth = smooth_node_vector(&l0, lambda0, smooth_order, zeta);
        let grad_noise = b.apply_transpose(&smooth);
        let flow = FlowSignal::new(f_base.values() + cyc.values() + grad_noise);
        records.push(Record { flow, label: None, mask: None, meta: None });
    }
    Ok(Dataset::new(g.clone(), records))
}

/// Independent smooth gradient flows: `f = B^T Phi` with `Phi` a low-passed
/// Gaussian potential field. Purely gradient by construction.
pub fn gradient_flow_family(
    g: &Arc<Graph>,
    n: usize,
    potential_std: f64,
    smooth_order: usize,
    seed: u64,
) -> Result<Dataset, DatagenError> {
    if !g.is_connected() {
        return Err(GraphError::DisconnectedGraph.into());
    }
    let l0 = g.graph_laplacian();
    let lambda0 = l0.max_eigenvalue(EIG_TOL)?;
    let b = g.incidence();
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = derive_rng(seed, PURPOSE_RECORD, i as u64);
        let eta = gaussian(g.num_nodes(), potential_std, &mut rng);
        let phi = smooth_node_vector(&l0, lambda0, smooth_order, eta);
        let flow = FlowSignal::new(b.apply_transpose(&phi));
        records.push(Record { flow, label: None, mask: None, meta: None });
    }
    Ok(Dataset::new(g.clone(), records))
}

/// Marks a uniformly random `floor(fraction * E)` edges unobserved, zeroing
/// their values. Returns the masked flow and the observation mask.
pub fn mask_flow(
    f: &FlowSignal,
    unobserved_fraction: f64,
    seed: u64,
) -> Result<(FlowSignal, MaskSet), DatagenError> {
    if !(0.0..1.0).contains(&unobserved_fraction) {
        return Err(DatagenError::InvalidFraction(unobserved_fraction));
    }
    let e = f.len();
    let n_unobs = (unobserved_fraction * e as f64).floor() as usize;
    let mut rng = derive_rng(seed, PURPOSE_MASK, 0);
    let mut pool: Vec<usize> = (0..e).collect();
    pool.partial_shuffle(&mut rng, n_unobs);
    let mut unobserved: Vec<usize> = pool[..n_unobs].to_vec();
    unobserved.sort_unstable();
    let observed: Vec<usize> = (0..e).filter(|i| unobserved.binary_search(i).is_err()).collect();
    let masked = f.masked(&observed);
    let mask = MaskSet::new(observed, Vec::new(), e)?;
    Ok((masked, mask))
}
