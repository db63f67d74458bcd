//! Spectral drawing: node coordinates from low eigenvectors of `L0`.

use super::{Graph, GraphError};
use nalgebra::DMatrix;

/// Embeds the nodes of a connected graph using the eigenvectors of the graph
/// Laplacian for the `dim` smallest nonzero eigenvalues.
///
/// Columns are unit-normalized with a deterministic sign convention (first
/// entry of magnitude above 1e-9 is made positive), so the embedding is
/// reproducible run to run.
pub fn spectral_embedding(g: &Graph, dim: usize) -> Result<DMatrix<f64>, GraphError> {
    let n = g.num_nodes();
    if !g.is_connected() {
        return Err(GraphError::DisconnectedGraph);
    }
    if dim >= n {
        return Err(GraphError::DimTooLarge { dim, num_nodes: n });
    }
    let l0 = g.graph_laplacian().to_dense();
    let eig = l0.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("eigenvalues are finite")
    });
    // connected graph: exactly one zero eigenvalue, skipped by order
    let mut coords = DMatrix::zeros(n, dim);
    for (c, &idx) in order[1..=dim].iter().enumerate() {
        let mut v = eig.eigenvectors.column(idx).clone_owned();
        v /= v.norm();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-9) {
            if *first < 0.0 {
                v = -v;
            }
        }
        coords.set_column(c, &v);
    }
    Ok(coords)
}
