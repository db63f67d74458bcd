//! Hodge decomposition of edge flows.
//!
//! Edge space splits orthogonally into cyclic flows (the kernel of the Hodge
//! Laplacian, i.e. divergence-free loop flows) and gradient flows (the image
//! of `B^T`, induced by node potentials). The split is computed by a
//! least-squares potential fit: `phi` minimizing `||B^T phi - f||` solves the
//! normal equations `L0 phi = B f`, which are always consistent because the
//! right-hand side sums to zero on every connected component.

use super::{conjugate_gradient, FlowSignal, Graph, GraphError};
use nalgebra::DVector;

pub(crate) const CG_TOL: f64 = 1e-10;

/// Result of [`hodge_decompose`]: `cyclic + gradient` reconstructs the input,
/// the parts are orthogonal, and `B * cyclic = 0`.
#[derive(Debug, Clone)]
pub struct HodgeDecomposition {
    pub cyclic: FlowSignal,
    pub gradient: FlowSignal,
    /// Least-squares node potentials with `gradient = B^T potentials`.
    /// Orthogonal to the all-ones kernel on each connected component.
    pub potentials: DVector<f64>,
}

/// Splits `f` into its cyclic and gradient components.
pub fn hodge_decompose(f: &FlowSignal, g: &Graph) -> Result<HodgeDecomposition, GraphError> {
    let e = g.num_edges();
    if f.len() != e {
        return Err(GraphError::DimensionMismatch { expected: e, got: f.len() });
    }
    let b = g.incidence();
    let rhs = b.apply(f.values());
    let l0 = g.graph_laplacian();
    let max_iter = (10 * e).max(32);
    let out = conjugate_gradient(|v| l0.matvec(v), &rhs, CG_TOL, max_iter);
    let potentials = out.solution;
    let gradient = b.apply_transpose(&potentials);
    let cyclic = f.values() - &gradient;
    Ok(HodgeDecomposition {
        cyclic: FlowSignal::new(cyclic),
        gradient: FlowSignal::new(gradient),
        potentials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn triangle() -> Graph {
        Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn cyclic_flow_is_untouched() {
        // B f = 0 for f = (1, 1, -1) on the triangle
        let f = FlowSignal::from_vec(vec![1.0, 1.0, -1.0]);
        let d = hodge_decompose(&f, &triangle()).unwrap();
        assert_relative_eq!(d.cyclic.values(), f.values(), epsilon = 1e-9);
        assert!(d.gradient.values().norm() < 1e-9);
    }

    #[test]
    fn unit_impulse_splits_as_hand_projection() {
        // projection of (1,0,0) onto the unit cycle vector (1,1,-1)/sqrt(3)
        let f = FlowSignal::from_vec(vec![1.0, 0.0, 0.0]);
        let d = hodge_decompose(&f, &triangle()).unwrap();
        let third = 1.0 / 3.0;
        assert_relative_eq!(
            d.cyclic.values(),
            &nalgebra::DVector::from_vec(vec![third, third, -third]),
            epsilon = 1e-9
        );
        assert_relative_eq!(
            d.gradient.values(),
            &nalgebra::DVector::from_vec(vec![2.0 * third, -third, third]),
            epsilon = 1e-9
        );
    }

    #[test]
    fn tree_flows_are_purely_gradient() {
        let g = Graph::new(5, vec![(0, 1), (1, 2), (1, 3), (3, 4)]).unwrap();
        let f = FlowSignal::from_vec(vec![0.7, -1.2, 3.0, 0.1]);
        let d = hodge_decompose(&f, &g).unwrap();
        assert!(d.cyclic.values().norm() < 1e-9);
        assert_relative_eq!(d.gradient.values(), f.values(), epsilon = 1e-9);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let f = FlowSignal::from_vec(vec![1.0]);
        assert!(matches!(
            hodge_decompose(&f, &triangle()),
            Err(GraphError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reconstruction_orthogonality_and_divergence_on_random_flows() {
        let g = Graph::new(6, vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3), (1, 4)])
            .unwrap();
        let mut rng = crate::rng::derive_rng(11, 0, 0);
        for _ in 0..25 {
            let f = FlowSignal::new(nalgebra::DVector::from_fn(g.num_edges(), |_, _| {
                rand::Rng::random_range(&mut rng, -2.0..2.0)
            }));
            let d = hodge_decompose(&f, &g).unwrap();
            let recon = d.cyclic.values() + d.gradient.values();
            assert_relative_eq!(&recon, f.values(), epsilon = 1e-9);
            assert!(d.cyclic.values().dot(d.gradient.values()).abs() < 1e-9);
            assert!(g.incidence().apply(d.cyclic.values()).norm() < 1e-9);
        }
    }

    #[test]
    fn decomposition_commutes_with_flips() {
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let mut rng = crate::rng::derive_rng(13, 0, 0);
        for _ in 0..10 {
            let f = FlowSignal::new(nalgebra::DVector::from_fn(g.num_edges(), |_, _| {
                rand::Rng::random_range(&mut rng, -1.0..1.0)
            }));
            let flip = crate::graph::FlipMatrix::random(g.num_edges(), &mut rng);
            let d = hodge_decompose(&f, &g).unwrap();
            let df = hodge_decompose(&flip.apply(&f).unwrap(), &g.flipped(&flip).unwrap()).unwrap();
            let expected = flip.apply(&d.cyclic).unwrap();
            assert_relative_eq!(df.cyclic.values(), expected.values(), epsilon = 1e-9);
        }
    }
}
