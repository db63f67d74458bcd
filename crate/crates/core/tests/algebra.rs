//! Cross-module algebraic invariants on randomly drawn connected graphs.

use hodgeflow::datagen::planted_partition;
use hodgeflow::graph::{hodge_decompose, FlipMatrix, FlowSignal, Graph};
use hodgeflow::rng::derive_rng;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

/// Connected random graph from a seed: an Erdos-Renyi draw with retries.
fn random_connected_graph(seed: u64) -> Graph {
    let mut rng = derive_rng(seed, 100, 0);
    let n = rng.random_range(2..=18usize);
    let p = rng.random_range(0.35..0.9);
    planted_partition(1, n, p, p, seed)
        .map(|pg| pg.graph.as_ref().clone())
        .unwrap_or_else(|_| {
            // sparse draw failed to connect; fall back to a dense one
            planted_partition(1, n, 0.9, 0.9, seed).unwrap().graph.as_ref().clone()
        })
}

fn random_flow(e: usize, rng: &mut impl Rng) -> FlowSignal {
    FlowSignal::new(DVector::from_fn(e, |_, _| rng.random_range(-2.0..2.0)))
}

#[test]
fn laplacian_factorizations_hold_on_random_graphs() {
    for seed in 0..30 {
        let g = random_connected_graph(seed);
        let b = g.incidence().to_dense();
        let l1 = g.hodge_laplacian().to_dense();
        let l0 = g.graph_laplacian().to_dense();
        let btb = b.transpose() * &b;
        let bbt = &b * b.transpose();
        assert!((l1 - btb).amax() <= 1e-12, "L1 != B^T B on seed {seed}");
        assert!((l0 - bbt).amax() <= 1e-12, "L0 != B B^T on seed {seed}");
    }
}

#[test]
fn laplacians_are_positive_semidefinite_on_random_probes() {
    let mut rng = derive_rng(7, 101, 0);
    for seed in 0..10 {
        let g = random_connected_graph(seed);
        let l0 = g.graph_laplacian();
        let l1 = g.hodge_laplacian();
        let llg = g.linegraph_laplacian();
        for _ in 0..20 {
            let xn = DVector::from_fn(g.num_nodes(), |_, _| rng.random_range(-1.0..1.0));
            let xe = DVector::from_fn(g.num_edges(), |_, _| rng.random_range(-1.0..1.0));
            assert!(xn.dot(&l0.matvec(&xn)) >= -1e-9);
            assert!(xe.dot(&l1.matvec(&xe)) >= -1e-9);
            assert!(xe.dot(&llg.matvec(&xe)) >= -1e-9);
        }
    }
}

#[test]
fn hodge_and_node_laplacians_share_their_top_eigenvalue() {
    for seed in 0..20 {
        let g = random_connected_graph(seed);
        let l0 = g.graph_laplacian().max_eigenvalue(1e-8).unwrap();
        let l1 = g.hodge_laplacian().max_eigenvalue(1e-8).unwrap();
        assert!(
            (l0 - l1).abs() < 1e-6,
            "seed {seed}: lambda(L0) = {l0}, lambda(L1) = {l1}"
        );
    }
}

#[test]
fn decomposition_invariants_on_random_graphs() {
    let mut rng = derive_rng(13, 102, 0);
    for seed in 0..20 {
        let g = random_connected_graph(seed);
        let f = random_flow(g.num_edges(), &mut rng);
        let d = hodge_decompose(&f, &g).unwrap();
        let recon = d.cyclic.values() + d.gradient.values();
        assert!((recon - f.values()).amax() < 1e-9);
        assert!(d.cyclic.values().dot(d.gradient.values()).abs() < 1e-9);
        assert!(g.incidence().apply(d.cyclic.values()).amax() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flips_are_self_inverse_and_commute_with_decomposition(seed in 0u64..500) {
        let g = random_connected_graph(seed);
        let mut rng = derive_rng(seed, 103, 0);
        let f = random_flow(g.num_edges(), &mut rng);
        let flip = FlipMatrix::random(g.num_edges(), &mut rng);

        // F F = I exactly
        let twice = flip.apply(&flip.apply(&f).unwrap()).unwrap();
        prop_assert_eq!(&twice, &f);

        // conjugating twice restores the matrix exactly
        let l1 = g.hodge_laplacian();
        let back = l1.conjugated(&flip).unwrap().conjugated(&flip).unwrap();
        prop_assert_eq!(back.to_dense(), l1.to_dense());

        // cyclic(F f, flipped graph) = F cyclic(f)
        let d = hodge_decompose(&f, &g).unwrap();
        let df = hodge_decompose(&flip.apply(&f).unwrap(), &g.flipped(&flip).unwrap()).unwrap();
        let expected = flip.apply(&d.cyclic).unwrap();
        prop_assert!((df.cyclic.values() - expected.values()).amax() < 1e-9);
    }

    #[test]
    fn masking_preserves_observed_entries(seed in 0u64..500, fraction in 0.0f64..0.9) {
        let g = random_connected_graph(seed);
        let mut rng = derive_rng(seed, 104, 0);
        let f = random_flow(g.num_edges(), &mut rng);
        let (masked, mask) = hodgeflow::datagen::mask_flow(&f, fraction, seed).unwrap();
        let expected_unobs = (fraction * g.num_edges() as f64).floor() as usize;
        prop_assert_eq!(mask.unobserved(g.num_edges()).len(), expected_unobs);
        for &e in mask.observed() {
            prop_assert_eq!(masked.get(e), f.get(e));
        }
        for &e in &mask.unobserved(g.num_edges()) {
            prop_assert_eq!(masked.get(e), 0.0);
        }
    }
}
