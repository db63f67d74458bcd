//! Non-neural interpolation baselines: divergence-minimizing completion and
//! spectral-embedding kriging.

use crate::graph::{
    conjugate_gradient, spectral_embedding, FlowSignal, Graph, GraphError,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("empty observation set")]
    EmptyObservation,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("observed edge {0} out of range")]
    IndexOutOfRange(usize),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Divergence-minimizing completion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvOptConfig {
    /// Ridge regularizer on the unobserved entries; guarantees a unique
    /// minimizer when the unobserved edges contain cycles.
    pub ridge: f64,
}

impl Default for ConvOptConfig {
    fn default() -> Self {
        Self { ridge: 1e-6 }
    }
}

const CONVOPT_TOL: f64 = 1e-10;
const RIDGE_FALLBACK: f64 = 1e-8;

fn complement(observed: &[usize], e: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(e - observed.len());
    let mut it = observed.iter().peekable();
    for i in 0..e {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

fn checked_observed(observed: &[usize], e: usize) -> Result<Vec<usize>, BaselineError> {
    let mut obs = observed.to_vec();
    obs.sort_unstable();
    obs.dedup();
    if obs.is_empty() {
        return Err(BaselineError::EmptyObservation);
    }
    if let Some(&bad) = obs.iter().find(|&&i| i >= e) {
        return Err(BaselineError::IndexOutOfRange(bad));
    }
    Ok(obs)
}

/// Fixes the observed entries and chooses the unobserved ones to minimize
/// `||B f||^2 + ridge ||f_unobserved||^2`: the completion with the least
/// divergence energy, i.e. the smallest gradient component.
///
/// The normal equations restrict the Hodge Laplacian to the unobserved
/// block and are solved by conjugate gradients without materializing the
/// submatrix. If the ridge-free system stagnates (singular with roundoff
/// drift), the ridge is raised to 1e-8 and the solve retried, with a
/// warning on stderr.
pub fn convopt_interpolate(
    f_obs: &FlowSignal,
    observed: &[usize],
    g: &Graph,
    cfg: &ConvOptConfig,
) -> Result<FlowSignal, BaselineError> {
    let e = g.num_edges();
    if f_obs.len() != e {
        return Err(BaselineError::DimensionMismatch { expected: e, got: f_obs.len() });
    }
    let observed = checked_observed(observed, e)?;
    let unobserved = complement(&observed, e);
    if unobserved.is_empty() {
        return Ok(f_obs.clone());
    }

    let b = g.incidence();
    // rhs = -B_U^T B_O f_O, assembled through full-space incidence passes
    let masked = f_obs.masked(&observed);
    let div_obs = b.apply(masked.values());
    let bt_div = b.apply_transpose(&div_obs);
    let rhs = DVector::from_iterator(unobserved.len(), unobserved.iter().map(|&i| -bt_div[i]));

    let solve = |ridge: f64| {
        let apply = |x: &DVector<f64>| {
            let mut full = DVector::zeros(e);
            for (k, &i) in unobserved.iter().enumerate() {
                full[i] = x[k];
            }
            let div = b.apply(&full);
            let bt = b.apply_transpose(&div);
            let mut out =
                DVector::from_iterator(unobserved.len(), unobserved.iter().map(|&i| bt[i]));
            if ridge > 0.0 {
                out.axpy(ridge, x, 1.0);
            }
            out
        };
        conjugate_gradient(apply, &rhs, CONVOPT_TOL, (10 * e).max(64))
    };

    let mut outcome = solve(cfg.ridge);
    if !outcome.converged && cfg.ridge < RIDGE_FALLBACK {
        eprintln!(
            "convopt: singular system (residual {:.3e}); retrying with ridge {RIDGE_FALLBACK:e}",
            outcome.residual_norm
        );
        outcome = solve(RIDGE_FALLBACK);
    }

    let mut values = f_obs.values().clone();
    for (k, &i) in unobserved.iter().enumerate() {
        values[i] = outcome.solution[k];
    }
    for &i in &observed {
        values[i] = f_obs.get(i);
    }
    Ok(FlowSignal::new(values))
}

/// Spectral kriging configuration. `lengthscale` and `variance` fall back to
/// data-driven defaults when unset: the median pairwise embedded distance
/// and the sample variance of the observed magnitudes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrigingConfig {
    pub embed_dim: usize,
    pub lengthscale: Option<f64>,
    pub variance: Option<f64>,
    pub noise_floor: f64,
}

impl Default for KrigingConfig {
    fn default() -> Self {
        Self { embed_dim: 2, lengthscale: None, variance: None, noise_floor: 1e-6 }
    }
}

fn sq_dist(a: nalgebra::RowDVector<f64>, b: nalgebra::RowDVector<f64>) -> f64 {
    (a - b).norm_squared()
}

/// Gaussian-process posterior mean with a squared-exponential kernel
/// `variance * exp(-d^2 / (2 lengthscale^2))`, observation noise
/// `noise_floor` on the training diagonal, and the sample mean of `y` as
/// the mean function. Rows of `train`/`test` are point coordinates.
pub fn gp_posterior_mean(
    train: &DMatrix<f64>,
    y: &DVector<f64>,
    test: &DMatrix<f64>,
    variance: f64,
    lengthscale: f64,
    noise_floor: f64,
) -> Result<DVector<f64>, BaselineError> {
    let n = train.nrows();
    if y.len() != n {
        return Err(BaselineError::DimensionMismatch { expected: n, got: y.len() });
    }
    if n == 0 {
        return Err(BaselineError::EmptyObservation);
    }
    let mu = y.mean();
    let two_ell2 = 2.0 * lengthscale * lengthscale;
    let kernel = |d2: f64| {
        if two_ell2 > 0.0 {
            variance * (-d2 / two_ell2).exp()
        } else if d2 == 0.0 {
            variance
        } else {
            0.0
        }
    };
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d2 = sq_dist(train.row(i).clone_owned(), train.row(j).clone_owned());
            k[(i, j)] = kernel(d2);
        }
        k[(i, i)] += noise_floor;
    }
    let centered = y.map(|v| v - mu);
    let chol = k
        .clone()
        .cholesky()
        .ok_or_else(|| BaselineError::NumericalFailure("kernel matrix not positive definite".into()))?;
    let alpha = chol.solve(&centered);
    let mut out = DVector::zeros(test.nrows());
    for t in 0..test.nrows() {
        let mut acc = mu;
        for i in 0..n {
            let d2 = sq_dist(test.row(t).clone_owned(), train.row(i).clone_owned());
            acc += kernel(d2) * alpha[i];
        }
        out[t] = acc;
    }
    Ok(out)
}

/// Kriging over a spectral drawing of the graph: nodes are embedded with
/// low Laplacian eigenvectors, each edge sits at the midpoint of its
/// endpoints, and a Gaussian process fitted to the observed magnitudes
/// `|f|` predicts the unobserved ones. The output is unsigned: observed
/// entries pass through as `|f_obs|`.
pub fn kriging_interpolate(
    f_obs: &FlowSignal,
    observed: &[usize],
    g: &Graph,
    cfg: &KrigingConfig,
) -> Result<FlowSignal, BaselineError> {
    let e = g.num_edges();
    if f_obs.len() != e {
        return Err(BaselineError::DimensionMismatch { expected: e, got: f_obs.len() });
    }
    let observed = checked_observed(observed, e)?;
    let unobserved = complement(&observed, e);

    let coords = spectral_embedding(g, cfg.embed_dim)?;
    let mut midpoints = DMatrix::zeros(e, cfg.embed_dim);
    for (idx, &(t, h)) in g.edges().iter().enumerate() {
        for d in 0..cfg.embed_dim {
            midpoints[(idx, d)] = 0.5 * (coords[(t, d)] + coords[(h, d)]);
        }
    }

    let lengthscale = match cfg.lengthscale {
        Some(l) => l,
        None => {
            let mut dists = Vec::with_capacity(e * (e - 1) / 2);
            for i in 0..e {
                for j in (i + 1)..e {
                    dists.push(
                        sq_dist(midpoints.row(i).clone_owned(), midpoints.row(j).clone_owned())
                            .sqrt(),
                    );
                }
            }
            dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
            let median = if dists.is_empty() { 0.0 } else { dists[dists.len() / 2] };
            if median > 0.0 {
                median
            } else {
                1.0
            }
        }
    };

    let y = DVector::from_iterator(observed.len(), observed.iter().map(|&i| f_obs.get(i).abs()));
    let variance = match cfg.variance {
        Some(v) => v,
        None => {
            let mu = y.mean();
            let var = y.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / y.len() as f64;
            var.max(1e-12)
        }
    };

    let train = DMatrix::from_fn(observed.len(), cfg.embed_dim, |i, d| {
        midpoints[(observed[i], d)]
    });
    let test = DMatrix::from_fn(unobserved.len(), cfg.embed_dim, |i, d| {
        midpoints[(unobserved[i], d)]
    });

    let mut values = DVector::zeros(e);
    for &i in &observed {
        values[i] = f_obs.get(i).abs();
    }
    if !unobserved.is_empty() {
        let preds = gp_posterior_mean(&train, &y, &test, variance, lengthscale, cfg.noise_floor)?;
        for (k, &i) in unobserved.iter().enumerate() {
            values[i] = preds[k];
        }
    }
    Ok(FlowSignal::new(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{hodge_decompose, FlipMatrix};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn triangle() -> Graph {
        Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn triangle_closed_form() {
        // observe e0 = e1 = 1; minimizing divergence gives e2 = -1
        let g = triangle();
        let f = FlowSignal::from_vec(vec![1.0, 1.0, 0.0]);
        let out =
            convopt_interpolate(&f, &[0, 1], &g, &ConvOptConfig { ridge: 0.0 }).unwrap();
        assert_relative_eq!(out.get(2), -1.0, epsilon = 1e-8);
        assert_eq!(out.get(0), 1.0);
        assert_eq!(out.get(1), 1.0);
    }

    #[test]
    fn fully_observed_is_identity() {
        let g = triangle();
        let f = FlowSignal::from_vec(vec![0.25, -1.5, 3.75]);
        let out = convopt_interpolate(&f, &[0, 1, 2], &g, &ConvOptConfig { ridge: 0.0 }).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn empty_observation_rejected() {
        let g = triangle();
        let f = FlowSignal::zeros(3);
        assert!(matches!(
            convopt_interpolate(&f, &[], &g, &ConvOptConfig::default()),
            Err(BaselineError::EmptyObservation)
        ));
    }

    #[test]
    fn cyclic_truth_recovered_exactly_when_unobserved_is_acyclic() {
        // two stacked triangles; hide one edge of a purely cyclic flow
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 0)]).unwrap();
        let mut rng = crate::rng::derive_rng(3, 0, 0);
        for _ in 0..10 {
            let raw = FlowSignal::new(nalgebra::DVector::from_fn(5, |_, _| {
                rng.random_range(-1.0..1.0)
            }));
            let truth = hodge_decompose(&raw, &g).unwrap().cyclic;
            let hide = rng.random_range(0..5usize);
            let observed: Vec<usize> = (0..5).filter(|&e| e != hide).collect();
            let out = convopt_interpolate(
                &truth.masked(&observed),
                &observed,
                &g,
                &ConvOptConfig { ridge: 0.0 },
            )
            .unwrap();
            assert!(
                (out.get(hide) - truth.get(hide)).abs() < 1e-8,
                "edge {hide}: {} vs {}",
                out.get(hide),
                truth.get(hide)
            );
        }
    }

    #[test]
    fn completion_minimizes_divergence_energy_among_feasible_fills() {
        let g = Graph::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3), (0, 2)])
            .unwrap();
        let e = g.num_edges();
        let mut rng = crate::rng::derive_rng(5, 0, 0);
        let truth = FlowSignal::new(nalgebra::DVector::from_fn(e, |_, _| {
            rng.random_range(-1.0..1.0)
        }));
        // unobserved edges form a forest (no cycle): unique minimizer
        let observed: Vec<usize> = (0..e).filter(|&i| i != 1 && i != 4).collect();
        let out =
            convopt_interpolate(&truth.masked(&observed), &observed, &g, &ConvOptConfig {
                ridge: 0.0,
            })
            .unwrap();
        let b = g.incidence();
        let best = b.apply(out.values()).norm_squared();
        for _ in 0..50 {
            let mut alt = out.values().clone();
            alt[1] += rng.random_range(-1.0..1.0);
            alt[4] += rng.random_range(-1.0..1.0);
            let energy = b.apply(&alt).norm_squared();
            assert!(energy + 1e-9 >= best, "found better fill: {energy} < {best}");
        }
    }

    #[test]
    fn convopt_is_flip_equivariant() {
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let mut rng = crate::rng::derive_rng(7, 0, 0);
        for _ in 0..10 {
            let f = FlowSignal::new(nalgebra::DVector::from_fn(5, |_, _| {
                rng.random_range(-1.0..1.0)
            }));
            let observed = vec![0, 2, 3];
            let flip = FlipMatrix::random(5, &mut rng);
            let gf = g.flipped(&flip).unwrap();
            let base =
                convopt_interpolate(&f.masked(&observed), &observed, &g, &ConvOptConfig::default())
                    .unwrap();
            let flipped = convopt_interpolate(
                &flip.apply(&f).unwrap().masked(&observed),
                &observed,
                &gf,
                &ConvOptConfig::default(),
            )
            .unwrap();
            let expected = flip.apply(&base).unwrap();
            assert!((flipped.values() - expected.values()).amax() < 1e-9);
        }
    }

    #[test]
    fn gp_interpolates_exactly_at_coincident_points_as_noise_vanishes() {
        // a test point placed exactly on a training location
        let train = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![2.0, -1.0, 0.5]);
        let test = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let pred = gp_posterior_mean(&train, &y, &test, 1.0, 0.7, 1e-12).unwrap();
        assert_relative_eq!(pred[0], -1.0, epsilon = 1e-6);
    }

    #[test]
    fn constant_observations_predict_the_constant() {
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let f = FlowSignal::from_vec(vec![3.0, -3.0, 3.0, 3.0, -3.0]);
        let out =
            kriging_interpolate(&f, &[0, 1, 3], &g, &KrigingConfig::default()).unwrap();
        for e in 0..5 {
            assert_relative_eq!(out.get(e), 3.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn k3_equidistant_prediction_is_the_mean() {
        // all midpoints are pairwise equidistant on K3, so the posterior at
        // the third edge collapses to the sample mean of (1, 3)
        let g = triangle();
        let f = FlowSignal::from_vec(vec![1.0, 3.0, 0.0]);
        let out = kriging_interpolate(&f, &[0, 1], &g, &KrigingConfig::default()).unwrap();
        assert_relative_eq!(out.get(2), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn kriging_is_orientation_invariant() {
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let mut rng = crate::rng::derive_rng(9, 0, 0);
        let f = FlowSignal::new(nalgebra::DVector::from_fn(5, |_, _| {
            rng.random_range(-2.0..2.0)
        }));
        let observed = vec![0, 1, 4];
        let flip = FlipMatrix::random(5, &mut rng);
        let gf = g.flipped(&flip).unwrap();
        let base = kriging_interpolate(&f.masked(&observed), &observed, &g, &KrigingConfig::default())
            .unwrap();
        let flipped = kriging_interpolate(
            &flip.apply(&f).unwrap().masked(&observed),
            &observed,
            &gf,
            &KrigingConfig::default(),
        )
        .unwrap();
        assert_eq!(base, flipped);
    }

    #[test]
    fn kriging_requires_connected_graph() {
        let g = Graph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        let f = FlowSignal::zeros(2);
        assert!(matches!(
            kriging_interpolate(&f, &[0], &g, &KrigingConfig::default()),
            Err(BaselineError::Graph(GraphError::DisconnectedGraph))
        ));
    }
}
