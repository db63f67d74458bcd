//! Finite-difference verification of backward-pass gradients.

use nalgebra::DMatrix;

/// Compares analytic gradients against central finite differences with step
/// `h`, coordinate by coordinate across every parameter array.
///
/// `f` evaluates the scalar loss and its analytic gradients at a point; the
/// numeric side only ever uses the loss value. Returns the maximum over all
/// coordinates of `|analytic - numeric| / max(1, |numeric|)`.
///
/// The point must keep every nonlinearity input at distance > 10 h from its
/// kink, otherwise the central difference straddles a subgradient boundary
/// and the comparison is meaningless.
pub fn grad_check<F>(f: F, point: &[DMatrix<f64>], h: f64) -> f64
where
    F: Fn(&[DMatrix<f64>]) -> (f64, Vec<DMatrix<f64>>),
{
    let (_, analytic) = f(point);
    assert_eq!(analytic.len(), point.len(), "gradient count mismatch");
    let mut worst: f64 = 0.0;
    let mut probe: Vec<DMatrix<f64>> = point.to_vec();
    for (k, p) in point.iter().enumerate() {
        assert_eq!(analytic[k].shape(), p.shape(), "gradient shape mismatch");
        for i in 0..p.len() {
            let orig = probe[k][i];
            probe[k][i] = orig + h;
            let plus = f(&probe).0;
            probe[k][i] = orig - h;
            let minus = f(&probe).0;
            probe[k][i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = (analytic[k][i] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}
