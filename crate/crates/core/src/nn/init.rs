//! Seeded Gaussian parameter initialization.
//!
//! All trainable weights start i.i.d. zero-mean Gaussian with std
//! [`INIT_STD`]; the draw order is fixed (column-major per array, arrays in
//! declaration order), which makes parameter trajectories reproducible.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub const INIT_STD: f64 = 0.1;

pub fn gaussian_matrix(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector(n: usize, std: f64, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn same_seed_same_draws() {
        let a = gaussian_matrix(3, 4, 0.1, &mut derive_rng(5, 1, 0));
        let b = gaussian_matrix(3, 4, 0.1, &mut derive_rng(5, 1, 0));
        assert_eq!(a, b);
        let c = gaussian_matrix(3, 4, 0.1, &mut derive_rng(6, 1, 0));
        assert_ne!(a, c);
    }
}
