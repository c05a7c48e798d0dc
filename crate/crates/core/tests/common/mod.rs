#![allow(dead_code)]

use icoh::ArModel;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random model with companion radius below 0.95 whose diagonal
/// self-regressions are all stable. Innovations are correlated.
pub fn random_stable_model(seed: u64) -> ArModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = rng.random_range(2..=5);
    let p = rng.random_range(1..=3);
    let mut coeffs: Vec<DMatrix<f64>> = (0..p)
        .map(|_| DMatrix::from_fn(q, q, |_, _| rng.random_range(-0.8..0.8)))
        .collect();
    let factor = DMatrix::from_fn(q, q, |i, j| {
        if i == j {
            rng.random_range(0.5..1.5)
        } else {
            rng.random_range(-0.3..0.3)
        }
    });
    let noise = &factor * factor.transpose();

    // scaling A(k) by c^k scales every root by c
    let scale = |coeffs: &mut Vec<DMatrix<f64>>, c: f64| {
        for (k, a) in coeffs.iter_mut().enumerate() {
            *a *= c.powi(k as i32 + 1);
        }
    };
    loop {
        let m = ArModel::new(coeffs.clone(), noise.clone()).unwrap();
        let radius = m.spectral_radius();
        let self_radius = (0..q).map(|i| m.self_regression_radius(i)).fold(0.0, f64::max);
        let worst = radius.max(self_radius);
        if worst < 0.95 {
            return m;
        }
        scale(&mut coeffs, 0.9 / worst);
    }
}

/// Stationary lag-0 covariance from the discrete Lyapunov equation of the
/// companion form, solved through its Kronecker (vectorized) representation.
pub fn lyapunov_covariance(model: &ArModel) -> DMatrix<f64> {
    let f = model.companion();
    let n = f.nrows();
    let q = model.channels();
    let mut noise = DMatrix::zeros(n, n);
    noise.view_mut((0, 0), (q, q)).copy_from(model.noise_cov());
    let system = DMatrix::identity(n * n, n * n) - f.kronecker(&f);
    let rhs = DMatrix::from_column_slice(n * n, 1, noise.as_slice());
    let solution = system.lu().solve(&rhs).expect("stable model");
    let sigma = DMatrix::from_column_slice(n, n, solution.as_slice());
    sigma.view((0, 0), (q, q)).into_owned()
}

/// Applies a channel permutation: new channel `k` is old channel `perm[k]`.
pub fn permute_model(model: &ArModel, perm: &[usize]) -> ArModel {
    let q = model.channels();
    let permute = |m: &DMatrix<f64>| DMatrix::from_fn(q, q, |i, j| m[(perm[i], perm[j])]);
    ArModel::new(model.coeffs().iter().map(permute).collect(), permute(model.noise_cov())).unwrap()
}
