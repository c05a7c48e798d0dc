mod common;

use icoh::estimate::fit_least_squares;
use icoh::model::DEFAULT_BURN_IN;
use icoh::toys::{toy_model_9_1, toy_model_9_2};
use icoh::ArModel;
use nalgebra::DMatrix;
use proptest::prelude::*;

use common::{lyapunov_covariance, random_stable_model};

#[test]
fn toy_models_are_stable() {
    for m in [toy_model_9_1(), toy_model_9_2()] {
        let r = m.spectral_radius();
        assert!(r > 0.0 && r < 1.0, "radius {r}");
        assert!(m.is_stable());
    }
}

#[test]
fn spectral_radius_matches_ar2_roots() {
    // x(t) = 1.5 x(t-1) - 0.95 x(t-2): complex roots of modulus sqrt(0.95)
    let m = ArModel::from_rows(&[vec![vec![1.5]], vec![vec![-0.95]]], &[vec![1.0]]).unwrap();
    assert!((m.spectral_radius() - 0.95f64.sqrt()).abs() < 1e-12);
    assert!((m.self_regression_radius(0) - 0.95f64.sqrt()).abs() < 1e-12);
}

#[test]
fn isolate_toy_9_2_keeps_link_2_from_1() {
    let iso = toy_model_9_2().isolate(1, 0).unwrap();
    let a1 = iso.lag(1);
    let expected = [(0, 0, 1.5), (1, 1, 1.8), (2, 2, 1.65), (3, 3, 1.65), (4, 4, 1.65), (1, 0, -0.2)];
    for i in 0..5 {
        for j in 0..5 {
            let want = expected
                .iter()
                .find(|&&(r, c, _)| (r, c) == (i, j))
                .map(|e| e.2)
                .unwrap_or(0.0);
            assert_eq!(a1[(i, j)], want, "A(1)[{},{}]", i + 1, j + 1);
        }
    }
    let a2 = iso.lag(2);
    let diag = [-0.95, -0.96, -0.95, -0.95, -0.95];
    for i in 0..5 {
        for j in 0..5 {
            assert_eq!(a2[(i, j)], if i == j { diag[i] } else { 0.0 });
        }
    }
}

#[test]
fn isolate_toy_9_1_keeps_link_4_from_3() {
    let iso = toy_model_9_1().isolate(3, 2).unwrap();
    assert_eq!(iso.lag(1)[(3, 2)], -0.5);
    assert_eq!(iso.lag(1)[(3, 4)], 0.0);
    assert_eq!(iso.lag(1)[(4, 3)], 0.0);
    assert_eq!(iso.lag(1)[(1, 0)], 0.0);
    assert_eq!(iso.lag(2)[(0, 4)], 0.0);
    assert_eq!(iso.lag(2)[(0, 0)], -0.9025);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn isolate_is_idempotent_and_preserves_diagonals(seed in any::<u64>(), i in 0usize..5, j in 0usize..5) {
        let m = random_stable_model(seed);
        let q = m.channels();
        let (i, j) = (i % q, j % q);
        prop_assume!(i != j);
        let once = m.isolate(i, j).unwrap();
        prop_assert_eq!(&once.isolate(i, j).unwrap(), &once);
        for (a, b) in m.coeffs().iter().zip(once.coeffs()) {
            for k in 0..q {
                prop_assert_eq!(a[(k, k)], b[(k, k)]);
            }
            prop_assert_eq!(a[(i, j)], b[(i, j)]);
            for r in 0..q {
                for c in 0..q {
                    if r != c && (r, c) != (i, j) {
                        prop_assert_eq!(b[(r, c)], 0.0);
                    }
                }
            }
        }
        for k in 0..q {
            prop_assert_eq!(m.noise_cov()[(k, k)], once.noise_cov()[(k, k)]);
        }
        prop_assert!(once.has_diagonal_noise());
    }

    #[test]
    fn simulate_is_a_pure_function(seed in any::<u64>(), sim_seed in any::<u64>()) {
        let m = random_stable_model(seed);
        let a = m.simulate(200, 50, 100.0, sim_seed).unwrap();
        let b = m.simulate(200, 50, 100.0, sim_seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

fn max_relative_variance_error(model: &ArModel, n: usize, seed: u64) -> f64 {
    let theory = lyapunov_covariance(model);
    let data = model.simulate(n, DEFAULT_BURN_IN, 256.0, seed).unwrap();
    let empirical = data.covariance();
    (0..model.channels())
        .map(|i| (empirical[(i, i)] / theory[(i, i)] - 1.0).abs())
        .fold(0.0, f64::max)
}

#[test]
fn toy_9_1_variance_matches_lyapunov() {
    let err = max_relative_variance_error(&toy_model_9_1(), 25_600, 17);
    assert!(err < 0.05, "relative error {err}");
}

#[test]
fn long_simulation_covariance_converges() {
    for (seed, model) in [(1, random_stable_model(3)), (2, random_stable_model(4)), (3, toy_model_9_2())] {
        let theory = lyapunov_covariance(&model);
        let empirical = model.simulate(100_000, DEFAULT_BURN_IN, 256.0, seed).unwrap().covariance();
        let q = model.channels();
        for i in 0..q {
            let rel = (empirical[(i, i)] / theory[(i, i)] - 1.0).abs();
            assert!(rel < 0.05, "channel {i}: relative error {rel}");
            for j in 0..i {
                // off-diagonals can be near zero; compare on the correlation scale
                let scale = (theory[(i, i)] * theory[(j, j)]).sqrt();
                let diff = (empirical[(i, j)] - theory[(i, j)]).abs() / scale;
                assert!(diff < 0.05, "({i},{j}): {diff}");
            }
        }
    }
}

#[test]
fn lyapunov_oracle_matches_scalar_closed_form() {
    // AR(1) variance is s / (1 - a^2)
    let m = ArModel::new(vec![DMatrix::from_element(1, 1, 0.6)], DMatrix::from_element(1, 1, 2.0)).unwrap();
    assert!((lyapunov_covariance(&m)[(0, 0)] - 2.0 / 0.64).abs() < 1e-12);
}

#[test]
fn different_seeds_differ_but_fits_agree() {
    let m = toy_model_9_2();
    let a = m.simulate(25_600, DEFAULT_BURN_IN, 256.0, 101).unwrap();
    let b = m.simulate(25_600, DEFAULT_BURN_IN, 256.0, 202).unwrap();
    assert_ne!(a, b);
    let fa = fit_least_squares(&a, 2).unwrap();
    let fb = fit_least_squares(&b, 2).unwrap();
    for (x, y) in fa.coeffs().iter().zip(fb.coeffs()) {
        let gap = (x - y).amax();
        assert!(gap < 0.02, "coefficient gap {gap}");
    }
}
