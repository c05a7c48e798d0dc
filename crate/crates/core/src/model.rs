//! Multivariate autoregressive models: construction, stability, simulation
//! and single-link isolation.
//!
//! A model of order `p` over `q` channels evolves as
//!
//! ```text
//! x(t) = A(1) x(t-1) + ... + A(p) x(t-p) + e(t),   e(t) ~ N(0, S)
//! ```
//!
//! Entry `(i, j)` of `A(k)` is the influence of sender `j` on receiver `i`
//! at lag `k`. Channel indices are zero-based throughout the crate.

use nalgebra::{Cholesky, DMatrix, DVector, Schur, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Models whose companion spectral radius is at or above `1 - STABILITY_MARGIN`
/// are treated as unstable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Eigenvalues of a noise covariance down to this value count as non-negative.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Default number of transient samples discarded by [`ArModel::simulate`].
pub const DEFAULT_BURN_IN: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    coeffs: Vec<DMatrix<f64>>,
    noise_cov: DMatrix<f64>,
}

impl ArModel {
    /// Builds a model from lag matrices `A(1)..A(p)` and the innovation
    /// covariance.
    pub fn new(coeffs: Vec<DMatrix<f64>>, noise_cov: DMatrix<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidModel("order must be at least 1".into()));
        }
        let q = noise_cov.nrows();
        if q == 0 || noise_cov.ncols() != q {
            return Err(Error::InvalidModel(format!(
                "noise covariance must be square and non-empty, got {}x{}",
                noise_cov.nrows(),
                noise_cov.ncols()
            )));
        }
        for (k, a) in coeffs.iter().enumerate() {
            if a.nrows() != q || a.ncols() != q {
                return Err(Error::InvalidModel(format!(
                    "A({}) is {}x{}, expected {q}x{q}",
                    k + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("A({}) has non-finite entries", k + 1)));
            }
        }
        if noise_cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("noise covariance has non-finite entries".into()));
        }
        let scale = noise_cov.amax().max(1.0);
        for i in 0..q {
            for j in 0..i {
                if (noise_cov[(i, j)] - noise_cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidModel(format!(
                        "noise covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eigenvalue = SymmetricEigen::new(noise_cov.clone()).eigenvalues.min();
        if min_eigenvalue < -PSD_TOLERANCE {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
        }
        Ok(Self { coeffs, noise_cov })
    }

    /// Convenience constructor from row-major nested slices, one per lag.
    pub fn from_rows(coeffs: &[Vec<Vec<f64>>], noise_cov: &[Vec<f64>]) -> Result<Self> {
        let to_matrix = |rows: &[Vec<f64>]| -> Result<DMatrix<f64>> {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidModel("matrices must be square".into()));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        };
        let coeffs = coeffs.iter().map(|m| to_matrix(m)).collect::<Result<Vec<_>>>()?;
        Self::new(coeffs, to_matrix(noise_cov)?)
    }

    pub fn channels(&self) -> usize {
        self.noise_cov.nrows()
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Lag matrices; `coeffs()[k]` is `A(k + 1)`.
    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn lag(&self, k: usize) -> &DMatrix<f64> {
        &self.coeffs[k - 1]
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn has_diagonal_noise(&self) -> bool {
        let q = self.channels();
        (0..q).all(|i| (0..q).all(|j| i == j || self.noise_cov[(i, j)] == 0.0))
    }

    /// Copy of the model with the off-diagonal innovation covariances zeroed.
    pub fn with_diagonal_noise(&self) -> Self {
        Self {
            coeffs: self.coeffs.clone(),
            noise_cov: DMatrix::from_diagonal(&self.noise_cov.diagonal()),
        }
    }

    /// The `(q p) x (q p)` companion matrix of the order-1 embedding.
    pub fn companion(&self) -> DMatrix<f64> {
        let q = self.channels();
        let p = self.order();
        let mut c = DMatrix::zeros(q * p, q * p);
        for (k, a) in self.coeffs.iter().enumerate() {
            c.view_mut((0, k * q), (q, q)).copy_from(a);
        }
        for i in q..q * p {
            c[(i, i - q)] = 1.0;
        }
        c
    }

    /// Largest eigenvalue modulus of the companion matrix.
    pub fn spectral_radius(&self) -> f64 {
        max_eigenvalue_modulus(&self.companion())
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0 - STABILITY_MARGIN
    }

    /// Spectral radius of the univariate autoregression formed by the
    /// diagonal coefficients `A(1..p)[node, node]`.
    pub fn self_regression_radius(&self, node: usize) -> f64 {
        let p = self.order();
        let mut c = DMatrix::zeros(p, p);
        for (k, a) in self.coeffs.iter().enumerate() {
            c[(0, k)] = a[(node, node)];
        }
        for i in 1..p {
            c[(i, i - 1)] = 1.0;
        }
        max_eigenvalue_modulus(&c)
    }

    /// Zeroes every association except the directed link `sender -> receiver`:
    /// all off-diagonal lag entries other than `(receiver, sender)` and all
    /// off-diagonal innovation covariances. Diagonals are left untouched.
    ///
    /// Stability of the result is not checked here.
    pub fn isolate(&self, receiver: usize, sender: usize) -> Result<Self> {
        let q = self.channels();
        if receiver == sender {
            return Err(Error::InvalidPair {
                receiver,
                sender,
                reason: "receiver and sender must differ",
            });
        }
        if receiver >= q || sender >= q {
            return Err(Error::InvalidPair {
                receiver,
                sender,
                reason: "index out of range",
            });
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|a| {
                DMatrix::from_fn(q, q, |k, l| {
                    if k == l || (k, l) == (receiver, sender) {
                        a[(k, l)]
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        Ok(Self {
            coeffs,
            noise_cov: DMatrix::from_diagonal(&self.noise_cov.diagonal()),
        })
    }

    /// Generates `n_samples` samples from zero initial state with Gaussian
    /// innovations, after discarding `burn_in` samples. Output is a pure
    /// function of the arguments.
    pub fn simulate(
        &self,
        n_samples: usize,
        burn_in: usize,
        sampling_rate: f64,
        seed: u64,
    ) -> Result<TimeSeriesData> {
        if n_samples == 0 {
            return Err(Error::InvalidData("n_samples must be positive".into()));
        }
        let radius = self.spectral_radius();
        if !(radius < 1.0 - STABILITY_MARGIN) {
            return Err(Error::Unstable { radius });
        }
        let q = self.channels();
        let factor = noise_factor(&self.noise_cov)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = burn_in + n_samples;

        // time-major history, one q-vector per sample
        let mut history = vec![0.0; total * q];
        let mut z = DVector::zeros(q);
        for t in 0..total {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let innovation = &factor * &z;
            for i in 0..q {
                let mut acc = innovation[i];
                for (k, a) in self.coeffs.iter().enumerate() {
                    let lag = k + 1;
                    if t < lag {
                        break;
                    }
                    let past = &history[(t - lag) * q..(t - lag + 1) * q];
                    for (j, x) in past.iter().enumerate() {
                        acc += a[(i, j)] * x;
                    }
                }
                history[t * q + i] = acc;
            }
        }
        let values = DMatrix::from_fn(q, n_samples, |i, t| history[(burn_in + t) * q + i]);
        TimeSeriesData::new(values, sampling_rate)
    }
}

/// Returns `L` with `L L^T = cov`: Cholesky when positive definite, otherwise
/// the symmetric square root with negative eigenvalues clipped to zero.
fn noise_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = Cholesky::new(cov.clone()) {
        return Ok(chol.l());
    }
    let eig = SymmetricEigen::new(cov.clone());
    let min_eigenvalue = eig.eigenvalues.min();
    if min_eigenvalue < -PSD_TOLERANCE {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
    }
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

fn max_eigenvalue_modulus(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    match Schur::try_new(m.clone(), f64::EPSILON, 10_000) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
        None => f64::NAN,
    }
}

/// A `q`-channel real signal sampled at `sampling_rate` Hz. Column `t` of
/// `values` is the sample at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesData {
    values: DMatrix<f64>,
    sampling_rate: f64,
}

impl TimeSeriesData {
    pub fn new(values: DMatrix<f64>, sampling_rate: f64) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::InvalidData("at least one channel required".into()));
        }
        if values.ncols() == 0 {
            return Err(Error::InvalidData("at least one sample required".into()));
        }
        if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
            return Err(Error::InvalidData(format!("sampling rate must be positive, got {sampling_rate}")));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            let q = values.nrows();
            return Err(Error::InvalidData(format!(
                "non-finite value at channel {}, sample {}",
                idx % q,
                idx / q
            )));
        }
        Ok(Self { values, sampling_rate })
    }

    /// Builds data from sample rows (one row per time step, one column per channel).
    pub fn from_samples(rows: &[Vec<f64>], sampling_rate: f64) -> Result<Self> {
        let q = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(t) = rows.iter().position(|r| r.len() != q) {
            return Err(Error::InvalidData(format!(
                "sample {t} has {} channels, expected {q}",
                rows[t].len()
            )));
        }
        Self::new(DMatrix::from_fn(q, rows.len(), |i, t| rows[t][i]), sampling_rate)
    }

    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Lag-0 covariance about the per-channel sample mean, divisor `N`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.n_samples() as f64;
        let mean = self.values.column_mean();
        let centered = DMatrix::from_fn(self.channels(), self.n_samples(), |i, t| {
            self.values[(i, t)] - mean[i]
        });
        (&centered * centered.transpose()) / n
    }
}
