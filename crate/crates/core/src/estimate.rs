//! Ordinary least-squares fitting of MVAR models.
//!
//! All channels share the same stacked regressor
//! `z(t) = [x(t-1); ...; x(t-p)]`, so one multivariate regression
//! `Y = Z B` solves every per-channel problem at once. The design matrix is
//! factored with Householder QR rather than forming `Z^T Z`, which keeps the
//! residuals orthogonal to the regressors to working precision even for the
//! sharply resonant toy systems.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{ArModel, TimeSeriesData};

/// Designs whose estimated condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub model: ArModel,
    /// Per-channel sample means removed before regression.
    pub means: Vec<f64>,
    /// One-step prediction errors, `q x (N - p)`; column `k` belongs to time `p + k`.
    pub residuals: DMatrix<f64>,
    /// Ratio of the largest to smallest |R_ii| of the design's QR factor.
    pub condition: f64,
}

/// Fits an order-`order` model by least squares over `t = order .. N-1`.
///
/// The per-channel mean is subtracted first and no intercept is estimated.
/// The innovation covariance is `E E^T / (N - order)`.
pub fn fit_least_squares(data: &TimeSeriesData, order: usize) -> Result<ArModel> {
    fit_least_squares_detailed(data, order).map(|fit| fit.model)
}

pub fn fit_least_squares_detailed(data: &TimeSeriesData, order: usize) -> Result<LeastSquaresFit> {
    if order == 0 {
        return Err(Error::InvalidModel("order must be at least 1".into()));
    }
    let q = data.channels();
    let n = data.n_samples();
    let regressors = q * order;
    let needed = regressors + order + 1;
    if n < needed {
        return Err(Error::InsufficientData { needed, available: n });
    }
    let rows = n - order;

    let means: Vec<f64> = data.values().column_mean().iter().copied().collect();
    let x = DMatrix::from_fn(q, n, |i, t| data.values()[(i, t)] - means[i]);

    let design = DMatrix::from_fn(rows, regressors, |r, c| {
        let lag = c / q + 1;
        let channel = c % q;
        x[(channel, r + order - lag)]
    });
    let target = DMatrix::from_fn(rows, q, |r, i| x[(i, r + order)]);

    let qr = design.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(max > 0.0) || !(condition <= MAX_CONDITION) {
        return Err(Error::SingularDesign { condition });
    }

    let mut qty = target.clone();
    qr.q_tr_mul(&mut qty);
    let qty_top = qty.rows(0, regressors).into_owned();
    let beta = r
        .solve_upper_triangular(&qty_top)
        .ok_or(Error::SingularDesign { condition })?;

    // beta is (q p) x q with row block k holding A(k+1)^T
    let coeffs = (0..order)
        .map(|k| beta.rows(k * q, q).transpose())
        .collect::<Vec<_>>();

    let residuals = (&target - &design * &beta).transpose();
    let noise_cov = residual_covariance(&residuals);
    let model = ArModel::new(coeffs, noise_cov)?;
    Ok(LeastSquaresFit {
        model,
        means,
        residuals,
        condition,
    })
}

/// `E E^T / N_eff` for residuals stored as `q x N_eff`, symmetrized.
pub fn residual_covariance(residuals: &DMatrix<f64>) -> DMatrix<f64> {
    let n_eff = residuals.ncols() as f64;
    let cov = (residuals * residuals.transpose()) / n_eff;
    (&cov + cov.transpose()) * 0.5
}
