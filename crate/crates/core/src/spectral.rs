//! Frequency-domain representation of MVAR models and cross-spectral
//! density estimates.
//!
//! Lag matrices are transformed with the forward convention
//! `A(w) = sum_k A(k) exp(-i 2 pi k w / N)` for bin `w` of an `N`-point
//! transform, with no normalization factor. From it follow
//! `Ǎ(w) = I - A(w)`, the transfer matrix `B(w) = Ǎ(w)^-1`, the spectral
//! density `S_x = B S B^*` and its inverse `S_x^-1 = Ǎ^* S^-1 Ǎ`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArModel, TimeSeriesData, STABILITY_MARGIN};

pub type CMatrix = DMatrix<Complex64>;

/// Residual `max |B Ǎ - I|` above which `Ǎ(w)` is reported as singular.
const INVERSION_TOLERANCE: f64 = 1e-6;

/// Ordered analysis frequencies together with the transform length used to
/// place them on discrete bins.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    frequencies: Vec<f64>,
    sampling_rate: f64,
    n_dft: usize,
}

impl FrequencyGrid {
    pub fn new(frequencies: Vec<f64>, sampling_rate: f64, n_dft: usize) -> Result<Self> {
        if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
            return Err(Error::InvalidGrid(format!("sampling rate must be positive, got {sampling_rate}")));
        }
        if n_dft < 2 {
            return Err(Error::InvalidGrid("n_dft must be at least 2".into()));
        }
        if frequencies.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        let resolution = sampling_rate / n_dft as f64;
        let upper = sampling_rate / 2.0 + resolution;
        for (k, &f) in frequencies.iter().enumerate() {
            if !(f >= 0.0 && f < upper) {
                return Err(Error::InvalidGrid(format!("frequency {f} Hz outside [0, {upper})")));
            }
            if k > 0 && f <= frequencies[k - 1] {
                return Err(Error::InvalidGrid("frequencies must be strictly increasing".into()));
            }
        }
        Ok(Self {
            frequencies,
            sampling_rate,
            n_dft,
        })
    }

    /// Every bin `k * fs / n_dft` that falls inside `[f_min, f_max]`.
    pub fn band(sampling_rate: f64, n_dft: usize, f_min: f64, f_max: f64) -> Result<Self> {
        if !(f_min <= f_max) {
            return Err(Error::InvalidGrid(format!("empty band [{f_min}, {f_max}]")));
        }
        let resolution = sampling_rate / n_dft.max(1) as f64;
        let frequencies = (0..=n_dft / 2)
            .map(|k| k as f64 * resolution)
            .filter(|&f| f >= f_min - 1e-9 && f <= f_max + 1e-9)
            .collect();
        Self::new(frequencies, sampling_rate, n_dft)
    }

    /// 1..127 Hz in 1 Hz steps at 256 Hz sampling.
    pub fn standard() -> Self {
        Self::band(256.0, 256, 1.0, 127.0).expect("standard grid is valid")
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn n_dft(&self) -> usize {
        self.n_dft
    }

    pub fn resolution(&self) -> f64 {
        self.sampling_rate / self.n_dft as f64
    }

    /// Discrete (possibly fractional) bin index of grid point `idx`.
    pub fn bin(&self, idx: usize) -> f64 {
        self.frequencies[idx] * self.n_dft as f64 / self.sampling_rate
    }

    /// Position of the grid point closest to `f`, if within half a bin.
    pub fn index_of(&self, f: f64) -> Option<usize> {
        let half = 0.5 * self.resolution();
        self.frequencies.iter().position(|&g| (g - f).abs() <= half)
    }
}

/// `A(w)`, `Ǎ(w) = I - A(w)` and `B(w) = Ǎ(w)^-1` on a frequency grid.
#[derive(Debug, Clone)]
pub struct SpectralTransform {
    pub grid: FrequencyGrid,
    pub a_of_omega: Vec<CMatrix>,
    pub a_check: Vec<CMatrix>,
    pub b_of_omega: Vec<CMatrix>,
}

/// `A(w)` at one (possibly fractional) bin of an `n_dft`-point transform,
/// evaluated directly from the lag sum.
pub fn coefficient_transform_at(model: &ArModel, bin: f64, n_dft: usize) -> CMatrix {
    let q = model.channels();
    let mut out = CMatrix::zeros(q, q);
    for (k, a) in model.coeffs().iter().enumerate() {
        let lag = (k + 1) as f64;
        let phase = Complex64::from_polar(1.0, -2.0 * PI * lag * bin / n_dft as f64);
        out.zip_apply(a, |o, c| *o += phase * c);
    }
    out
}

/// `A(w)` for every bin `w = 0 .. n_dft-1`, computed as the FFT of each
/// coefficient sequence zero-padded to `b(0) = 0`, `b(k) = A(k)`, `b(k) = 0`
/// for `k > p`.
pub fn coefficient_dft(model: &ArModel, n_dft: usize) -> Result<Vec<CMatrix>> {
    let q = model.channels();
    let p = model.order();
    if n_dft <= p {
        return Err(Error::InvalidGrid(format!("n_dft {n_dft} must exceed the model order {p}")));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_dft);
    let mut out = vec![CMatrix::zeros(q, q); n_dft];
    let mut buffer = vec![Complex64::new(0.0, 0.0); n_dft];
    for i in 0..q {
        for j in 0..q {
            buffer.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for (k, a) in model.coeffs().iter().enumerate() {
                buffer[k + 1] = Complex64::new(a[(i, j)], 0.0);
            }
            fft.process(&mut buffer);
            for (w, value) in buffer.iter().enumerate() {
                out[w][(i, j)] = *value;
            }
        }
    }
    Ok(out)
}

pub fn transform_coefficients(model: &ArModel, grid: &FrequencyGrid) -> Result<SpectralTransform> {
    let q = model.channels();
    let identity = CMatrix::identity(q, q);
    let mut a_of_omega = Vec::with_capacity(grid.len());
    let mut a_check = Vec::with_capacity(grid.len());
    let mut b_of_omega = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let a = coefficient_transform_at(model, grid.bin(idx), grid.n_dft());
        let check = &identity - &a;
        let b = invert_checked(&check).ok_or(Error::SingularTransform {
            frequency_hz: grid.frequencies()[idx],
        })?;
        a_of_omega.push(a);
        a_check.push(check);
        b_of_omega.push(b);
    }
    Ok(SpectralTransform {
        grid: grid.clone(),
        a_of_omega,
        a_check,
        b_of_omega,
    })
}

fn invert_checked(m: &CMatrix) -> Option<CMatrix> {
    let inv = m.clone().try_inverse()?;
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let n = m.nrows();
    let residual = (&inv * m - CMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    (residual <= INVERSION_TOLERANCE).then_some(inv)
}

/// Spectral density matrix `S_x(w)` and, when available, its inverse.
#[derive(Debug, Clone)]
pub struct CrossSpectrum {
    grid: FrequencyGrid,
    s_x: Vec<CMatrix>,
    s_x_inv: Option<Vec<CMatrix>>,
}

impl CrossSpectrum {
    pub fn new(grid: FrequencyGrid, s_x: Vec<CMatrix>, s_x_inv: Option<Vec<CMatrix>>) -> Self {
        assert_eq!(grid.len(), s_x.len());
        if let Some(inv) = &s_x_inv {
            assert_eq!(grid.len(), inv.len());
        }
        Self { grid, s_x, s_x_inv }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.s_x.first().map(|m| m.nrows()).unwrap_or(0)
    }

    pub fn s_x(&self) -> &[CMatrix] {
        &self.s_x
    }

    /// `S_x^-1(w)`; unavailable when the innovation covariance is singular.
    pub fn inverse(&self) -> Result<&[CMatrix]> {
        self.s_x_inv.as_deref().ok_or(Error::SingularCovariance)
    }

    /// Real autospectrum `[S_x(w)]_ii` across the grid.
    pub fn autospectrum(&self, channel: usize) -> Vec<f64> {
        self.s_x.iter().map(|m| m[(channel, channel)].re).collect()
    }

    /// Restricts to the grid points inside `[f_min, f_max]`.
    pub fn restrict(&self, f_min: f64, f_max: f64) -> Result<Self> {
        let keep: Vec<usize> = (0..self.grid.len())
            .filter(|&k| {
                let f = self.grid.frequencies()[k];
                f >= f_min - 1e-9 && f <= f_max + 1e-9
            })
            .collect();
        let grid = FrequencyGrid::new(
            keep.iter().map(|&k| self.grid.frequencies()[k]).collect(),
            self.grid.sampling_rate(),
            self.grid.n_dft(),
        )?;
        Ok(Self {
            grid,
            s_x: keep.iter().map(|&k| self.s_x[k].clone()).collect(),
            s_x_inv: self
                .s_x_inv
                .as_ref()
                .map(|inv| keep.iter().map(|&k| inv[k].clone()).collect()),
        })
    }
}

/// `B S B^*`, Hermitian-symmetrized.
pub fn spectral_density(b: &CMatrix, noise_cov: &CMatrix) -> CMatrix {
    hermitian_part(&(b * noise_cov * b.adjoint()))
}

/// `Ǎ^* S^-1 Ǎ`, Hermitian-symmetrized.
pub fn inverse_spectral_density(a_check: &CMatrix, noise_precision: &CMatrix) -> CMatrix {
    hermitian_part(&(a_check.adjoint() * noise_precision * a_check))
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn cross_spectrum(model: &ArModel, grid: &FrequencyGrid) -> Result<CrossSpectrum> {
    let radius = model.spectral_radius();
    if !(radius < 1.0 - STABILITY_MARGIN) {
        return Err(Error::Unstable { radius });
    }
    let transform = transform_coefficients(model, grid)?;
    Ok(cross_spectrum_from_transform(model, &transform))
}

pub fn cross_spectrum_from_transform(model: &ArModel, transform: &SpectralTransform) -> CrossSpectrum {
    let noise = to_complex(model.noise_cov());
    let precision = Cholesky::new(model.noise_cov().clone()).map(|c| to_complex(&c.inverse()));
    let s_x = transform
        .b_of_omega
        .iter()
        .map(|b| spectral_density(b, &noise))
        .collect();
    let s_x_inv = precision.map(|p| {
        transform
            .a_check
            .iter()
            .map(|a| inverse_spectral_density(a, &p))
            .collect()
    });
    CrossSpectrum::new(transform.grid.clone(), s_x, s_x_inv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
    Hamming,
}

impl Window {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let phase = |k: usize| 2.0 * PI * k as f64 / n as f64;
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n).map(|k| 0.5 - 0.5 * phase(k).cos()).collect(),
            Window::Hamming => (0..n).map(|k| 0.54 - 0.46 * phase(k).cos()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodogramParams {
    pub segment_len: usize,
    pub overlap_fraction: f64,
    pub window: Window,
}

impl Default for PeriodogramParams {
    fn default() -> Self {
        Self {
            segment_len: 256,
            overlap_fraction: 0.5,
            window: Window::Hann,
        }
    }
}

/// Welch-averaged cross-periodogram on bins `0 ..= segment_len / 2`.
///
/// Each segment has its mean removed and is tapered before the transform.
/// Scaling is `sum |z z^*| / (K sum w^2)`, the same units as `B S B^*`.
pub fn periodogram_cross_spectrum(data: &TimeSeriesData, params: PeriodogramParams) -> Result<CrossSpectrum> {
    let PeriodogramParams {
        segment_len,
        overlap_fraction,
        window,
    } = params;
    let n = data.n_samples();
    let q = data.channels();
    if segment_len < 2 || segment_len > n {
        return Err(Error::InvalidData(format!(
            "segment length {segment_len} must be in [2, {n}]"
        )));
    }
    if !(0.0..=0.9).contains(&overlap_fraction) {
        return Err(Error::InvalidData(format!(
            "overlap fraction {overlap_fraction} outside [0, 0.9]"
        )));
    }
    let step = ((segment_len as f64 * (1.0 - overlap_fraction)).round() as usize).max(1);
    let segments = (n - segment_len) / step + 1;
    if segments < 2 {
        return Err(Error::InsufficientSegments { segments });
    }

    let taper = window.coefficients(segment_len);
    let power: f64 = taper.iter().map(|w| w * w).sum();
    let bins = segment_len / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let values = data.values();

    let mut acc = vec![CMatrix::zeros(q, q); bins];
    let mut spectra = vec![vec![Complex64::new(0.0, 0.0); segment_len]; q];
    for s in 0..segments {
        let start = s * step;
        for (i, buf) in spectra.iter_mut().enumerate() {
            let mean = (start..start + segment_len).map(|t| values[(i, t)]).sum::<f64>() / segment_len as f64;
            for (k, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new((values[(i, start + k)] - mean) * taper[k], 0.0);
            }
            fft.process(buf);
        }
        for (w, m) in acc.iter_mut().enumerate() {
            for i in 0..q {
                for j in 0..q {
                    m[(i, j)] += spectra[i][w] * spectra[j][w].conj();
                }
            }
        }
    }
    let scale = 1.0 / (segments as f64 * power);
    let s_x: Vec<CMatrix> = acc.into_iter().map(|m| hermitian_part(&m.map(|z| z * scale))).collect();
    let s_x_inv = s_x.iter().map(regularized_inverse).collect();

    let resolution = data.sampling_rate() / segment_len as f64;
    let grid = FrequencyGrid::new(
        (0..bins).map(|k| k as f64 * resolution).collect(),
        data.sampling_rate(),
        segment_len,
    )?;
    Ok(CrossSpectrum::new(grid, s_x, Some(s_x_inv)))
}

/// Inverse of a Hermitian PSD matrix, adding a growing ridge to the diagonal
/// until the inversion is numerically sound.
fn regularized_inverse(m: &CMatrix) -> CMatrix {
    if let Some(inv) = invert_checked(m) {
        return hermitian_part(&inv);
    }
    let q = m.nrows();
    let trace: f64 = (0..q).map(|i| m[(i, i)].re).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut ridge = 1e-10 * trace / q as f64;
    loop {
        let shifted = m + CMatrix::identity(q, q).map(|z| z * ridge);
        if let Some(inv) = invert_checked(&shifted) {
            return hermitian_part(&inv);
        }
        ridge *= 10.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![], 256.0, 256).is_err());
        assert!(FrequencyGrid::new(vec![2.0, 1.0], 256.0, 256).is_err());
        assert!(FrequencyGrid::new(vec![-1.0], 256.0, 256).is_err());
        assert!(FrequencyGrid::new(vec![130.0], 256.0, 256).is_err());
        assert!(FrequencyGrid::new(vec![128.0], 256.0, 256).is_ok());
        let g = FrequencyGrid::standard();
        assert_eq!(g.len(), 127);
        assert_eq!(g.frequencies()[0], 1.0);
        assert_eq!(g.frequencies()[126], 127.0);
        assert_eq!(g.index_of(33.0), Some(32));
    }

    #[test]
    fn scalar_transform_is_single_exponential() {
        let c = 0.7;
        let m = ArModel::new(vec![DMatrix::from_element(1, 1, c)], DMatrix::identity(1, 1)).unwrap();
        for w in [0.0, 3.0, 17.0, 64.0] {
            let got = coefficient_transform_at(&m, w, 256)[(0, 0)];
            let want = Complex64::from_polar(c, -2.0 * PI * w / 256.0);
            assert!((got - want).norm() < 1e-15);
        }
    }

    #[test]
    fn dc_transform_is_coefficient_sum() {
        let m = ArModel::from_rows(
            &[
                vec![vec![0.2, -0.1], vec![0.05, 0.3]],
                vec![vec![-0.1, 0.2], vec![0.0, 0.1]],
            ],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let a0 = coefficient_transform_at(&m, 0.0, 256);
        let sum = m.lag(1) + m.lag(2);
        for (z, s) in a0.iter().zip(sum.iter()) {
            assert!((z.re - s).abs() < 1e-15 && z.im.abs() < 1e-15);
        }
    }

    #[test]
    fn singular_transform_is_reported() {
        // A(w) = 1 at w = 0 for a unit root
        let m = ArModel::new(vec![DMatrix::from_element(1, 1, 1.0)], DMatrix::identity(1, 1)).unwrap();
        let grid = FrequencyGrid::band(256.0, 256, 0.0, 10.0).unwrap();
        assert!(matches!(
            transform_coefficients(&m, &grid),
            Err(Error::SingularTransform { frequency_hz }) if frequency_hz == 0.0
        ));
        assert!(matches!(cross_spectrum(&m, &grid), Err(Error::Unstable { .. })));
    }

    #[test]
    fn decoupled_model_has_diagonal_spectrum() {
        let m = ArModel::from_rows(
            &[vec![vec![0.5, 0.0], vec![0.0, -0.3]]],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let cs = cross_spectrum(&m, &FrequencyGrid::standard()).unwrap();
        for s in cs.s_x() {
            assert!(s[(0, 1)].norm() < 1e-12 && s[(1, 0)].norm() < 1e-12);
        }
    }

    #[test]
    fn singular_noise_leaves_inverse_unavailable() {
        let m = ArModel::from_rows(&[vec![vec![0.5, 0.0], vec![0.0, 0.5]]], &[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let cs = cross_spectrum(&m, &FrequencyGrid::standard()).unwrap();
        assert_eq!(cs.s_x().len(), 127);
        assert!(matches!(cs.inverse(), Err(Error::SingularCovariance)));
    }

    #[test]
    fn periodogram_argument_checks() {
        let data = TimeSeriesData::new(DMatrix::from_fn(1, 300, |_, t| (t as f64).sin()), 256.0).unwrap();
        let p = |segment_len, overlap_fraction| PeriodogramParams {
            segment_len,
            overlap_fraction,
            window: Window::Hann,
        };
        assert!(matches!(
            periodogram_cross_spectrum(&data, p(256, 0.0)),
            Err(Error::InsufficientSegments { segments: 1 })
        ));
        assert!(periodogram_cross_spectrum(&data, p(256, 0.95)).is_err());
        assert!(periodogram_cross_spectrum(&data, p(400, 0.5)).is_err());
        assert!(periodogram_cross_spectrum(&data, p(128, 0.5)).is_ok());
    }

    #[test]
    fn tone_peaks_at_its_bin() {
        let fs = 256.0;
        let n = 4096;
        let data = TimeSeriesData::new(
            DMatrix::from_fn(1, n, |_, t| {
                let noise = ((t * 7919) % 101) as f64 / 101.0 - 0.5;
                (2.0 * PI * 32.0 * t as f64 / fs).sin() + 0.01 * noise
            }),
            fs,
        )
        .unwrap();
        let cs = periodogram_cross_spectrum(&data, PeriodogramParams::default()).unwrap();
        let auto = cs.autospectrum(0);
        let argmax = (0..auto.len()).max_by(|&a, &b| auto[a].total_cmp(&auto[b])).unwrap();
        assert_eq!(cs.grid().frequencies()[argmax], 32.0);
    }

    #[test]
    fn window_shapes() {
        let h = Window::Hann.coefficients(4);
        assert!((h[0] - 0.0).abs() < 1e-15 && (h[2] - 1.0).abs() < 1e-15);
        assert_eq!(Window::Rectangular.coefficients(3), vec![1.0; 3]);
        assert!((Window::Hamming.coefficients(4)[0] - 0.08).abs() < 1e-15);
    }
}
