//! Frequency-domain connectivity measures and peak location.
//!
//! Every measure is stored as a [`ConnectivityMap`]: one real `q x q` matrix
//! per grid frequency with entry `(i, j)` describing the link from sender `j`
//! to receiver `i`.
//!
//! | measure | needs | off-diagonal `(i, j)` |
//! |---|---|---|
//! | coherence | `S_x` | `|S_ij|^2 / (S_ii S_jj)` |
//! | partial coherence | `S_x^-1` | `|P_ij|^2 / (P_ii P_jj)` |
//! | iCoh | model | `w_i |Ǎ_ij|^2 / (w_i |Ǎ_ij|^2 + w_j |Ǎ_jj|^2)`, `w = 1 / S_kk` |
//! | NCR | model, diagonal `S` | `|B_ij|^2 S_jj / sum_k |B_ik|^2 S_kk` |
//! | constrained NCR | model | NCR of the model isolated to `j -> i` |
//! | PDC | model | `|Ǎ_ij|^2 / sum_k |Ǎ_kj|^2` |
//! | gPDC | model | `w_i |Ǎ_ij|^2 / sum_k w_k |Ǎ_kj|^2` |

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArModel, STABILITY_MARGIN};
use crate::spectral::{coefficient_transform_at, transform_coefficients, CMatrix, CrossSpectrum, FrequencyGrid};

/// Default prominence threshold for [`find_peaks`].
pub const DEFAULT_MIN_PROMINENCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureId {
    Coherence,
    PartialCoherence,
    Icoh,
    Ncr,
    ConstrainedNcr,
    Pdc,
    Gpdc,
}

impl MeasureId {
    pub const ALL: [MeasureId; 7] = [
        MeasureId::Coherence,
        MeasureId::PartialCoherence,
        MeasureId::Icoh,
        MeasureId::Ncr,
        MeasureId::ConstrainedNcr,
        MeasureId::Pdc,
        MeasureId::Gpdc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureId::Coherence => "coherence",
            MeasureId::PartialCoherence => "partial_coherence",
            MeasureId::Icoh => "icoh",
            MeasureId::Ncr => "ncr",
            MeasureId::ConstrainedNcr => "constrained_ncr",
            MeasureId::Pdc => "pdc",
            MeasureId::Gpdc => "gpdc",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

/// What the diagonal cells of a [`ConnectivityMap`] hold.
///
/// `Undefined` keeps whatever self-term the measure's own formula yields
/// (1 for coherence and partial coherence, `γ_ii` for NCR, the diagonal
/// share for PDC/gPDC, 0 for iCoh and constrained NCR); these carry no
/// connectivity meaning. `NormalizedAutospectrum` replaces them with the
/// channel's autospectrum scaled to unit maximum over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalConvention {
    Undefined,
    NormalizedAutospectrum,
}

#[derive(Debug, Clone)]
pub struct ConnectivityMap {
    pub measure: MeasureId,
    pub grid: FrequencyGrid,
    pub values: Vec<DMatrix<f64>>,
    pub diagonal: DiagonalConvention,
}

impl ConnectivityMap {
    fn new(measure: MeasureId, grid: &FrequencyGrid, values: Vec<DMatrix<f64>>) -> Self {
        Self {
            measure,
            grid: grid.clone(),
            values,
            diagonal: DiagonalConvention::Undefined,
        }
    }

    pub fn channels(&self) -> usize {
        self.values.first().map(|m| m.nrows()).unwrap_or(0)
    }

    /// Values of cell `(receiver, sender)` across the grid.
    pub fn curve(&self, receiver: usize, sender: usize) -> Vec<f64> {
        self.values.iter().map(|m| m[(receiver, sender)]).collect()
    }

    pub fn max(&self, receiver: usize, sender: usize) -> f64 {
        self.curve(receiver, sender).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Frequency and value of the (first) maximum of cell `(receiver, sender)`.
    pub fn argmax(&self, receiver: usize, sender: usize) -> (f64, f64) {
        let curve = self.curve(receiver, sender);
        let mut best = 0;
        for (k, v) in curve.iter().enumerate() {
            if *v > curve[best] {
                best = k;
            }
        }
        (self.grid.frequencies()[best], curve[best])
    }

    /// Replaces the diagonal with unit-maximum autospectra taken from `cs`,
    /// which must share this map's grid.
    pub fn with_normalized_autospectrum(mut self, cs: &CrossSpectrum) -> Result<Self> {
        if cs.grid().frequencies() != self.grid.frequencies() {
            return Err(Error::InvalidGrid("cross-spectrum grid differs from map grid".into()));
        }
        for i in 0..self.channels() {
            let auto = cs.autospectrum(i);
            let peak = auto.iter().copied().fold(0.0, f64::max);
            if !(peak > 0.0) {
                return Err(Error::DegenerateChannel {
                    channel: i,
                    frequency_hz: self.grid.frequencies()[0],
                });
            }
            for (m, s) in self.values.iter_mut().zip(&auto) {
                m[(i, i)] = (s / peak).max(0.0);
            }
        }
        self.diagonal = DiagonalConvention::NormalizedAutospectrum;
        Ok(self)
    }
}

/// Squared-modulus normalization shared by coherence and partial coherence.
fn normalized_squared(
    measure: MeasureId,
    grid: &FrequencyGrid,
    matrices: &[CMatrix],
    degenerate: impl Fn(usize, f64) -> Error,
) -> Result<ConnectivityMap> {
    let mut values = Vec::with_capacity(matrices.len());
    for (idx, m) in matrices.iter().enumerate() {
        let q = m.nrows();
        for i in 0..q {
            if !(m[(i, i)].re > 0.0) {
                return Err(degenerate(i, grid.frequencies()[idx]));
            }
        }
        values.push(DMatrix::from_fn(q, q, |i, j| {
            let v = m[(i, j)].norm_sqr() / (m[(i, i)].re * m[(j, j)].re);
            v.min(1.0)
        }));
    }
    Ok(ConnectivityMap::new(measure, grid, values))
}

/// Squared coherence `|S_ij|^2 / (S_ii S_jj)`.
pub fn coherence(cs: &CrossSpectrum) -> Result<ConnectivityMap> {
    normalized_squared(MeasureId::Coherence, cs.grid(), cs.s_x(), |channel, frequency_hz| {
        Error::DegenerateChannel { channel, frequency_hz }
    })
}

/// Squared modulus of the partial coherence built from `S_x^-1`.
pub fn partial_coherence(cs: &CrossSpectrum) -> Result<ConnectivityMap> {
    normalized_squared(
        MeasureId::PartialCoherence,
        cs.grid(),
        cs.inverse()?,
        |channel, frequency_hz| Error::DegenerateInverse { channel, frequency_hz },
    )
}

/// Checks the preconditions iCoh places on a node acting as receiver or
/// sender: a stable diagonal self-regression and positive innovation variance.
pub fn check_isolated_node(model: &ArModel, node: usize) -> Result<()> {
    let radius = model.self_regression_radius(node);
    if !(radius < 1.0) {
        return Err(Error::IsolatedInstability { node, radius });
    }
    if !(model.noise_cov()[(node, node)] > 0.0) {
        return Err(Error::NonPositiveInnovation { node });
    }
    Ok(())
}

fn a_check_at(model: &ArModel, grid: &FrequencyGrid, idx: usize) -> CMatrix {
    let q = model.channels();
    CMatrix::identity(q, q) - coefficient_transform_at(model, grid.bin(idx), grid.n_dft())
}

/// Closed-form iCoh of one directed pair from `Ǎ(w)` and the innovation variances.
fn icoh_value(a_check: &CMatrix, noise: &DMatrix<f64>, receiver: usize, sender: usize) -> f64 {
    let coupling = a_check[(receiver, sender)].norm_sqr() / noise[(receiver, receiver)];
    let intrinsic = a_check[(sender, sender)].norm_sqr() / noise[(sender, sender)];
    coupling / (coupling + intrinsic)
}

/// iCoh evaluated as the squared partial coherence of the isolated system:
/// numerator `|[S^-1]_ij|^2`, denominator `[S^-1]_ii [S^-1]_jj`, each entry
/// written out for the isolated `Ǎ(w)` and diagonal innovation covariance.
fn icoh_partial_coherence_value(a_check: &CMatrix, noise: &DMatrix<f64>, receiver: usize, sender: usize) -> f64 {
    let (i, j) = (receiver, sender);
    let w_i = 1.0 / noise[(i, i)];
    let w_j = 1.0 / noise[(j, j)];
    let a_ij = a_check[(i, j)].norm_sqr();
    let a_ii = a_check[(i, i)].norm_sqr();
    let a_jj = a_check[(j, j)].norm_sqr();
    let numerator = a_ij * a_ii * w_i * w_i;
    let denominator = w_i * a_ii * (w_i * a_ij + w_j * a_jj);
    numerator / denominator
}

/// iCoh for every ordered pair, skipping pairs whose receiver or sender fails
/// [`check_isolated_node`]. Skipped cells are zero; the returned errors name
/// each failing node once.
pub fn icoh_lenient(model: &ArModel, grid: &FrequencyGrid) -> (ConnectivityMap, Vec<Error>) {
    let q = model.channels();
    let mut failures = Vec::new();
    let mut valid = vec![true; q];
    for (node, ok) in valid.iter_mut().enumerate() {
        if let Err(e) = check_isolated_node(model, node) {
            failures.push(e);
            *ok = false;
        }
    }
    let noise = model.noise_cov();
    let values = (0..grid.len())
        .map(|idx| {
            let a_check = a_check_at(model, grid, idx);
            DMatrix::from_fn(q, q, |i, j| {
                if i == j || !valid[i] || !valid[j] {
                    return 0.0;
                }
                let value = icoh_value(&a_check, noise, i, j);
                debug_assert!(
                    (value - icoh_partial_coherence_value(&a_check, noise, i, j)).abs() <= 1e-12,
                    "closed-form and partial-coherence iCoh disagree"
                );
                value
            })
        })
        .collect();
    (ConnectivityMap::new(MeasureId::Icoh, grid, values), failures)
}

/// iCoh for every ordered pair; fails if any node's self-regression is unstable.
pub fn icoh(model: &ArModel, grid: &FrequencyGrid) -> Result<ConnectivityMap> {
    let (map, mut failures) = icoh_lenient(model, grid);
    match failures.is_empty() {
        true => Ok(map),
        false => Err(failures.swap_remove(0)),
    }
}

/// iCoh of one pair via the partial-coherence form (numerator and
/// denominator kept separate), for cross-checking the closed form.
pub fn icoh_partial_coherence_form(
    model: &ArModel,
    grid: &FrequencyGrid,
    receiver: usize,
    sender: usize,
) -> Result<Vec<f64>> {
    check_pair(model, receiver, sender)?;
    let noise = model.noise_cov();
    Ok((0..grid.len())
        .map(|idx| icoh_partial_coherence_value(&a_check_at(model, grid, idx), noise, receiver, sender))
        .collect())
}

fn check_pair(model: &ArModel, receiver: usize, sender: usize) -> Result<()> {
    let q = model.channels();
    if receiver == sender || receiver >= q || sender >= q {
        return Err(Error::InvalidPair {
            receiver,
            sender,
            reason: "need two distinct channels in range",
        });
    }
    check_isolated_node(model, receiver)?;
    check_isolated_node(model, sender)
}

fn ncr_from_transfer(b: &CMatrix, variances: &[f64], receiver: usize, sender: usize) -> f64 {
    let total: f64 = (0..b.ncols()).map(|k| b[(receiver, k)].norm_sqr() * variances[k]).sum();
    b[(receiver, sender)].norm_sqr() * variances[sender] / total
}

/// Noise contribution ratio for every ordered pair (diagonal included).
///
/// The ratio presumes uncorrelated innovations. A model with non-zero
/// off-diagonal innovation covariances is refused unless
/// `force_diagonal_noise` is set, in which case those entries are dropped.
pub fn ncr(model: &ArModel, grid: &FrequencyGrid, force_diagonal_noise: bool) -> Result<ConnectivityMap> {
    if !model.has_diagonal_noise() && !force_diagonal_noise {
        return Err(Error::CorrelatedInnovations);
    }
    let radius = model.spectral_radius();
    if !(radius < 1.0 - STABILITY_MARGIN) {
        return Err(Error::Unstable { radius });
    }
    let q = model.channels();
    let variances: Vec<f64> = model.noise_cov().diagonal().iter().copied().collect();
    let transform = transform_coefficients(model, grid)?;
    let mut values = Vec::with_capacity(grid.len());
    for (idx, b) in transform.b_of_omega.iter().enumerate() {
        for i in 0..q {
            let total: f64 = (0..q).map(|k| b[(i, k)].norm_sqr() * variances[k]).sum();
            if !(total > 0.0) {
                return Err(Error::DegenerateChannel {
                    channel: i,
                    frequency_hz: grid.frequencies()[idx],
                });
            }
        }
        values.push(DMatrix::from_fn(q, q, |i, j| ncr_from_transfer(b, &variances, i, j)));
    }
    Ok(ConnectivityMap::new(MeasureId::Ncr, grid, values))
}

/// NCR of `sender -> receiver` after isolating that single link: the model
/// is reduced by [`ArModel::isolate`], its transfer matrix is obtained by
/// inverting `Ǎ(w)`, and the ratio is read off the receiver's row.
pub fn constrained_ncr(model: &ArModel, grid: &FrequencyGrid, receiver: usize, sender: usize) -> Result<Vec<f64>> {
    check_pair(model, receiver, sender)?;
    let isolated = model.isolate(receiver, sender)?;
    let variances: Vec<f64> = isolated.noise_cov().diagonal().iter().copied().collect();
    let transform = transform_coefficients(&isolated, grid)?;
    Ok(transform
        .b_of_omega
        .iter()
        .map(|b| ncr_from_transfer(b, &variances, receiver, sender))
        .collect())
}

/// Constrained NCR for every ordered pair; pairs failing the isolation
/// preconditions are zero and reported.
pub fn constrained_ncr_map(model: &ArModel, grid: &FrequencyGrid) -> (ConnectivityMap, Vec<Error>) {
    let q = model.channels();
    let mut values = vec![DMatrix::zeros(q, q); grid.len()];
    let mut failures = Vec::new();
    for i in 0..q {
        for j in 0..q {
            if i == j {
                continue;
            }
            match constrained_ncr(model, grid, i, j) {
                Ok(curve) => {
                    for (m, v) in values.iter_mut().zip(curve) {
                        m[(i, j)] = v;
                    }
                }
                Err(e) => {
                    if !failures.contains(&e) {
                        failures.push(e);
                    }
                }
            }
        }
    }
    (ConnectivityMap::new(MeasureId::ConstrainedNcr, grid, values), failures)
}

/// Column-normalized `w_i |Ǎ_ij|^2 / sum_k w_k |Ǎ_kj|^2`.
fn column_normalized(
    measure: MeasureId,
    model: &ArModel,
    grid: &FrequencyGrid,
    weights: &[f64],
) -> Result<ConnectivityMap> {
    let q = model.channels();
    let mut values = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let a_check = a_check_at(model, grid, idx);
        let mut m = DMatrix::zeros(q, q);
        for j in 0..q {
            let column: Vec<f64> = (0..q).map(|k| weights[k] * a_check[(k, j)].norm_sqr()).collect();
            let total: f64 = column.iter().sum();
            if !(total > 0.0) {
                return Err(Error::DegenerateColumn {
                    sender: j,
                    frequency_hz: grid.frequencies()[idx],
                });
            }
            for (i, c) in column.iter().enumerate() {
                m[(i, j)] = c / total;
            }
        }
        values.push(m);
    }
    Ok(ConnectivityMap::new(measure, grid, values))
}

/// Partial directed coherence, squared.
pub fn pdc(model: &ArModel, grid: &FrequencyGrid) -> Result<ConnectivityMap> {
    column_normalized(MeasureId::Pdc, model, grid, &vec![1.0; model.channels()])
}

/// Generalized partial directed coherence, squared, weighting receiver `k`
/// by `1 / S_kk`.
pub fn gpdc(model: &ArModel, grid: &FrequencyGrid) -> Result<ConnectivityMap> {
    let noise = model.noise_cov();
    let weights = (0..model.channels())
        .map(|k| {
            let v = noise[(k, k)];
            if v > 0.0 {
                Ok(1.0 / v)
            } else {
                Err(Error::NonPositiveInnovation { node: k })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    column_normalized(MeasureId::Gpdc, model, grid, &weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub frequency_hz: f64,
    pub value: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub receiver: usize,
    pub sender: usize,
    /// Sorted by value, largest first.
    pub peaks: Vec<Peak>,
}

/// Interior local maxima of cell `(receiver, sender)` whose prominence is at
/// least `min_prominence`.
pub fn find_peaks(map: &ConnectivityMap, receiver: usize, sender: usize, min_prominence: f64) -> PeakReport {
    PeakReport {
        receiver,
        sender,
        peaks: find_curve_peaks(map.grid.frequencies(), &map.curve(receiver, sender), min_prominence),
    }
}

/// Peak search on a sampled curve. Endpoints are never peaks; a flat top
/// counts once, at its middle sample. Prominence is the height above the
/// higher of the two lowest points reached before the curve climbs above the
/// peak on either side (or hits the edge).
pub fn find_curve_peaks(frequencies: &[f64], values: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut k = 1;
    while k + 1 < n {
        if values[k] > values[k - 1] {
            let mut end = k;
            while end + 1 < n && values[end + 1] == values[k] {
                end += 1;
            }
            if end + 1 < n && values[end + 1] < values[k] {
                let top = values[k];
                let left_min = values[..k]
                    .iter()
                    .rev()
                    .take_while(|&&v| v <= top)
                    .fold(top, |m, &v| m.min(v));
                let right_min = values[end + 1..]
                    .iter()
                    .take_while(|&&v| v <= top)
                    .fold(top, |m, &v| m.min(v));
                let prominence = top - left_min.max(right_min);
                if prominence >= min_prominence {
                    peaks.push(Peak {
                        frequency_hz: frequencies[(k + end) / 2],
                        value: top,
                        prominence,
                    });
                }
            }
            k = end + 1;
        } else {
            k += 1;
        }
    }
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    peaks
}
