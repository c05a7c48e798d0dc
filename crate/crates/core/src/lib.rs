//! Multivariate autoregressive (MVAR) modelling and frequency-domain
//! connectivity.
//!
//! The crate covers the full path from a model (or data) to directed
//! connectivity spectra:
//!
//! - [`model`]: MVAR models, stability, simulation and single-link isolation
//! - [`estimate`]: least-squares fitting
//! - [`spectral`]: `A(w)`, transfer matrix, spectral density and its inverse,
//!   Welch cross-periodograms
//! - [`measures`]: coherence, partial coherence, isolated effective coherence
//!   (iCoh), noise contribution ratio (NCR), constrained NCR, PDC and gPDC
//! - [`toys`]: two five-node reference systems and a reproduction report

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod measures;
pub mod model;
pub mod spectral;
pub mod toys;

pub use error::{Error, Result};
pub use estimate::{fit_least_squares, fit_least_squares_detailed, LeastSquaresFit};
pub use measures::{ConnectivityMap, DiagonalConvention, MeasureId, Peak, PeakReport};
pub use model::{ArModel, TimeSeriesData};
pub use spectral::{CrossSpectrum, FrequencyGrid, PeriodogramParams, SpectralTransform, Window};
pub use toys::{ExampleId, ReproductionReport};
