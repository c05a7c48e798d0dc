//! Run configuration: an optional JSON document merged with command-line
//! flags. Every field is optional in the file; flags win over the file and
//! the file wins over built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use icoh::measures::DEFAULT_MIN_PROMINENCE;
use icoh::model::DEFAULT_BURN_IN;
use icoh::toys::{DEFAULT_SEED, FIT_ORDER, N_SAMPLES, SAMPLING_RATE};
use icoh::{ExampleId, FrequencyGrid, MeasureId, PeriodogramParams, Window};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodogramConfig {
    pub segment_len: Option<usize>,
    pub overlap_fraction: Option<f64>,
    pub window: Option<Window>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub example: Option<ExampleId>,
    pub model: Option<PathBuf>,
    pub order: Option<usize>,
    pub n_dft: Option<usize>,
    pub sampling_rate: Option<f64>,
    pub band: Option<(f64, f64)>,
    pub measures: Option<Vec<MeasureId>>,
    pub periodogram: PeriodogramConfig,
    pub seed: Option<u64>,
    pub n_samples: Option<usize>,
    pub burn_in: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub plot: Option<bool>,
    pub diagonalize_noise: Option<bool>,
    pub min_prominence: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: invalid config: {e}", path.display())))
    }

    pub fn order(&self) -> CliResult<usize> {
        let order = self.order.unwrap_or(FIT_ORDER);
        if order == 0 {
            return Err(CliError::Usage("order must be at least 1".into()));
        }
        Ok(order)
    }

    pub fn sampling_rate(&self) -> CliResult<f64> {
        let fs = self.sampling_rate.unwrap_or(SAMPLING_RATE);
        if !(fs.is_finite() && fs > 0.0) {
            return Err(CliError::Usage(format!("sampling rate must be positive, got {fs}")));
        }
        Ok(fs)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn n_samples(&self) -> CliResult<usize> {
        match self.n_samples.unwrap_or(N_SAMPLES) {
            0 => Err(CliError::Usage("number of samples must be at least 1".into())),
            n => Ok(n),
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(DEFAULT_BURN_IN)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn plot(&self) -> bool {
        self.plot.unwrap_or(false)
    }

    pub fn diagonalize_noise(&self) -> bool {
        self.diagonalize_noise.unwrap_or(false)
    }

    pub fn min_prominence(&self) -> f64 {
        self.min_prominence.unwrap_or(DEFAULT_MIN_PROMINENCE)
    }

    /// Requested measures; NCR is left out of the default set because it
    /// needs an explicit decision about correlated innovations.
    pub fn measures(&self) -> Vec<MeasureId> {
        self.measures.clone().unwrap_or_else(|| {
            MeasureId::ALL.into_iter().filter(|m| *m != MeasureId::Ncr).collect()
        })
    }

    pub fn grid(&self) -> CliResult<FrequencyGrid> {
        let fs = self.sampling_rate()?;
        let n_dft = self.n_dft.unwrap_or(256);
        if n_dft < 2 {
            return Err(CliError::Usage("n_dft must be at least 2".into()));
        }
        let (f_min, f_max) = self.band.unwrap_or((1.0, 127.0));
        if !(f_min > 0.0 && f_min <= f_max && f_max < fs / 2.0) {
            return Err(CliError::Usage(format!(
                "band ({f_min}, {f_max}) must satisfy 0 < f_min <= f_max < {}",
                fs / 2.0
            )));
        }
        let grid = FrequencyGrid::band(fs, n_dft, f_min, f_max)?;
        if grid.is_empty() {
            return Err(CliError::Usage(format!("band ({f_min}, {f_max}) contains no DFT bins")));
        }
        Ok(grid)
    }

    pub fn periodogram(&self) -> PeriodogramParams {
        let defaults = PeriodogramParams::default();
        PeriodogramParams {
            segment_len: self.periodogram.segment_len.unwrap_or(defaults.segment_len),
            overlap_fraction: self.periodogram.overlap_fraction.unwrap_or(defaults.overlap_fraction),
            window: self.periodogram.window.unwrap_or(defaults.window),
        }
    }
}

/// Overwrites `slot` when the flag was given.
pub fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

/// Boolean switches can only turn a setting on from the command line.
pub fn set_switch(slot: &mut Option<bool>, flag: bool) {
    if flag {
        *slot = Some(true);
    }
}
