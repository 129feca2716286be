//! From raw oscillatory measurements to phases: optional zero-phase
//! bandpass, analytic signal, angle.

mod analytic;
mod butterworth;

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::wrap_angle;
use crate::dataset::{read_matrix_csv, write_matrix_csv, PhaseDataset};
use crate::error::{Error, Result};

pub use analytic::analytic_signal;
pub use butterworth::{design_bandpass, BandpassSpec, Biquad, SosFilter};

/// Fraction of samples dropped at each end unless edges are kept.
pub const EDGE_FRACTION: f64 = 0.05;

/// `n_t` time samples of `p` real channels, row-major (one row per time).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    n_t: usize,
    p: usize,
    dt: f64,
    values: Vec<f64>,
}

impl TimeSeriesPanel {
    pub fn new(p: usize, dt: f64, values: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("panel needs at least one channel".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if values.len() % p != 0 {
            return Err(Error::Dimension { expected: p, got: values.len() % p });
        }
        if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(v));
        }
        Ok(Self { n_t: values.len() / p, p, dt, values })
    }

    /// Build from per-channel series of equal length.
    pub fn from_channels(dt: f64, channels: &[Vec<f64>]) -> Result<Self> {
        let n_t = channels.first().map_or(0, Vec::len);
        if let Some(c) = channels.iter().find(|c| c.len() != n_t) {
            return Err(Error::Dimension { expected: n_t, got: c.len() });
        }
        let values = (0..n_t).flat_map(|t| channels.iter().map(move |c| c[t])).collect();
        Self::new(channels.len(), dt, values)
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.values.iter().skip(i).step_by(self.p).copied().collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_matrix_csv(w, self.p, &self.values)
    }

    pub fn read_csv<R: Read>(r: R, dt: f64) -> Result<Self> {
        let (p, values) = read_matrix_csv(r)?;
        Self::new(p, dt, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>, dt: f64) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, dt)
    }
}

/// Passband for the phase pipeline; the sampling rate comes from the panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseOptions {
    /// filter before the analytic signal; `None` skips filtering
    pub band: Option<Band>,
    /// keep the first and last [`EDGE_FRACTION`] of samples
    pub keep_edges: bool,
}

/// Range of time indices kept by the pipeline.
pub fn kept_range(n_t: usize, keep_edges: bool) -> std::ops::Range<usize> {
    if keep_edges {
        0..n_t
    } else {
        let trim = (EDGE_FRACTION * n_t as f64).floor() as usize;
        trim..n_t - trim
    }
}

/// Instantaneous phase of every channel; rows of the result are time points.
pub fn instantaneous_phase(panel: &TimeSeriesPanel, opts: &PhaseOptions) -> Result<PhaseDataset> {
    let filter = match opts.band {
        Some(b) => Some(design_bandpass(&BandpassSpec::new(b.order, b.low, b.high, 1.0 / panel.dt)?)?),
        None => None,
    };
    let phases: Vec<Vec<f64>> = (0..panel.p)
        .into_par_iter()
        .map(|i| {
            let raw = panel.channel(i);
            let x = match &filter {
                Some(f) => f.filtfilt(&raw)?,
                None => raw,
            };
            Ok(analytic_signal(&x)?.iter().map(|c| wrap_angle(c.arg())).collect())
        })
        .collect::<Result<_>>()?;
    let range = kept_range(panel.n_t, opts.keep_edges);
    if range.is_empty() {
        return Err(Error::InsufficientData("no samples left after edge trimming".into()));
    }
    let values = range.flat_map(|t| phases.iter().map(move |c| c[t])).collect();
    PhaseDataset::from_rows_wrapped(panel.p, values)
}
