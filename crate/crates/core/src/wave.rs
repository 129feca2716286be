//! Synthetic wave fields observed on a sensor grid: noisy plane waves with
//! jittered direction, and elliptical (possibly diverging) waves.

use std::f64::consts::{FRAC_PI_4, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::sample_raw;
use crate::error::{Error, Result};
use crate::signal::TimeSeriesPanel;

/// Weight of the first rotated coordinate in the elliptical phase.
pub const ELLIPSE_A: f64 = 0.09;
/// Weight of the second rotated coordinate in the elliptical phase.
pub const ELLIPSE_B: f64 = 225.0;

/// Noise standard deviation giving 0 dB SNR against a unit cosine.
pub const ZERO_DB_NOISE_SD: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Evenly spaced sensors; index `r * cols + c` sits at
/// `(extent_x · c/(cols-1), extent_y · r/(rows-1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorGrid {
    pub rows: usize,
    pub cols: usize,
    pub extent_x: f64,
    pub extent_y: f64,
}

impl SensorGrid {
    pub fn new(rows: usize, cols: usize, extent_x: f64, extent_y: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("grid needs at least one row and column".into()));
        }
        if !(extent_x >= 0.0 && extent_y >= 0.0 && extent_x.is_finite() && extent_y.is_finite()) {
            return Err(Error::InvalidParameter("grid extent must be finite and non-negative".into()));
        }
        Ok(Self { rows, cols, extent_x, extent_y })
    }

    /// Unit spacing between neighbouring sensors.
    pub fn unit_spacing(rows: usize, cols: usize) -> Result<Self> {
        Self::with_spacing(rows, cols, 1.0)
    }

    pub fn with_spacing(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        Self::new(rows, cols, spacing * cols.saturating_sub(1) as f64, spacing * rows.saturating_sub(1) as f64)
    }

    /// Sensors spread over the unit square.
    pub fn unit_square(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, 1.0, 1.0)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coordinate(&self, idx: usize) -> (f64, f64) {
        let (r, c) = (idx / self.cols, idx % self.cols);
        let step = |extent: f64, k: usize, n: usize| if n > 1 { extent * k as f64 / (n - 1) as f64 } else { 0.0 };
        (step(self.extent_x, c, self.cols), step(self.extent_y, r, self.rows))
    }

    pub fn coordinates(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|i| self.coordinate(i)).collect()
    }
}

/// Plane wave `φ = Kx x + Ky y - ωt`, `K = (cos(θ_m + ξ), sin(θ_m + ξ))`,
/// `θ_m = 2πm / n_directions`, `ξ ~ VM(0, direction_noise_kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveSpec {
    pub direction: usize,
    pub n_directions: usize,
    pub direction_noise_kappa: f64,
    pub omega: f64,
    pub n_t: usize,
    pub dt: f64,
    pub noise_sd: f64,
}

impl Default for PlaneWaveSpec {
    fn default() -> Self {
        Self {
            direction: 0,
            n_directions: 16,
            direction_noise_kappa: 30.0,
            // ten full periods over the 4 s window
            omega: TAU * 2.5,
            n_t: 200,
            dt: 0.02,
            noise_sd: ZERO_DB_NOISE_SD,
        }
    }
}

impl PlaneWaveSpec {
    pub fn theta(&self) -> f64 {
        TAU * self.direction as f64 / self.n_directions as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n_directions == 0 || self.direction >= self.n_directions {
            return Err(Error::InvalidParameter(format!(
                "direction {} out of range for {} directions",
                self.direction, self.n_directions
            )));
        }
        validate_common(self.n_t, self.dt, self.noise_sd, self.omega)?;
        if !(self.direction_noise_kappa >= 0.0) {
            return Err(Error::InvalidParameter("direction noise concentration must be non-negative".into()));
        }
        Ok(())
    }
}

/// Elliptical wave
/// `φ = K_r √(a·u² + b·v²) - ωt`, with `u = (x-cx)cosθ - (y-cy)sinθ`,
/// `v = (x-cx)sinθ + (y-cy)cosθ`, `a = 0.09`, `b = 225`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticalWaveSpec {
    pub kr_mean: f64,
    pub kr_sd: f64,
    pub rotation_mean: f64,
    pub rotation_kappa: f64,
    pub omega: f64,
    /// class-0 centres: uniform on `[lo, hi]²`
    pub center0: [f64; 2],
    /// class-1 centres: uniform on `[lo, hi]²`
    pub center1: [f64; 2],
    pub n_t: usize,
    pub dt: f64,
    pub noise_sd: f64,
}

impl Default for EllipticalWaveSpec {
    fn default() -> Self {
        Self {
            kr_mean: 1.0,
            kr_sd: 0.1,
            rotation_mean: FRAC_PI_4,
            rotation_kappa: 60.0,
            omega: TAU / 20.0,
            center0: [1.0, 1.5],
            center1: [0.0, 0.75],
            n_t: 4096,
            dt: 1.0,
            noise_sd: ZERO_DB_NOISE_SD,
        }
    }
}

impl EllipticalWaveSpec {
    fn validate(&self) -> Result<()> {
        validate_common(self.n_t, self.dt, self.noise_sd, self.omega)?;
        if !(self.kr_sd >= 0.0 && self.rotation_kappa >= 0.0) {
            return Err(Error::InvalidParameter("spreads must be non-negative".into()));
        }
        for [lo, hi] in [self.center0, self.center1] {
            if !(lo <= hi) {
                return Err(Error::InvalidParameter(format!("bad centre range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

fn validate_common(n_t: usize, dt: f64, noise_sd: f64, omega: f64) -> Result<()> {
    if n_t < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 time samples, got {n_t}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite() && omega.is_finite()) {
        return Err(Error::InvalidParameter("noise sd must be non-negative and omega finite".into()));
    }
    Ok(())
}

/// Parameters actually drawn for one panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WaveParams {
    Plane { direction: usize, theta: f64, xi: f64, kx: f64, ky: f64, omega: f64 },
    Elliptical { class: usize, kr: f64, rotation: f64, center: [f64; 2], omega: f64 },
}

/// A generated panel with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePanel {
    pub panel: TimeSeriesPanel,
    /// time-independent part of the phase at every sensor
    pub spatial_phase: Vec<f64>,
    pub omega: f64,
    pub params: WaveParams,
}

impl WavePanel {
    /// True phase of sensor `i` at time index `t`, unwrapped.
    pub fn true_phase(&self, i: usize, t: usize) -> f64 {
        self.spatial_phase[i] - self.omega * t as f64 * self.panel.dt()
    }

    /// True phase difference `φ_j - φ_i`; constant in time.
    pub fn true_difference(&self, i: usize, j: usize) -> f64 {
        self.spatial_phase[j] - self.spatial_phase[i]
    }

    /// The difference an analytic-signal estimate converges to. The carrier
    /// `cos(s - ωt)` has analytic phase `ωt - s`, so the sign flips.
    pub fn analytic_difference(&self, i: usize, j: usize) -> f64 {
        -self.true_difference(i, j)
    }
}

fn render<R: Rng + ?Sized>(
    spatial: &[f64],
    omega: f64,
    n_t: usize,
    dt: f64,
    noise_sd: f64,
    rng: &mut R,
) -> Result<TimeSeriesPanel> {
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut values = Vec::with_capacity(n_t * spatial.len());
    for t in 0..n_t {
        let wt = omega * t as f64 * dt;
        for &s in spatial {
            let clean = (s - wt).cos();
            values.push(if noise_sd > 0.0 { clean + noise.sample(rng) } else { clean });
        }
    }
    TimeSeriesPanel::new(spatial.len(), dt, values)
}

/// Plane-wave panel with direction jitter drawn from the spec.
pub fn gen_plane_wave<R: Rng + ?Sized>(spec: &PlaneWaveSpec, grid: &SensorGrid, rng: &mut R) -> Result<WavePanel> {
    spec.validate()?;
    let xi = sample_raw(0.0, spec.direction_noise_kappa, rng);
    plane_wave_inner(spec, grid, xi, rng)
}

/// Plane-wave panel with the direction jitter fixed to `xi`.
pub fn gen_plane_wave_with_jitter<R: Rng + ?Sized>(
    spec: &PlaneWaveSpec,
    grid: &SensorGrid,
    xi: f64,
    rng: &mut R,
) -> Result<WavePanel> {
    spec.validate()?;
    plane_wave_inner(spec, grid, xi, rng)
}

fn plane_wave_inner<R: Rng + ?Sized>(spec: &PlaneWaveSpec, grid: &SensorGrid, xi: f64, rng: &mut R) -> Result<WavePanel> {
    let theta = spec.theta();
    let (kx, ky) = ((theta + xi).cos(), (theta + xi).sin());
    let spatial: Vec<f64> = grid.coordinates().iter().map(|&(x, y)| kx * x + ky * y).collect();
    let panel = render(&spatial, spec.omega, spec.n_t, spec.dt, spec.noise_sd, rng)?;
    Ok(WavePanel {
        panel,
        spatial_phase: spatial,
        omega: spec.omega,
        params: WaveParams::Plane { direction: spec.direction, theta, xi, kx, ky, omega: spec.omega },
    })
}

/// Spatial part of the elliptical phase at `(x, y)`.
pub fn elliptical_spatial_phase(kr: f64, rotation: f64, center: [f64; 2], x: f64, y: f64) -> f64 {
    let (dx, dy) = (x - center[0], y - center[1]);
    let (c, s) = (rotation.cos(), rotation.sin());
    let u = dx * c - dy * s;
    let v = dx * s + dy * c;
    kr * (ELLIPSE_A * u * u + ELLIPSE_B * v * v).sqrt()
}

/// Elliptical-wave panel of class 0 (centre off the grid) or class 1
/// (centre on the grid, a diverging wave).
pub fn gen_elliptical_wave<R: Rng + ?Sized>(
    spec: &EllipticalWaveSpec,
    grid: &SensorGrid,
    class: usize,
    rng: &mut R,
) -> Result<WavePanel> {
    spec.validate()?;
    let [lo, hi] = match class {
        0 => spec.center0,
        1 => spec.center1,
        _ => return Err(Error::InvalidParameter(format!("elliptical class must be 0 or 1, got {class}"))),
    };
    let kr = Normal::new(spec.kr_mean, spec.kr_sd)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(rng);
    let rotation = sample_raw(spec.rotation_mean, spec.rotation_kappa, rng);
    let center = [rng.random_range(lo..=hi), rng.random_range(lo..=hi)];
    elliptical_inner(spec, grid, class, kr, rotation, center, rng)
}

/// Elliptical-wave panel with all shape parameters given.
pub fn gen_elliptical_wave_with<R: Rng + ?Sized>(
    spec: &EllipticalWaveSpec,
    grid: &SensorGrid,
    class: usize,
    kr: f64,
    rotation: f64,
    center: [f64; 2],
    rng: &mut R,
) -> Result<WavePanel> {
    spec.validate()?;
    elliptical_inner(spec, grid, class, kr, rotation, center, rng)
}

fn elliptical_inner<R: Rng + ?Sized>(
    spec: &EllipticalWaveSpec,
    grid: &SensorGrid,
    class: usize,
    kr: f64,
    rotation: f64,
    center: [f64; 2],
    rng: &mut R,
) -> Result<WavePanel> {
    let spatial: Vec<f64> = grid
        .coordinates()
        .iter()
        .map(|&(x, y)| elliptical_spatial_phase(kr, rotation, center, x, y))
        .collect();
    let panel = render(&spatial, spec.omega, spec.n_t, spec.dt, spec.noise_sd, rng)?;
    Ok(WavePanel {
        panel,
        spatial_phase: spatial,
        omega: spec.omega,
        params: WaveParams::Elliptical { class, kr, rotation, center, omega: spec.omega },
    })
}

/// What a corpus contains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CorpusSpec {
    /// one class per direction; `spec.direction` is ignored
    Plane { spec: PlaneWaveSpec },
    /// classes 0 (off-grid centre) and 1 (on-grid centre)
    Elliptical { spec: EllipticalWaveSpec },
}

impl CorpusSpec {
    pub fn n_classes(&self) -> usize {
        match self {
            CorpusSpec::Plane { spec } => spec.n_directions,
            CorpusSpec::Elliptical { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPanel {
    pub label: usize,
    pub wave: WavePanel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPanelSet {
    pub n_classes: usize,
    pub panels: Vec<LabeledPanel>,
}

impl LabeledPanelSet {
    pub fn labels(&self) -> Vec<usize> {
        self.panels.iter().map(|p| p.label).collect()
    }
}

/// Random stream for panel `index` of a corpus with seed `seed`.
pub fn panel_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `n_per_class` panels per class, class-major order. Panel `k` draws
/// from its own stream, so the corpus does not depend on thread count.
pub fn gen_corpus(n_per_class: usize, spec: &CorpusSpec, grid: &SensorGrid, seed: u64) -> Result<LabeledPanelSet> {
    if n_per_class == 0 {
        return Err(Error::InvalidParameter("need at least one panel per class".into()));
    }
    let n_classes = spec.n_classes();
    let panels = (0..n_classes * n_per_class)
        .into_par_iter()
        .map(|k| {
            let label = k / n_per_class;
            let mut rng = panel_rng(seed, k as u64);
            let wave = match spec {
                CorpusSpec::Plane { spec } => {
                    gen_plane_wave(&PlaneWaveSpec { direction: label, ..*spec }, grid, &mut rng)?
                }
                CorpusSpec::Elliptical { spec } => gen_elliptical_wave(spec, grid, label, &mut rng)?,
            };
            Ok(LabeledPanel { label, wave })
        })
        .collect::<Result<_>>()?;
    Ok(LabeledPanelSet { n_classes, panels })
}

/// Stratified split: within each class a seeded shuffle sends
/// `round(train_fraction · count)` items to training. Both index lists are
/// returned sorted.
pub fn stratified_split(labels: &[usize], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    use rand::seq::SliceRandom;
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidParameter(format!("train fraction must lie in [0, 1], got {train_fraction}")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&k| labels[k] == c).collect();
        idx.shuffle(&mut rng);
        let cut = (train_fraction * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..cut]);
        test.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// `10 log10(P_signal / P_noise)` from a clean and a noisy series.
pub fn snr_db(clean: &[f64], noisy: &[f64]) -> f64 {
    let ps: f64 = clean.iter().map(|v| v * v).sum();
    let pn: f64 = clean.iter().zip(noisy).map(|(c, n)| (n - c).powi(2)).sum();
    10.0 * (ps / pn).log10()
}
