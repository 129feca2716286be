//! Butterworth bandpass design as a cascade of biquads, and zero-phase
//! forward–backward filtering.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bandpass request. `order` is the order of the bandpass filter itself,
/// i.e. twice the order of the lowpass prototype.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec {
    pub order: usize,
    pub low: f64,
    pub high: f64,
    pub fs: f64,
}

impl BandpassSpec {
    pub fn new(order: usize, low: f64, high: f64, fs: f64) -> Result<Self> {
        let s = Self { order, low, high, fs };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 || self.order % 2 != 0 {
            return Err(Error::InvalidParameter(format!("bandpass order must be even and >= 2, got {}", self.order)));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::InvalidParameter(format!("sampling rate must be positive, got {}", self.fs)));
        }
        if !(self.low > 0.0 && self.low < self.high && self.high < self.fs / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "band must satisfy 0 < low < high < fs/2, got [{}, {}] at fs = {}",
                self.low, self.high, self.fs
            )));
        }
        Ok(())
    }
}

/// `H(z) = (b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Direct-form II transposed state for a unit step already in progress.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z1 = self.b[2] - self.a[2] * g;
        [self.b[1] - self.a[1] * g + z1, z1]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let y = b0 * *v + z[0];
            z[0] = b1 * *v - a1 * y + z[1];
            z[1] = b2 * *v - a2 * y;
            *v = y;
        }
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub fs: f64,
}

impl SosFilter {
    /// Complex single-pass response at frequency `f` (Hz).
    pub fn response(&self, f: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f / self.fs);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn magnitude_db(&self, f: f64) -> f64 {
        20.0 * self.response(f).norm().log10()
    }

    /// Causal single pass from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y, [0.0, 0.0]);
        }
        y
    }

    /// Single pass starting in the steady state of a constant input `x[0]`.
    fn filter_steady(&self, x: &mut [f64]) {
        let mut level = x.first().copied().unwrap_or(0.0);
        for s in &self.sections {
            let [z0, z1] = s.step_state();
            s.run(x, [z0 * level, z1 * level]);
            level *= s.dc_gain();
        }
    }

    /// Edge padding used by [`SosFilter::filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * 2 * self.sections.len()
    }

    /// Zero-phase filtering: forward pass, reversed pass, reversed back.
    /// The series is extended at both ends by odd reflection about its
    /// end values, and each pass starts from the steady state matching its
    /// first sample.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = self.pad_len();
        if x.len() <= pad {
            return Err(Error::InsufficientData(format!(
                "filtfilt needs more than {pad} samples, got {}",
                x.len()
            )));
        }
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));

        self.filter_steady(&mut ext);
        ext.reverse();
        self.filter_steady(&mut ext);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

/// Digital Butterworth bandpass.
///
/// Analog lowpass prototype of order `order / 2`, lowpass→bandpass
/// transform at prewarped band edges, bilinear transform, then conjugate
/// pole pairs become sections with numerator `1 - z⁻²`. Each section is
/// scaled to unit gain at the digital image of the analog centre frequency,
/// where the whole cascade has unit gain.
pub fn design_bandpass(spec: &BandpassSpec) -> Result<SosFilter> {
    spec.validate()?;
    let n = spec.order / 2;
    // prewarped edges with the bilinear constant 2·fs folded to unit rate
    let warp = |f: f64| (PI * f / spec.fs).tan();
    let (wl, wh) = (warp(spec.low), warp(spec.high));
    let bw = wh - wl;
    let w0 = (wl * wh).sqrt();

    let mut poles = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta) * (bw / 2.0);
        let root = (p * p - w0 * w0).sqrt();
        for s in [p + root, p - root] {
            // bilinear map with s = (1 - z⁻¹)/(1 + z⁻¹) in warped units
            poles.push((1.0 + s) / (1.0 - s));
        }
    }

    let mut upper: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > 1e-12).collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= 1e-12).map(|p| p.re).collect();
    upper.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    real.sort_by(f64::total_cmp);

    let mut sections: Vec<Biquad> = upper
        .iter()
        .map(|p| Biquad { b: [1.0, 0.0, -1.0], a: [1.0, -2.0 * p.re, p.norm_sqr()] })
        .collect();
    for pair in real.chunks(2) {
        let (r1, r2) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [1.0, -(r1 + r2), r1 * r2] });
    }
    if sections.len() != n {
        return Err(Error::InvalidParameter("pole pairing failed for this band".into()));
    }

    let fc = spec.fs * w0.atan() / PI;
    let z_inv = Complex64::from_polar(1.0, -2.0 * PI * fc / spec.fs);
    for s in sections.iter_mut() {
        let g = s.response(z_inv).norm();
        s.b.iter_mut().for_each(|b| *b /= g);
    }
    Ok(SosFilter { sections, fs: spec.fs })
}
