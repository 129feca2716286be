//! Analytic signal by spectral suppression of negative frequencies.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// `x + i·H[x]` for a real series.
///
/// The spectrum is doubled at positive frequencies and zeroed at negative
/// ones; the DC bin and, for even lengths, the Nyquist bin keep unit gain.
pub fn analytic_signal(x: &[f64]) -> Result<Vec<Complex64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("analytic signal needs at least 2 samples, got {n}")));
    }
    if let Some(&v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(v));
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let positive_end = n.div_ceil(2);
    for c in &mut buf[1..positive_end] {
        *c *= 2.0;
    }
    for c in &mut buf[n / 2 + 1..] {
        *c = Complex64::new(0.0, 0.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    Ok(buf)
}
