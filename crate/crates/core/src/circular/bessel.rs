//! Modified Bessel functions of the first kind, orders zero and one.
//!
//! Small arguments use the ascending power series, whose terms are all
//! positive so there is no cancellation. Large arguments use the
//! exponentially scaled Hankel asymptotic expansion, truncated at its
//! smallest term. The crossover sits where the truncated asymptotic series
//! is already below 1e-15 relative error.

use crate::error::{Error, Result};

/// Crossover between the power series and the asymptotic expansion.
const SERIES_LIMIT: f64 = 17.0;

/// Largest argument for which `I0`/`I1` are representable as `f64`.
const OVERFLOW_LIMIT: f64 = 713.0;

const MAX_TERMS: usize = 500;

fn series_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term < sum * f64::EPSILON * 0.25 {
            break;
        }
    }
    sum
}

fn series_i1(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        sum += term;
        if term < sum * f64::EPSILON * 0.25 {
            break;
        }
    }
    sum
}

/// `exp(-x) I_nu(x)` for large `x` via the Hankel expansion.
fn asymptotic_scaled(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < sum.abs() * f64::EPSILON * 0.25 {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// Exponentially scaled `exp(-|x|) I0(x)`. Defined for all real `x`.
pub fn bessel_i0e(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_LIMIT {
        series_i0(ax) * (-ax).exp()
    } else {
        asymptotic_scaled(0.0, ax)
    }
}

/// Exponentially scaled `exp(-|x|) I1(x)`. Odd in `x`.
pub fn bessel_i1e(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_LIMIT {
        series_i1(ax) * (-ax).exp()
    } else {
        asymptotic_scaled(1.0, ax)
    };
    v.copysign(x)
}

/// Ratio `I1(x) / I0(x)` for `x >= 0`, the mean resultant length of a von
/// Mises distribution with concentration `x`.
pub fn bessel_ratio(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x <= SERIES_LIMIT {
        series_i1(x) / series_i0(x)
    } else {
        asymptotic_scaled(1.0, x) / asymptotic_scaled(0.0, x)
    }
}

fn check_arg(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    if x < 0.0 {
        return Err(Error::NegativeArgument(x));
    }
    Ok(())
}

/// Modified Bessel function `I0(x)` for `x >= 0`.
///
/// Relative error is at the level of a few ulps over `[0, 700]`. Arguments
/// past ~713 overflow; use [`log_bessel_i0`] there.
pub fn bessel_i0(x: f64) -> Result<f64> {
    check_arg(x)?;
    if x > OVERFLOW_LIMIT {
        return Err(Error::Overflow(x));
    }
    if x <= SERIES_LIMIT {
        Ok(series_i0(x))
    } else {
        // split the exponential so the intermediate never overflows early
        let half = (0.5 * x).exp();
        Ok(asymptotic_scaled(0.0, x) * half * half)
    }
}

/// Modified Bessel function `I1(x)` for `x >= 0`.
pub fn bessel_i1(x: f64) -> Result<f64> {
    check_arg(x)?;
    if x > OVERFLOW_LIMIT {
        return Err(Error::Overflow(x));
    }
    if x <= SERIES_LIMIT {
        Ok(series_i1(x))
    } else {
        let half = (0.5 * x).exp();
        Ok(asymptotic_scaled(1.0, x) * half * half)
    }
}

/// `ln I0(x)` for `x >= 0`, finite for every finite argument.
pub fn log_bessel_i0(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(ln_i0(x))
}

/// `ln I1(x)` for `x >= 0`. Returns `-inf` at zero.
pub fn log_bessel_i1(x: f64) -> Result<f64> {
    check_arg(x)?;
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x <= SERIES_LIMIT {
        Ok(series_i1(x).ln())
    } else {
        Ok(x + asymptotic_scaled(1.0, x).ln())
    }
}

/// Unchecked `ln I0(|x|)` used on hot paths where the argument is a
/// validated concentration.
pub(crate) fn ln_i0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_LIMIT {
        series_i0(ax).ln()
    } else {
        ax + asymptotic_scaled(0.0, ax).ln()
    }
}
