//! Circular primitives: angle wrapping, the univariate von Mises
//! distribution, and the closed-form mutual information of a coupled pair.

mod bessel;

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bessel::{
    bessel_i0, bessel_i0e, bessel_i1, bessel_i1e, bessel_ratio, log_bessel_i0, log_bessel_i1,
};
pub(crate) use bessel::ln_i0;

/// Concentration reported when the data have (numerically) zero dispersion.
pub const KAPPA_CAP: f64 = 1e6;

/// Mean resultant length at or above which the fit is declared degenerate.
pub const DEGENERATE_RESULTANT: f64 = 1.0 - 1e-12;

/// `ln(2π)`.
pub const LN_TAU: f64 = 1.837_877_066_409_345_5;

/// Wrap a finite real into `[-π, π)` without validation.
///
/// Values already inside the interval are returned untouched, which makes
/// the map idempotent bit-for-bit.
#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        return x;
    }
    let r = (x + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        -PI
    } else {
        r
    }
}

/// Wrap `x` radians into `[-π, π)`.
pub fn wrap(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(Angle(wrap_angle(x)))
}

/// An angle in `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Wraps the argument; fails on non-finite input.
    pub fn new(radians: f64) -> Result<Self> {
        wrap(radians)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;
    fn try_from(x: f64) -> Result<Self> {
        wrap(x)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

/// Location and concentration of a von Mises distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesParams {
    pub mu: Angle,
    pub kappa: f64,
}

impl VonMisesParams {
    pub fn new(mu: f64, kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::NonFinite(kappa));
        }
        if kappa < 0.0 {
            return Err(Error::NegativeArgument(kappa));
        }
        Ok(Self { mu: wrap(mu)?, kappa })
    }

    pub fn uniform() -> Self {
        Self { mu: Angle::ZERO, kappa: 0.0 }
    }
}

/// `ln f(y)` for the von Mises density `exp(κ cos(y-μ)) / (2π I0(κ))`.
pub fn vm_log_density(y: Angle, p: &VonMisesParams) -> f64 {
    p.kappa * (y.0 - p.mu.0).cos() - LN_TAU - ln_i0(p.kappa)
}

/// Draw one angle from `VM(μ, κ)`.
///
/// Best–Fisher wrapped-Cauchy envelope rejection for `κ > 0`; a uniform
/// draw for `κ = 0`. Past [`KAPPA_CAP`] the distribution is numerically a
/// normal with variance `1/κ`.
pub fn vm_sample<R: Rng + ?Sized>(p: &VonMisesParams, rng: &mut R) -> Angle {
    Angle(sample_raw(p.mu.0, p.kappa, rng))
}

pub(crate) fn sample_raw<R: Rng + ?Sized>(mu: f64, kappa: f64, rng: &mut R) -> f64 {
    if kappa <= 0.0 {
        return rng.random::<f64>() * TAU - PI;
    }
    if kappa >= KAPPA_CAP {
        let z: f64 = StandardNormal.sample(rng);
        return wrap_angle(mu + z / kappa.sqrt());
    }
    // r is the envelope parameter; the small-kappa branch avoids the
    // cancellation in (tau - sqrt(2 tau)).
    let r = if kappa < 1e-5 {
        1.0 / kappa + kappa
    } else {
        let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
        let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
        (1.0 + rho * rho) / (2.0 * rho)
    };
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random();
            let t = f.clamp(-1.0, 1.0).acos();
            let theta = if u3 < 0.5 { mu - t } else { mu + t };
            return wrap_angle(theta);
        }
    }
}

/// Result of a von Mises maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesFit {
    pub params: VonMisesParams,
    /// Mean resultant length of the sample.
    pub resultant: f64,
    /// Set when the sample has no measurable dispersion and `κ` was capped.
    pub degenerate: bool,
}

/// Maximum-likelihood fit of a von Mises distribution.
pub fn vm_mle(samples: &[Angle]) -> Result<VonMisesFit> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "von Mises fit needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let (s, c) = samples
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.0.sin(), c + a.0.cos()));
    Ok(vm_mle_from_sums(samples.len(), c, s))
}

/// Same as [`vm_mle`] but from `n`, `Σ cos y` and `Σ sin y`.
pub fn vm_mle_from_sums(n: usize, sum_cos: f64, sum_sin: f64) -> VonMisesFit {
    let resultant = (sum_cos.hypot(sum_sin) / n as f64).min(1.0);
    let mu = if resultant > 0.0 {
        Angle(wrap_angle(sum_sin.atan2(sum_cos)))
    } else {
        Angle::ZERO
    };
    if resultant >= DEGENERATE_RESULTANT {
        return VonMisesFit {
            params: VonMisesParams { mu, kappa: KAPPA_CAP },
            resultant,
            degenerate: true,
        };
    }
    VonMisesFit {
        params: VonMisesParams { mu, kappa: invert_bessel_ratio(resultant) },
        resultant,
        degenerate: false,
    }
}

/// Rational approximation to the inverse of `I1/I0`.
fn ratio_inverse_guess(r: f64) -> f64 {
    if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        1.0 / (r.powi(3) - 4.0 * r * r + 3.0 * r)
    }
}

/// Solve `I1(κ)/I0(κ) = r` for `κ` by bracketed Newton iteration.
pub fn invert_bessel_ratio(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if r >= DEGENERATE_RESULTANT {
        return KAPPA_CAP;
    }
    let mut kappa = ratio_inverse_guess(r).max(1e-300);
    let (mut lo, mut hi) = (0.0f64, kappa);
    while bessel_ratio(hi) < r {
        lo = hi;
        hi *= 2.0;
        if hi > KAPPA_CAP {
            return KAPPA_CAP;
        }
    }
    kappa = kappa.clamp(lo, hi);
    for _ in 0..200 {
        let a = bessel_ratio(kappa);
        let f = a - r;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = kappa;
        } else {
            hi = kappa;
        }
        let slope = 1.0 - a / kappa - a * a;
        let mut next = kappa - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - kappa).abs();
        kappa = next;
        if step <= 1e-14 * kappa && f.abs() < 1e-10 {
            break;
        }
    }
    kappa
}

/// Mutual information (nats) between two nodes of a two-node model with
/// coupling `κ`: `κ I1(κ)/I0(κ) - ln I0(κ)`.
pub fn mi_from_kappa(kappa: f64) -> f64 {
    if kappa <= 0.0 {
        return 0.0;
    }
    if kappa < 1e-4 {
        // series; avoids cancellation between the two terms
        let k2 = kappa * kappa;
        return k2 / 4.0 - 3.0 * k2 * k2 / 64.0;
    }
    (kappa * bessel_ratio(kappa) - ln_i0(kappa)).max(0.0)
}

/// Circular mean direction of a set of angles.
pub fn circular_mean(angles: impl IntoIterator<Item = f64>) -> f64 {
    let (s, c) = angles
        .into_iter()
        .fold((0.0, 0.0), |(s, c), a: f64| (s + a.sin(), c + a.cos()));
    s.atan2(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_one_sample;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wrap_conventions() {
        assert_eq!(wrap(PI).unwrap().value(), -PI);
        assert_eq!(wrap(0.0).unwrap().value(), 0.0);
        assert_eq!(wrap(3.0 * PI).unwrap().value(), -PI);
        assert_eq!(wrap(-PI).unwrap().value(), -PI);
        assert!((wrap(TAU + 0.5).unwrap().value() - 0.5).abs() < 1e-15);
        assert!(wrap(f64::NAN).is_err());
        assert!(wrap(f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent_and_in_range(x in -1e6f64..1e6) {
            let w = wrap_angle(x);
            prop_assert!((-PI..PI).contains(&w));
            prop_assert_eq!(wrap_angle(w), w);
            // congruent mod 2π
            let k = ((x - w) / TAU).round();
            prop_assert!((x - w - k * TAU).abs() < 1e-9 * x.abs().max(1.0));
        }

        #[test]
        fn wrap_ignores_full_turns(x in -10.0f64..10.0, k in -50i32..50) {
            let a = wrap_angle(x);
            let b = wrap_angle(x + k as f64 * TAU);
            let d = wrap_angle(a - b).abs();
            prop_assert!(d < 1e-12 || (TAU - d) < 1e-12);
        }
    }

    #[test]
    fn density_values() {
        let u = VonMisesParams::new(0.3, 0.0).unwrap();
        assert!((vm_log_density(Angle(0.3), &u) + LN_TAU).abs() < 1e-15);
        let p = VonMisesParams::new(0.3, 2.0).unwrap();
        let want = 2.0 - LN_TAU - bessel_i0(2.0).unwrap().ln();
        assert!((vm_log_density(Angle(0.3), &p) - want).abs() < 1e-14);
    }

    #[test]
    fn density_integrates_to_one() {
        // trapezoid rule is spectrally accurate for periodic integrands
        let m = 20_000;
        for kappa in [0.5, 1.0, 5.0] {
            let p = VonMisesParams::new(0.7, kappa).unwrap();
            let h = TAU / m as f64;
            let total: f64 = (0..m)
                .map(|i| vm_log_density(Angle(wrap_angle(-PI + i as f64 * h)), &p).exp() * h)
                .sum();
            assert!((total - 1.0).abs() < 1e-8, "kappa {kappa}: {total}");
        }
    }

    #[test]
    fn log_density_finite_for_large_kappa() {
        for kappa in [100.0, 500.0, 1e4] {
            let p = VonMisesParams::new(0.0, kappa).unwrap();
            assert!(vm_log_density(Angle(1.0), &p).is_finite());
            assert!(vm_log_density(Angle(0.0), &p).is_finite());
        }
    }

    #[test]
    fn uniform_sampler_passes_ks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = VonMisesParams::uniform();
        let xs: Vec<f64> = (0..100_000).map(|_| vm_sample(&p, &mut rng).value()).collect();
        let test = ks_one_sample(&xs, |x| (x + PI) / TAU);
        assert!(test.p_value > 0.01, "{test:?}");
    }

    #[test]
    fn sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = VonMisesParams::new(1.0, 4.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| vm_sample(&p, &mut rng).value()).collect();
        let m = circular_mean(xs.iter().copied());
        assert!((m - 1.0).abs() < 0.05);
        let ecos = xs.iter().map(|x| (x - 1.0).cos()).sum::<f64>() / xs.len() as f64;
        let want = bessel_i1(4.0).unwrap() / bessel_i0(4.0).unwrap();
        assert!((ecos - want).abs() < 0.01);
    }

    #[test]
    fn sampler_tiny_and_huge_kappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tiny = VonMisesParams::new(0.0, 1e-7).unwrap();
        let huge = VonMisesParams::new(2.0, 2e6).unwrap();
        for _ in 0..1000 {
            assert!((-PI..PI).contains(&vm_sample(&tiny, &mut rng).value()));
            assert!((vm_sample(&huge, &mut rng).value() - 2.0).abs() < 0.01);
        }
    }

    #[test]
    fn mle_degenerate_sample() {
        let xs = vec![Angle(0.4); 50];
        let fit = vm_mle(&xs).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.params.kappa, KAPPA_CAP);
        assert!((fit.params.mu.value() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn mle_recovers_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = VonMisesParams::new(0.5, 3.0).unwrap();
        let xs: Vec<Angle> = (0..100_000).map(|_| vm_sample(&p, &mut rng)).collect();
        let fit = vm_mle(&xs).unwrap();
        assert!(!fit.degenerate);
        assert!((2.9..=3.1).contains(&fit.params.kappa), "{fit:?}");
        assert!((fit.params.mu.value() - 0.5).abs() < 0.02);
    }

    #[test]
    fn mle_on_uniform_sample_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = VonMisesParams::uniform();
        let xs: Vec<Angle> = (0..100_000).map(|_| vm_sample(&p, &mut rng)).collect();
        assert!(vm_mle(&xs).unwrap().params.kappa < 0.05);
    }

    #[test]
    fn mle_needs_two_samples() {
        assert!(vm_mle(&[Angle(0.1)]).is_err());
    }

    #[test]
    fn ratio_inversion_residual() {
        for i in 1..1000 {
            let r = i as f64 / 1000.0 * 0.999_999;
            let k = invert_bessel_ratio(r);
            assert!((bessel_ratio(k) - r).abs() < 1e-10, "r={r} k={k}");
        }
        for r in [1e-9, 0.999_9, 0.999_99] {
            let k = invert_bessel_ratio(r);
            assert!((bessel_ratio(k) - r).abs() < 1e-10, "r={r} k={k}");
        }
        // the root lies beyond the cap
        assert_eq!(invert_bessel_ratio(0.999_999_9), KAPPA_CAP);
    }

    /// Numerical KL divergence between VM(0, κ) and the uniform law.
    fn kl_quadrature(kappa: f64, m: usize) -> f64 {
        let p = VonMisesParams::new(0.0, kappa).unwrap();
        let h = TAU / m as f64;
        (0..m)
            .map(|i| {
                let y = Angle(-PI + i as f64 * h);
                let lf = vm_log_density(y, &p);
                lf.exp() * (lf + LN_TAU) * h
            })
            .sum()
    }

    #[test]
    fn mi_matches_kl_quadrature() {
        for kappa in [1.0, 5.0] {
            assert!((mi_from_kappa(kappa) - kl_quadrature(kappa, 10_000)).abs() < 1e-6);
        }
        assert_eq!(mi_from_kappa(0.0), 0.0);
    }

    #[test]
    fn mi_monotone_and_positive() {
        let mut prev = 0.0;
        for i in 1..=100 {
            let k = i as f64 * 0.2;
            let mi = mi_from_kappa(k);
            assert!(mi > prev, "kappa {k}");
            prev = mi;
        }
        assert!(mi_from_kappa(1e-6) > 0.0);
        assert!(mi_from_kappa(5e-5) < mi_from_kappa(2e-4));
    }
}
