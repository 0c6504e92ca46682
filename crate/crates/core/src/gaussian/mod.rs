//! Standard normal special functions and truncated-normal moments.
//!
//! `φ(±∞) = 0` and `Φ(-∞) = 0`, `Φ(+∞) = 1`, so threshold vectors can carry
//! the implicit outer cut points `-∞` and `+∞` without special casing at the
//! call site. Products of the form `a·φ(a)` are defined as 0 at `a = ±∞`.

mod bivariate;

pub use bivariate::{bivariate_cdf, cell_prob};

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// 1 / sqrt(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Interval probabilities below this are treated as empty.
pub const MIN_MASS: f64 = 1e-300;

/// A half-open interval `(lo, hi]` on the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub const FULL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Probability mass of the interval under the standard normal.
    pub fn mass(&self) -> f64 {
        interval_mass(self.lo, self.hi)
    }
}

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `x·φ(x)`, taken as 0 at `±∞`.
#[inline]
pub fn x_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        x * pdf(x)
    }
}

/// Standard normal distribution function.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `Φ(hi) - Φ(lo)`, evaluated in whichever tail avoids cancellation.
#[inline]
pub fn interval_mass(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        cdf(-lo) - cdf(-hi)
    } else {
        cdf(hi) - cdf(lo)
    }
}

/// Inverse of the standard normal distribution function.
///
/// Boundary probabilities are rejected; callers that need `a_0 = -∞` and
/// `a_s = +∞` add those cut points themselves.
pub fn quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityDomain(p));
    }
    Ok(inverse_cdf(p))
}

// Rational approximation (relative error about 1.2e-9) on the lower half,
// followed by one Newton step against `cdf`. The upper half reflects through
// 1 - p, which is exact for p >= 0.5.
pub(crate) fn inverse_cdf(p: f64) -> f64 {
    if p > 0.5 {
        return -lower_inverse_cdf(1.0 - p);
    }
    lower_inverse_cdf(p)
}

#[allow(clippy::excessive_precision)]
fn lower_inverse_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p == 0.5 {
        return 0.0;
    }
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let density = pdf(x);
    if density > 0.0 {
        x - (cdf(x) - p) / density
    } else {
        x
    }
}

/// Mean of the standard normal truncated to `(lo, hi]`:
/// `(φ(lo) - φ(hi)) / (Φ(hi) - Φ(lo))`.
pub fn truncated_mean(iv: Interval) -> Result<f64> {
    truncated_mean_bounds(iv.lo, iv.hi)
}

pub(crate) fn truncated_mean_bounds(lo: f64, hi: f64) -> Result<f64> {
    let mass = interval_mass(lo, hi);
    if !(mass >= MIN_MASS) {
        return Err(Error::DegenerateCell { lo, hi });
    }
    Ok((pdf(lo) - pdf(hi)) / mass)
}

/// Normal density and both tail probabilities at one cut point, from a single
/// `erfc` call. Adjacent cells share these, so a row of `r` cells needs `r + 1`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tails {
    pdf: f64,
    lower: f64,
    upper: f64,
}

impl Tails {
    #[inline]
    pub(crate) fn at(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            return Self {
                pdf: 0.0,
                lower: 0.0,
                upper: 1.0,
            };
        }
        if x == f64::INFINITY {
            return Self {
                pdf: 0.0,
                lower: 1.0,
                upper: 0.0,
            };
        }
        let small = 0.5 * libm::erfc(x.abs() * FRAC_1_SQRT_2);
        let (lower, upper) = if x < 0.0 {
            (small, 1.0 - small)
        } else {
            (1.0 - small, small)
        };
        Self {
            pdf: pdf(x),
            lower,
            upper,
        }
    }
}

/// Truncated mean over `(lo, hi]` from precomputed tails; `lo_positive`
/// selects the upper-tail difference as in [`interval_mass`].
#[inline]
pub(crate) fn truncated_mean_tails(lo: &Tails, hi: &Tails, lo_positive: bool) -> Option<f64> {
    let mass = if lo_positive {
        lo.upper - hi.upper
    } else {
        hi.lower - lo.lower
    };
    (mass >= MIN_MASS).then(|| (lo.pdf - hi.pdf) / mass)
}

/// Standardized cut point of `Z₂ | Z₁ = z`: `(t - ρ z) / sqrt(1 - ρ²)`.
pub fn residual_threshold(t: f64, z: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::CorrelationDomain(rho));
    }
    Ok((t - rho * z) / (1.0 - rho * rho).sqrt())
}
