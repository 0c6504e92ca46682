//! Bivariate standard normal distribution function.
//!
//! Uses `∂Φ₂/∂ρ = φ₂(h, k; ρ)`, so
//!
//! ```text
//! Φ₂(h, k; ρ) = Φ(h)Φ(k) + (1/2π) ∫₀^{asin ρ} exp(-(h² + k² - 2hk sinθ) / (2cos²θ)) dθ
//! ```
//!
//! after substituting `r = sin θ`, which removes the `1/sqrt(1-r²)`
//! singularity at `|r| → 1`. The integral is evaluated with adaptive
//! 24-point Gauss–Legendre panels.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{cdf, Interval};
use crate::error::{Error, Result};

const NODES: usize = 24;
const ABS_TOL: f64 = 1e-13;
const MAX_DEPTH: u32 = 24;

/// Largest |ρ| accepted by [`bivariate_cdf`].
pub const MAX_ABS_RHO: f64 = 1.0 - 1e-12;

struct Rule {
    nodes: [f64; NODES],
    weights: [f64; NODES],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut nodes = [0.0; NODES];
        let mut weights = [0.0; NODES];
        let n = NODES as f64;
        for i in 0..NODES / 2 {
            let mut z = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp;
            loop {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 1..=NODES {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
                }
                dp = n * (z * p1 - p2) / (z * z - 1.0);
                let step = p1 / dp;
                z -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[NODES - 1 - i] = z;
            weights[i] = w;
            weights[NODES - 1 - i] = w;
        }
        Rule { nodes, weights }
    })
}

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let rule = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let sum: f64 = rule
        .nodes
        .iter()
        .zip(rule.weights.iter())
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum();
    sum * half
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let left = gauss_legendre(f, a, mid);
    let right = gauss_legendre(f, mid, b);
    let split = left + right;
    if depth == 0 || (split - whole).abs() <= tol {
        return split;
    }
    adaptive(f, a, mid, left, 0.5 * tol, depth - 1) + adaptive(f, mid, b, right, 0.5 * tol, depth - 1)
}

/// `P(Z₁ ≤ h, Z₂ ≤ k)` for standard normals with correlation `rho`.
pub fn bivariate_cdf(h: f64, k: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() <= MAX_ABS_RHO) || h.is_nan() || k.is_nan() {
        return Err(Error::CorrelationDomain(rho));
    }
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if h == f64::INFINITY {
        return Ok(cdf(k));
    }
    if k == f64::INFINITY {
        return Ok(cdf(h));
    }
    let base = cdf(h) * cdf(k);
    if rho == 0.0 {
        return Ok(base);
    }
    let hh = 0.5 * (h * h + k * k);
    let hk = h * k;
    let integrand = |theta: f64| {
        let (sin, cos) = theta.sin_cos();
        ((hk * sin - hh) / (cos * cos)).exp()
    };
    let upper = rho.asin();
    let whole = gauss_legendre(&integrand, 0.0, upper);
    let integral = adaptive(&integrand, 0.0, upper, whole, ABS_TOL, MAX_DEPTH);
    Ok((base + integral / (2.0 * PI)).clamp(0.0, 1.0))
}

/// `P(a_lo < Z₁ ≤ a_hi, b_lo < Z₂ ≤ b_hi)` by inclusion–exclusion.
pub fn cell_prob(ax: Interval, by: Interval, rho: f64) -> Result<f64> {
    let upper = bivariate_cdf(ax.hi(), by.hi(), rho)?;
    let left = bivariate_cdf(ax.lo(), by.hi(), rho)?;
    let below = bivariate_cdf(ax.hi(), by.lo(), rho)?;
    let corner = bivariate_cdf(ax.lo(), by.lo(), rho)?;
    Ok((upper - left - below + corner).clamp(0.0, 1.0))
}
