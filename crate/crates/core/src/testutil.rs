//! Independent numerical oracles used by unit tests.

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Root of a monotone function by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let rising = f(hi) > f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// P(Z1 <= h, Z2 <= k) by integrating φ(x)·Φ((k - ρx)/sqrt(1-ρ²)) over x <= h.
pub fn bvn_by_conditioning(h: f64, k: f64, rho: f64) -> f64 {
    use crate::gaussian::{cdf, pdf};
    let s = (1.0 - rho * rho).sqrt();
    let lo = -12.0f64;
    let hi = h.min(12.0);
    if hi <= lo {
        return 0.0;
    }
    simpson(|x| pdf(x) * cdf((k - rho * x) / s), lo, hi, 20_000)
}
