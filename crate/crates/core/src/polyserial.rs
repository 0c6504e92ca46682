//! Polyserial correlation by iteratively reweighted least squares.
//!
//! The category means of the standardized continuous variable are regressed
//! on the latent predictor means `e_x_i = E(Z | X = i)`. Because the response
//! variance within a category depends on ρ, the weights are refreshed from the
//! current slope until it stops moving.

use crate::error::{Error, Result};
use crate::gaussian::{pdf, truncated_mean_bounds, x_pdf};
use crate::tabulate::{thresholds_from_marginals, GroupedSummary, Thresholds};
use crate::{clamp_rho, starting_rho, IrlsSettings};

/// Result of [`fit_polyserial`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolyserialFit {
    pub rho: f64,
    pub se: f64,
    pub iterations: usize,
    pub converged: bool,
    pub initial_rho: f64,
    /// `(iteration, rho)` with the starting value at iteration 0.
    pub trace: Vec<(usize, f64)>,
}

/// Latent moments of each ordinal category at a given ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMoments {
    pub e_x: Vec<f64>,
    /// `ρ·e_x_i`, the response mean implied by the model. Not used by the iteration.
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub n: Vec<u64>,
}

impl CellMoments {
    pub fn new(rho: f64, th: &Thresholds, n: &[u64]) -> Result<Self> {
        let total: u64 = n.iter().sum();
        let p: Vec<f64> = n.iter().map(|&c| c as f64 / total as f64).collect();
        let e_x = cell_predictor_means(th, &p)?;
        let sigma2 = cell_response_variance(rho, th, &p)?;
        Ok(Self {
            mu: e_x.iter().map(|e| rho * e).collect(),
            e_x,
            sigma2,
            n: n.to_vec(),
        })
    }
}

fn check_shape(th: &Thresholds, p: &[f64]) -> Result<()> {
    if th.categories() != p.len() {
        return Err(Error::LengthMismatch(th.categories(), p.len()));
    }
    Ok(())
}

/// `e_x_i = (φ(a_{i-1}) - φ(a_i)) / P_i`.
pub fn cell_predictor_means(th: &Thresholds, p: &[f64]) -> Result<Vec<f64>> {
    check_shape(th, p)?;
    p.iter()
        .enumerate()
        .map(|(i, &pi)| {
            let (lo, hi) = (th.lower(i), th.upper(i));
            if !(pi > 0.0) {
                return Err(Error::DegenerateCell { lo, hi });
            }
            if pi < 1e-8 {
                // marginal proportion too small to divide reliably; use the exact mass
                return truncated_mean_bounds(lo, hi);
            }
            Ok((pdf(lo) - pdf(hi)) / pi)
        })
        .collect()
}

/// Within-category variance of the latent response at correlation `rho`.
pub fn cell_response_variance(rho: f64, th: &Thresholds, p: &[f64]) -> Result<Vec<f64>> {
    check_shape(th, p)?;
    if !(rho.abs() < 1.0) {
        return Err(Error::CorrelationDomain(rho));
    }
    let r2 = rho * rho;
    p.iter()
        .enumerate()
        .map(|(i, &pi)| {
            let (lo, hi) = (th.lower(i), th.upper(i));
            if !(pi > 0.0) {
                return Err(Error::DegenerateCell { lo, hi });
            }
            let d = pdf(lo) - pdf(hi);
            let v = 1.0 + r2 * (x_pdf(lo) - x_pdf(hi)) / pi - r2 * d * d / (pi * pi);
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonpositiveVariance { category: i, value: v })
            }
        })
        .collect()
}

/// Weighted least-squares slope through the origin.
pub fn wls_slope(e_x: &[f64], e_y: &[f64], weights: &[f64]) -> Result<f64> {
    if e_x.len() != e_y.len() {
        return Err(Error::LengthMismatch(e_x.len(), e_y.len()));
    }
    if e_x.len() != weights.len() {
        return Err(Error::LengthMismatch(e_x.len(), weights.len()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for ((x, y), w) in e_x.iter().zip(e_y).zip(weights) {
        num += w * x * y;
        den += w * x * x;
    }
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

/// Sampling variance `(Σ n_i e_x_i² / σ_i²)⁻¹` of the slope.
pub fn polyserial_variance(e_x: &[f64], sigma2: &[f64], n: &[u64]) -> Result<f64> {
    if e_x.len() != sigma2.len() {
        return Err(Error::LengthMismatch(e_x.len(), sigma2.len()));
    }
    if e_x.len() != n.len() {
        return Err(Error::LengthMismatch(e_x.len(), n.len()));
    }
    let mut info = 0.0;
    for (i, ((x, s2), &c)) in e_x.iter().zip(sigma2).zip(n).enumerate() {
        if !(*s2 > 0.0) {
            return Err(Error::NonpositiveVariance {
                category: i,
                value: *s2,
            });
        }
        info += c as f64 * x * x / s2;
    }
    if !(info > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(1.0 / info)
}

pub fn fit_polyserial(g: &GroupedSummary) -> Result<PolyserialFit> {
    fit_polyserial_with(g, IrlsSettings::default())
}

pub fn fit_polyserial_with(g: &GroupedSummary, settings: IrlsSettings) -> Result<PolyserialFit> {
    let th = thresholds_from_marginals(&g.cumulative_proportions())?;
    let p = g.proportions();
    let n = g.counts();
    let ybar = g.means();
    let e_x = cell_predictor_means(&th, &p)?;

    let initial_rho = starting_rho(g.code_correlation()?);
    let mut rho = initial_rho;
    let mut trace = vec![(0, rho)];
    let mut converged = false;
    let mut iterations = 0;
    let mut weights = vec![0.0; n.len()];
    while iterations < settings.max_iterations {
        iterations += 1;
        let sigma2 = cell_response_variance(rho, &th, &p)?;
        for ((w, &c), s2) in weights.iter_mut().zip(n).zip(&sigma2) {
            *w = c as f64 / s2;
        }
        let next = clamp_rho(wls_slope(&e_x, ybar, &weights)?);
        let diff = (next - rho).abs();
        rho = next;
        trace.push((iterations, rho));
        if diff <= settings.tolerance {
            converged = true;
            break;
        }
    }

    let sigma2 = cell_response_variance(rho, &th, &p)?;
    let se = polyserial_variance(&e_x, &sigma2, n)?.sqrt();
    Ok(PolyserialFit {
        rho,
        se,
        iterations,
        converged,
        initial_rho,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{cdf, quantile, truncated_mean, Interval};
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

    fn th(cuts: &[f64]) -> Thresholds {
        Thresholds::new(cuts.to_vec()).unwrap()
    }

    fn masses(t: &Thresholds) -> Vec<f64> {
        (0..t.categories()).map(|i| cdf(t.upper(i)) - cdf(t.lower(i))).collect()
    }

    /// Counts proportional to the population masses of equally spaced cuts.
    fn population_summary(rho: f64, s: usize) -> GroupedSummary {
        let n_total = 1_000_000.0;
        let cuts: Vec<f64> = (1..s).map(|k| -2.0 + 4.0 * k as f64 / s as f64).collect();
        let t = th(&cuts);
        let counts: Vec<u64> = masses(&t).iter().map(|m| (m * n_total).round() as u64).collect();
        // exact category means under the observed marginals
        let total: u64 = counts.iter().sum();
        let cum: Vec<f64> = counts
            .iter()
            .scan(0u64, |acc, &c| {
                *acc += c;
                Some(*acc as f64 / total as f64)
            })
            .collect();
        let th = thresholds_from_marginals(&cum).unwrap();
        let p: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let e_x = cell_predictor_means(&th, &p).unwrap();
        let means = e_x.iter().map(|e| rho * e).collect();
        GroupedSummary::from_parts(counts, means).unwrap()
    }

    #[test]
    fn predictor_means_examples() {
        let e = cell_predictor_means(&th(&[0.0]), &[0.5, 0.5]).unwrap();
        assert!((e[0] + SQRT_2_OVER_PI).abs() < 1e-12 && (e[1] - SQRT_2_OVER_PI).abs() < 1e-12);

        let t = th(&[-1.0, 1.0]);
        let p = masses(&t);
        let e = cell_predictor_means(&t, &p).unwrap();
        for (i, v) in e.iter().enumerate() {
            assert!((v - truncated_mean(t.interval(i)).unwrap()).abs() < 1e-12);
        }
        assert!((e[2] - 1.52514).abs() < 1e-5 && e[1].abs() < 1e-15);
        assert!(e.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn predictor_means_total_expectation() {
        let t = th(&[-1.3, -0.2, 0.4, 2.0]);
        let p = masses(&t);
        let e = cell_predictor_means(&t, &p).unwrap();
        let total: f64 = p.iter().zip(&e).map(|(a, b)| a * b).sum();
        assert!(total.abs() < 1e-10);
    }

    #[test]
    fn response_variance_examples() {
        let t = th(&[-0.7, 0.1, 1.4]);
        let p = masses(&t);
        assert!(cell_response_variance(0.0, &t, &p).unwrap().iter().all(|&v| v == 1.0));

        let v = cell_response_variance(0.8, &th(&[0.0]), &[0.5, 0.5]).unwrap();
        assert!((v[0] - v[1]).abs() < 1e-15);
        assert!((v[0] - 0.5926).abs() < 1e-4);

        let t = th(&[-1.5, -0.5, 0.5, 1.5]);
        let v = cell_response_variance(0.6, &t, &masses(&t)).unwrap();
        for i in 0..v.len() {
            assert!((v[i] - v[v.len() - 1 - i]).abs() < 1e-12);
        }
        assert!(cell_response_variance(1.0, &t, &masses(&t)).is_err());
    }

    #[test]
    fn response_variance_matches_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let rho: f64 = 0.8;
        let s = (1.0 - rho * rho).sqrt();
        let (mut n, mut sum, mut sq) = ([0.0f64; 2], [0.0f64; 2], [0.0f64; 2]);
        for _ in 0..1_000_000 {
            let z = quantile(rng.random_range(1e-15..1.0)).unwrap();
            let y = rho * z + s * quantile(rng.random_range(1e-15..1.0)).unwrap();
            let k = usize::from(z > 0.0);
            n[k] += 1.0;
            sum[k] += y;
            sq[k] += y * y;
        }
        let want = cell_response_variance(rho, &th(&[0.0]), &[0.5, 0.5]).unwrap();
        for k in 0..2 {
            let var = sq[k] / n[k] - (sum[k] / n[k]).powi(2);
            assert!((var - want[k]).abs() < 0.005, "{var} vs {}", want[k]);
        }
    }

    #[test]
    fn variance_tends_to_one_as_rho_vanishes() {
        let t = th(&[-1.0, 0.3]);
        let p = masses(&t);
        let mut prev = f64::INFINITY;
        for rho in [0.5, 0.1, 0.01, 0.001] {
            let gap = cell_response_variance(rho, &t, &p)
                .unwrap()
                .iter()
                .map(|v| (v - 1.0).abs())
                .fold(0.0, f64::max);
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn wls_slope_examples() {
        let x = [-1.2, -0.1, 0.7, 2.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v).collect();
        assert!((wls_slope(&x, &y, &[3.0, 0.1, 7.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((wls_slope(&[-1.0, 1.0], &[-0.3, 0.5], &[1.0, 1.0]).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(
            wls_slope(&[0.0, 0.0], &[1.0, 1.0], &[1.0, 1.0]),
            Err(Error::ZeroDenominator)
        );
    }

    /// Least squares on the whitened design, solved by SVD.
    fn dense_wls(x: &[f64], y: &[f64], sigma2: &[f64], n: &[u64]) -> (f64, f64) {
        let k = x.len();
        let root_w: Vec<f64> = sigma2.iter().zip(n).map(|(s, &c)| (c as f64 / s).sqrt()).collect();
        let a = DMatrix::from_fn(k, 1, |i, _| x[i] * root_w[i]);
        let b = DVector::from_fn(k, |i, _| y[i] * root_w[i]);
        let svd = a.clone().svd(true, true);
        let beta = svd.solve(&b, 1e-14).unwrap()[0];
        let cov = (a.transpose() * a).try_inverse().unwrap()[(0, 0)];
        (beta, cov)
    }

    #[test]
    fn wls_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let k = rng.random_range(2..8);
            let x: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s2: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
            let n: Vec<u64> = (0..k).map(|_| rng.random_range(1..500)).collect();
            let w: Vec<f64> = s2.iter().zip(&n).map(|(s, &c)| c as f64 / s).collect();
            let (beta, cov) = dense_wls(&x, &y, &s2, &n);
            let got = wls_slope(&x, &y, &w).unwrap();
            assert!((got - beta).abs() <= 1e-12 * beta.abs().max(1.0));
            let var = polyserial_variance(&x, &s2, &n).unwrap();
            assert!((var - cov).abs() <= 1e-12 * cov);
        }
    }

    #[test]
    fn variance_halves_when_counts_double() {
        let x = [-0.9, 0.2, 1.1];
        let s2 = [0.8, 0.9, 0.7];
        let v1 = polyserial_variance(&x, &s2, &[40, 70, 30]).unwrap();
        let v2 = polyserial_variance(&x, &s2, &[80, 140, 60]).unwrap();
        assert!((v1 / v2 - 2.0).abs() < 1e-14);
        assert!(polyserial_variance(&x, &s2, &[41, 70, 30]).unwrap() < v1);
    }

    #[test]
    fn population_summaries_recover_rho() {
        for s in [2, 3, 5, 7] {
            for k in -9..=9 {
                let rho = k as f64 / 10.0;
                let fit = fit_polyserial(&population_summary(rho, s)).unwrap();
                assert!(fit.converged, "s={s} rho={rho}");
                assert!((fit.rho - rho).abs() < 1e-6, "s={s} rho={rho}: {}", fit.rho);
            }
        }
    }

    #[test]
    fn zero_means_give_zero() {
        let g = GroupedSummary::from_parts(vec![10, 20, 10], vec![0.0; 3]).unwrap();
        let fit = fit_polyserial(&g).unwrap();
        assert_eq!(fit.rho, 0.0);
        assert!(fit.converged && fit.se > 0.0);
    }

    #[test]
    fn trace_starts_at_pearson_and_ends_at_estimate() {
        let g = GroupedSummary::from_parts(vec![120, 260, 120], vec![-0.6, 0.05, 0.5]).unwrap();
        let fit = fit_polyserial(&g).unwrap();
        assert_eq!(fit.trace[0], (0, fit.initial_rho));
        assert_eq!(fit.trace.last().unwrap(), &(fit.iterations, fit.rho));
        let n = fit.trace.len();
        assert!((fit.trace[n - 1].1 - fit.trace[n - 2].1).abs() <= 1e-8);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let g = GroupedSummary::from_parts(vec![120, 260, 120], vec![-0.6, 0.05, 0.5]).unwrap();
        let settings = IrlsSettings {
            tolerance: 0.0,
            max_iterations: 1,
        };
        let fit = fit_polyserial_with(&g, settings).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
        assert_eq!(fit.trace.len(), 2);
    }

    #[test]
    fn se_matches_population_formula() {
        // rho = 0.4, one cut at 0, N = 500
        let g = GroupedSummary::from_parts(vec![250, 250], vec![-0.4 * SQRT_2_OVER_PI, 0.4 * SQRT_2_OVER_PI]).unwrap();
        let fit = fit_polyserial(&g).unwrap();
        let info = 500.0 * (2.0 / std::f64::consts::PI) / (1.0 - 0.16 * 2.0 / std::f64::consts::PI);
        assert!((fit.se - info.powf(-0.5)).abs() < 1e-9);
        assert!((fit.se - 0.0531).abs() < 1e-4);
    }

    #[test]
    fn large_means_stay_inside_unit_interval() {
        let g = GroupedSummary::from_parts(vec![50, 50], vec![-1.0, 1.0]).unwrap();
        match fit_polyserial(&g) {
            Ok(fit) => assert!(fit.rho.abs() < 1.0),
            Err(e) => assert!(matches!(e, Error::NonpositiveVariance { .. })),
        }
    }

    proptest! {
        #[test]
        fn negating_means_negates_rho(
            counts in proptest::collection::vec(5u64..200, 2..7),
            raw in proptest::collection::vec(-0.8f64..0.8, 7),
        ) {
            let k = counts.len();
            let mut means: Vec<f64> = raw[..k].to_vec();
            means.sort_by(f64::total_cmp);
            let total: u64 = counts.iter().sum();
            let centre = counts.iter().zip(&means).map(|(&c, m)| c as f64 * m).sum::<f64>() / total as f64;
            means.iter_mut().for_each(|m| *m -= centre);
            let neg: Vec<f64> = means.iter().map(|m| -m).collect();
            let a = fit_polyserial(&GroupedSummary::from_parts(counts.clone(), means).unwrap());
            let b = fit_polyserial(&GroupedSummary::from_parts(counts, neg).unwrap());
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a.rho, -b.rho);
                    prop_assert_eq!(a.se, b.se);
                }
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }

    #[test]
    fn interval_helper_agrees_with_thresholds() {
        let t = th(&[-0.5, 0.5]);
        assert_eq!(t.interval(0), Interval::new(f64::NEG_INFINITY, -0.5).unwrap());
    }
}
