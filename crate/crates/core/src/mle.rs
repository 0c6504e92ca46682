//! Two-step maximum likelihood: thresholds from the marginals, then a
//! one-dimensional search for ρ. Used as a reference for the IRLS estimators.

use std::cell::Cell;

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::brent::BrentOpt;

use crate::error::{Error, Result};
use crate::gaussian::{bivariate_cdf, cdf, interval_mass, pdf, MIN_MASS};
use crate::tabulate::{
    collapse_empty, densify, grouped_summary, proportions, thresholds_from_marginals, ContingencyTable,
    ProportionTable, Thresholds,
};

/// Largest |ρ| accepted by the log-likelihoods.
pub const LOGLIK_RHO_LIMIT: f64 = 1.0 - 1e-9;
/// The search runs over `(-SEARCH_LIMIT, SEARCH_LIMIT)`.
pub const SEARCH_LIMIT: f64 = 1.0 - 1e-6;

const MAX_EVALUATIONS: u64 = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct MlFit {
    pub rho: f64,
    pub loglik: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub enum TwoStepInput<'a> {
    Table(&'a ContingencyTable),
    /// Ordinal codes and the raw continuous series.
    Mixed {
        x: &'a [i64],
        y: &'a [f64],
    },
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.abs() <= LOGLIK_RHO_LIMIT {
        Ok(())
    } else {
        Err(Error::CorrelationDomain(rho))
    }
}

/// Cell probabilities `π_ij(ρ)` in row-major order.
pub fn cell_probabilities(rho: f64, a: &Thresholds, b: &Thresholds) -> Result<Vec<f64>> {
    check_rho(rho)?;
    let (ha, hb) = (a.bounds(), b.bounds());
    let (s, r) = (a.categories(), b.categories());
    // joint cdf on the grid of bounds; edges are marginal cdfs
    let mut grid = vec![0.0; (s + 1) * (r + 1)];
    for i in 0..=s {
        for j in 0..=r {
            grid[i * (r + 1) + j] = if i == 0 || j == 0 {
                0.0
            } else if i == s {
                cdf(hb[j])
            } else if j == r {
                cdf(ha[i])
            } else {
                bivariate_cdf(ha[i], hb[j], rho)?
            };
        }
    }
    let at = |i: usize, j: usize| grid[i * (r + 1) + j];
    let mut cells = Vec::with_capacity(s * r);
    for i in 0..s {
        for j in 0..r {
            cells.push(at(i + 1, j + 1) - at(i, j + 1) - at(i + 1, j) + at(i, j));
        }
    }
    Ok(cells)
}

fn weighted_loglik(weights: &[f64], probs: &[f64]) -> f64 {
    weights
        .iter()
        .zip(probs)
        .filter(|(w, _)| **w != 0.0)
        .map(|(w, p)| w * p.max(MIN_MASS).ln())
        .sum()
}

/// `Σ n_ij log π_ij(ρ)` with thresholds held fixed.
pub fn polychoric_loglik(rho: f64, t: &ContingencyTable, a: &Thresholds, b: &Thresholds) -> Result<f64> {
    if (a.categories(), b.categories()) != t.shape() {
        return Err(Error::Shape("thresholds do not match the table".into()));
    }
    let counts: Vec<f64> = t.counts().iter().map(|&c| c as f64).collect();
    Ok(weighted_loglik(&counts, &cell_probabilities(rho, a, b)?))
}

/// `Σ P_ij log π_ij(ρ)`, the per-observation log-likelihood of a proportion table.
pub fn polychoric_loglik_proportions(rho: f64, p: &ProportionTable, a: &Thresholds, b: &Thresholds) -> Result<f64> {
    if (a.categories(), b.categories()) != (p.rows(), p.cols()) {
        return Err(Error::Shape("thresholds do not match the table".into()));
    }
    Ok(weighted_loglik(p.cells(), &cell_probabilities(rho, a, b)?))
}

/// Log-likelihood of a continuous series given its ordinal categories (0-based).
pub fn polyserial_loglik(rho: f64, categories: &[usize], y: &[f64], a: &Thresholds) -> Result<f64> {
    check_rho(rho)?;
    if categories.len() != y.len() {
        return Err(Error::LengthMismatch(categories.len(), y.len()));
    }
    let sd = (1.0 - rho * rho).sqrt();
    let mut total = 0.0;
    for (&i, &v) in categories.iter().zip(y) {
        if i >= a.categories() {
            return Err(Error::Shape(format!(
                "category {i} outside {} thresholds",
                a.categories()
            )));
        }
        let lo = (a.lower(i) - rho * v) / sd;
        let hi = (a.upper(i) - rho * v) / sd;
        total += pdf(v).ln() + interval_mass(lo, hi).max(MIN_MASS).ln();
    }
    Ok(total)
}

struct Negated<F>(F, Cell<usize>);

impl<F: Fn(f64) -> Result<f64>> CostFunction for Negated<F> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, rho: &f64) -> std::result::Result<f64, argmin::core::Error> {
        self.1.set(self.1.get() + 1);
        (self.0)(*rho).map(|v| -v).map_err(argmin::core::Error::new)
    }
}

/// Maximizes `loglik` over `(-SEARCH_LIMIT, SEARCH_LIMIT)` by Brent's method.
pub fn maximize<F: Fn(f64) -> Result<f64>>(loglik: F) -> Result<MlFit> {
    let problem = Negated(loglik, Cell::new(0));
    let solver = BrentOpt::new(-SEARCH_LIMIT, SEARCH_LIMIT).set_tolerance(1e-10, 2e-9);
    let result = Executor::new(problem, solver)
        .configure(|state| state.max_iters(MAX_EVALUATIONS))
        .run()
        .map_err(|e| match e.downcast::<Error>() {
            Ok(inner) => inner,
            Err(other) => Error::InvalidConfig(other.to_string()),
        })?;
    let evaluations = result.problem.problem.as_ref().map_or(0, |p| p.1.get());
    let state = result.state();
    let converged = matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    );
    let rho = *state.get_best_param().ok_or(Error::NonFinite("likelihood"))?;
    let loglik = -state.get_best_cost();
    if !loglik.is_finite() {
        return Err(Error::NonFinite("likelihood"));
    }
    Ok(MlFit {
        rho,
        loglik,
        evaluations,
        converged,
    })
}

pub fn fit_two_step(input: TwoStepInput<'_>) -> Result<MlFit> {
    match input {
        TwoStepInput::Table(t) => fit_two_step_polychoric(t),
        TwoStepInput::Mixed { x, y } => fit_two_step_polyserial(x, y),
    }
}

/// Two-step ML after dropping empty rows and columns.
pub fn fit_two_step_polychoric(t: &ContingencyTable) -> Result<MlFit> {
    let (t, _) = collapse_empty(t)?;
    let p = proportions(&t);
    let a = thresholds_from_marginals(p.cum_rows())?;
    let b = thresholds_from_marginals(p.cum_cols())?;
    maximize(|rho| polychoric_loglik(rho, &t, &a, &b))
}

/// Two-step ML on a proportion table; the reported log-likelihood is per observation.
pub fn fit_two_step_proportions(p: &ProportionTable) -> Result<MlFit> {
    let a = thresholds_from_marginals(p.cum_rows())?;
    let b = thresholds_from_marginals(p.cum_cols())?;
    maximize(|rho| polychoric_loglik_proportions(rho, p, &a, &b))
}

/// Two-step ML for an ordinal series and a continuous series; `y` is standardized first.
pub fn fit_two_step_polyserial(x: &[i64], y: &[f64]) -> Result<MlFit> {
    let g = grouped_summary(x, y)?;
    let a = thresholds_from_marginals(&g.cumulative_proportions())?;
    let (categories, _) = densify(x);
    let z: Vec<f64> = y.iter().map(|v| (v - g.y_mean()) / g.y_sd()).collect();
    maximize(|rho| polyserial_loglik(rho, &categories, &z, &a))
}
