//! Latent-variable correlation estimators for ordinal data.
//!
//! The crate estimates polyserial (ordinal × continuous), tetrachoric (2×2)
//! and polychoric (s×r) correlations with iteratively reweighted least
//! squares. Every estimate comes with a delta-method standard error computed
//! from data summaries only: category means for the polyserial case and the
//! cell proportions of the contingency table for the polychoric case.
//!
//! A two-step maximum-likelihood estimator lives in [`mle`] as a reference,
//! and [`simulate`] runs the Monte Carlo protocol used to compare the two.
//!
//! ```
//! use polyirls_core::{fit_polychoric, ContingencyTable};
//!
//! let table = ContingencyTable::from_rows(vec![vec![40, 10], vec![15, 35]]).unwrap();
//! let fit = fit_polychoric(&table).unwrap();
//! assert!(fit.converged);
//! assert!(fit.rho > 0.5 && fit.rho < 0.9);
//! ```

// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gaussian;
pub mod mle;
pub mod polychoric;
pub mod polyserial;
pub mod simulate;
pub mod tabulate;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use gaussian::Interval;
pub use mle::{fit_two_step, fit_two_step_polychoric, fit_two_step_polyserial, MlFit, TwoStepInput};
pub use polychoric::{
    fit_polychoric, fit_polychoric_proportions, fit_polychoric_with, fit_tetrachoric, fit_tetrachoric_with,
    IterationState, Jacobian, PolychoricFit, PolychoricOptions, TraceStep,
};
pub use polyserial::{fit_polyserial, fit_polyserial_with, CellMoments, PolyserialFit};
pub use simulate::{
    benchmark, run_simulation, BenchmarkReport, Estimator, EstimatorReport, Metrics, SimConfig, SimReport,
};
pub use tabulate::{
    collapse_empty, crosstab, grouped_summary, pearson, proportion_covariance, proportions, thresholds_from_marginals,
    CategoryMap, ContingencyTable, GroupedSummary, ProportionCovariance, ProportionTable, Thresholds,
};

/// Convergence settings shared by the IRLS loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsSettings {
    /// Stop once successive estimates differ by at most this much.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for IrlsSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
        }
    }
}

/// Iterates are kept inside (-RHO_LIMIT, RHO_LIMIT) so that sqrt(1 - rho^2) stays positive.
pub const RHO_LIMIT: f64 = 1.0 - 1e-9;

pub(crate) fn clamp_rho(rho: f64) -> f64 {
    rho.clamp(-RHO_LIMIT, RHO_LIMIT)
}

/// Starting value from a Pearson correlation; a perfect association starts at ±0.99.
pub(crate) fn starting_rho(pearson: f64) -> f64 {
    if pearson.abs() >= 1.0 {
        0.99f64.copysign(pearson)
    } else {
        clamp_rho(pearson)
    }
}
