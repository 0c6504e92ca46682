//! Tetrachoric and polychoric correlation by iteratively reweighted least squares.
//!
//! Each iteration regresses the response means `E_Y_i = E(Z₂ | X = i)` on the
//! predictor means `e_x_i`, weighting by the inverse of their delta-method
//! covariance, then refreshes `e_x` from the column side using the new slope.

mod jacobian;

use nalgebra::{Cholesky, DMatrix, DVector};

pub use jacobian::{jacobian_2x2, jacobian_general, response_covariance};

use crate::error::{Error, Result};
use crate::gaussian::{truncated_mean_bounds, truncated_mean_tails, Tails};
use crate::polyserial::cell_predictor_means;
use crate::tabulate::{
    collapse_empty, proportions, thresholds_from_marginals, ContingencyTable, ProportionTable, Thresholds,
};
use crate::{clamp_rho, starting_rho, IrlsSettings};

/// Jacobian used for the response covariance of a 2×2 table.
///
/// Larger tables always use the block-diagonal form, which ignores the
/// dependence of the thresholds on the cell proportions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Jacobian {
    /// Block-diagonal derivative with thresholds held fixed.
    Marginal,
    /// Adds the derivative through the column threshold.
    #[default]
    ThresholdAdjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolychoricOptions {
    pub settings: IrlsSettings,
    pub jacobian: Jacobian,
}

/// Quantities of one iteration. `e_x` is the predictor used in the regression.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub e_x: Vec<f64>,
    pub e_cell: DMatrix<f64>,
    pub e_y: Vec<f64>,
    pub sigma: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub iteration: usize,
    pub e_x: Vec<f64>,
    pub e_y: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolychoricFit {
    pub rho: f64,
    pub se: f64,
    pub iterations: usize,
    pub converged: bool,
    pub initial_rho: f64,
    pub trace: Vec<TraceStep>,
    /// State of the last iteration, from which `se` was computed.
    pub state: IterationState,
}

/// Generalized least-squares slope through the origin and its variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlsEstimate {
    pub rho: f64,
    pub variance: f64,
}

/// Starting predictor means: the truncated means of the row intervals.
pub fn initial_predictors(th_a: &Thresholds, row_marginals: &[f64]) -> Result<Vec<f64>> {
    cell_predictor_means(th_a, row_marginals)
}

fn conditional_mean(rho: f64, sq: f64, centre: f64, lo: f64, hi: f64) -> Result<f64> {
    let shift = rho * centre;
    Ok(shift + sq * truncated_mean_bounds((lo - shift) / sq, (hi - shift) / sq)?)
}

fn check_rho(rho: f64) -> Result<f64> {
    if rho.abs() < 1.0 {
        Ok((1.0 - rho * rho).sqrt())
    } else {
        Err(Error::CorrelationDomain(rho))
    }
}

fn cell_means(rho: f64, e_x: &[f64], th_b: &Thresholds, mask: Option<&ProportionTable>) -> Result<DMatrix<f64>> {
    let sq = check_rho(rho)?;
    let r = th_b.categories();
    let mut e = DMatrix::zeros(e_x.len(), r);
    for (i, &ex) in e_x.iter().enumerate() {
        let shift = rho * ex;
        let mut lo_z = f64::NEG_INFINITY;
        let mut lo = Tails::at(lo_z);
        for j in 0..r {
            let hi_z = (th_b.upper(j) - shift) / sq;
            let hi = Tails::at(hi_z);
            if !mask.is_some_and(|p| p.get(i, j) == 0.0) {
                let m = truncated_mean_tails(&lo, &hi, lo_z > 0.0)
                    .ok_or(Error::DegenerateConditionalCell { row: i, col: j })?;
                e[(i, j)] = shift + sq * m;
            }
            (lo_z, lo) = (hi_z, hi);
        }
    }
    Ok(e)
}

/// `e_ij = E(Z₂ | Z₁ = e_x_i, b_{j-1} < Z₂ ≤ b_j)`.
pub fn conditional_cell_means(rho: f64, e_x: &[f64], th_b: &Thresholds) -> Result<DMatrix<f64>> {
    cell_means(rho, e_x, th_b, None)
}

/// `E_Y_i = Σ_j (P_ij / P_i·) e_ij`.
pub fn response_means(p: &ProportionTable, e_cell: &DMatrix<f64>) -> Result<Vec<f64>> {
    if e_cell.shape() != (p.rows(), p.cols()) {
        return Err(Error::Shape("cell means do not match the table".into()));
    }
    (0..p.rows())
        .map(|i| {
            let pi = p.row_marginals()[i];
            if !(pi > 0.0) {
                return Err(Error::EmptyCategory(i));
            }
            Ok((0..p.cols()).map(|j| p.get(i, j) * e_cell[(i, j)]).sum::<f64>() / pi)
        })
        .collect()
}

/// Rows whose variance is below this fraction of the largest are treated as
/// carrying no information.
pub const ZERO_VARIANCE_TOL: f64 = 1e-12;

/// Solves `(e_xᵀ Σ⁻¹ e_x)⁻¹ e_xᵀ Σ⁻¹ E_Y`.
///
/// A row with zero variance (a category whose observations all fall in one
/// cell) gets zero weight, as with a pseudo-inverse, instead of dominating the
/// fit. If the remaining block is not numerically positive definite a ridge of
/// `1e-12·trace/s` is added before factorizing.
pub fn weighted_estimate(e_x: &[f64], e_y: &[f64], sigma: &DMatrix<f64>) -> Result<WlsEstimate> {
    let s = e_x.len();
    if e_y.len() != s {
        return Err(Error::LengthMismatch(s, e_y.len()));
    }
    if sigma.shape() != (s, s) {
        return Err(Error::Shape(format!(
            "covariance is {:?}, expected {s}x{s}",
            sigma.shape()
        )));
    }
    let scale = sigma.diagonal().max();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::SingularCovariance);
    }
    let active: Vec<usize> = (0..s).filter(|&k| sigma[(k, k)] > ZERO_VARIANCE_TOL * scale).collect();
    let m = active.len();
    let sub = DMatrix::from_fn(m, m, |a, b| sigma[(active[a], active[b])]);
    let chol = match Cholesky::new(sub.clone()) {
        Some(c) => c,
        None => {
            let ridge = 1e-12 * sub.trace() / m as f64;
            Cholesky::new(sub + DMatrix::identity(m, m) * ridge).ok_or(Error::SingularCovariance)?
        }
    };
    let x = DVector::from_iterator(m, active.iter().map(|&k| e_x[k]));
    let y = DVector::from_iterator(m, active.iter().map(|&k| e_y[k]));
    let wx = chol.solve(&x);
    let info = x.dot(&wx);
    if !(info > 0.0) || !info.is_finite() {
        return Err(Error::SingularCovariance);
    }
    Ok(WlsEstimate {
        rho: wx.dot(&y) / info,
        variance: 1.0 / info,
    })
}

/// Recomputes the predictor means from the column side at the new `rho`.
pub fn update_predictors(rho: f64, p: &ProportionTable, e_cell: &DMatrix<f64>, th_a: &Thresholds) -> Result<Vec<f64>> {
    let sq = check_rho(rho)?;
    let (s, r) = (p.rows(), p.cols());
    if e_cell.shape() != (s, r) || th_a.categories() != s {
        return Err(Error::Shape("cell means or thresholds do not match the table".into()));
    }
    let mut e_yx = vec![0.0; r];
    for (j, v) in e_yx.iter_mut().enumerate() {
        let pj = p.col_marginals()[j];
        if !(pj > 0.0) {
            return Err(Error::EmptyCategory(j));
        }
        *v = (0..s).map(|i| p.get(i, j) * e_cell[(i, j)]).sum::<f64>() / pj;
    }
    (0..s)
        .map(|i| {
            let mut acc = 0.0;
            for (j, &centre) in e_yx.iter().enumerate() {
                let pij = p.get(i, j);
                if pij == 0.0 {
                    continue;
                }
                let e = conditional_mean(rho, sq, centre, th_a.lower(i), th_a.upper(i))
                    .map_err(|_| Error::DegenerateConditionalCell { row: i, col: j })?;
                acc += pij * e;
            }
            Ok(acc / p.row_marginals()[i])
        })
        .collect()
}

pub fn fit_polychoric(t: &ContingencyTable) -> Result<PolychoricFit> {
    fit_polychoric_with(t, PolychoricOptions::default())
}

/// Fits after dropping empty rows and columns. A table that collapses to 2×2
/// is fitted with the Jacobian named in `opts`.
pub fn fit_polychoric_with(t: &ContingencyTable, opts: PolychoricOptions) -> Result<PolychoricFit> {
    let (t, _) = collapse_empty(t)?;
    fit_polychoric_proportions(&proportions(&t), t.total() as f64, opts)
}

pub fn fit_tetrachoric(t: &ContingencyTable) -> Result<PolychoricFit> {
    fit_tetrachoric_with(t, PolychoricOptions::default())
}

pub fn fit_tetrachoric_with(t: &ContingencyTable, opts: PolychoricOptions) -> Result<PolychoricFit> {
    if t.shape() != (2, 2) {
        return Err(Error::NotTwoByTwo {
            rows: t.rows(),
            cols: t.cols(),
        });
    }
    fit_polychoric_with(t, opts)
}

/// Fits from cell proportions and a sample size; `n` only scales the standard error.
pub fn fit_polychoric_proportions(p: &ProportionTable, n: f64, opts: PolychoricOptions) -> Result<PolychoricFit> {
    let (s, r) = (p.rows(), p.cols());
    if s < 2 {
        return Err(Error::TooFewCategories { axis: "row", found: s });
    }
    if r < 2 {
        return Err(Error::TooFewCategories {
            axis: "column",
            found: r,
        });
    }
    if !(n > 0.0) {
        return Err(Error::TooFewObservations { need: 1, got: 0 });
    }
    let th_a = thresholds_from_marginals(p.cum_rows())?;
    let th_b = thresholds_from_marginals(p.cum_cols())?;
    let two_by_two = s == 2 && r == 2 && opts.jacobian == Jacobian::ThresholdAdjusted;

    let initial_rho = starting_rho(p.code_correlation()?);
    let mut rho = initial_rho;
    let mut e_x = initial_predictors(&th_a, p.row_marginals())?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last = None;
    while iterations < opts.settings.max_iterations {
        iterations += 1;
        let e_cell = cell_means(rho, &e_x, &th_b, Some(p))?;
        let e_y = response_means(p, &e_cell)?;
        let d = if two_by_two {
            jacobian_2x2(p, &e_cell, &e_x, rho, th_b.cuts()[0])?
        } else {
            jacobian_general(p, &e_cell)?
        };
        let sigma = jacobian::multinomial_sandwich(&d, p.cells(), n);
        let fit = weighted_estimate(&e_x, &e_y, &sigma)?;
        let next = clamp_rho(fit.rho);
        let diff = (next - rho).abs();
        rho = next;
        let next_e_x = update_predictors(rho, p, &e_cell, &th_a)?;
        trace.push(TraceStep {
            iteration: iterations,
            e_x: e_x.clone(),
            e_y: e_y.clone(),
            rho,
        });
        last = Some((
            fit.variance,
            IterationState {
                e_x: std::mem::replace(&mut e_x, next_e_x),
                e_cell,
                e_y,
                sigma,
            },
        ));
        if diff <= opts.settings.tolerance {
            converged = true;
            break;
        }
    }
    let (variance, state) = last.ok_or(Error::InvalidConfig("max_iterations must be at least 1".into()))?;
    Ok(PolychoricFit {
        rho,
        se: variance.sqrt(),
        iterations,
        converged,
        initial_rho,
        trace,
        state,
    })
}
