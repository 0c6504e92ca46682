//! Derivatives of the response means with respect to the cell proportions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{cdf, pdf, residual_threshold};
use crate::tabulate::{ProportionCovariance, ProportionTable};

fn check_cells(p: &ProportionTable, e_cell: &DMatrix<f64>) -> Result<()> {
    if e_cell.shape() != (p.rows(), p.cols()) {
        return Err(Error::Shape(format!(
            "cell means are {:?}, table is {}x{}",
            e_cell.shape(),
            p.rows(),
            p.cols()
        )));
    }
    Ok(())
}

/// Block-diagonal `∂E_Y / ∂P` with the conditional cell means held fixed.
///
/// Row `k` is nonzero only over the cells of row `k`, where
/// `∂E_Y_k/∂P_kj = (e_kj - E_Y_k) / P_k·`.
pub fn jacobian_general(p: &ProportionTable, e_cell: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_cells(p, e_cell)?;
    let (s, r) = (p.rows(), p.cols());
    let mut d = DMatrix::zeros(s, s * r);
    for k in 0..s {
        let pk = p.row_marginals()[k];
        if !(pk > 0.0) {
            return Err(Error::EmptyCategory(k));
        }
        let e_y: f64 = (0..r).map(|j| p.get(k, j) * e_cell[(k, j)]).sum::<f64>() / pk;
        for j in 0..r {
            d[(k, k * r + j)] = (e_cell[(k, j)] - e_y) / pk;
        }
    }
    Ok(d)
}

/// `D = D1 + D2` for a 2×2 table, where `D2` carries the dependence of the
/// column threshold `b = Φ⁻¹(P_11 + P_21)` on the first-column cells.
pub fn jacobian_2x2(p: &ProportionTable, e_cell: &DMatrix<f64>, e_x: &[f64], rho: f64, b: f64) -> Result<DMatrix<f64>> {
    if p.rows() != 2 || p.cols() != 2 {
        return Err(Error::NotTwoByTwo {
            rows: p.rows(),
            cols: p.cols(),
        });
    }
    if e_x.len() != 2 {
        return Err(Error::LengthMismatch(2, e_x.len()));
    }
    let mut d = jacobian_general(p, e_cell)?;
    let phi_b = pdf(b);
    for i in 0..2 {
        let u = residual_threshold(b, e_x[i], rho)?;
        let (phi_u, big_phi) = (pdf(u), cdf(u));
        let upper = cdf(-u);
        let q = p.row_marginals()[i];
        let mut term = 0.0;
        // ∂e_ij/∂b carries a factor sqrt(1-ρ²) from the mean and 1/sqrt(1-ρ²) from u
        if p.get(i, 0) > 0.0 {
            let de = phi_u * (u * big_phi + phi_u) / (big_phi * big_phi * phi_b);
            term += p.get(i, 0) / q * de;
        }
        if p.get(i, 1) > 0.0 {
            let de = phi_u * (-u * upper + phi_u) / (upper * upper * phi_b);
            term += p.get(i, 1) / q * de;
        }
        // P_11 and P_21 both move b; the second-column cells do not
        d[(i, 0)] += term;
        d[(i, 2)] += term;
    }
    Ok(d)
}

/// Delta-method covariance `D B Dᵀ` of the response means.
pub fn response_covariance(d: &DMatrix<f64>, b: &ProportionCovariance) -> Result<DMatrix<f64>> {
    if d.ncols() != b.dim() {
        return Err(Error::Shape(format!(
            "Jacobian has {} columns, covariance has dimension {}",
            d.ncols(),
            b.dim()
        )));
    }
    let sigma = d * b.matrix() * d.transpose();
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// `D B Dᵀ` for a multinomial `B = (diag(p) - p pᵀ)/N` without forming `B`.
pub(crate) fn multinomial_sandwich(d: &DMatrix<f64>, cells: &[f64], n: f64) -> DMatrix<f64> {
    let p = DVector::from_column_slice(cells);
    let dp = d * &p;
    let mut weighted = d.clone();
    for (mut col, &pa) in weighted.column_iter_mut().zip(cells) {
        col *= pa;
    }
    let mut sigma = weighted * d.transpose();
    sigma.ger(-1.0, &dp, &dp, 1.0);
    sigma /= n;
    (&sigma + sigma.transpose()) * 0.5
}
