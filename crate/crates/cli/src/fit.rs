//! Estimator dispatch for one pair of columns.

use std::fmt;

use polyirls_core::{
    crosstab, fit_polychoric_with, fit_polyserial_with, grouped_summary, pearson, ContingencyTable, PolychoricFit,
    PolychoricOptions,
};
use serde::Serialize;

use crate::data::{complete_rows, Column, Kind};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tetrachoric,
    Polychoric,
    Polyserial,
    Pearson,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Method::Tetrachoric => "tetrachoric",
            Method::Polychoric => "polychoric",
            Method::Polyserial => "polyserial",
            Method::Pearson => "pearson",
        })
    }
}

/// Result of one pairwise fit. Field order is the JSON field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub method: Method,
    pub rho: f64,
    pub se: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Complete observations used.
    pub n: usize,
}

impl FitSummary {
    pub fn from_polychoric(fit: &PolychoricFit, table: &ContingencyTable) -> Self {
        Self {
            method: if table.shape() == (2, 2) {
                Method::Tetrachoric
            } else {
                Method::Polychoric
            },
            rho: fit.rho,
            se: fit.se,
            iterations: fit.iterations,
            converged: fit.converged,
            n: table.total() as usize,
        }
    }
}

/// Fits the pair on its complete rows with the estimator its kinds call for.
///
/// Two continuous columns give the Pearson correlation with the large-sample
/// standard error `(1 - r²)/√n`.
pub fn fit_pair(x: &Column, y: &Column, rows: usize, opts: PolychoricOptions) -> Result<FitSummary> {
    let keep = complete_rows(x, y, rows);
    match (x.kind(), y.kind()) {
        (Kind::Ignore, _) | (_, Kind::Ignore) => Err(CliError::Usage(format!(
            "column `{}` is ignored by the schema",
            if x.kind() == Kind::Ignore { &x.name } else { &y.name }
        ))),
        (Kind::Ordinal, Kind::Ordinal) => {
            let table = pair_table(x, y, &keep)?;
            let fit = fit_polychoric_with(&table, opts)?;
            Ok(FitSummary::from_polychoric(&fit, &table))
        }
        (Kind::Ordinal, Kind::Continuous) => polyserial(x, y, &keep, opts),
        (Kind::Continuous, Kind::Ordinal) => polyserial(y, x, &keep, opts),
        (Kind::Continuous, Kind::Continuous) => {
            let a = x.reals_at(&keep).expect("continuous column");
            let b = y.reals_at(&keep).expect("continuous column");
            let r = pearson(&a, &b)?;
            Ok(FitSummary {
                method: Method::Pearson,
                rho: r,
                se: (1.0 - r * r) / (keep.len() as f64).sqrt(),
                iterations: 0,
                converged: true,
                n: keep.len(),
            })
        }
    }
}

/// Cross-tabulation of two ordinal columns over the given rows. Only observed
/// categories appear, so the table has no empty rows or columns.
pub fn pair_table(x: &Column, y: &Column, keep: &[usize]) -> Result<ContingencyTable> {
    let (a, b) = match (x.codes_at(keep), y.codes_at(keep)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(CliError::Usage(format!(
                "`{}` and `{}` must both be ordinal",
                x.name, y.name
            )))
        }
    };
    Ok(crosstab(&a, &b)?)
}

fn polyserial(ordinal: &Column, continuous: &Column, keep: &[usize], opts: PolychoricOptions) -> Result<FitSummary> {
    let codes = ordinal.codes_at(keep).expect("ordinal column");
    let values = continuous.reals_at(keep).expect("continuous column");
    let fit = fit_polyserial_with(&grouped_summary(&codes, &values)?, opts.settings)?;
    Ok(FitSummary {
        method: Method::Polyserial,
        rho: fit.rho,
        se: fit.se,
        iterations: fit.iterations,
        converged: fit.converged,
        n: keep.len(),
    })
}

/// Polychoric fit of two ordinal columns, keeping the full iteration trace.
pub fn trace_pair(x: &Column, y: &Column, rows: usize, opts: PolychoricOptions) -> Result<PolychoricFit> {
    for c in [x, y] {
        if c.kind() != Kind::Ordinal {
            return Err(CliError::Usage(format!(
                "trace needs two ordinal columns; `{}` is {}",
                c.name,
                c.kind()
            )));
        }
    }
    let table = pair_table(x, y, &complete_rows(x, y, rows))?;
    Ok(fit_polychoric_with(&table, opts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Schema};

    fn fit_pair(x: &Column, y: &Column, rows: usize) -> Result<FitSummary> {
        super::fit_pair(x, y, rows, PolychoricOptions::default())
    }

    fn data(text: &str) -> Dataset {
        Dataset::from_reader(text.as_bytes(), &Schema::new()).unwrap()
    }

    #[test]
    fn dispatch_by_kind() {
        let d = data("a,b,c,d\n1,1,0.1,0.3\n1,2,0.4,0.2\n2,1,0.2,0.9\n2,2,0.8,0.7\n1,1,0.3,0.1\n2,2,0.9,1.1\n");
        let col = |n| d.column(n).unwrap();
        let rows = d.rows();
        assert_eq!(fit_pair(col("a"), col("b"), rows).unwrap().method, Method::Tetrachoric);
        assert_eq!(fit_pair(col("a"), col("c"), rows).unwrap().method, Method::Polyserial);
        assert_eq!(fit_pair(col("c"), col("a"), rows).unwrap().method, Method::Polyserial);
        let p = fit_pair(col("c"), col("d"), rows).unwrap();
        assert_eq!(p.method, Method::Pearson);
        assert_eq!(p.iterations, 0);
        assert!(p.converged);
    }

    #[test]
    fn polyserial_is_symmetric_in_argument_order() {
        let d = data("x,y\n1,-0.5\n2,0.1\n3,1.2\n1,0.3\n2,-0.2\n3,0.8\n1,-1.1\n2,0.6\n");
        let (x, y) = (d.column("x").unwrap(), d.column("y").unwrap());
        assert_eq!(fit_pair(x, y, d.rows()).unwrap(), fit_pair(y, x, d.rows()).unwrap());
    }

    #[test]
    fn pearson_se() {
        let d = data("x,y\n0.1,0.2\n0.5,0.3\n0.9,1.0\n1.3,0.8\n");
        let f = fit_pair(d.column("x").unwrap(), d.column("y").unwrap(), d.rows()).unwrap();
        assert!((f.se - (1.0 - f.rho * f.rho) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn missing_rows_are_dropped_pairwise() {
        let full = data("a,b\n1,1\n1,2\n2,1\n2,2\n1,1\n2,2\n1,1\n2,2\n");
        let gappy = data("a,b,c\n1,1,\n1,2,\n2,1,\nNA,2,\n2,2,\n1,1,\n2,,\n2,2,\n1,1,\n2,2,\n");
        let a = fit_pair(full.column("a").unwrap(), full.column("b").unwrap(), full.rows()).unwrap();
        let b = fit_pair(gappy.column("a").unwrap(), gappy.column("b").unwrap(), gappy.rows()).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.n, 8);
    }

    #[test]
    fn trace_rejects_continuous() {
        let d = data("a,c\n1,0.5\n2,0.25\n");
        let e = trace_pair(
            d.column("a").unwrap(),
            d.column("c").unwrap(),
            d.rows(),
            PolychoricOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(e, CliError::Usage(_)));
    }
}
