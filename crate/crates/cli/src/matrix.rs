//! Pairwise mixed-type correlation matrices.

use std::time::{Duration, Instant};

use polyirls_core::PolychoricOptions;
use rayon::prelude::*;

use crate::data::{complete_rows, Dataset, Kind};
use crate::error::{CliError, Result};
use crate::fit::{fit_pair, FitSummary};

/// A pair that produced no estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Absent {
    pub row: usize,
    pub col: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixResult {
    pub names: Vec<String>,
    /// Upper-triangle fits in row-major order, `None` where absent.
    pub pairs: Vec<((usize, usize), Option<FitSummary>)>,
    pub absent: Vec<Absent>,
    /// Complete observations for every pair, diagonal included.
    pub counts: Vec<Vec<usize>>,
    /// Wall-clock time per upper-triangle pair, in `pairs` order.
    pub timings: Vec<Duration>,
    /// Columns with fewer than two distinct values.
    pub constant: Vec<bool>,
}

impl MatrixResult {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// The fit for `(i, j)` in either order; `None` on the diagonal.
    pub fn fit(&self, i: usize, j: usize) -> Option<&FitSummary> {
        let key = (i.min(j), i.max(j));
        if i == j {
            return None;
        }
        self.pairs.iter().find(|(k, _)| *k == key).and_then(|(_, f)| f.as_ref())
    }

    /// Symmetric estimates with a unit diagonal; absent entries are `None`.
    pub fn estimates(&self) -> Vec<Vec<Option<f64>>> {
        self.grid(1.0, |f| f.rho)
    }

    /// Standard errors with a zero diagonal.
    pub fn standard_errors(&self) -> Vec<Vec<Option<f64>>> {
        self.grid(0.0, |f| f.se)
    }

    fn grid(&self, diag: f64, value: impl Fn(&FitSummary) -> f64) -> Vec<Vec<Option<f64>>> {
        let p = self.dim();
        let mut out = vec![vec![None; p]; p];
        for (i, row) in out.iter_mut().enumerate() {
            row[i] = (!self.constant[i]).then_some(diag);
        }
        for ((i, j), fit) in &self.pairs {
            let v = fit.as_ref().map(&value);
            out[*i][*j] = v;
            out[*j][*i] = v;
        }
        out
    }

    pub fn nonconverged(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs
            .iter()
            .filter(|(_, f)| f.as_ref().is_some_and(|f| !f.converged))
            .map(|&(k, _)| k)
    }
}

/// Fits every pair of non-ignored columns on its complete rows.
///
/// A pair that cannot be fitted is recorded in `absent` and the rest
/// continue. Pairs run concurrently; the result order follows the columns.
pub fn correlation_matrix(data: &Dataset, opts: PolychoricOptions) -> Result<MatrixResult> {
    let cols: Vec<_> = data.columns().iter().filter(|c| c.kind() != Kind::Ignore).collect();
    if cols.len() < 2 {
        return Err(CliError::Usage(format!(
            "matrix mode needs at least two non-ignored columns, found {}",
            cols.len()
        )));
    }
    let p = cols.len();
    let rows = data.rows();
    let constant: Vec<bool> = cols.iter().map(|c| !c.varies()).collect();
    let index: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();

    let fitted: Vec<_> = index
        .par_iter()
        .map(|&(i, j)| {
            let start = Instant::now();
            let out = if constant[i] || constant[j] {
                let k = if constant[i] { i } else { j };
                Err(format!("column `{}` is constant", cols[k].name))
            } else {
                fit_pair(cols[i], cols[j], rows, opts).map_err(|e| e.to_string())
            };
            (out, start.elapsed())
        })
        .collect();

    let mut counts = vec![vec![0; p]; p];
    for (i, c) in cols.iter().enumerate() {
        counts[i][i] = c.present_count();
    }
    let mut pairs = Vec::with_capacity(index.len());
    let mut absent = Vec::new();
    let mut timings = Vec::with_capacity(index.len());
    for (&(i, j), (out, elapsed)) in index.iter().zip(fitted) {
        let n = complete_rows(cols[i], cols[j], rows).len();
        counts[i][j] = n;
        counts[j][i] = n;
        timings.push(elapsed);
        match out {
            Ok(fit) => pairs.push(((i, j), Some(fit))),
            Err(reason) => {
                pairs.push(((i, j), None));
                absent.push(Absent { row: i, col: j, reason });
            }
        }
    }
    for (i, c) in cols.iter().enumerate() {
        if constant[i] {
            absent.push(Absent {
                row: i,
                col: i,
                reason: format!("column `{}` is constant", c.name),
            });
        }
    }
    absent.sort_by_key(|a| (a.row, a.col));

    Ok(MatrixResult {
        names: cols.iter().map(|c| c.name.clone()).collect(),
        pairs,
        absent,
        counts,
        timings,
        constant,
    })
}
