//! Summaries of raw observations consumed by the estimators.
//!
//! Ordinal codes may be any integers; only their order matters. Codes that
//! never occur are not represented, so every category of a table built by
//! [`crosstab`] is observed at least once.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gaussian::{quantile, Interval};

/// Observed joint frequencies of two ordinal variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    row_codes: Vec<i64>,
    col_codes: Vec<i64>,
}

impl ContingencyTable {
    /// Builds a table from row-major counts. Categories are labelled 1..s and 1..r.
    pub fn new(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if rows == 0 || cols == 0 || counts.len() != rows * cols {
            return Err(Error::InvalidTable(format!(
                "{} counts cannot fill a {rows}x{cols} grid",
                counts.len()
            )));
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::InvalidTable("table has no observations".into()));
        }
        Ok(Self {
            rows,
            cols,
            counts,
            row_codes: (1..=rows as i64).collect(),
            col_codes: (1..=cols as i64).collect(),
        })
    }

    pub fn from_rows(grid: Vec<Vec<u64>>) -> Result<Self> {
        let rows = grid.len();
        let cols = grid.first().map_or(0, Vec::len);
        if grid.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidTable("rows have unequal lengths".into()));
        }
        Self::new(rows, cols, grid.into_iter().flatten().collect())
    }

    /// Replaces the category labels.
    pub fn with_codes(mut self, row_codes: Vec<i64>, col_codes: Vec<i64>) -> Result<Self> {
        if row_codes.len() != self.rows || col_codes.len() != self.cols {
            return Err(Error::Shape("category labels do not match table shape".into()));
        }
        self.row_codes = row_codes;
        self.col_codes = col_codes;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_codes(&self) -> &[i64] {
        &self.row_codes
    }

    pub fn col_codes(&self) -> &[i64] {
        &self.col_codes
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.count(i, j)).sum())
            .collect()
    }

    /// True when every row and column has at least one observation.
    pub fn is_collapsed(&self) -> bool {
        self.row_sums().iter().all(|&n| n > 0) && self.col_sums().iter().all(|&n| n > 0)
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        Self {
            counts: self.counts.iter().map(|&n| n * factor).collect(),
            ..self.clone()
        }
    }

    /// Reverses the category order of the column variable.
    pub fn reverse_cols(&self) -> Self {
        let mut counts = Vec::with_capacity(self.counts.len());
        for row in self.counts.chunks(self.cols) {
            counts.extend(row.iter().rev());
        }
        Self {
            counts,
            col_codes: self.col_codes.iter().rev().copied().collect(),
            ..self.clone()
        }
    }

    /// Reverses the category order of the row variable.
    pub fn reverse_rows(&self) -> Self {
        let counts = self.counts.chunks(self.cols).rev().flatten().copied().collect();
        Self {
            counts,
            row_codes: self.row_codes.iter().rev().copied().collect(),
            ..self.clone()
        }
    }

    pub fn transpose(&self) -> Self {
        let counts = (0..self.cols)
            .flat_map(|j| (0..self.rows).map(move |i| (i, j)))
            .map(|(i, j)| self.count(i, j))
            .collect();
        Self {
            rows: self.cols,
            cols: self.rows,
            counts,
            row_codes: self.col_codes.clone(),
            col_codes: self.row_codes.clone(),
        }
    }
}

/// Which original categories survive [`collapse_empty`], as old indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryMap {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// Cell proportions with marginals and cumulative marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionTable {
    rows: usize,
    cols: usize,
    cells: Vec<f64>,
    row_marginals: Vec<f64>,
    col_marginals: Vec<f64>,
    cum_rows: Vec<f64>,
    cum_cols: Vec<f64>,
}

impl ProportionTable {
    /// Builds a table from row-major probabilities, e.g. an exact population table.
    pub fn from_probabilities(rows: usize, cols: usize, cells: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(Error::InvalidTable("probability grid has the wrong size".into()));
        }
        if cells.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidTable("cell probabilities must be nonnegative".into()));
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidTable(format!("cell probabilities sum to {total}")));
        }
        let row_marginals: Vec<f64> = cells.chunks(cols).map(|r| r.iter().sum()).collect();
        let col_marginals: Vec<f64> = (0..cols)
            .map(|j| (0..rows).map(|i| cells[i * cols + j]).sum())
            .collect();
        let cum_rows = cumulative(&row_marginals);
        let cum_cols = cumulative(&col_marginals);
        Ok(Self {
            rows,
            cols,
            cells,
            row_marginals,
            col_marginals,
            cum_rows,
            cum_cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.cols + j]
    }

    /// Row-stacked cell proportions.
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn row_marginals(&self) -> &[f64] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[f64] {
        &self.col_marginals
    }

    pub fn cum_rows(&self) -> &[f64] {
        &self.cum_rows
    }

    pub fn cum_cols(&self) -> &[f64] {
        &self.cum_cols
    }

    /// Pearson correlation of the integer codes 1..s and 1..r under the cell proportions.
    pub fn code_correlation(&self) -> Result<f64> {
        let code = |k: usize| (k + 1) as f64;
        let mx: f64 = self.row_marginals.iter().enumerate().map(|(i, p)| p * code(i)).sum();
        let my: f64 = self.col_marginals.iter().enumerate().map(|(j, p)| p * code(j)).sum();
        let vx: f64 = self
            .row_marginals
            .iter()
            .enumerate()
            .map(|(i, p)| p * (code(i) - mx).powi(2))
            .sum();
        let vy: f64 = self
            .col_marginals
            .iter()
            .enumerate()
            .map(|(j, p)| p * (code(j) - my).powi(2))
            .sum();
        if !(vx > 0.0) {
            return Err(Error::ConstantSeries("row"));
        }
        if !(vy > 0.0) {
            return Err(Error::ConstantSeries("column"));
        }
        let mut cov = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                cov += self.get(i, j) * (code(i) - mx) * (code(j) - my);
            }
        }
        Ok((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
    }
}

fn cumulative(marginals: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = marginals
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Interior cut points `a_1 < … < a_{s-1}`; `a_0 = -∞` and `a_s = +∞` are implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    cuts: Vec<f64>,
}

impl Thresholds {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        let finite = cuts.iter().all(|c| c.is_finite());
        let increasing = cuts.windows(2).all(|w| w[0] < w[1]);
        if !finite || !increasing {
            return Err(Error::InvalidThresholds);
        }
        Ok(Self { cuts })
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Number of categories, one more than the number of cut points.
    pub fn categories(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Lower bound of category `i` (0-based).
    pub fn lower(&self, i: usize) -> f64 {
        if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.cuts[i - 1]
        }
    }

    /// Upper bound of category `i` (0-based).
    pub fn upper(&self, i: usize) -> f64 {
        self.cuts.get(i).copied().unwrap_or(f64::INFINITY)
    }

    pub fn interval(&self, i: usize) -> Interval {
        Interval::new(self.lower(i), self.upper(i)).expect("thresholds are strictly increasing")
    }

    /// All cut points including the two infinite ends.
    pub fn bounds(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.cuts.len() + 2);
        b.push(f64::NEG_INFINITY);
        b.extend_from_slice(&self.cuts);
        b.push(f64::INFINITY);
        b
    }

    /// Category index (0-based) of `z`, right-closed: `a_{i-1} < z <= a_i`.
    pub fn classify(&self, z: f64) -> usize {
        self.cuts.partition_point(|&c| c < z)
    }
}

/// Per-category counts and means of the standardized continuous variable.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSummary {
    codes: Vec<i64>,
    counts: Vec<u64>,
    means: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
}

impl GroupedSummary {
    /// Builds a summary directly, e.g. from published category means of an
    /// already standardized variable.
    pub fn from_parts(counts: Vec<u64>, means: Vec<f64>) -> Result<Self> {
        if counts.len() != means.len() {
            return Err(Error::LengthMismatch(counts.len(), means.len()));
        }
        if let Some(i) = counts.iter().position(|&n| n == 0) {
            return Err(Error::EmptyCategory(i));
        }
        if counts.len() < 2 {
            return Err(Error::TooFewCategories {
                axis: "ordinal",
                found: counts.len(),
            });
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("category mean"));
        }
        Ok(Self {
            codes: (1..=counts.len() as i64).collect(),
            counts,
            means,
            y_mean: 0.0,
            y_sd: 1.0,
        })
    }

    pub fn categories(&self) -> usize {
        self.counts.len()
    }

    /// Original codes of the observed categories, in increasing order.
    pub fn codes(&self) -> &[i64] {
        &self.codes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Mean of the standardized continuous variable within each category.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Sample mean of the raw continuous variable.
    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    /// Sample standard deviation (denominator N-1) of the raw continuous variable.
    pub fn y_sd(&self) -> f64 {
        self.y_sd
    }

    pub fn proportions(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn cumulative_proportions(&self) -> Vec<f64> {
        cumulative(&self.proportions())
    }

    /// Pearson correlation between the category index and the continuous variable.
    pub fn code_correlation(&self) -> Result<f64> {
        let n = self.total() as f64;
        let code = |k: usize| (k + 1) as f64;
        let mx: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 * code(i))
            .sum::<f64>()
            / n;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (i, (&c, &m)) in self.counts.iter().zip(&self.means).enumerate() {
            let d = code(i) - mx;
            sxx += c as f64 * d * d;
            sxy += c as f64 * d * m;
        }
        // standardized y has sum of squares N - 1
        let syy = n - 1.0;
        if !(sxx > 0.0) || !(syy > 0.0) {
            return Err(Error::ConstantSeries("ordinal"));
        }
        Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Maps ordinal codes to dense 0-based indices; returns the indices and the sorted distinct codes.
pub fn densify(codes: &[i64]) -> (Vec<usize>, Vec<i64>) {
    let distinct: BTreeMap<i64, usize> = codes.iter().map(|&c| (c, 0)).collect();
    let levels: Vec<i64> = distinct.keys().copied().collect();
    let index: BTreeMap<i64, usize> = levels.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    (codes.iter().map(|c| index[c]).collect(), levels)
}

/// Cross-tabulates two ordinal series. Unobserved codes do not get a row or column.
pub fn crosstab(x: &[i64], y: &[i64]) -> Result<ContingencyTable> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewObservations { need: 2, got: x.len() });
    }
    let (xi, x_codes) = densify(x);
    let (yi, y_codes) = densify(y);
    if x_codes.len() < 2 {
        return Err(Error::TooFewCategories {
            axis: "row",
            found: x_codes.len(),
        });
    }
    if y_codes.len() < 2 {
        return Err(Error::TooFewCategories {
            axis: "column",
            found: y_codes.len(),
        });
    }
    let cols = y_codes.len();
    let mut counts = vec![0u64; x_codes.len() * cols];
    for (&i, &j) in xi.iter().zip(&yi) {
        counts[i * cols + j] += 1;
    }
    ContingencyTable::new(x_codes.len(), cols, counts)?.with_codes(x_codes, y_codes)
}

/// Cell proportions `n_ij / N` with marginals.
pub fn proportions(t: &ContingencyTable) -> ProportionTable {
    let n = t.total() as f64;
    let cells = t.counts.iter().map(|&c| c as f64 / n).collect();
    ProportionTable::from_probabilities(t.rows, t.cols, cells)
        .expect("a table with positive total has valid proportions")
}

/// Thresholds `a_i = Φ⁻¹(CP_i)` from cumulative marginal proportions.
pub fn thresholds_from_marginals(cum: &[f64]) -> Result<Thresholds> {
    let Some((&last, interior)) = cum.split_last() else {
        return Err(Error::InvalidCumulative);
    };
    if (last - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidCumulative);
    }
    let mut prev = 0.0;
    let mut cuts = Vec::with_capacity(interior.len());
    for (i, &cp) in interior.iter().enumerate() {
        if !(cp > prev) {
            return Err(if cp == prev {
                Error::EmptyCategory(i)
            } else {
                Error::InvalidCumulative
            });
        }
        if cp >= 1.0 {
            return Err(Error::EmptyCategory(i + 1));
        }
        cuts.push(quantile(cp)?);
        prev = cp;
    }
    Thresholds::new(cuts)
}

/// Groups a standardized continuous variable by ordinal category.
pub fn grouped_summary(x: &[i64], y: &[f64]) -> Result<GroupedSummary> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = y.len();
    if n < 2 {
        return Err(Error::TooFewObservations { need: 2, got: n });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("continuous"));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::ConstantSeries("continuous"));
    }
    let sd = var.sqrt();
    let (xi, codes) = densify(x);
    if codes.len() < 2 {
        return Err(Error::TooFewCategories {
            axis: "ordinal",
            found: codes.len(),
        });
    }
    let mut counts = vec![0u64; codes.len()];
    let mut sums = vec![0.0; codes.len()];
    for (&i, &v) in xi.iter().zip(y) {
        counts[i] += 1;
        sums[i] += (v - mean) / sd;
    }
    let means = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    Ok(GroupedSummary {
        codes,
        counts,
        means,
        y_mean: mean,
        y_sd: sd,
    })
}

/// Multinomial covariance of the row-stacked cell proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionCovariance(DMatrix<f64>);

impl ProportionCovariance {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// `B_kl = P_k(δ_kl - P_l) / N` over row-stacked cells.
pub fn proportion_covariance(p: &ProportionTable, n: f64) -> Result<ProportionCovariance> {
    if !(n > 0.0) {
        return Err(Error::TooFewObservations { need: 1, got: 0 });
    }
    let cells = p.cells();
    let m = cells.len();
    let b = DMatrix::from_fn(m, m, |k, l| {
        let delta = if k == l { cells[k] } else { 0.0 };
        (delta - cells[k] * cells[l]) / n
    });
    Ok(ProportionCovariance(b))
}

/// Removes rows and columns without observations.
pub fn collapse_empty(t: &ContingencyTable) -> Result<(ContingencyTable, CategoryMap)> {
    let keep_rows: Vec<usize> = t
        .row_sums()
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(i, _)| i)
        .collect();
    let keep_cols: Vec<usize> = t
        .col_sums()
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(j, _)| j)
        .collect();
    if keep_rows.len() < 2 || keep_cols.len() < 2 {
        return Err(Error::InvalidTable(format!(
            "collapses to {}x{}, below 2x2",
            keep_rows.len(),
            keep_cols.len()
        )));
    }
    let counts = keep_rows
        .iter()
        .flat_map(|&i| keep_cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| t.count(i, j))
        .collect();
    let row_codes = keep_rows.iter().map(|&i| t.row_codes[i]).collect();
    let col_codes = keep_cols.iter().map(|&j| t.col_codes[j]).collect();
    let table = ContingencyTable::new(keep_rows.len(), keep_cols.len(), counts)?.with_codes(row_codes, col_codes)?;
    Ok((
        table,
        CategoryMap {
            rows: keep_rows,
            cols: keep_cols,
        },
    ))
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::TooFewObservations { need: 3, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::ConstantSeries("first"));
    }
    if !(syy > 0.0) {
        return Err(Error::ConstantSeries("second"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
