//! CSV ingestion with per-column kinds.
//!
//! A column whose present values all parse as integers is ordinal, one whose
//! values all parse as numbers is continuous. Empty cells and `NA` are
//! missing. A schema can override the detected kind of any column.

use std::fmt;
use std::fs::File;
use std::io::{self, Read};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Ordinal,
    Continuous,
    Ignore,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Kind::Ordinal => "ordinal",
            Kind::Continuous => "continuous",
            Kind::Ignore => "ignore",
        })
    }
}

impl FromStr for Kind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ordinal" => Ok(Kind::Ordinal),
            "continuous" => Ok(Kind::Continuous),
            "ignore" => Ok(Kind::Ignore),
            other => Err(CliError::Usage(format!(
                "unknown column kind `{other}` (expected ordinal, continuous or ignore)"
            ))),
        }
    }
}

/// Declared kinds for named columns; columns not listed are detected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schema {
    entries: Vec<(String, Kind)>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    /// Later declarations for the same column win.
    pub fn declare(&mut self, name: impl Into<String>, kind: Kind) {
        let name = name.into();
        self.entries.retain(|(n, _)| *n != name);
        self.entries.push((name, kind));
    }

    /// Parses `name=kind`.
    pub fn declare_str(&mut self, entry: &str) -> Result<()> {
        let (name, kind) = entry
            .rsplit_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected NAME=KIND, got `{entry}`")))?;
        if name.is_empty() {
            return Err(CliError::Usage(format!("missing column name in `{entry}`")));
        }
        self.declare(name, kind.parse()?);
        Ok(())
    }

    /// Reads a two-column CSV of `column,kind` rows with a header line.
    pub fn from_path(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let mut schema = Schema::new();
        for record in rdr.records() {
            let record = record?;
            match (record.get(0), record.get(1)) {
                (Some(name), Some(kind)) if !name.is_empty() => schema.declare(name, kind.parse()?),
                _ => {
                    return Err(CliError::Usage(format!(
                        "schema line {} must be `column,kind`",
                        record.position().map_or(0, |p| p.line())
                    )))
                }
            }
        }
        Ok(schema)
    }

    pub fn kind_of(&self, name: &str) -> Option<Kind> {
        self.entries.iter().find(|(n, _)| n == name).map(|&(_, k)| k)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Ordinal(Vec<Option<i64>>),
    Continuous(Vec<Option<f64>>),
    Ignored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Values,
}

impl Column {
    pub fn kind(&self) -> Kind {
        match self.values {
            Values::Ordinal(_) => Kind::Ordinal,
            Values::Continuous(_) => Kind::Continuous,
            Values::Ignored => Kind::Ignore,
        }
    }

    pub fn is_present(&self, row: usize) -> bool {
        match &self.values {
            Values::Ordinal(v) => v[row].is_some(),
            Values::Continuous(v) => v[row].is_some(),
            Values::Ignored => false,
        }
    }

    pub fn present_count(&self) -> usize {
        match &self.values {
            Values::Ordinal(v) => v.iter().flatten().count(),
            Values::Continuous(v) => v.iter().flatten().count(),
            Values::Ignored => 0,
        }
    }

    /// Values at the given rows, as codes. Panics on a missing entry.
    pub fn codes_at(&self, rows: &[usize]) -> Option<Vec<i64>> {
        match &self.values {
            Values::Ordinal(v) => Some(rows.iter().map(|&i| v[i].expect("row is present")).collect()),
            _ => None,
        }
    }

    /// Values at the given rows as reals; ordinal codes convert exactly.
    pub fn reals_at(&self, rows: &[usize]) -> Option<Vec<f64>> {
        match &self.values {
            Values::Ordinal(v) => Some(rows.iter().map(|&i| v[i].expect("row is present") as f64).collect()),
            Values::Continuous(v) => Some(rows.iter().map(|&i| v[i].expect("row is present")).collect()),
            Values::Ignored => None,
        }
    }

    /// Whether at least two distinct values are present.
    pub fn varies(&self) -> bool {
        match &self.values {
            Values::Ordinal(v) => {
                let mut it = v.iter().flatten();
                it.next().is_some_and(|first| it.any(|x| x != first))
            }
            Values::Continuous(v) => {
                let mut it = v.iter().flatten();
                it.next().is_some_and(|first| it.any(|x| x != first))
            }
            Values::Ignored => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    rows: usize,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

impl Dataset {
    pub fn from_path(path: &Path, schema: &Schema) -> Result<Self> {
        let io_err = |source| CliError::Io {
            path: path.display().to_string(),
            source,
        };
        if path.as_os_str() == "-" {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf).map_err(io_err)?;
            return Self::from_reader(buf.as_slice(), schema);
        }
        Self::from_reader(File::open(path).map_err(io_err)?, schema)
    }

    pub fn from_reader<R: Read>(rdr: R, schema: &Schema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(CliError::Data("CSV has no header row".into()));
        }
        for (k, name) in headers.iter().enumerate() {
            if headers[..k].contains(name) {
                return Err(CliError::Data(format!("duplicate column `{name}`")));
            }
        }
        if let Some(unknown) = schema.names().find(|n| !headers.iter().any(|h| h == n)) {
            return Err(CliError::Usage(format!("schema names unknown column `{unknown}`")));
        }

        let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for record in rdr.records() {
            let record = record?;
            for (col, cell) in raw.iter_mut().zip(record.iter()) {
                col.push(cell.to_owned());
            }
        }
        let rows = raw[0].len();
        let columns = headers
            .into_iter()
            .zip(raw)
            .map(|(name, cells)| {
                let values = parse_column(&name, &cells, schema.kind_of(&name))?;
                Ok(Column { name, values })
            })
            .collect::<Result<_>>()?;
        Ok(Self { columns, rows })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| CliError::Data(format!("no column named `{name}`")))
    }
}

fn parse_column(name: &str, cells: &[String], declared: Option<Kind>) -> Result<Values> {
    let ints = || -> Option<Vec<Option<i64>>> {
        cells
            .iter()
            .map(|c| {
                if is_missing(c) {
                    Some(None)
                } else {
                    c.parse().ok().map(Some)
                }
            })
            .collect()
    };
    let reals = || -> Option<Vec<Option<f64>>> {
        cells
            .iter()
            .map(|c| {
                if is_missing(c) {
                    return Some(None);
                }
                c.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
            })
            .collect()
    };
    match declared {
        Some(Kind::Ignore) => Ok(Values::Ignored),
        Some(Kind::Ordinal) => ints().map(Values::Ordinal).ok_or_else(|| {
            CliError::Data(format!(
                "column `{name}` is declared ordinal but holds non-integer values"
            ))
        }),
        Some(Kind::Continuous) => reals().map(Values::Continuous).ok_or_else(|| {
            CliError::Data(format!(
                "column `{name}` is declared continuous but holds non-numeric values"
            ))
        }),
        None => ints()
            .map(Values::Ordinal)
            .or_else(|| reals().map(Values::Continuous))
            .ok_or_else(|| {
                CliError::Data(format!(
                    "column `{name}` holds non-numeric values; declare it `{name}=ignore` to skip it"
                ))
            }),
    }
}

/// Rows where both columns are present.
pub fn complete_rows(a: &Column, b: &Column, rows: usize) -> Vec<usize> {
    (0..rows).filter(|&i| a.is_present(i) && b.is_present(i)).collect()
}
