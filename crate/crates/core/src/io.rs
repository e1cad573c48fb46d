//! CSV ingestion and emission.
//!
//! Input: comma separator, a header row, `.` decimals. An empty cell or a
//! literal `NA` is missing. Output numbers use the shortest representation
//! that parses back to the same `f64`, so emitted files round-trip exactly.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Result, RidgeError};
use crate::lowrank::MaskedMatrix;

/// Parsed numeric table; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularFile {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

/// Preprocessing applied when a table becomes a [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignOptions {
    pub intercept: bool,
    pub standardize: bool,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { intercept: true, standardize: false }
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let cell = raw.trim();
    if cell.is_empty() || cell == "NA" {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(RidgeError::InvalidInput(format!(
            "row {row}, column '{column}': cannot parse '{cell}' as a finite number"
        ))),
    }
}

impl TabularFile {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| RidgeError::InvalidInput(format!("cannot read header: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(RidgeError::invalid("missing header row"));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            // data rows are numbered from 1, the header being row 0
            let row = i + 1;
            let rec = rec.map_err(|e| RidgeError::InvalidInput(format!("row {row}: {e}")))?;
            if rec.len() != header.len() {
                return Err(RidgeError::InvalidInput(format!(
                    "row {row}: expected {} fields, found {}",
                    header.len(),
                    rec.len()
                )));
            }
            let cells = rec.iter().zip(&header).map(|(c, h)| parse_cell(c, row, h)).collect::<Result<Vec<_>>>()?;
            rows.push(cells);
        }
        if rows.is_empty() {
            return Err(RidgeError::invalid("no data rows"));
        }
        Ok(Self { header, rows })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| RidgeError::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Every cell as a dense matrix; the first missing cell is an error
    /// naming its row and column.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        for (i, r) in self.rows.iter().enumerate() {
            if let Some(j) = r.iter().position(Option::is_none) {
                return Err(RidgeError::InvalidInput(format!(
                    "row {}, column '{}': missing value",
                    i + 1,
                    self.header[j]
                )));
            }
        }
        Ok(DMatrix::from_fn(self.nrows(), self.header.len(), |i, j| self.rows[i][j].unwrap()))
    }

    /// Features (every column but `target`) and the target response, with
    /// the feature names in column order.
    pub fn design(&self, target: &str) -> Result<(DMatrix<f64>, DVector<f64>, Vec<String>)> {
        let t = self
            .column_index(target)
            .ok_or_else(|| RidgeError::InvalidInput(format!("unknown target column '{target}'")))?;
        let all = self.dense()?;
        let keep: Vec<usize> = (0..self.header.len()).filter(|&j| j != t).collect();
        if keep.is_empty() {
            return Err(RidgeError::invalid("no feature columns besides the target"));
        }
        let x = all.select_columns(&keep);
        let y = all.column(t).into_owned();
        let names = keep.iter().map(|&j| self.header[j].clone()).collect();
        Ok((x, y, names))
    }

    pub fn dataset(&self, target: &str, opts: DesignOptions) -> Result<(Dataset<f64>, Vec<String>)> {
        let (x, y, names) = self.design(target)?;
        let data = match (opts.intercept, opts.standardize) {
            (true, true) => Dataset::standardized(x, y)?,
            (true, false) => Dataset::centered(x, y)?,
            (false, false) => Dataset::new(x, y)?,
            (false, true) => {
                return Err(RidgeError::invalid("standardization requires an intercept"));
            }
        };
        Ok((data, names))
    }

    pub fn masked(&self) -> Result<MaskedMatrix<f64>> {
        MaskedMatrix::from_rows(&self.rows)
    }
}

/// Shortest round-trip form, in exponent notation outside `[1e-5, 1e16)`;
/// non-finite values print as `NA`.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        "NA".to_string()
    } else if v == 0.0 || (1e-5..1e16).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Header plus string rows, emitted as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    /// Cells of column `name`, if present.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j].as_str()).collect())
    }
}
