//! Numeric CSV tables.

use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context};
use hyperrect::{Matrix, MultiTargetDataset};

/// A fully numeric CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Parses CSV text. Errors name the line and column; empty cells are
    /// rejected as missing values.
    pub fn read<R: Read>(input: R) -> anyhow::Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers: Vec<String> = reader
            .headers()
            .context("reading the header row")?
            .iter()
            .map(str::to_owned)
            .collect();
        if headers.is_empty() || headers.iter().any(String::is_empty) {
            bail!("line 1: header row has an empty column name");
        }
        for (i, h) in headers.iter().enumerate() {
            if headers[..i].contains(h) {
                bail!("line 1: duplicate column {h:?}");
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| match e.position() {
                Some(p) => anyhow!("line {}: {e}", p.line()),
                None => anyhow!(e),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let row = record
                .iter()
                .zip(&headers)
                .map(|(cell, name)| {
                    if cell.is_empty() {
                        bail!("line {line}, column {name:?}: missing value");
                    }
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| anyhow!("line {line}, column {name:?}: {cell:?} is not a number"))?;
                    if !v.is_finite() {
                        bail!("line {line}, column {name:?}: non-finite value {cell:?}");
                    }
                    Ok(v)
                })
                .collect::<anyhow::Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            bail!("no data rows");
        }
        Ok(Self { headers, rows })
    }

    pub fn read_path(path: &std::path::Path) -> anyhow::Result<Self> {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read(file).with_context(|| format!("reading {}", path.display()))
    }

    pub fn column_index(&self, name: &str) -> anyhow::Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("column {name:?} not found (columns: {})", self.headers.join(", ")))
    }

    /// Selects the given columns, in order, into a row-major matrix.
    pub fn select(&self, names: &[String]) -> anyhow::Result<Matrix> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let data: Vec<f64> = self.rows.iter().flat_map(|r| idx.iter().map(move |&i| r[i])).collect();
        Ok(Matrix::from_row_major(self.rows.len(), idx.len(), data)?)
    }

    /// Splits into a dataset with `targets` as responses and every other
    /// column as a covariate. Returns the covariate names too.
    pub fn dataset(&self, targets: &[String]) -> anyhow::Result<(MultiTargetDataset, Vec<String>)> {
        if targets.is_empty() {
            bail!("no target columns given");
        }
        for t in targets {
            self.column_index(t)?;
        }
        let covariates: Vec<String> = self.headers.iter().filter(|h| !targets.contains(h)).cloned().collect();
        if covariates.is_empty() {
            bail!("no covariate columns left after removing the targets");
        }
        let data = MultiTargetDataset::new(self.select(&covariates)?, self.select(targets)?)?;
        Ok((data, covariates))
    }
}

/// Writes a header and rows of floats in shortest round-trip form.
pub fn write_rows<W: Write>(
    out: W,
    headers: &[String],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(headers)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
