//! `n × p` tables of angles, stored row-major, and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use crate::circular::wrap_angle;
use crate::error::{Error, Result};

/// `n` samples of `p` phases, every entry in `[-π, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl PhaseDataset {
    /// Build from row-major values, wrapping each entry.
    pub fn from_rows_wrapped(p: usize, values: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("dataset needs at least one column".into()));
        }
        if values.len() % p != 0 {
            return Err(Error::Dimension { expected: p, got: values.len() % p });
        }
        let mut values = values;
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(Error::NonFinite(*v));
            }
            *v = wrap_angle(*v);
        }
        Ok(Self { n: values.len() / p, p, values })
    }

    /// Crate-internal constructor for values already known to be wrapped.
    pub(crate) fn from_wrapped_unchecked(p: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len() % p, 0);
        Self { n: values.len() / p, p, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.p..(k + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.p + i]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Wrapped differences `y_j - y_i` over all samples.
    pub fn differences(&self, i: usize, j: usize) -> Vec<f64> {
        self.rows().map(|r| wrap_angle(r[j] - r[i])).collect()
    }

    /// Stack datasets with the same column count.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a PhaseDataset>) -> Result<Self> {
        let mut p = None;
        let mut values = Vec::new();
        for d in parts {
            match p {
                None => p = Some(d.p),
                Some(q) if q != d.p => return Err(Error::Dimension { expected: q, got: d.p }),
                _ => {}
            }
            values.extend_from_slice(&d.values);
        }
        let p = p.ok_or_else(|| Error::InsufficientData("no datasets to concatenate".into()))?;
        Ok(Self::from_wrapped_unchecked(p, values))
    }

    /// Keep every `stride`-th row, starting at the first.
    pub fn decimate(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let values = self.rows().step_by(stride).flatten().copied().collect();
        Self::from_wrapped_unchecked(self.p, values)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_matrix_csv(w, self.p, &self.values)
    }

    /// Read a headerless (or single-header) CSV of radians; values are wrapped.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (p, values) = read_matrix_csv(r)?;
        Self::from_rows_wrapped(p, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Write a row-major matrix as CSV using shortest round-trip formatting.
pub(crate) fn write_matrix_csv<W: Write>(w: W, cols: usize, values: &[f64]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in values.chunks_exact(cols) {
        wr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

/// Read a numeric CSV; a first row that does not parse is taken as a header.
pub(crate) fn read_matrix_csv<R: Read>(r: R) -> Result<(usize, Vec<f64>)> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut cols = None;
    let mut values = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("line {}: {e}", line + 1))),
        };
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Parse(format!(
                    "line {}: expected {c} columns, found {}",
                    line + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
    }
    let cols = cols.ok_or_else(|| Error::InsufficientData("empty CSV".into()))?;
    Ok((cols, values))
}
