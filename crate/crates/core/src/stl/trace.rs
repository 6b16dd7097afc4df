//! Uniformly sampled multi-dimensional signals.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StlError;

/// Tolerance used when validating that CSV time stamps lie on a uniform grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Uniform time grid: sample `k` sits at time `k * dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, steps: usize) -> Result<Self, StlError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(StlError::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(StlError::InvalidGrid("grid needs at least one sample".into()));
        }
        Ok(Self { dt, steps })
    }

    /// Grid covering `[0, horizon]` with step `dt`, i.e. `horizon / dt + 1` samples.
    pub fn with_horizon(dt: f64, horizon: f64) -> Result<Self, StlError> {
        let n = (horizon / dt + GRID_TOLERANCE).floor();
        if !(n.is_finite() && n >= 0.0) {
            return Err(StlError::InvalidGrid(format!("bad horizon {horizon} for dt {dt}")));
        }
        Self::new(dt, n as usize + 1)
    }

    pub fn horizon(&self) -> f64 {
        (self.steps - 1) as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub(crate) fn validate(&self) -> Result<(), StlError> {
        Self::new(self.dt, self.steps).map(|_| ())
    }
}

/// A sampled vector-valued signal with named dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    grid: TimeGrid,
    dims: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(grid: TimeGrid, dims: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, StlError> {
        grid.validate()?;
        for (i, d) in dims.iter().enumerate() {
            if dims[..i].contains(d) {
                return Err(StlError::DuplicateDimension(d.clone()));
            }
        }
        if rows.len() != grid.steps {
            return Err(StlError::ShapeMismatch(format!(
                "{} rows for a grid of {} samples",
                rows.len(),
                grid.steps
            )));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != dims.len()) {
            return Err(StlError::ShapeMismatch(format!(
                "row {bad} has {} values, expected {}",
                rows[bad].len(),
                dims.len()
            )));
        }
        Ok(Self { grid, dims, rows })
    }

    /// Builds a trace from named columns of equal length.
    pub fn from_columns<S: Into<String>>(
        grid: TimeGrid,
        columns: Vec<(S, Vec<f64>)>,
    ) -> Result<Self, StlError> {
        let mut dims = Vec::with_capacity(columns.len());
        let mut cols = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            dims.push(name.into());
            cols.push(col);
        }
        if let Some(c) = cols.iter().position(|c| c.len() != grid.steps) {
            return Err(StlError::ShapeMismatch(format!(
                "column {} has {} samples, grid has {}",
                dims[c],
                cols[c].len(),
                grid.steps
            )));
        }
        let rows = (0..grid.steps)
            .map(|k| cols.iter().map(|c| c[k]).collect())
            .collect();
        Self::new(grid, dims, rows)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim_index(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d == name)
    }

    pub fn value(&self, k: usize, dim: usize) -> f64 {
        self.rows[k][dim]
    }

    pub fn get(&self, k: usize, name: &str) -> Option<f64> {
        self.dim_index(name).map(|d| self.rows[k][d])
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let d = self.dim_index(name)?;
        Some(self.rows.iter().map(|r| r[d]).collect())
    }

    /// Concatenates the dimensions of two traces on the same grid.
    pub fn join(&self, other: &Trace) -> Result<Trace, StlError> {
        if !same_grid(self.grid, other.grid) {
            return Err(StlError::ShapeMismatch("traces are on different grids".into()));
        }
        let mut dims = self.dims.clone();
        dims.extend(other.dims.iter().cloned());
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        Trace::new(self.grid, dims, rows)
    }

    /// Reads a trace from CSV with header `t,dim1,dim2,...`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Trace, StlError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| StlError::Csv(e.to_string()))?.clone();
        if header.get(0) != Some("t") {
            return Err(StlError::Csv("first column must be named `t`".into()));
        }
        let dims: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| StlError::Csv(e.to_string()))?;
            let mut vals = Vec::with_capacity(rec.len());
            for field in rec.iter() {
                let v: f64 = field.parse().map_err(|_| {
                    StlError::Csv(format!("row {}: `{field}` is not a number", line + 1))
                })?;
                vals.push(v);
            }
            if vals.len() != dims.len() + 1 {
                return Err(StlError::Csv(format!(
                    "row {} has {} fields, header has {}",
                    line + 1,
                    vals.len(),
                    dims.len() + 1
                )));
            }
            times.push(vals[0]);
            rows.push(vals[1..].to_vec());
        }
        if times.len() < 2 {
            return Err(StlError::Csv("need at least two rows to infer dt".into()));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(StlError::Csv("time stamps must increase".into()));
        }
        for (k, t) in times.iter().enumerate() {
            let expected = times[0] + k as f64 * dt;
            if (t - expected).abs() > GRID_TOLERANCE {
                return Err(StlError::Csv(format!(
                    "row {}: time {t} is off the uniform grid (expected {expected})",
                    k + 1
                )));
            }
        }
        Trace::new(TimeGrid::new(dt, rows.len())?, dims, rows)
    }

    pub fn read_csv_path(path: &Path) -> Result<Trace, StlError> {
        let file = std::fs::File::open(path)
            .map_err(|e| StlError::Io(format!("{}: {e}", path.display())))?;
        Self::read_csv(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), StlError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(self.dims.iter().cloned());
        w.write_record(&header).map_err(|e| StlError::Csv(e.to_string()))?;
        for (k, row) in self.rows.iter().enumerate() {
            let mut rec = vec![format!("{}", self.grid.time(k))];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec).map_err(|e| StlError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| StlError::Io(e.to_string()))
    }
}

pub(crate) fn same_grid(a: TimeGrid, b: TimeGrid) -> bool {
    a.steps == b.steps && (a.dt - b.dt).abs() <= GRID_TOLERANCE
}
