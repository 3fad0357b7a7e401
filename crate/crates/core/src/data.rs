//! Synthetic Gaussian samples and CSV input/output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// Mean vector with the first `j` of `p` coordinates set to `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftSpec {
    pub p: usize,
    pub j: usize,
    pub epsilon: f64,
}

impl MeanShiftSpec {
    pub fn new(p: usize, j: usize, epsilon: f64) -> Result<Self> {
        if j > p {
            return Err(Error::InvalidShape(format!(
                "cannot shift {j} coordinates of a {p}-dimensional mean"
            )));
        }
        if !epsilon.is_finite() {
            return Err(Error::NonFinite { row: 0, col: 0 });
        }
        Ok(Self { p, j, epsilon })
    }

    pub fn zero(p: usize) -> Self {
        Self { p, j: 0, epsilon: 0.0 }
    }

    pub fn mean_vector(&self) -> Vec<f64> {
        (0..self.p)
            .map(|k| if k < self.j { self.epsilon } else { 0.0 })
            .collect()
    }
}

/// Standard normal variates by the Marsaglia polar method over a ChaCha8
/// uniform stream. Variates come in pairs; the second is cached.
struct PolarNormal {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl PolarNormal {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn next(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        loop {
            let u = 2.0 * self.rng.random::<f64>() - 1.0;
            let v = 2.0 * self.rng.random::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}

/// `n x p` matrix of independent unit-variance normals, row-major, with the
/// given mean (zero when `mean` is `None`).
pub fn sample_gaussian(
    n: usize,
    p: usize,
    mean: Option<&MeanShiftSpec>,
    seed: u64,
) -> Result<DataMatrix> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidShape(format!(
            "cannot sample a {n}x{p} matrix"
        )));
    }
    let mu = match mean {
        Some(spec) if spec.p != p => {
            return Err(Error::DimensionMismatch {
                what: "mean-shift dimension differs from p",
                left: spec.p,
                right: p,
            })
        }
        Some(spec) => spec.mean_vector(),
        None => vec![0.0; p],
    };
    let mut gen = PolarNormal::new(seed);
    let mut values = Vec::with_capacity(n * p);
    for _ in 0..n {
        for m in &mu {
            values.push(m + gen.next());
        }
    }
    DataMatrix::new(n, p, values)
}

/// A loaded CSV matrix plus its header, if the first row was non-numeric.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub matrix: DataMatrix,
    pub header: Option<Vec<String>>,
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a rectangular numeric CSV (rows are samples). A first row with any
/// non-numeric cell is taken as a header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<CsvData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };

    let mut header = None;
    let mut cols = 0usize;
    let mut rows = 0usize;
    let mut values = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = idx + 1;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if idx == 0 && record.iter().any(|c| parse_cell(c).is_none()) {
            header = Some(record.iter().map(str::to_owned).collect::<Vec<_>>());
            cols = record.len();
            continue;
        }
        if cols == 0 {
            cols = record.len();
        } else if record.len() != cols {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row: line,
                expected: cols,
                found: record.len(),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v = parse_cell(cell).ok_or_else(|| Error::ParseCell {
                path: path.to_path_buf(),
                row: line,
                col: c + 1,
                value: cell.to_owned(),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    Ok(CsvData {
        matrix: DataMatrix::new(rows, cols, values)?,
        header,
    })
}

/// Writes one row per sample using the shortest decimal form that parses back
/// to the same `f64`.
pub fn save_csv(matrix: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    save_csv_with_header(matrix, None, path)
}

pub fn save_csv_with_header(
    matrix: &DataMatrix,
    header: Option<&[String]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    if let Some(h) = header {
        writeln!(out, "{}", h.join(",")).map_err(io_err)?;
    }
    for i in 0..matrix.rows() {
        let mut first = true;
        for v in matrix.row(i) {
            if !first {
                out.write_all(b",").map_err(io_err)?;
            }
            first = false;
            write!(out, "{v:?}").map_err(io_err)?;
        }
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
