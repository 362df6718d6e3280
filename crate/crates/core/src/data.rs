//! The `n x p` observation matrix and its CSV form.
//!
//! CSV files carry a header `x1,...,xp` and one observation per line. Values
//! are written with the shortest decimal that round-trips to the same `f64`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Rows are i.i.d. observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, found: data.len() });
        }
        Ok(Self { n, p, data })
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self { n, p, data: vec![0.0; n * p] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch { expected: p, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, p, data })
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let p = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        if let Some(c) = cols.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: c.len() });
        }
        let mut m = Self::zeros(n, p);
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.p + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.p).map(|j| self.column(j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix holding the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        DataMatrix { n: rows.len(), p: self.p, data }
    }

    pub fn select_columns(&self, cols: &[usize]) -> DataMatrix {
        let mut data = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        DataMatrix { n: self.n, p: cols.len(), data }
    }

    pub fn map_columns(&self, mut f: impl FnMut(usize, f64) -> f64) -> DataMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = f(j, *v);
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record((1..=self.p).map(|j| format!("x{j}")))?;
        for i in 0..self.n {
            wtr.write_record(self.row(i).iter().map(|&v| format_f64(v)))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let p = rdr.headers()?.len();
        if p == 0 {
            return Err(Error::Data("CSV has no columns".into()));
        }
        let mut data = Vec::new();
        let mut n = 0;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != p {
                return Err(Error::Data(format!(
                    "row {} has {} fields, expected {p}",
                    line + 1,
                    rec.len()
                )));
            }
            for field in rec.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Data(format!("row {}: cannot parse {field:?} as a number", line + 1))
                })?;
                if !v.is_finite() {
                    return Err(Error::Data(format!("row {}: non-finite value", line + 1)));
                }
                data.push(v);
            }
            n += 1;
        }
        Ok(Self { n, p, data })
    }

    pub fn to_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn from_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Shortest round-trip decimal; `NaN`, `inf`, `-inf` for non-finite values.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}
