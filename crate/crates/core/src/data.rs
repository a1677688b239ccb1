//! Row-major sample storage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairs `(x_i, y_i)` with `x_i` of fixed dimension, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            xs: Vec::new(),
            ys: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[(Vec<f64>, f64)]) -> Result<Self> {
        let dim = rows.first().map(|(x, _)| x.len()).unwrap_or(0);
        let mut data = Self::new(dim);
        for (x, y) in rows {
            data.push(x, *y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                got: x.len(),
            });
        }
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn ys_mut(&mut self) -> &mut [f64] {
        &mut self.ys
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.x(i), self.y(i)))
    }

    /// Keeps only rows whose input lies in `[0, 1]^d`.
    pub fn restrict_unit_cube(&self) -> Dataset {
        let mut out = Dataset::new(self.dim);
        for (x, y) in self.iter() {
            if in_unit_cube(x) {
                out.xs.extend_from_slice(x);
                out.ys.push(y);
            }
        }
        out
    }
}

impl Dataset {
    /// Writes columns `t, y, x_1, ..., x_d` with `t` counted from 1.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "y".to_string()];
        header.extend((1..=self.dim).map(|j| format!("x_{j}")));
        w.write_record(&header)?;
        for (i, (x, y)) in self.iter().enumerate() {
            let mut row = vec![(i + 1).to_string(), y.to_string()];
            row.extend(x.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn in_unit_cube(x: &[f64]) -> bool {
    x.iter().all(|v| (0.0..=1.0).contains(v))
}
