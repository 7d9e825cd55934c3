use std::io::BufRead;

use crate::error::{Error, Result};

/// Tabulated radial potential `W(|ξ|, |t|)` with bilinear interpolation.
///
/// Outside the table, `|ξ|` is clamped to the last column and `W` is zero
/// for `|t|` beyond the last row.
#[derive(Debug, Clone, PartialEq)]
pub struct TablePotential {
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    /// Row-major, `values[i * r.len() + j] = W(r_j, t_i)`.
    pub values: Vec<f64>,
}

fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    if x <= grid[0] {
        return (0, 0.0);
    }
    let last = grid.len() - 1;
    if x >= grid[last] {
        return (last - 1, 1.0);
    }
    let hi = grid.partition_point(|g| *g <= x);
    let lo = hi - 1;
    (lo, (x - grid[lo]) / (grid[hi] - grid[lo]))
}

impl TablePotential {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.r.len() < 2 || self.t.len() < 2 {
            return Err(Error::Config("potential table needs at least 2 rows and 2 columns".into()));
        }
        if self.values.len() != self.r.len() * self.t.len() {
            return Err(Error::Config("potential table has ragged rows".into()));
        }
        for g in [&self.r, &self.t] {
            if g[0] != 0.0 || g.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config(
                    "potential table axes must start at 0 and increase strictly".into(),
                ));
            }
        }
        if let Some(bad) = self.values.iter().position(|v| !v.is_finite()) {
            let (i, j) = (bad / self.r.len(), bad % self.r.len());
            return Err(Error::Config(format!(
                "potential table is singular at r = {}, t = {} (diagonal singularities are not supported)",
                self.r[j], self.t[i]
            )));
        }
        Ok(())
    }

    pub fn value(&self, r: f64, t: f64) -> f64 {
        let t = t.abs();
        if t > *self.t.last().unwrap() {
            return 0.0;
        }
        let (i, ft) = locate(&self.t, t);
        let (j, fr) = locate(&self.r, r);
        let nr = self.r.len();
        let v = |a: usize, b: usize| self.values[a * nr + b];
        let lo = v(i, j) * (1.0 - fr) + v(i, j + 1) * fr;
        let hi = v(i + 1, j) * (1.0 - fr) + v(i + 1, j + 1) * fr;
        lo * (1.0 - ft) + hi * ft
    }

    /// Reads `t\r,r_0,r_1,...` followed by rows `t_i,W(r_0,t_i),...`.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let err = |msg: String| Error::Config(format!("potential table: {msg}"));
        let mut lines = input.lines().filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let head = lines
            .next()
            .ok_or_else(|| err("empty file".into()))?
            .map_err(|e| err(e.to_string()))?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| err(format!("'{s}': {e}")));
        let r = head.split(',').skip(1).map(parse).collect::<Result<Vec<_>>>()?;
        let (mut t, mut values) = (Vec::new(), Vec::new());
        for line in lines {
            let line = line.map_err(|e| err(e.to_string()))?;
            let mut fields = line.split(',');
            t.push(parse(fields.next().unwrap_or(""))?);
            let row = fields.map(parse).collect::<Result<Vec<_>>>()?;
            if row.len() != r.len() {
                return Err(err(format!("row for t = {} has {} values, expected {}", t.last().unwrap(), row.len(), r.len())));
            }
            values.extend(row);
        }
        let table = Self { r, t, values };
        table.validate()?;
        Ok(table)
    }
}
