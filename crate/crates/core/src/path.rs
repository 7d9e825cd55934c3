//! Discretized Brownian increment paths.
//!
//! A path on the window `[-T, T]` is stored as its per-step increments
//! `x_{t_k, t_{k+1}}`, never as absolute positions, so the cocycle identity
//! `x_{su} + x_{ut} = x_{st}` holds by construction. Increments between
//! arbitrary grid nodes are partial sums of steps.

use std::io::{BufRead, Write};
use std::ops::Range;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::KahanSum;

/// Above this many steps partial sums use compensated summation.
const COMPENSATE_ABOVE: usize = 10_000;

/// Relative tolerance for recognizing a time as a grid node.
const NODE_TOL: f64 = 1e-9;

/// Uniform time grid over `[-T, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(rename = "T")]
    half_width: f64,
    dt: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(half_width: f64, dt: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config(format!("time horizon T must be positive, got {half_width}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("step size dt must be positive, got {dt}")));
        }
        let ratio = 2.0 * half_width / dt;
        let n_steps = ratio.round() as usize;
        if n_steps < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 steps, 2T/dt = {ratio}"
            )));
        }
        if (n_steps as f64 * dt - 2.0 * half_width).abs() > NODE_TOL * 2.0 * half_width {
            return Err(Error::Config(format!(
                "dt = {dt} does not divide the window length 2T = {}",
                2.0 * half_width
            )));
        }
        Ok(Self {
            half_width,
            dt,
            n_steps,
        })
    }

    /// The horizon `T`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Time of node `k`, `t_k = -T + k dt`.
    pub fn node(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.dt
    }

    /// Midpoint time of cell `k`, i.e. of the step from node `k` to `k+1`.
    pub fn cell_center(&self, k: usize) -> f64 {
        -self.half_width + (k as f64 + 0.5) * self.dt
    }

    /// Index of the grid node at time `t`.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let k = (t + self.half_width) / self.dt;
        let r = k.round();
        if (k - r).abs() > NODE_TOL * r.abs().max(1.0) || r < 0.0 || r > self.n_steps as f64 {
            return Err(Error::Argument(format!(
                "time {t} is not a node of the grid on [-{0}, {0}] with dt = {1}",
                self.half_width, self.dt
            )));
        }
        Ok(r as usize)
    }

    /// Converts a time span into a whole number of steps.
    pub fn steps_in(&self, span: f64) -> Result<usize> {
        let k = span / self.dt;
        let r = k.round();
        if r < 0.0 || (k - r).abs() > NODE_TOL * r.max(1.0) {
            return Err(Error::Argument(format!(
                "length {span} is not a multiple of dt = {}",
                self.dt
            )));
        }
        Ok(r as usize)
    }

    /// Cells (steps) covered by the grid-aligned interval.
    pub fn cells(&self, interval: Interval) -> Result<Range<usize>> {
        let lo = self.node_index(interval.start)?;
        let hi = self.node_index(interval.end)?;
        Ok(lo..hi)
    }

    pub fn window(&self) -> Interval {
        Interval {
            start: -self.half_width,
            end: self.half_width,
        }
    }
}

/// A closed time interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start <= end) {
            return Err(Error::Argument(format!("bad interval [{start}, {end}]")));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn shift(&self, a: f64) -> Interval {
        Interval {
            start: self.start + a,
            end: self.end + a,
        }
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Increments of a `d`-dimensional path on a uniform grid.
///
/// `steps` is row-major: step `k` occupies `steps[k*d .. (k+1)*d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementPath {
    grid: Grid,
    dim: usize,
    steps: Vec<f64>,
}

impl IncrementPath {
    pub fn from_steps(grid: Grid, dim: usize, steps: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("spatial dimension must be at least 1".into()));
        }
        if steps.len() != grid.n_steps() * dim {
            return Err(Error::Argument(format!(
                "expected {} step values for {} steps in dimension {dim}, got {}",
                grid.n_steps() * dim,
                grid.n_steps(),
                steps.len()
            )));
        }
        if let Some(bad) = steps.iter().find(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite step value {bad}")));
        }
        Ok(Self { grid, dim, steps })
    }

    pub fn zeros(grid: Grid, dim: usize) -> Result<Self> {
        Self::from_steps(grid, dim, vec![0.0; grid.n_steps() * dim])
    }

    /// Deterministic path whose every step equals `slope * dt`.
    pub fn ramp(grid: Grid, slope: &[f64]) -> Result<Self> {
        let dim = slope.len();
        let steps = (0..grid.n_steps())
            .flat_map(|_| slope.iter().map(|s| s * grid.dt()))
            .collect();
        Self::from_steps(grid, dim, steps)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.steps[k * self.dim..(k + 1) * self.dim]
    }

    pub(crate) fn steps_mut(&mut self) -> &mut [f64] {
        &mut self.steps
    }

    /// Increment between node indices `s` and `t`; antisymmetric in the
    /// arguments and exactly zero for `s == t`.
    pub fn increment_nodes(&self, s: usize, t: usize) -> Vec<f64> {
        assert!(s <= self.grid.n_steps() && t <= self.grid.n_steps());
        let (lo, hi, sign) = if s <= t { (s, t, 1.0) } else { (t, s, -1.0) };
        let mut out = vec![0.0; self.dim];
        if hi - lo > COMPENSATE_ABOVE {
            for (c, o) in out.iter_mut().enumerate() {
                let acc: KahanSum = (lo..hi).map(|k| self.steps[k * self.dim + c]).collect();
                *o = sign * acc.value();
            }
        } else {
            for k in lo..hi {
                for (o, v) in out.iter_mut().zip(self.step(k)) {
                    *o += v;
                }
            }
            if sign < 0.0 {
                out.iter_mut().for_each(|o| *o = -*o);
            }
        }
        out
    }

    /// Increment `x_{st}` between grid times `s` and `t`.
    pub fn increment(&self, s: f64, t: f64) -> Result<Vec<f64>> {
        let i = self.grid.node_index(s)?;
        let j = self.grid.node_index(t)?;
        Ok(self.increment_nodes(i, j))
    }

    /// Positions relative to the left end of the window at every node,
    /// `(n_steps + 1) * d` values.
    pub fn prefix_sums(&self) -> Vec<f64> {
        let n = self.grid.n_steps();
        let d = self.dim;
        let mut out = vec![0.0; (n + 1) * d];
        if n > COMPENSATE_ABOVE {
            let mut acc = vec![KahanSum::new(); d];
            for k in 0..n {
                for c in 0..d {
                    acc[c].add(self.steps[k * d + c]);
                    out[(k + 1) * d + c] = acc[c].value();
                }
            }
        } else {
            for k in 0..n {
                for c in 0..d {
                    out[(k + 1) * d + c] = out[k * d + c] + self.steps[k * d + c];
                }
            }
        }
        out
    }

    fn check_compatible(&self, other: &IncrementPath) -> Result<()> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::Argument(format!(
                "paths live on different grids or dimensions ({:?}, d={} vs {:?}, d={})",
                self.grid, self.dim, other.grid, other.dim
            )));
        }
        Ok(())
    }

    /// `x ⊗_I y`: increments of `self` inside `interval`, of `outside` elsewhere.
    pub fn splice(&self, outside: &IncrementPath, interval: Interval) -> Result<IncrementPath> {
        self.check_compatible(outside)?;
        if !self.grid.window().contains(&interval) {
            return Err(Error::Argument(format!(
                "splice interval {interval} leaves the window {}",
                self.grid.window()
            )));
        }
        let cells = self.grid.cells(interval)?;
        let d = self.dim;
        let mut steps = outside.steps.clone();
        steps[cells.start * d..cells.end * d].copy_from_slice(&self.steps[cells.start * d..cells.end * d]);
        Ok(IncrementPath {
            grid: self.grid,
            dim: d,
            steps,
        })
    }

    /// `τ_a x` restricted to the window: `(τ_a x)_{st} = x_{s+a, t+a}`.
    ///
    /// Steps shifted in from outside the window are zero, or fresh Wiener
    /// draws when `fill` is given. Only the common interior is exact.
    pub fn translate<R: Rng + ?Sized>(&self, shift: f64, fill: Option<&mut R>) -> Result<IncrementPath> {
        let m = self.grid.steps_in(shift.abs())? as isize * if shift < 0.0 { -1 } else { 1 };
        let n = self.grid.n_steps() as isize;
        let d = self.dim;
        let mut steps = vec![0.0; self.steps.len()];
        let sd = self.grid.dt().sqrt();
        let mut fill = fill;
        for k in 0..n {
            let src = k + m;
            let dst = &mut steps[k as usize * d..(k as usize + 1) * d];
            if (0..n).contains(&src) {
                dst.copy_from_slice(self.step(src as usize));
            } else if let Some(rng) = fill.as_deref_mut() {
                for v in dst.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = sd * z;
                }
            }
        }
        Ok(IncrementPath {
            grid: self.grid,
            dim: d,
            steps,
        })
    }
}

/// Samples a path from the Wiener reference measure: every step component
/// is an independent `N(0, dt)` draw.
pub fn sample_wiener(grid: Grid, dim: usize, seed: u64) -> Result<IncrementPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_wiener_with(grid, dim, &mut rng)
}

pub fn sample_wiener_with<R: Rng + ?Sized>(grid: Grid, dim: usize, rng: &mut R) -> Result<IncrementPath> {
    let sd = grid.dt().sqrt();
    let steps = (0..grid.n_steps() * dim)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sd * z
        })
        .collect();
    IncrementPath::from_steps(grid, dim, steps)
}

/// The restriction of a path to the block `τ_i = [iL, (i+1)L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinBlock {
    pub index: i64,
    pub length: f64,
    pub dim: usize,
    pub steps: Vec<f64>,
}

impl SpinBlock {
    pub fn interval(&self) -> Interval {
        Interval {
            start: self.index as f64 * self.length,
            end: (self.index + 1) as f64 * self.length,
        }
    }

    /// Total increment over the block.
    pub fn total(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for chunk in self.steps.chunks_exact(self.dim) {
            for (o, v) in out.iter_mut().zip(chunk) {
                *o += v;
            }
        }
        out
    }

    /// `sup_t |x_{iL, t}|` over the block's nodes.
    pub fn sup_norm(&self) -> f64 {
        let mut pos = vec![0.0; self.dim];
        let mut best = 0.0f64;
        for chunk in self.steps.chunks_exact(self.dim) {
            for (p, v) in pos.iter_mut().zip(chunk) {
                *p += v;
            }
            best = best.max(pos.iter().map(|p| p * p).sum::<f64>().sqrt());
        }
        best
    }
}

fn block_layout(grid: &Grid, block_len: f64) -> Result<(usize, i64, usize)> {
    let per_block = grid.steps_in(block_len).map_err(|_| {
        Error::Argument(format!("block length {block_len} is not a multiple of dt = {}", grid.dt()))
    })?;
    if per_block == 0 {
        return Err(Error::Argument("block length must be positive".into()));
    }
    let half = grid.half_width() / block_len;
    let half_r = half.round();
    if (half - half_r).abs() > NODE_TOL * half_r.max(1.0) || half_r < 1.0 {
        return Err(Error::Argument(format!(
            "blocks [iL,(i+1)L] with L = {block_len} do not tile the window [-{0}, {0}]",
            grid.half_width()
        )));
    }
    let first = -(half_r as i64);
    let count = 2 * half_r as usize;
    Ok((per_block, first, count))
}

/// The map `F`: splits a path into its blocks `τ_i`, ordered by index.
pub fn to_blocks(path: &IncrementPath, block_len: f64) -> Result<Vec<SpinBlock>> {
    let (per_block, first, count) = block_layout(path.grid(), block_len)?;
    let d = path.dim();
    Ok((0..count)
        .map(|b| SpinBlock {
            index: first + b as i64,
            length: block_len,
            dim: d,
            steps: path.steps()[b * per_block * d..(b + 1) * per_block * d].to_vec(),
        })
        .collect())
}

/// Inverse of [`to_blocks`]. Blocks must be contiguous and symmetric
/// around zero.
pub fn from_blocks(blocks: &[SpinBlock], dt: f64) -> Result<IncrementPath> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::Argument("no blocks to reassemble".into()))?;
    let (len, d) = (first.length, first.dim);
    for (k, b) in blocks.iter().enumerate() {
        if b.index != first.index + k as i64 || b.length != len || b.dim != d {
            return Err(Error::Argument(format!(
                "block {k} (index {}) breaks the contiguous layout",
                b.index
            )));
        }
    }
    let last = first.index + blocks.len() as i64;
    if first.index != -last {
        return Err(Error::Argument(format!(
            "blocks cover [{}, {}], which is not a symmetric window",
            first.index as f64 * len,
            last as f64 * len
        )));
    }
    let grid = Grid::new(last as f64 * len, dt)?;
    let steps: Vec<f64> = blocks.iter().flat_map(|b| b.steps.iter().copied()).collect();
    IncrementPath::from_steps(grid, d, steps)
}

/// JSON header written as the first line of a path CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathHeader {
    #[serde(rename = "T")]
    pub half_width: f64,
    pub dt: f64,
    pub d: usize,
    pub seed: Option<u64>,
}

/// Writes `# {json header}` then rows `t_k,step_1..step_d` with 17
/// significant digits.
pub fn write_path_csv<W: Write>(out: &mut W, path: &IncrementPath, seed: Option<u64>) -> std::io::Result<()> {
    let header = PathHeader {
        half_width: path.grid().half_width(),
        dt: path.grid().dt(),
        d: path.dim(),
        seed,
    };
    writeln!(out, "# {}", serde_json::to_string(&header).expect("header serializes"))?;
    write!(out, "t")?;
    for c in 1..=path.dim() {
        write!(out, ",step_{c}")?;
    }
    writeln!(out)?;
    for k in 0..path.grid().n_steps() {
        write!(out, "{:.16e}", path.grid().node(k))?;
        for v in path.step(k) {
            write!(out, ",{v:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_path_csv<R: BufRead>(input: R) -> Result<(IncrementPath, PathHeader)> {
    let fmt_err = |msg: String| Error::Format {
        path: "<path csv>".into(),
        msg,
    };
    let mut lines = input.lines();
    let mut next = || -> Result<Option<String>> {
        lines
            .next()
            .transpose()
            .map_err(|e| fmt_err(format!("read failed: {e}")))
    };
    let first = next()?.ok_or_else(|| fmt_err("empty file".into()))?;
    let json = first
        .strip_prefix('#')
        .ok_or_else(|| fmt_err("missing '# {json}' header line".into()))?;
    let header: PathHeader =
        serde_json::from_str(json.trim()).map_err(|e| fmt_err(format!("bad header: {e}")))?;
    let grid = Grid::new(header.half_width, header.dt)?;
    let cols = next()?.ok_or_else(|| fmt_err("missing column line".into()))?;
    if cols.split(',').count() != header.d + 1 {
        return Err(fmt_err(format!("column line has wrong width for d = {}", header.d)));
    }
    let mut steps = Vec::with_capacity(grid.n_steps() * header.d);
    let mut rows = 0;
    while let Some(line) = next()? {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        fields.next();
        for f in fields {
            steps.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| fmt_err(format!("row {rows}: {e}")))?,
            );
        }
        rows += 1;
    }
    if rows != grid.n_steps() {
        return Err(fmt_err(format!("expected {} rows, found {rows}", grid.n_steps())));
    }
    Ok((IncrementPath::from_steps(grid, header.d, steps)?, header))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t: f64, dt: f64) -> Grid {
        Grid::new(t, dt).unwrap()
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        assert!(matches!(Grid::new(0.0, 0.1), Err(Error::Config(_))));
        assert!(matches!(Grid::new(1.0, -0.1), Err(Error::Config(_))));
        assert!(matches!(Grid::new(1.0, 0.3), Err(Error::Config(_))));
        assert!(matches!(Grid::new(1.0, 2.0), Err(Error::Config(_))));
        let g = grid(4.0, 0.25);
        assert_eq!(g.n_steps(), 32);
        assert_eq!(g.node(0), -4.0);
        assert_eq!(g.node(32), 4.0);
    }

    #[test]
    fn zero_path_has_zero_increments() {
        let p = IncrementPath::zeros(grid(2.0, 0.5), 3).unwrap();
        assert_eq!(p.increment(-2.0, 1.5).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn constant_steps_partial_sum() {
        let g = grid(2.0, 0.25);
        let p = IncrementPath::ramp(g, &[1.0, 0.0]).unwrap();
        assert_eq!(p.increment(0.0, 1.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(p.increment(1.0, 0.0).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(p.increment(0.5, 0.5).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn off_grid_time_is_an_argument_error() {
        let p = IncrementPath::zeros(grid(2.0, 0.25), 1).unwrap();
        assert!(matches!(p.increment(0.1, 1.0), Err(Error::Argument(_))));
        assert!(matches!(p.increment(0.0, 3.0), Err(Error::Argument(_))));
    }

    #[test]
    fn splice_definition() {
        let g = grid(2.0, 0.25);
        let x = sample_wiener(g, 2, 1).unwrap();
        let y = sample_wiener(g, 2, 2).unwrap();
        let i = Interval::new(-0.5, 1.0).unwrap();
        assert_eq!(x.splice(&x, i).unwrap(), x);

        let z = x.splice(&y, i).unwrap();
        // [a,b] ⊃ I = [c,d]: z_ab = y_ac + x_cd + y_db
        let (a, c, dd, b) = (-1.5, -0.5, 1.0, 1.75);
        let lhs = z.increment(a, b).unwrap();
        let rhs: Vec<f64> = (0..2)
            .map(|k| {
                y.increment(a, c).unwrap()[k] + x.increment(c, dd).unwrap()[k] + y.increment(dd, b).unwrap()[k]
            })
            .collect();
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).abs() < 1e-12);
        }

        let zero = IncrementPath::zeros(g, 2).unwrap();
        let w = zero.splice(&y, i).unwrap();
        assert_eq!(w.increment(c, dd).unwrap(), vec![0.0, 0.0]);
        assert_eq!(w.increment(-2.0, c).unwrap(), y.increment(-2.0, c).unwrap());
    }

    #[test]
    fn splice_rejects_mismatch() {
        let x = IncrementPath::zeros(grid(2.0, 0.25), 1).unwrap();
        let y = IncrementPath::zeros(grid(2.0, 0.5), 1).unwrap();
        let i = Interval::new(0.0, 1.0).unwrap();
        assert!(matches!(x.splice(&y, i), Err(Error::Argument(_))));
    }

    #[test]
    fn translate_shifts_increments() {
        let g = grid(4.0, 0.25);
        let x = sample_wiener(g, 1, 3).unwrap();
        let none: Option<&mut ChaCha8Rng> = None;
        assert_eq!(x.translate(0.0, none).unwrap(), x);
        let a = 0.75;
        let tx = x.translate(a, None::<&mut ChaCha8Rng>).unwrap();
        for (s, t) in [(-3.0, -1.0), (-2.5, 2.0), (0.0, 3.25)] {
            assert_eq!(tx.increment(s, t).unwrap(), x.increment(s + a, t + a).unwrap());
        }
        assert!(matches!(x.translate(0.1, None::<&mut ChaCha8Rng>), Err(Error::Argument(_))));
    }

    #[test]
    fn translate_composes_on_interior() {
        let g = grid(4.0, 0.25);
        let x = sample_wiener(g, 2, 5).unwrap();
        let (a, b) = (0.5, -1.25);
        let two = x
            .translate(a, None::<&mut ChaCha8Rng>)
            .unwrap()
            .translate(b, None::<&mut ChaCha8Rng>)
            .unwrap();
        let one = x.translate(a + b, None::<&mut ChaCha8Rng>).unwrap();
        // common interior: nodes whose shifted images stay inside for every partial shift
        for (s, t) in [(-2.0, 0.0), (-1.0, 2.5), (0.25, 2.75)] {
            assert_eq!(two.increment(s, t).unwrap(), one.increment(s, t).unwrap());
        }
    }

    #[test]
    fn translate_fills_with_fresh_noise() {
        let g = grid(2.0, 0.25);
        let x = IncrementPath::zeros(g, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tx = x.translate(1.0, Some(&mut rng)).unwrap();
        let n = g.n_steps();
        assert!(tx.steps()[..n - 4].iter().all(|v| *v == 0.0));
        assert!(tx.steps()[n - 4..].iter().all(|v| *v != 0.0));
    }

    #[test]
    fn block_indices_for_window_of_eight() {
        let g = grid(4.0, 0.25);
        let x = sample_wiener(g, 1, 11).unwrap();
        let blocks = to_blocks(&x, 1.0).unwrap();
        let idx: Vec<i64> = blocks.iter().map(|b| b.index).collect();
        assert_eq!(idx, (-4..4).collect::<Vec<_>>());
        assert_eq!(blocks[4].interval(), Interval::new(0.0, 1.0).unwrap());
        assert_eq!(blocks[4].total(), x.increment(0.0, 1.0).unwrap());
    }

    #[test]
    fn blocks_reject_misaligned_length() {
        let x = IncrementPath::zeros(grid(4.0, 0.25), 1).unwrap();
        assert!(matches!(to_blocks(&x, 0.3), Err(Error::Argument(_))));
        assert!(matches!(to_blocks(&x, 3.0), Err(Error::Argument(_))));
    }

    #[test]
    fn block_sup_norm() {
        let g = grid(1.0, 0.5);
        let x = IncrementPath::from_steps(g, 1, vec![1.0, -3.0, 0.5, 0.5]).unwrap();
        let b = to_blocks(&x, 1.0).unwrap();
        assert_eq!(b[0].sup_norm(), 2.0);
        assert_eq!(b[1].sup_norm(), 1.0);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = grid(2.0, 0.125);
        let x = sample_wiener(g, 3, 77).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &x, Some(77)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# {\"T\":2.0,\"dt\":0.125,\"d\":3,\"seed\":77}\nt,step_1,step_2,step_3\n"));
        let (y, h) = read_path_csv(&buf[..]).unwrap();
        assert_eq!(y, x);
        assert_eq!(h.seed, Some(77));
    }

    #[test]
    fn csv_rejects_truncated_file() {
        let g = grid(1.0, 0.5);
        let x = IncrementPath::zeros(g, 1).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &x, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(read_path_csv(cut.as_bytes()).is_err());
    }
}
