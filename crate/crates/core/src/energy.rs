//! Finite-volume energies of increment paths.
//!
//! All double integrals are discretized on quadrature points inside the
//! grid cells. The position of a point at fraction `f` of cell `k` is the
//! linear interpolation `P_k + f·step_k` of the partial sums, so the
//! increment between two points is exact for piecewise-linear paths.
//!
//! Every built-in potential is even in both arguments, so the ordered
//! double sum over a square equals twice the sum over `p < q` plus the
//! diagonal. The diagonal terms `W(0,0)` never change under moves.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_to_infinity, pairwise_sum};
use crate::path::{Grid, IncrementPath, Interval};
use crate::potential::Potential;

/// Per-cell quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QuadRule {
    #[default]
    Midpoint,
    Gauss2,
}

/// How the truncated tails of `V_I` and `Q` are bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TailMode {
    /// Bound from the decay of `sup_ξ|∇W(ξ,t)|`; infinite when that decay
    /// is too slow.
    #[default]
    Analytic,
    /// No bound; reported as `+∞`.
    Off,
}

/// A value from a quadrature, with its discretization and truncation errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub value: f64,
    pub quad_error: f64,
    pub tail_error: f64,
}

/// Quadrature points of a grid under a rule.
#[derive(Debug, Clone)]
pub(crate) struct QuadPoints {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub cells: Vec<usize>,
    pub fracs: Vec<f64>,
    pub per_cell: usize,
}

impl QuadPoints {
    fn new(grid: &Grid, rule: QuadRule) -> Self {
        let (fracs_in_cell, w): (Vec<f64>, f64) = match rule {
            QuadRule::Midpoint => (vec![0.5], grid.dt()),
            QuadRule::Gauss2 => {
                let h = 0.5 / 3f64.sqrt();
                (vec![0.5 - h, 0.5 + h], 0.5 * grid.dt())
            }
        };
        let per_cell = fracs_in_cell.len();
        let n = grid.n_steps() * per_cell;
        let mut out = Self {
            times: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            cells: Vec::with_capacity(n),
            fracs: Vec::with_capacity(n),
            per_cell,
        };
        for k in 0..grid.n_steps() {
            for f in &fracs_in_cell {
                out.times.push(grid.node(k) + f * grid.dt());
                out.weights.push(w);
                out.cells.push(k);
                out.fracs.push(*f);
            }
        }
        out
    }

    fn len(&self) -> usize {
        self.times.len()
    }

    /// Points belonging to a range of cells.
    fn of_cells(&self, cells: Range<usize>) -> Range<usize> {
        cells.start * self.per_cell..cells.end * self.per_cell
    }
}

/// Immutable evaluation context: potential, grid and quadrature settings.
#[derive(Debug, Clone)]
pub struct EnergyContext {
    pot: Potential,
    grid: Grid,
    rule: QuadRule,
    cone_window: Option<f64>,
    tail_mode: TailMode,
    points: QuadPoints,
}

/// Default truncation radius for `V_I` as a multiple of `|I|`.
const DEFAULT_CONE_FACTOR: f64 = 8.0;

impl EnergyContext {
    pub fn new(pot: Potential, grid: Grid) -> Self {
        Self::with_rule(pot, grid, QuadRule::Midpoint)
    }

    pub fn with_rule(pot: Potential, grid: Grid, rule: QuadRule) -> Self {
        let points = QuadPoints::new(&grid, rule);
        Self {
            pot,
            grid,
            rule,
            cone_window: None,
            tail_mode: TailMode::Analytic,
            points,
        }
    }

    /// Truncation radius `R` for the cone and quadrant integrals.
    pub fn cone_window(mut self, radius: f64) -> Self {
        self.cone_window = Some(radius);
        self
    }

    pub fn tail_mode(mut self, mode: TailMode) -> Self {
        self.tail_mode = mode;
        self
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rule(&self) -> QuadRule {
        self.rule
    }

    fn check_path(&self, path: &IncrementPath) -> Result<()> {
        if path.grid() != &self.grid {
            return Err(Error::Argument(format!(
                "path grid {:?} does not match the energy context grid {:?}",
                path.grid(),
                self.grid
            )));
        }
        Ok(())
    }

    fn interval_points(&self, interval: Interval) -> Result<Range<usize>> {
        if !self.grid.window().contains(&interval) {
            return Err(Error::Argument(format!(
                "interval {interval} is not inside the window {}",
                self.grid.window()
            )));
        }
        Ok(self.points.of_cells(self.grid.cells(interval)?))
    }

    /// Positions of every quadrature point, `n_points * d` values.
    pub(crate) fn positions(&self, path: &IncrementPath) -> Vec<f64> {
        let d = path.dim();
        let prefix = path.prefix_sums();
        let pts = &self.points;
        let mut out = vec![0.0; pts.len() * d];
        for p in 0..pts.len() {
            let (k, f) = (pts.cells[p], pts.fracs[p]);
            for c in 0..d {
                out[p * d + c] = prefix[k * d + c] + f * path.steps()[k * d + c];
            }
        }
        out
    }

    pub(crate) fn points(&self) -> &QuadPoints {
        &self.points
    }

    #[inline]
    fn w_between(&self, pos: &[f64], d: usize, p: usize, q: usize) -> f64 {
        let mut r_sq = 0.0;
        for c in 0..d {
            let diff = pos[q * d + c] - pos[p * d + c];
            r_sq += diff * diff;
        }
        self.pot.radial(r_sq, self.points.times[q] - self.points.times[p])
    }

    /// `Σ_{p∈a, q∈b} w_p w_q W(X_q − X_p, t_p − t_q)` for two point ranges
    /// that are either identical or disjoint.
    fn block_sum(&self, pos: &[f64], d: usize, a: Range<usize>, b: Range<usize>) -> f64 {
        let w = &self.points.weights;
        if a == b {
            let rows: Vec<f64> = a
                .clone()
                .map(|p| {
                    let mut row = 0.0;
                    for q in p + 1..a.end {
                        row += w[q] * self.w_between(pos, d, p, q);
                    }
                    w[p] * (2.0 * row + w[p] * self.pot.radial(0.0, 0.0))
                })
                .collect();
            pairwise_sum(&rows)
        } else {
            let rows: Vec<f64> = a
                .map(|p| {
                    let mut row = 0.0;
                    for q in b.clone() {
                        row += w[q] * self.w_between(pos, d, p, q);
                    }
                    w[p] * row
                })
                .collect();
            pairwise_sum(&rows)
        }
    }

    fn u_raw(&self, path: &IncrementPath, interval: Interval) -> Result<f64> {
        self.check_path(path)?;
        let pts = self.interval_points(interval)?;
        let pos = self.positions(path);
        Ok(self.block_sum(&pos, path.dim(), pts.clone(), pts))
    }

    /// Same energy on the grid with doubled step, as a discretization error
    /// estimate. `None` when the interval does not align with the coarse grid.
    fn coarse_estimate<F>(&self, path: &IncrementPath, eval: F) -> Option<f64>
    where
        F: Fn(&EnergyContext, &IncrementPath) -> Result<f64>,
    {
        let n = self.grid.n_steps();
        if !n.is_multiple_of(2) || n < 4 {
            return None;
        }
        let grid = Grid::new(self.grid.half_width(), 2.0 * self.grid.dt()).ok()?;
        let d = path.dim();
        let steps: Vec<f64> = (0..n / 2)
            .flat_map(|k| (0..d).map(move |c| (k, c)))
            .map(|(k, c)| path.steps()[2 * k * d + c] + path.steps()[(2 * k + 1) * d + c])
            .collect();
        let coarse_path = IncrementPath::from_steps(grid, d, steps).ok()?;
        let mut ctx = EnergyContext::with_rule(self.pot.clone(), grid, self.rule);
        ctx.cone_window = self.cone_window;
        ctx.tail_mode = self.tail_mode;
        eval(&ctx, &coarse_path).ok()
    }

    /// `U_I(x) = ∫_{I×I} W(x_{st}, t−s) dt ds`.
    pub fn u_interval(&self, path: &IncrementPath, interval: Interval) -> Result<EnergyValue> {
        let value = self.u_raw(path, interval)?;
        let coarse = self.coarse_estimate(path, |c, p| c.u_raw(p, interval));
        Ok(EnergyValue {
            value,
            quad_error: coarse.map_or(f64::INFINITY, |c| (c - value).abs()),
            tail_error: 0.0,
        })
    }

    /// `H_T(x)`, the self-energy of the whole window.
    pub fn h_total(&self, path: &IncrementPath) -> Result<EnergyValue> {
        self.u_interval(path, self.grid.window())
    }

    /// `H_T` without the error estimate, for the sampler.
    pub fn total_energy(&self, path: &IncrementPath) -> f64 {
        let pos = self.positions(path);
        let all = 0..self.points.len();
        self.block_sum(&pos, path.dim(), all.clone(), all)
    }

    /// `U_ij`: interaction between the blocks `τ_i` and `τ_j` of length `L`.
    pub fn u_blocks(&self, path: &IncrementPath, i: i64, j: i64, block_len: f64) -> Result<f64> {
        self.check_path(path)?;
        let bi = Interval::new(i as f64 * block_len, (i + 1) as f64 * block_len)?;
        let bj = Interval::new(j as f64 * block_len, (j + 1) as f64 * block_len)?;
        let (pi, pj) = (self.interval_points(bi)?, self.interval_points(bj)?);
        let pos = self.positions(path);
        Ok(self.block_sum(&pos, path.dim(), pi, pj))
    }

    /// The cone of influence `J(I)` clipped to the window.
    pub fn cone(&self, interval: Interval) -> Result<ConeRegion> {
        cone(&self.grid, interval)
    }

    fn truncation(&self, interval: Interval) -> f64 {
        self.cone_window.unwrap_or(DEFAULT_CONE_FACTOR * interval.len().max(self.grid.dt()))
    }

    fn v_raw(&self, x: &IncrementPath, y: &IncrementPath, interval: Interval, radius: f64) -> Result<f64> {
        self.check_path(x)?;
        self.check_path(y)?;
        let cone = self.cone(interval)?;
        let z = x.splice(y, interval)?;
        let z0 = IncrementPath::zeros(self.grid, x.dim())?.splice(y, interval)?;
        let (pz, pz0) = (self.positions(&z), self.positions(&z0));
        let d = x.dim();
        let pts = &self.points;
        let keep = Interval::new(interval.start - radius, interval.end + radius)?;
        let inside = |p: usize| pts.times[p] >= keep.start && pts.times[p] <= keep.end;
        let rows: Vec<f64> = (0..pts.len())
            .map(|p| {
                if !inside(p) {
                    return 0.0;
                }
                let mut row = 0.0;
                for q in p + 1..pts.len() {
                    if inside(q) && cone.contains(pts.cells[p], pts.cells[q]) {
                        row += pts.weights[q] * (self.w_between(&pz, d, p, q) - self.w_between(&pz0, d, p, q));
                    }
                }
                2.0 * pts.weights[p] * row
            })
            .collect();
        Ok(pairwise_sum(&rows))
    }

    /// `V_I(x,y) = ∫_{J(I)} [W((x⊗_I y)_{st}, t−s) − W((0⊗_I y)_{st}, t−s)]`,
    /// truncated to pairs within the cone window of `I`, with a bound on the
    /// omitted part of the infinite cone.
    pub fn v_interval(&self, x: &IncrementPath, y: &IncrementPath, interval: Interval) -> Result<EnergyValue> {
        let radius = self.truncation(interval);
        if radius < interval.len() {
            return Err(Error::Argument(format!(
                "cone window {radius} is shorter than the interval {interval}"
            )));
        }
        let value = self.v_raw(x, y, interval, radius)?;
        let coarse = self.coarse_estimate(x, |c, xc| {
            let yc = coarsen(y, c.grid())?;
            c.v_raw(xc, &yc, interval, radius)
        });
        let tail_error = match self.tail_mode {
            TailMode::Off => f64::INFINITY,
            TailMode::Analytic => {
                let osc = oscillation(x, interval)?;
                let len = interval.len();
                if osc == 0.0 {
                    0.0
                } else {
                    integrate_to_infinity(|r| (2.0 * r + 2.0 * len) * self.pot.grad_envelope(r), radius)
                        .map_or(f64::INFINITY, |v| osc * v)
                }
            }
        };
        Ok(EnergyValue {
            value,
            quad_error: coarse.map_or(f64::INFINITY, |c| (c - value).abs()),
            tail_error,
        })
    }

    fn q_raw(&self, path: &IncrementPath, xi: &[f64], a: f64, radius: f64) -> Result<f64> {
        let d = path.dim();
        let left = self.interval_points(Interval::new(-radius, 0.0)?)?;
        let right = self.interval_points(Interval::new(0.0, radius)?)?;
        let pos = self.positions(path);
        let pts = &self.points;
        let mut shifted = vec![0.0; d];
        let rows: Vec<f64> = left
            .map(|p| {
                let mut row = 0.0;
                for q in right.clone() {
                    let tau = a + pts.times[q] - pts.times[p];
                    let mut r0 = 0.0;
                    for c in 0..d {
                        let diff = pos[q * d + c] - pos[p * d + c];
                        shifted[c] = xi[c] + diff;
                        r0 += diff * diff;
                    }
                    let r1: f64 = shifted.iter().map(|v| v * v).sum();
                    row += pts.weights[q] * (self.pot.radial(r1, tau) - self.pot.radial(r0, tau)).abs();
                }
                pts.weights[p] * row
            })
            .collect();
        Ok(pairwise_sum(&rows))
    }

    /// `Q(x,ξ,a) = ∫_{-∞}^0 dt ∫_0^∞ ds |W(ξ+x_{st}, a+s−t) − W(x_{st}, a+s−t)|`
    /// on the quadrant truncated at the cone window (default: the whole
    /// half-window).
    pub fn q_quadrant(&self, path: &IncrementPath, xi: &[f64], a: f64) -> Result<EnergyValue> {
        self.check_path(path)?;
        if !(a >= 0.0) {
            return Err(Error::Argument(format!("Q needs a ≥ 0, got {a}")));
        }
        if xi.len() != path.dim() {
            return Err(Error::Argument("ξ has the wrong dimension".into()));
        }
        let radius = self.cone_window.unwrap_or(self.grid.half_width()).min(self.grid.half_width());
        let value = self.q_raw(path, xi, a, radius)?;
        let coarse = self.coarse_estimate(path, |c, p| c.q_raw(p, xi, a, radius));
        let xi_norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tail_error = match self.tail_mode {
            TailMode::Off => f64::INFINITY,
            TailMode::Analytic if xi_norm == 0.0 => 0.0,
            TailMode::Analytic => integrate_to_infinity(|r| r * self.pot.grad_envelope(a + r), radius)
                .map_or(f64::INFINITY, |v| xi_norm * v),
        };
        Ok(EnergyValue {
            value,
            quad_error: coarse.map_or(f64::INFINITY, |c| (c - value).abs()),
            tail_error,
        })
    }

    /// `H_T(x') − H_T(x)` where `x'` replaces the steps of `changed` (a
    /// range of cells) by `new_steps`. Only point pairs whose increment
    /// depends on a changed step are visited.
    pub fn delta_h(&self, path: &IncrementPath, changed: Range<usize>, new_steps: &[f64]) -> Result<f64> {
        self.delta_h_counted(path, changed, new_steps).map(|(v, _)| v)
    }

    /// [`delta_h`](Self::delta_h) plus the number of point pairs visited.
    pub fn delta_h_counted(
        &self,
        path: &IncrementPath,
        changed: Range<usize>,
        new_steps: &[f64],
    ) -> Result<(f64, usize)> {
        self.check_path(path)?;
        let d = path.dim();
        if changed.end > self.grid.n_steps() || changed.is_empty() || new_steps.len() != changed.len() * d {
            return Err(Error::Argument(format!(
                "changed range {changed:?} does not match {} new step values",
                new_steps.len()
            )));
        }
        if path.steps()[changed.start * d..changed.end * d] == *new_steps {
            return Ok((0.0, 0));
        }
        let pos = self.positions(path);
        Ok(self.delta_from_positions(path, &pos, changed, new_steps))
    }

    /// Incremental energy change given cached positions of the current path.
    pub(crate) fn delta_from_positions(
        &self,
        path: &IncrementPath,
        pos: &[f64],
        changed: Range<usize>,
        new_steps: &[f64],
    ) -> (f64, usize) {
        let d = path.dim();
        let pts = &self.points;
        let np = pts.len();
        let block = pts.of_cells(changed.clone());
        let new_pos = self.moved_positions(path, pos, changed, new_steps);
        let w = &pts.weights;
        let mut touched = 0usize;
        // pairs p < q with cell(p) < changed.end and cell(q) >= changed.start
        let rows: Vec<f64> = (0..block.end)
            .map(|p| {
                let mut row = 0.0;
                let q0 = (p + 1).max(block.start);
                for q in q0..np {
                    let mut r_new = 0.0;
                    let mut r_old = 0.0;
                    for c in 0..d {
                        let a = new_pos.get(q, c) - new_pos.get(p, c);
                        let b = pos[q * d + c] - pos[p * d + c];
                        r_new += a * a;
                        r_old += b * b;
                    }
                    let tau = pts.times[q] - pts.times[p];
                    row += w[q] * (self.pot.radial(r_new, tau) - self.pot.radial(r_old, tau));
                }
                touched += np - q0;
                2.0 * w[p] * row
            })
            .collect();
        (pairwise_sum(&rows), touched)
    }

    fn moved_positions<'a>(
        &self,
        path: &IncrementPath,
        pos: &'a [f64],
        changed: Range<usize>,
        new_steps: &[f64],
    ) -> MovedPositions<'a> {
        let d = path.dim();
        let pts = &self.points;
        let block = pts.of_cells(changed.clone());
        let mut inside = vec![0.0; block.len() * d];
        let mut shift = vec![0.0; d];
        // offset of the block start is unchanged; accumulate new steps
        let start_pos: Vec<f64> = (0..d)
            .map(|c| {
                let p0 = block.start;
                pos[p0 * d + c] - pts.fracs[p0] * path.steps()[changed.start * d + c]
            })
            .collect();
        let mut running = start_pos.clone();
        for (k_local, k) in changed.clone().enumerate() {
            for j in 0..pts.per_cell {
                let p = k * pts.per_cell + j;
                for c in 0..d {
                    inside[(p - block.start) * d + c] = running[c] + pts.fracs[p] * new_steps[k_local * d + c];
                }
            }
            for c in 0..d {
                running[c] += new_steps[k_local * d + c];
            }
        }
        let old_end = path.increment_nodes(changed.start, changed.end);
        for c in 0..d {
            shift[c] = (running[c] - start_pos[c]) - old_end[c];
        }
        MovedPositions {
            old: pos,
            inside,
            block,
            shift,
            d,
        }
    }

    /// Writes `interval_start,interval_end,value,quad_error,tail_error` rows.
    pub fn write_energy_csv<W: Write>(out: &mut W, rows: &[(Interval, EnergyValue)]) -> std::io::Result<()> {
        writeln!(out, "interval_start,interval_end,value,quad_error,tail_error")?;
        for (i, v) in rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                i.start, i.end, v.value, v.quad_error, v.tail_error
            )?;
        }
        Ok(())
    }
}

/// Positions after a block move: old positions before the block, recomputed
/// inside it, and shifted by the total change after it.
struct MovedPositions<'a> {
    old: &'a [f64],
    inside: Vec<f64>,
    block: Range<usize>,
    shift: Vec<f64>,
    d: usize,
}

impl MovedPositions<'_> {
    #[inline]
    fn get(&self, p: usize, c: usize) -> f64 {
        if p < self.block.start {
            self.old[p * self.d + c]
        } else if p < self.block.end {
            self.inside[(p - self.block.start) * self.d + c]
        } else {
            self.old[p * self.d + c] + self.shift[c]
        }
    }
}

/// Merges pairs of steps onto the grid with doubled step.
fn coarsen(path: &IncrementPath, grid: &Grid) -> Result<IncrementPath> {
    let d = path.dim();
    let steps: Vec<f64> = (0..grid.n_steps())
        .flat_map(|k| (0..d).map(move |c| (k, c)))
        .map(|(k, c)| path.steps()[2 * k * d + c] + path.steps()[(2 * k + 1) * d + c])
        .collect();
    IncrementPath::from_steps(*grid, d, steps)
}

/// `max_{u≤v in I} |x_{uv}|` over grid nodes.
fn oscillation(path: &IncrementPath, interval: Interval) -> Result<f64> {
    let cells = path.grid().cells(interval)?;
    let d = path.dim();
    let mut nodes = vec![vec![0.0; d]];
    for k in cells {
        let mut next = nodes.last().unwrap().clone();
        for (n, s) in next.iter_mut().zip(path.step(k)) {
            *n += s;
        }
        nodes.push(next);
    }
    let mut best = 0.0f64;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let r: f64 = nodes[i].iter().zip(&nodes[j]).map(|(a, b)| (a - b).powi(2)).sum();
            best = best.max(r.sqrt());
        }
    }
    Ok(best)
}

/// Which side of `I` a cell lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Before,
    Inside,
    After,
}

/// `J(I) ∩ window²` as a set of cell pairs:
/// `(I⁺×I⁻) ∪ (I⁻×I⁺) ∪ (I×Iᶜ) ∪ (Iᶜ×I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeRegion {
    cells: Range<usize>,
    n_cells: usize,
    dt: f64,
}

pub fn cone(grid: &Grid, interval: Interval) -> Result<ConeRegion> {
    if !grid.window().contains(&interval) {
        return Err(Error::Argument(format!(
            "interval {interval} is not inside the window {}",
            grid.window()
        )));
    }
    Ok(ConeRegion {
        cells: grid.cells(interval)?,
        n_cells: grid.n_steps(),
        dt: grid.dt(),
    })
}

impl ConeRegion {
    fn side(&self, k: usize) -> Side {
        if k < self.cells.start {
            Side::Before
        } else if k < self.cells.end {
            Side::Inside
        } else {
            Side::After
        }
    }

    pub fn contains(&self, k: usize, l: usize) -> bool {
        match (self.side(k), self.side(l)) {
            (Side::Before, Side::After) | (Side::After, Side::Before) => true,
            (Side::Inside, Side::Inside) => false,
            (Side::Inside, _) | (_, Side::Inside) => true,
            _ => false,
        }
    }

    /// Every cell pair of the region.
    pub fn cell_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_cells)
            .flat_map(move |k| (0..self.n_cells).map(move |l| (k, l)))
            .filter(move |&(k, l)| self.contains(k, l))
    }

    /// Number of cell pairs, from the side lengths.
    pub fn cell_count(&self) -> usize {
        let before = self.cells.start;
        let inside = self.cells.len();
        let after = self.n_cells - self.cells.end;
        2 * before * after + 2 * inside * (before + after)
    }

    pub fn area(&self) -> f64 {
        self.cell_count() as f64 * self.dt * self.dt
    }

    pub fn is_empty(&self) -> bool {
        self.cell_count() == 0
    }
}
