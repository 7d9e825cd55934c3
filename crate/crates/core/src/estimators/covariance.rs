//! Decay of `Cov(Y_0, Y_n)` with `Y_i = ⟨v, x_{τ_i}⟩`.
//!
//! Two estimators share one table format. [`covariance_decay`] averages
//! products of block increments directly; its noise is of order `L/√N` and
//! swamps the tail at small coupling. [`covariance_decay_ibp`] integrates by
//! parts twice against the Wiener reference,
//!
//! ```text
//! Cov(Y_i, Y_j) = δ_ij L − E[B_ij] + E[A_i A_j] − E[A_i] E[A_j]
//! A_i  = λ ∫_{τ_i} ⟨v, D_t H⟩ dt
//! B_ij = λ ∫_{τ_i} ∫_{τ_j} vᵀ D_t D_s H v ds dt
//! ```
//!
//! which is exact for the discretized measure and whose noise scales with
//! `λ` rather than with `L`.

use serde::{Deserialize, Serialize};

use super::stats::{summarize, SeriesSummary};
use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::numerics::{fit_line_weighted, LineFit};
use crate::path::{IncrementPath, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMethod {
    Direct,
    IntegrationByParts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEntry {
    pub n: usize,
    pub cov: f64,
    pub std_err: f64,
    /// Block pairs `(i, i+n)` averaged per sample.
    pub pairs: usize,
    /// `|cov| ≤ 2·std_err`.
    pub below_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSum {
    pub n: usize,
    /// `C_0 + 2 Σ_{m=1}^{n} C_m`.
    pub value: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceDecay {
    pub method: CovarianceMethod,
    pub block_len: f64,
    pub direction: Vec<f64>,
    pub entries: Vec<CovEntry>,
    /// First lag `n ≥ 1` at the noise floor, if any.
    pub truncated_at: Option<usize>,
    pub fit_range: (usize, usize),
    /// Weighted fit of `log|C_n|` against `log n` over the usable lags in
    /// `fit_range`.
    pub fit: Option<LineFit>,
    pub partial_sums: Vec<PartialSum>,
    pub n_samples: usize,
}

impl CovarianceDecay {
    pub fn exponent(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    /// `C_0 + 2 Σ_{m≥1} C_m` over the whole table.
    pub fn sigma_sq(&self) -> Option<&PartialSum> {
        self.partial_sums.last()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "n,cov,std_err,pairs,below_floor,partial_sum,partial_sum_se")?;
        for (e, s) in self.entries.iter().zip(&self.partial_sums) {
            writeln!(
                out,
                "{},{:e},{:e},{},{},{:e},{:e}",
                e.n, e.cov, e.std_err, e.pairs, e.below_floor, s.value, s.std_err
            )?;
        }
        Ok(())
    }
}

/// Blocks `[iL, (i+1)L]` inside the central half-window.
pub fn bulk_blocks(half_width: f64, block_len: f64) -> Result<Vec<Interval>> {
    if !(block_len > 0.0) {
        return Err(Error::Argument(format!("block length must be positive, got {block_len}")));
    }
    let half = half_width / 2.0;
    let lo = (-half / block_len - 1e-9).ceil() as i64;
    let hi = (half / block_len + 1e-9).floor() as i64;
    (lo..hi)
        .map(|i| Interval::new(i as f64 * block_len, (i + 1) as f64 * block_len))
        .collect()
}

fn check_inputs(samples: &[IncrementPath], block_len: f64, v: &[f64], n_max: usize) -> Result<Vec<Interval>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::MissingInput("no samples for the covariance table".into()))?;
    if v.len() != first.dim() || v.iter().all(|x| *x == 0.0) {
        return Err(Error::Argument(format!(
            "direction must be a non-zero vector of length {}",
            first.dim()
        )));
    }
    first.grid().steps_in(block_len)?;
    let blocks = bulk_blocks(first.grid().half_width(), block_len)?;
    if blocks.len() < n_max + 1 {
        return Err(Error::Argument(format!(
            "{} bulk blocks of length {block_len} cannot resolve lags up to {n_max}",
            blocks.len()
        )));
    }
    Ok(blocks)
}

/// Per-sample influence series: `cov[n]` is the series whose mean is the
/// estimate of `C_n` to first order in the sampling error.
struct Influence {
    series: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl Influence {
    fn finish(
        self,
        method: CovarianceMethod,
        block_len: f64,
        v: &[f64],
        n_blocks: usize,
        fit_range: (usize, usize),
    ) -> CovarianceDecay {
        let n_samples = self.series.first().map_or(0, Vec::len);
        let entries: Vec<CovEntry> = self
            .series
            .iter()
            .zip(&self.offsets)
            .enumerate()
            .map(|(n, (s, off))| {
                let sm = summarize(s);
                let cov = sm.mean + off;
                CovEntry {
                    n,
                    cov,
                    std_err: sm.std_err,
                    pairs: n_blocks - n,
                    below_floor: cov.abs() <= 2.0 * sm.std_err,
                }
            })
            .collect();
        let truncated_at = entries.iter().skip(1).find(|e| e.below_floor).map(|e| e.n);
        let last_usable = truncated_at.map_or(entries.len(), |t| t);
        let (xs, ys, ws): (Vec<f64>, Vec<f64>, Vec<f64>) = entries
            .iter()
            .filter(|e| e.n >= fit_range.0.max(1) && e.n <= fit_range.1 && e.n < last_usable)
            .map(|e| {
                let rel = (e.std_err / e.cov.abs()).max(1e-12);
                ((e.n as f64).ln(), e.cov.abs().ln(), 1.0 / (rel * rel))
            })
            .fold((vec![], vec![], vec![]), |mut acc, (x, y, w)| {
                acc.0.push(x);
                acc.1.push(y);
                acc.2.push(w);
                acc
            });
        let fit = if xs.len() >= 3 { fit_line_weighted(&xs, &ys, Some(&ws)) } else { None };

        let mut running = vec![0.0; n_samples];
        let mut offset = 0.0;
        let partial_sums = self
            .series
            .iter()
            .zip(&self.offsets)
            .enumerate()
            .map(|(n, (s, off))| {
                let factor = if n == 0 { 1.0 } else { 2.0 };
                for (r, x) in running.iter_mut().zip(s) {
                    *r += factor * x;
                }
                offset += factor * off;
                let sm = summarize(&running);
                PartialSum {
                    n,
                    value: sm.mean + offset,
                    std_err: sm.std_err,
                }
            })
            .collect();
        CovarianceDecay {
            method,
            block_len,
            direction: v.to_vec(),
            entries,
            truncated_at,
            fit_range,
            fit,
            partial_sums,
            n_samples,
        }
    }
}

/// Linearized estimate of `mean_i(E[Z_i] − E[P_i] E[Q_i])` with its
/// per-sample influence values. `z`, `p`, `q` are indexed `[sample][pair]`.
fn product_influence(z: &[Vec<f64>], p: &[Vec<f64>], q: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let ns = z.len() as f64;
    let pairs = z[0].len();
    let mean_of = |m: &[Vec<f64>], k: usize| m.iter().map(|r| r[k]).sum::<f64>() / ns;
    let mp: Vec<f64> = (0..pairs).map(|k| mean_of(p, k)).collect();
    let mq: Vec<f64> = (0..pairs).map(|k| mean_of(q, k)).collect();
    let series = (0..z.len())
        .map(|s| {
            (0..pairs)
                .map(|k| z[s][k] - mp[k] * q[s][k] - mq[k] * p[s][k])
                .sum::<f64>()
                / pairs as f64
        })
        .collect();
    let offset = (0..pairs).map(|k| mp[k] * mq[k]).sum::<f64>() / pairs as f64;
    (series, offset)
}

fn lagged(values: &[Vec<f64>], n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let head = values.iter().map(|r| r[..r.len() - n].to_vec()).collect();
    let tail = values.iter().map(|r| r[n..].to_vec()).collect();
    (head, tail)
}

/// Direct estimate from block increments.
pub fn covariance_decay(samples: &[IncrementPath], block_len: f64, v: &[f64], n_max: usize) -> Result<CovarianceDecay> {
    let blocks = check_inputs(samples, block_len, v, n_max)?;
    let ys: Vec<Vec<f64>> = samples
        .iter()
        .map(|p| {
            blocks
                .iter()
                .map(|b| Ok(dot(v, &p.increment(b.start, b.end)?)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut series = Vec::with_capacity(n_max + 1);
    let mut offsets = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let (head, tail) = lagged(&ys, n);
        let z: Vec<Vec<f64>> = head
            .iter()
            .zip(&tail)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
            .collect();
        let (s, off) = product_influence(&z, &head, &tail);
        series.push(s);
        offsets.push(off);
    }
    Ok(Influence { series, offsets }.finish(CovarianceMethod::Direct, block_len, v, blocks.len(), (2, n_max)))
}

/// `A_i` for every block and `B_{i,i+n}` for `n ≤ n_max` on one path.
///
/// Pairs of quadrature points `p < q` contribute through the overlap of
/// `[t_p, t_q]` with each block, which is the derivative of `X_q − X_p` along
/// a unit perturbation of that block's steps.
pub fn ibp_terms(
    ctx: &EnergyContext,
    lambda: f64,
    path: &IncrementPath,
    blocks: &[Interval],
    v: &[f64],
    n_max: usize,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let pot = ctx.potential();
    let pts = ctx.points();
    let pos = ctx.positions(path);
    let d = path.dim();
    let np = pts.times.len();
    let nb = blocks.len();
    let overlap = |lo: f64, hi: f64, b: &Interval| (hi.min(b.end) - lo.max(b.start)).max(0.0);

    let mut diff = vec![0.0; np + 1];
    // col[p][j] = Σ_{q>p} h_pq |[s_j, t_q] ∩ τ_j|, needed for i < j
    let mut col = vec![vec![0.0; nb]; np];
    let mut b_diag = vec![0.0; nb];
    let mut xi = vec![0.0; d];
    for p in 0..np {
        let tp = pts.times[p];
        for q in p + 1..np {
            let tq = pts.times[q];
            for c in 0..d {
                xi[c] = pos[q * d + c] - pos[p * d + c];
            }
            let scale = 2.0 * lambda * pts.weights[p] * pts.weights[q];
            let r_sq: f64 = xi.iter().map(|x| x * x).sum();
            let g1 = pot.radial_derivative(r_sq, tq - tp);
            diff[p] += scale * 2.0 * g1 * dot(&xi, v);
            diff[q] -= scale * 2.0 * g1 * dot(&xi, v);
            let h = scale * pot.hess_dir(&xi, tq - tp, v);
            for (j, b) in blocks.iter().enumerate() {
                if tq > b.start && tp < b.end {
                    let ov = overlap(tp, tq, b);
                    b_diag[j] += h * ov * ov;
                    col[p][j] += h * (tq - b.start).clamp(0.0, b.len());
                }
            }
        }
    }
    let mut a = vec![0.0; nb];
    let mut running = 0.0;
    for p in 0..np.saturating_sub(1) {
        running += diff[p];
        for (i, b) in blocks.iter().enumerate() {
            a[i] += running * overlap(pts.times[p], pts.times[p + 1], b);
        }
    }
    let mut bmat = Vec::with_capacity(nb);
    for (i, bi) in blocks.iter().enumerate() {
        let mut row = vec![b_diag[i]];
        for j in i + 1..(i + n_max + 1).min(nb) {
            let mut acc = 0.0;
            for p in 0..np {
                let w = (bi.end - pts.times[p]).clamp(0.0, bi.len());
                if w > 0.0 {
                    acc += w * col[p][j];
                }
            }
            row.push(acc);
        }
        bmat.push(row);
    }
    (a, bmat)
}

/// Estimate through two Gaussian integrations by parts. `ctx` and `lambda`
/// must be those the samples were drawn with.
pub fn covariance_decay_ibp(
    ctx: &EnergyContext,
    lambda: f64,
    samples: &[IncrementPath],
    block_len: f64,
    v: &[f64],
    n_max: usize,
) -> Result<CovarianceDecay> {
    let blocks = check_inputs(samples, block_len, v, n_max)?;
    if samples[0].grid() != ctx.grid() {
        return Err(Error::Argument("samples and energy context use different grids".into()));
    }
    use rayon::prelude::*;
    let terms: Vec<(Vec<f64>, Vec<Vec<f64>>)> = samples
        .par_iter()
        .map(|p| ibp_terms(ctx, lambda, p, &blocks, v, n_max))
        .collect();
    let a: Vec<Vec<f64>> = terms.iter().map(|t| t.0.clone()).collect();
    let nb = blocks.len();
    let mut series = Vec::with_capacity(n_max + 1);
    let mut offsets = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let (head, tail) = lagged(&a, n);
        let z: Vec<Vec<f64>> = terms
            .iter()
            .map(|(ai, b)| (0..nb - n).map(|i| ai[i] * ai[i + n] - b[i][n]).collect())
            .collect();
        let (s, off) = product_influence(&z, &head, &tail);
        series.push(s);
        offsets.push(off + if n == 0 { block_len } else { 0.0 });
    }
    Ok(Influence { series, offsets }.finish(
        CovarianceMethod::IntegrationByParts,
        block_len,
        v,
        nb,
        (2, n_max),
    ))
}

/// `E[⟨v, x_{0,nL}⟩²] / n`, the long-window route to `σ²`.
pub fn window_variance(samples: &[IncrementPath], block_len: f64, v: &[f64], n: usize) -> Result<SeriesSummary> {
    let first = samples
        .first()
        .ok_or_else(|| Error::MissingInput("no samples for the window variance".into()))?;
    let span = n as f64 * block_len;
    let a = -span / 2.0;
    let a = (a / first.grid().dt()).round() * first.grid().dt();
    let vals: Vec<f64> = samples
        .iter()
        .map(|p| Ok(dot(v, &p.increment(a, a + span)?).powi(2) / n as f64))
        .collect::<Result<_>>()?;
    Ok(summarize(&vals))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{sample_wiener, Grid};
    use crate::potential::Potential;

    fn shifted(path: &IncrementPath, block: &Interval, v: &[f64], eps: f64) -> IncrementPath {
        let g = *path.grid();
        let cells = g.cells(*block).unwrap();
        let d = path.dim();
        let mut s = path.steps().to_vec();
        for k in cells {
            for c in 0..d {
                s[k * d + c] += eps * v[c] * g.dt();
            }
        }
        IncrementPath::from_steps(g, d, s).unwrap()
    }

    #[test]
    fn ibp_terms_match_finite_differences_of_the_energy() {
        let grid = Grid::new(4.0, 0.25).unwrap();
        let ctx = EnergyContext::new(Potential::nelson(), grid);
        let lambda = 0.7;
        let x = sample_wiener(grid, 2, 9).unwrap();
        let v = [0.6, 0.8];
        let blocks = bulk_blocks(4.0, 1.0).unwrap();
        assert_eq!(blocks.len(), 4);
        let (a, b) = ibp_terms(&ctx, lambda, &x, &blocks, &v, 3);
        let h = |p: &IncrementPath| lambda * ctx.total_energy(p);
        let e = 1e-4;
        for (i, bi) in blocks.iter().enumerate() {
            let fd = (h(&shifted(&x, bi, &v, e)) - h(&shifted(&x, bi, &v, -e))) / (2.0 * e);
            assert!((a[i] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "A_{i}: {} vs {fd}", a[i]);
            for n in 0..b[i].len() {
                let bj = &blocks[i + n];
                let pp = h(&shifted(&shifted(&x, bi, &v, e), bj, &v, e));
                let pm = h(&shifted(&shifted(&x, bi, &v, e), bj, &v, -e));
                let mp = h(&shifted(&shifted(&x, bi, &v, -e), bj, &v, e));
                let mm = h(&shifted(&shifted(&x, bi, &v, -e), bj, &v, -e));
                let fd = (pp - pm - mp + mm) / (4.0 * e * e);
                assert!((b[i][n] - fd).abs() < 1e-4 * (1.0 + fd.abs()), "B_{i},{n}: {} vs {fd}", b[i][n]);
            }
        }
    }

    #[test]
    fn wiener_table_is_a_delta() {
        let grid = Grid::new(8.0, 0.25).unwrap();
        let samples: Vec<_> = (0..3000).map(|s| sample_wiener(grid, 1, s).unwrap()).collect();
        let t = covariance_decay(&samples, 1.0, &[1.0], 4).unwrap();
        assert!((t.entries[0].cov - 1.0).abs() < 5.0 * t.entries[0].std_err);
        for e in &t.entries[1..] {
            assert!(e.cov.abs() < 5.0 * e.std_err, "{e:?}");
        }
        assert!(t.truncated_at.is_some());
        let s = t.sigma_sq().unwrap();
        assert!((s.value - 1.0).abs() < 5.0 * s.std_err);

        let ctx = EnergyContext::new(Potential::nelson(), grid);
        let ibp = covariance_decay_ibp(&ctx, 0.0, &samples[..50], 1.0, &[1.0], 4).unwrap();
        assert_eq!(ibp.entries[0].cov, 1.0);
        assert!(ibp.entries[1..].iter().all(|e| e.cov == 0.0 && e.below_floor));
    }

    #[test]
    fn too_few_bulk_blocks_are_rejected() {
        let grid = Grid::new(4.0, 0.25).unwrap();
        let samples = vec![sample_wiener(grid, 1, 0).unwrap()];
        assert!(matches!(covariance_decay(&samples, 1.0, &[1.0], 4), Err(Error::Argument(_))));
        assert!(covariance_decay(&samples, 1.0, &[0.0], 2).is_err());
    }
}
