//! A `ρ`-mixing proxy: the largest sample correlation between a fixed
//! dictionary of block functionals at distance `n`.
//!
//! A finite dictionary only sees part of `L²`, so the table is a lower bound
//! on the true `ρ(n)`. Strong mixing coefficients are not attempted.

use serde::{Deserialize, Serialize};

use super::covariance::bulk_blocks;
use super::stats::{correlation, iact};
use crate::error::{Error, Result};
use crate::numerics::{fit_line, LineFit};
use crate::path::IncrementPath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingEntry {
    pub n: usize,
    pub rho: f64,
    /// Functionals attaining the maximum, on blocks `i` and `i+n`.
    pub pair: (String, String),
    pub below_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingTable {
    pub block_len: f64,
    pub dictionary: Vec<String>,
    pub entries: Vec<MixingEntry>,
    /// Running maximum from the right, a non-increasing envelope.
    pub envelope: Vec<f64>,
    /// Scale of the largest correlation expected from noise alone.
    pub noise_floor: f64,
    /// Log-log fit of the envelope over lags above the noise floor.
    pub fit: Option<LineFit>,
}

fn dictionary(dim: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..dim).map(|c| format!("x{c}")).collect();
    names.push("norm_sq".into());
    names.push("sup_norm".into());
    names.push("ball".into());
    names
}

fn features(p: &IncrementPath, a: f64, b: f64) -> Result<Vec<f64>> {
    let x = p.increment(a, b)?;
    let g = p.grid();
    let (lo, hi) = (g.node_index(a)?, g.node_index(b)?);
    let mut sup = 0.0f64;
    for k in lo + 1..=hi {
        sup = sup.max(p.increment_nodes(lo, k).iter().map(|v| v * v).sum::<f64>());
    }
    let sq: f64 = x.iter().map(|v| v * v).sum();
    let mut out = x;
    out.push(sq);
    out.push(sup.sqrt());
    out.push(if sq < b - a { 1.0 } else { 0.0 });
    Ok(out)
}

pub fn mixing_proxy(samples: &[IncrementPath], block_len: f64, n_max: usize) -> Result<MixingTable> {
    let first = samples
        .first()
        .ok_or_else(|| Error::MissingInput("no samples for the mixing proxy".into()))?;
    let blocks = bulk_blocks(first.grid().half_width(), block_len)?;
    if blocks.len() < n_max + 1 {
        return Err(Error::Argument(format!(
            "{} bulk blocks cannot resolve lags up to {n_max}",
            blocks.len()
        )));
    }
    let names = dictionary(first.dim());
    let nf = names.len();
    // feats[sample][block][functional]
    let feats: Vec<Vec<Vec<f64>>> = samples
        .iter()
        .map(|p| blocks.iter().map(|b| features(p, b.start, b.end)).collect())
        .collect::<Result<_>>()?;
    let tau = (0..nf)
        .map(|f| iact(&feats.iter().map(|s| s[0][f]).collect::<Vec<_>>()))
        .fold(1.0, f64::max);
    let n_eff = samples.len() as f64 / tau;
    let noise_floor = (2.0 * ((nf * nf) as f64).ln().max(1.0)).sqrt() / n_eff.sqrt();

    let mut entries = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut best = (0.0f64, 0, 0);
        for f in 0..nf {
            for g in 0..nf {
                if n == 0 && f == g {
                    continue;
                }
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for s in &feats {
                    for i in 0..blocks.len() - n {
                        xs.push(s[i][f]);
                        ys.push(s[i + n][g]);
                    }
                }
                let r = correlation(&xs, &ys);
                if r.is_finite() && r.abs() > best.0 {
                    best = (r.abs(), f, g);
                }
            }
        }
        entries.push(MixingEntry {
            n,
            rho: best.0,
            pair: (names[best.1].clone(), names[best.2].clone()),
            below_floor: best.0 <= noise_floor,
        });
    }
    let mut envelope = vec![0.0; entries.len()];
    let mut run = 0.0f64;
    for (k, e) in entries.iter().enumerate().rev() {
        run = run.max(e.rho);
        envelope[k] = run;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = entries
        .iter()
        .skip(1)
        .filter(|e| !e.below_floor)
        .map(|e| ((e.n as f64).ln(), envelope[e.n].ln()))
        .unzip();
    let fit = if xs.len() >= 3 { fit_line(&xs, &ys) } else { None };
    Ok(MixingTable {
        block_len,
        dictionary: names,
        entries,
        envelope,
        noise_floor,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{sample_wiener, Grid};

    #[test]
    fn independent_blocks_sit_at_the_noise_floor() {
        let grid = Grid::new(8.0, 0.25).unwrap();
        let samples: Vec<_> = (0..1500).map(|s| sample_wiener(grid, 1, s).unwrap()).collect();
        let t = mixing_proxy(&samples, 1.0, 4).unwrap();
        // x0 and norm_sq of the same block are uncorrelated, but |x|² and sup are not
        assert!(t.entries[0].rho > 0.5);
        for e in &t.entries[1..] {
            assert!(e.rho < 2.0 * t.noise_floor, "{e:?} vs {}", t.noise_floor);
        }
        assert!(t.envelope.windows(2).all(|w| w[0] >= w[1]));
    }
}
