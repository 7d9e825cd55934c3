//! Block second moments `σ_i² = E[sup_t |x_{iL,t}|²]` entering the
//! Dobrushin bound.
//!
//! The centering point is `w = 0` rather than the infimum over `w`, which
//! only makes the estimate larger. The supremum over exterior conditions is
//! probed with a steep frozen ramp outside the block, not maximized.

use serde::{Deserialize, Serialize};

use super::stats::{summarize, SeriesSummary};
use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::path::{to_blocks, IncrementPath, Interval};
use crate::sampler::{run_chain, SamplerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSqEstimate {
    pub block_len: f64,
    /// Largest bulk-block mean under the unconditioned measure.
    pub unconditioned: SeriesSummary,
    /// Block `τ_0` with the exterior frozen to a ramp of slope `probe_slope`.
    pub probe: SeriesSummary,
    pub probe_slope: f64,
    /// `max(unconditioned, probe)`.
    pub conservative: f64,
}

/// `max_i E[sup|x_{iL,t}|²]` over blocks inside the central half-window.
pub fn block_sup_moment(samples: &[IncrementPath], block_len: f64) -> Result<SeriesSummary> {
    let first = samples
        .first()
        .ok_or_else(|| Error::MissingInput("no samples for the block moment".into()))?;
    let half = first.grid().half_width() / 2.0;
    let blocks0 = to_blocks(first, block_len)?;
    let bulk: Vec<usize> = blocks0
        .iter()
        .enumerate()
        .filter(|(_, b)| b.interval().start >= -half - 1e-9 && b.interval().end <= half + 1e-9)
        .map(|(k, _)| k)
        .collect();
    if bulk.is_empty() {
        return Err(Error::Argument(format!("no block of length {block_len} fits in the bulk window")));
    }
    let mut series = vec![Vec::with_capacity(samples.len()); bulk.len()];
    for p in samples {
        let blocks = to_blocks(p, block_len)?;
        for (s, k) in series.iter_mut().zip(&bulk) {
            s.push(blocks[*k].sup_norm().powi(2));
        }
    }
    let summaries: Vec<SeriesSummary> = series.iter().map(|s| summarize(s)).collect();
    Ok(summaries
        .into_iter()
        .max_by(|a, b| a.mean.total_cmp(&b.mean))
        .expect("non-empty bulk"))
}

/// Runs the unconditioned chain and a frozen-exterior chain on `τ_0`.
pub fn sigma_sq_estimate(
    ctx: &EnergyContext,
    config: &SamplerConfig,
    block_len: f64,
    probe_slope: f64,
) -> Result<SigmaSqEstimate> {
    let free_run = run_chain(ctx, config, None)?;
    let unconditioned = block_sup_moment(&free_run.samples, block_len)?;

    let block = Interval::new(0.0, block_len)?;
    let mut probe_cfg = config.clone();
    probe_cfg.free = Some(block);
    probe_cfg.proposal.block = probe_cfg.proposal.block.min(config.grid.steps_in(block_len)?);
    probe_cfg.seed = config.seed.wrapping_add(0x9e37_79b9);
    let mut slope = vec![0.0; config.dim];
    slope[0] = probe_slope;
    let mut init = IncrementPath::ramp(config.grid, &slope)?;
    // start the free block from rest
    let cells = config.grid.cells(block)?;
    let d = config.dim;
    let mut steps = init.steps().to_vec();
    steps[cells.start * d..cells.end * d].fill(0.0);
    init = IncrementPath::from_steps(config.grid, d, steps)?;
    let probe_run = run_chain(ctx, &probe_cfg, Some(init))?;
    let values: Vec<f64> = probe_run
        .samples
        .iter()
        .map(|p| {
            let blocks = to_blocks(p, block_len)?;
            let b0 = blocks.iter().find(|b| b.index == 0).expect("τ_0 lies in the window");
            Ok(b0.sup_norm().powi(2))
        })
        .collect::<Result<_>>()?;
    let probe = summarize(&values);
    Ok(SigmaSqEstimate {
        block_len,
        conservative: unconditioned.mean.max(probe.mean),
        unconditioned,
        probe,
        probe_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{sample_wiener, Grid};

    /// `E[sup_{[0,1]} |B|²]` from `P(sup|B| < x) = (4/π) Σ_k (−1)^k/(2k+1) exp(−(2k+1)²π²/(8x²))`.
    fn brownian_sup_second_moment() -> f64 {
        let pi = std::f64::consts::PI;
        let cdf = |x: f64| -> f64 {
            if x <= 0.0 {
                return 0.0;
            }
            (0..200)
                .map(|k| {
                    let m = (2 * k + 1) as f64;
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign / m * (-(m * m) * pi * pi / (8.0 * x * x)).exp()
                })
                .sum::<f64>()
                * 4.0
                / pi
        };
        // E[S²] = ∫ 2x P(S > x) dx
        crate::numerics::integrate(|x| 2.0 * x * (1.0 - cdf(x)), 0.0, 12.0, 400, 8)
    }

    #[test]
    fn wiener_block_moment_approaches_the_series_value() {
        let exact = brownian_sup_second_moment();
        assert!((exact - 1.8319).abs() < 1e-3, "{exact}");
        let grid = Grid::new(2.0, 1.0 / 256.0).unwrap();
        let samples: Vec<_> = (0..4000).map(|s| sample_wiener(grid, 1, s).unwrap()).collect();
        let m = block_sup_moment(&samples, 1.0).unwrap();
        // the grid maximum sits below the continuum supremum
        assert!(m.mean < exact + 4.0 * m.std_err);
        assert!(m.mean > exact - 0.15 - 4.0 * m.std_err, "{m:?}");
    }

    #[test]
    fn moment_grows_with_block_length() {
        let grid = Grid::new(4.0, 0.125).unwrap();
        let samples: Vec<_> = (0..2000).map(|s| sample_wiener(grid, 1, s).unwrap()).collect();
        let one = block_sup_moment(&samples, 1.0).unwrap();
        let two = block_sup_moment(&samples, 2.0).unwrap();
        assert!(two.mean > one.mean);
    }
}
