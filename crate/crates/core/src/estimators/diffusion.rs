use serde::{Deserialize, Serialize};

use super::stats::{summarize, SeriesSummary};
use crate::error::{Error, Result};
use crate::path::IncrementPath;

/// Below this effective sample size an estimate is flagged unreliable.
pub const MIN_ESS: f64 = 30.0;

/// Second moment of `x_{ab}` per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionEstimate {
    pub a: f64,
    pub b: f64,
    /// `E[(x_{ab})_c²]` for each component `c`.
    pub per_component: Vec<SeriesSummary>,
    /// Component average `E[|x_{ab}|²]/d`.
    pub second_moment: SeriesSummary,
    /// `second_moment / |b − a|`.
    pub normalized: f64,
    pub normalized_se: f64,
    pub n_samples: usize,
    pub ess: f64,
    pub reliable: bool,
}

pub fn diffusion(samples: &[IncrementPath], a: f64, b: f64) -> Result<DiffusionEstimate> {
    let first = samples
        .first()
        .ok_or_else(|| Error::MissingInput("no samples for the diffusion estimate".into()))?;
    if !(b > a) {
        return Err(Error::Argument(format!("diffusion interval needs a < b, got [{a}, {b}]")));
    }
    let d = first.dim();
    let incs: Vec<Vec<f64>> = samples.iter().map(|p| p.increment(a, b)).collect::<Result<_>>()?;
    let per_component: Vec<SeriesSummary> = (0..d)
        .map(|c| summarize(&incs.iter().map(|v| v[c] * v[c]).collect::<Vec<_>>()))
        .collect();
    let second_moment = summarize(&incs.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>() / d as f64).collect::<Vec<_>>());
    let len = b - a;
    Ok(DiffusionEstimate {
        a,
        b,
        per_component,
        normalized: second_moment.mean / len,
        normalized_se: second_moment.std_err / len,
        n_samples: samples.len(),
        ess: second_moment.ess,
        reliable: second_moment.ess >= MIN_ESS,
        second_moment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{sample_wiener, Grid};

    #[test]
    fn wiener_samples_have_unit_normalized_diffusion() {
        let grid = Grid::new(4.0, 0.25).unwrap();
        let samples: Vec<_> = (0..4000).map(|s| sample_wiener(grid, 2, s).unwrap()).collect();
        for (a, b) in [(-1.0, 1.0), (0.0, 0.25), (-4.0, 4.0)] {
            let e = diffusion(&samples, a, b).unwrap();
            assert!((e.normalized - 1.0).abs() < 5.0 * e.normalized_se, "{e:?}");
            assert!(e.reliable);
            assert_eq!(e.per_component.len(), 2);
        }
    }

    #[test]
    fn few_samples_are_flagged() {
        let grid = Grid::new(1.0, 0.25).unwrap();
        let samples: Vec<_> = (0..10).map(|s| sample_wiener(grid, 1, s).unwrap()).collect();
        assert!(!diffusion(&samples, 0.0, 1.0).unwrap().reliable);
        assert!(matches!(diffusion(&[], 0.0, 1.0), Err(Error::MissingInput(_))));
    }
}
