//! Normality and isotropy of the rescaled increment `X^ε = ε^{1/2} x_{−ℓ/2, ℓ/2}`
//! with `ℓ = 1/ε`.
//!
//! Samples are strided by about five integrated autocorrelation times so the
//! batches entering the Kolmogorov–Smirnov test count as independent.

use serde::{Deserialize, Serialize};

use super::covariance::{bulk_blocks, covariance_decay, PartialSum};
use super::stats::{iact, mean};
use super::diffusion::MIN_ESS;
use crate::error::{Error, Result};
use crate::path::{IncrementPath, Interval};

/// Standard deviation of the limiting Kolmogorov distribution.
const KS_SD: f64 = 0.2606;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltOptions {
    /// Test level.
    pub level: f64,
    /// Compare against `N(0, v)` instead of the sample variance.
    pub known_variance: Option<f64>,
    /// Sample stride; `None` picks `⌈5·iact⌉`.
    pub stride: Option<usize>,
    /// Largest lag in the `σ²` partial-sum series (blocks of length 1).
    pub sigma_lags: usize,
}

impl Default for CltOptions {
    fn default() -> Self {
        Self {
            level: 0.01,
            known_variance: None,
            stride: None,
            sigma_lags: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub direction: Vec<f64>,
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// Variance of the reference normal law.
    pub reference_variance: f64,
    pub ks_distance: f64,
    /// Approximate standard error of the distance, `0.2606/√n`.
    pub ks_se: f64,
    pub p_value: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub epsilon: f64,
    pub interval: Interval,
    pub stride: usize,
    pub n_batches: usize,
    /// Fewer than 30 strided batches.
    pub flagged: bool,
    pub per_direction: Vec<KsResult>,
    /// Sample covariance of `X^ε`.
    pub covariance: Vec<Vec<f64>>,
    /// Operator-norm distance of `covariance` from `(trace/d)·I`.
    pub isotropy_distance: f64,
    /// Largest `|S_ij| / √(S_ii S_jj / n)` over `i ≠ j`.
    pub isotropy_max_z: f64,
    pub isotropic: bool,
    pub sigma_sq_series: Vec<PartialSum>,
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test against `N(mu, var)` with the small-sample correction
/// `(√n + 0.12 + 0.11/√n) D`.
pub fn ks_normal(xs: &[f64], mu: f64, var: f64) -> (f64, f64) {
    let n = xs.len();
    if n == 0 || !(var > 0.0) {
        return (f64::NAN, f64::NAN);
    }
    let mut z: Vec<f64> = xs.iter().map(|x| (x - mu) / var.sqrt()).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, x) in z.iter().enumerate() {
        let f = super::stats::normal_cdf(*x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let en = nf.sqrt();
    (d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d))
}

/// Grid-aligned `[−ℓ/2, ℓ/2]` with `ℓ = 1/ε`.
fn clt_interval(path: &IncrementPath, epsilon: f64) -> Result<Interval> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!("rescaling ε must be positive, got {epsilon}")));
    }
    let len = 1.0 / epsilon;
    let g = path.grid();
    let steps = g.steps_in(len).map_err(|_| {
        Error::Argument(format!("1/ε = {len} is not a multiple of dt = {}", g.dt()))
    })?;
    let left = -((steps / 2) as f64) * g.dt();
    let iv = Interval::new(left, left + steps as f64 * g.dt())?;
    let half = g.half_width() / 2.0;
    if iv.start < -half - 1e-9 || iv.end > half + 1e-9 {
        return Err(Error::Argument(format!(
            "1/ε = {len} does not fit in the bulk window [{}, {half}]",
            -half
        )));
    }
    Ok(iv)
}

pub fn clt_test(
    samples: &[IncrementPath],
    epsilons: &[f64],
    directions: &[Vec<f64>],
    opts: &CltOptions,
) -> Result<Vec<CltReport>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::MissingInput("no samples for the CLT test".into()))?;
    let d = first.dim();
    if directions.is_empty() || directions.iter().any(|v| v.len() != d) {
        return Err(Error::Argument(format!("CLT directions must be vectors of length {d}")));
    }
    let unit_blocks = if first.grid().steps_in(1.0).is_ok() {
        bulk_blocks(first.grid().half_width(), 1.0)?.len()
    } else {
        0
    };
    let sigma_sq_series = if unit_blocks >= 2 {
        covariance_decay(samples, 1.0, &directions[0], opts.sigma_lags.min(unit_blocks - 1))?.partial_sums
    } else {
        Vec::new()
    };
    epsilons
        .iter()
        .map(|&eps| {
            let iv = clt_interval(first, eps)?;
            let scale = eps.sqrt();
            let xs: Vec<Vec<f64>> = samples
                .iter()
                .map(|p| Ok(p.increment(iv.start, iv.end)?.iter().map(|x| x * scale).collect()))
                .collect::<Result<_>>()?;
            let project = |v: &[f64], x: &[f64]| v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            let stride = opts.stride.unwrap_or_else(|| {
                let tau = directions
                    .iter()
                    .map(|v| iact(&xs.iter().map(|x| project(v, x)).collect::<Vec<_>>()))
                    .fold(1.0, f64::max);
                (5.0 * tau).ceil() as usize
            });
            let batches: Vec<&Vec<f64>> = xs.iter().step_by(stride.max(1)).collect();
            let n = batches.len();
            let per_direction = directions
                .iter()
                .map(|v| {
                    let ys: Vec<f64> = batches.iter().map(|x| project(v, x)).collect();
                    let m = mean(&ys);
                    let var = ys.iter().map(|y| y * y).sum::<f64>() / n as f64;
                    let reference = opts.known_variance.map_or(var, |k| k * v.iter().map(|a| a * a).sum::<f64>());
                    let (dist, p) = ks_normal(&ys, 0.0, reference);
                    KsResult {
                        direction: v.clone(),
                        n,
                        mean: m,
                        variance: var,
                        reference_variance: reference,
                        ks_distance: dist,
                        ks_se: KS_SD / (n as f64).sqrt(),
                        p_value: p,
                        passes: p >= opts.level,
                    }
                })
                .collect();
            // second moments about zero: the increments are centered by symmetry
            let mut cov = vec![vec![0.0; d]; d];
            for x in &batches {
                for i in 0..d {
                    for j in 0..d {
                        cov[i][j] += x[i] * x[j] / n as f64;
                    }
                }
            }
            let tr = (0..d).map(|i| cov[i][i]).sum::<f64>() / d as f64;
            let mut dev = cov.clone();
            for (i, row) in dev.iter_mut().enumerate() {
                row[i] -= tr;
            }
            let mut max_z = 0.0f64;
            for i in 0..d {
                for j in i + 1..d {
                    let se = (cov[i][i] * cov[j][j] / n as f64).sqrt();
                    max_z = max_z.max(cov[i][j].abs() / se);
                }
            }
            Ok(CltReport {
                epsilon: eps,
                interval: iv,
                stride,
                n_batches: n,
                flagged: (n as f64) < MIN_ESS,
                per_direction,
                isotropy_distance: symmetric_norm(&dev),
                isotropy_max_z: max_z,
                isotropic: max_z <= 4.0,
                covariance: cov,
                sigma_sq_series: sigma_sq_series.clone(),
            })
        })
        .collect()
}

/// Spectral norm of a small symmetric matrix by power iteration on `M²`.
fn symmetric_norm(m: &[Vec<f64>]) -> f64 {
    let d = m.len();
    if d == 1 {
        return m[0][0].abs();
    }
    let apply = |x: &[f64]| -> Vec<f64> { (0..d).map(|i| (0..d).map(|j| m[i][j] * x[j]).sum()).collect() };
    let mut x: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let y = apply(&apply(&x));
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm.sqrt();
        x = y.iter().map(|v| v / norm).collect();
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{sample_wiener, Grid};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    #[test]
    fn kolmogorov_tail_matches_tabulated_quantiles() {
        // 1% and 5% critical values of the limiting law
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_accepts_normals_and_rejects_exponentials() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        assert!(ks_normal(&xs, 0.0, 1.0).1 > 0.01);
        let e = Exp::new(1.0).unwrap();
        let ys: Vec<f64> = (0..500).map(|_| e.sample(&mut rng) - 1.0).collect();
        assert!(ks_normal(&ys, 0.0, 1.0).1 < 1e-4);
    }

    use rand::Rng;

    #[test]
    fn wiener_increments_pass_at_every_scale() {
        let grid = Grid::new(8.0, 0.25).unwrap();
        let samples: Vec<_> = (0..400).map(|s| sample_wiener(grid, 2, 100 + s).unwrap()).collect();
        let opts = CltOptions {
            known_variance: Some(1.0),
            ..CltOptions::default()
        };
        let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let reports = clt_test(&samples, &[1.0, 0.25], &dirs, &opts).unwrap();
        for r in &reports {
            // independent draws still get the minimum stride of 5
            assert_eq!((r.stride, r.n_batches), (5, 80));
            assert!(r.per_direction.iter().all(|k| k.passes), "{r:?}");
            assert!(r.isotropic && !r.flagged);
        }
        assert!(!reports[0].sigma_sq_series.is_empty());
        assert!(clt_test(&samples, &[1.0 / 16.0], &dirs, &opts).is_err());
    }

    #[test]
    fn operator_norm_of_diagonal_and_rotated_matrices() {
        assert!((symmetric_norm(&[vec![2.0, 0.0], vec![0.0, -3.0]]) - 3.0).abs() < 1e-9);
        assert!((symmetric_norm(&[vec![0.0, 1.0], vec![1.0, 0.0]]) - 1.0).abs() < 1e-9);
    }
}
