//! Summary statistics for correlated Monte Carlo series.

use serde::{Deserialize, Serialize};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)
}

/// Sample covariance of two equally long series.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return f64::NAN;
    }
    let (mx, my) = (mean(&xs[..n]), mean(&ys[..n]));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n as f64 - 1.0)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let c = covariance(xs, ys);
    let (vx, vy) = (variance(xs), variance(ys));
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    c / (vx * vy).sqrt()
}

/// Window constant of the self-consistent truncation `M ≥ c·τ(M)`.
const SOKAL_C: f64 = 5.0;

/// Integrated autocorrelation time `τ = 1 + 2 Σ_{k≤M} ρ_k` with an
/// automatic window, floored at 1.
pub fn iact(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let m = mean(xs);
    let c0 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for k in 1..n / 2 {
        let ck = (0..n - k).map(|i| (xs[i] - m) * (xs[i + k] - m)).sum::<f64>() / n as f64;
        tau += 2.0 * ck / c0;
        if k as f64 >= SOKAL_C * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Mean of a correlated series with its autocorrelation-inflated error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub mean: f64,
    pub std_err: f64,
    pub iact: f64,
    pub n: usize,
    pub ess: f64,
}

pub fn summarize(xs: &[f64]) -> SeriesSummary {
    let n = xs.len();
    let tau = iact(xs);
    let var = variance(xs);
    let ess = n as f64 / tau;
    SeriesSummary {
        mean: mean(xs),
        std_err: if n >= 2 { (var / ess).sqrt() } else { f64::INFINITY },
        iact: tau,
        n,
        ess,
    }
}

/// `|a − b| / √(se_a² + se_b²)`; zero when both estimates coincide exactly.
pub fn z_score(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    let diff = (a - b).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / (se_a * se_a + se_b * se_b).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn iact_of_white_noise_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..20000).map(|_| rng.sample(StandardNormal)).collect();
        assert!((iact(&xs) - 1.0).abs() < 0.15);
    }

    #[test]
    fn iact_of_ar1_matches_closed_form() {
        // τ = (1+φ)/(1−φ)
        let phi: f64 = 0.8;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                x = phi * x + (1.0 - phi * phi).sqrt() * z;
                x
            })
            .collect();
        let tau = iact(&xs);
        assert!((tau - 9.0).abs() < 0.9, "{tau}");
    }

    #[test]
    fn constant_series_has_unit_iact_and_zero_error() {
        let s = summarize(&[2.0; 50]);
        assert_eq!(s.iact, 1.0);
        assert_eq!(s.std_err, 0.0);
        assert_eq!(z_score(1.0, 0.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn normal_cdf_spot_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_cdf(1.959_963_985) - 0.975).abs() < 1e-6);
        assert!((normal_cdf(-3.0) - 0.001_349_898).abs() < 1e-7);
    }
}
