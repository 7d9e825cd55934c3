//! Analytic bound on the Dobrushin interaction matrix of the block model.
//!
//! With blocks of length `L`, `C_ij ≤ C λ K(W) σ² (1+|i−j|)^{2−α}`, so every
//! row sums to at most `2 C λ K σ² Σ_{m≥1} (1+m)^{2−α} = 2 C λ K σ² ζ(α−2, 2)`.
//! Uniqueness follows once that sum is below one. The prefactor `C` is not
//! fixed by the argument and is taken as 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::hurwitz_zeta;
use crate::potential::ConditionReport;

/// Prefactor of the matrix-element bound.
pub const DOBRUSHIN_PREFACTOR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DobrushinReport {
    pub block_len: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub k_w: f64,
    pub sigma_sq_hat: f64,
    pub prefactor: f64,
    /// `Σ_{m≥1} (1+m)^{2−α}`.
    pub tail_sum: f64,
    /// Upper bound on every row sum `Σ_i C_ij`.
    pub row_bound: f64,
    /// Largest coupling with `row_bound < 1`.
    pub lambda_star: f64,
    pub unique: bool,
    pub note: Option<String>,
}

/// `Σ_{m≥1} (1+m)^{−s}` for `s > 1`.
pub fn power_tail_sum(s: f64) -> f64 {
    hurwitz_zeta(s, 2.0)
}

pub fn dobrushin_from_decay(alpha: f64, k_w: f64, lambda: f64, block_len: f64, sigma_sq: f64) -> Result<DobrushinReport> {
    if !(alpha > 3.0) {
        return Err(Error::Numeric(format!(
            "Dobrushin bound refused: Hessian decay exponent {alpha} ≤ 3 makes the row sums diverge"
        )));
    }
    if !(k_w >= 0.0 && k_w.is_finite() && sigma_sq >= 0.0 && sigma_sq.is_finite()) {
        return Err(Error::Numeric(format!(
            "Dobrushin bound needs finite K(W) and σ², got {k_w} and {sigma_sq}"
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Argument(format!("Dobrushin bound needs λ ≥ 0, got {lambda}")));
    }
    let tail_sum = power_tail_sum(alpha - 2.0);
    let per_lambda = 2.0 * DOBRUSHIN_PREFACTOR * k_w * sigma_sq * tail_sum;
    let row_bound = lambda * per_lambda;
    let lambda_star = if per_lambda > 0.0 { 1.0 / per_lambda } else { f64::INFINITY };
    let note = (lambda == 0.0).then(|| "unconditional at λ=0".to_string());
    Ok(DobrushinReport {
        block_len,
        lambda,
        alpha,
        k_w,
        sigma_sq_hat: sigma_sq,
        prefactor: DOBRUSHIN_PREFACTOR,
        tail_sum,
        row_bound,
        lambda_star,
        unique: row_bound < 1.0,
        note,
    })
}

/// Uses the Hessian decay exponent and constant of a condition report.
pub fn dobrushin_bound(report: &ConditionReport, lambda: f64, block_len: f64, sigma_sq: f64) -> Result<DobrushinReport> {
    if !report.h4.holds.holds() {
        return Err(Error::Numeric(format!(
            "Dobrushin bound refused: the Hessian decay condition does not hold for {} (fitted α = {})",
            report.potential, report.h4.alpha_fit
        )));
    }
    dobrushin_from_decay(report.h4.alpha, report.h4.k_w_fit, lambda, block_len, sigma_sq)
}
