//! Deterministic lower bound on the diffusion constant.
//!
//! Two integrations by parts give `2 E[X²] ≥ ℓ − √(E|B|) √(E[X²])` with
//! `B = λ ∫∫_{[a,b]²} D_t D_s H_T`. The Hessian decay bounds
//! `|D_t D_s H_T| ≤ 2K (1+|t−s|)^{2−α} / ((α−1)(α−2))` for every path, so
//! `E|B| ≤ ĉ λ ℓ` with an explicit `ĉ`, and `y = √(E[X²]/ℓ)` satisfies
//! `2y² − 1 + √(ĉλ) y ≥ 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::integrate;
use crate::potential::Potential;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCertificate {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub k_w: f64,
    /// `ĉ` with `E|B_{ab,ab}| ≤ ĉ λ |b−a|`.
    pub c_lambda_hat: f64,
    /// The interval-independent constant `4K/((α−1)(α−2)(α−3))`.
    pub c_uniform: f64,
    pub sigma_minus: f64,
    pub sigma_minus_sq: f64,
    /// `2y² − 1 + √(ĉλ) y` at `y = σ₋`.
    pub quadratic_root_check: f64,
}

/// Positive root of `2y² + √(cλ) y − 1 = 0`.
pub fn sigma_minus(c_lambda: f64) -> f64 {
    let s = c_lambda.sqrt();
    // (−s + √(s²+8))/4 rewritten to avoid cancellation for large s
    2.0 / (s + (s * s + 8.0).sqrt())
}

/// Certificate from explicit decay data `(α, K(W))`.
pub fn certificate_from_decay(alpha: f64, k_w: f64, lambda: f64, a: f64, b: f64) -> Result<LowerBoundCertificate> {
    if !(alpha > 3.0) {
        return Err(Error::Numeric(format!(
            "lower-bound certificate refused: Hessian decay exponent {alpha} ≤ 3 makes the bound diverge"
        )));
    }
    if !(k_w >= 0.0 && k_w.is_finite()) {
        return Err(Error::Numeric(format!("lower-bound certificate needs a finite K(W), got {k_w}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Argument(format!("lower-bound certificate needs λ ≥ 0, got {lambda}")));
    }
    let len = b - a;
    if !(len > 0.0) {
        return Err(Error::Argument(format!("certificate interval needs a < b, got [{a}, {b}]")));
    }
    let pair = 2.0 * k_w / ((alpha - 1.0) * (alpha - 2.0));
    // ∫∫_{[a,b]²} (1+|s−t|)^{2−α} = 2 ∫_0^ℓ (ℓ−r)(1+r)^{2−α} dr
    let square = 2.0 * integrate(|r| (len - r) * (1.0 + r).powf(2.0 - alpha), 0.0, len, 64, 8);
    let c_hat = pair * square / len;
    let c_uniform = 2.0 * pair / (alpha - 3.0);
    let y = sigma_minus(c_hat * lambda);
    // the root of 2y² = 1 squares to 1/2 exactly
    let sigma_minus_sq = if lambda == 0.0 { 0.5 } else { y * y };
    Ok(LowerBoundCertificate {
        lambda,
        a,
        b,
        alpha,
        k_w,
        c_lambda_hat: c_hat,
        c_uniform,
        sigma_minus: y,
        sigma_minus_sq,
        quadratic_root_check: 2.0 * y * y - 1.0 + (c_hat * lambda).sqrt() * y,
    })
}

/// Certificate using the potential's declared Hessian decay.
pub fn lower_bound_certificate(pot: &Potential, lambda: f64, a: f64, b: f64) -> Result<LowerBoundCertificate> {
    let decay = pot.decay();
    match (decay.alpha, decay.k_w) {
        (Some(alpha), Some(k_w)) => certificate_from_decay(alpha, k_w, lambda, a, b),
        _ => Err(Error::Numeric(format!(
            "the {} potential has no declared Hessian decay; run the condition check and use its fit",
            pot.name()
        ))),
    }
}
