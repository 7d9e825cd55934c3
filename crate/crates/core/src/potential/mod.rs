//! Pair interactions `W(ξ, t)` between increments.
//!
//! Every built-in kind is radial in `ξ` and even in `t` (the time argument
//! is always taken as `|t|`), which the energy code relies on.

mod conditions;
mod spectral;
mod table;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_to_infinity, logspace};

pub use conditions::{check_conditions, CheckOptions, ConditionReport, Verdict};
pub use spectral::{Dispersion, FormFactor, SpectralData, SpectralValue};
pub use table::TablePotential;

/// `W(ξ,t) = −1/(1+|ξ|²+t²)`.
pub fn nelson_w(xi: &[f64], t: f64) -> f64 {
    -1.0 / (1.0 + norm_sq(xi) + t * t)
}

/// `W(ξ,t) = c (1+|ξ|²+t²)^{−p}`.
pub fn powerlaw_w(xi: &[f64], t: f64, c: f64, p: f64) -> f64 {
    c * (1.0 + norm_sq(xi) + t * t).powf(-p)
}

/// `W(ξ,t) = ∫ dk/(2ω(k)) |ρ(k)|² e^{−ik·ξ − ω(k)|t|}` by quadrature, with
/// a refinement check.
pub fn spectral_w(spec: &SpectralData, xi: &[f64], t: f64) -> Result<SpectralValue> {
    spec.evaluate(xi, t)
}

/// `x^e`, with the integer fast path the sampler's inner loop relies on.
#[inline]
fn pow(x: f64, e: f64) -> f64 {
    if e == e.trunc() && e.abs() <= 16.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

#[inline]
pub(crate) fn norm_sq(xi: &[f64]) -> f64 {
    xi.iter().map(|v| v * v).sum()
}

/// Decay data of a potential: `sup_ξ|W(ξ,t)| ≤ C(1+|t|)^{−γ}` and
/// `sup_ξ|∇∇W(ξ,t)| ≤ K(W)(1+|t|)^{−α}`. `None` means "not known in
/// closed form", in which case the condition checker fits it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub k_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Nelson,
    PowerLaw { c: f64, p: f64 },
    Spectral(SpectralData),
    Table(TablePotential),
}

/// A pair interaction with its decay data.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    decay: Decay,
}

/// Finite-difference step for kinds without analytic derivatives.
const FD_STEP: f64 = 1e-5;

impl Potential {
    pub fn nelson() -> Self {
        let (gamma, alpha, k_w) = powerlaw_decay(-1.0, 1.0);
        Self {
            kind: PotentialKind::Nelson,
            decay: Decay {
                gamma: Some(gamma),
                alpha: Some(alpha),
                k_w: Some(k_w),
            },
        }
    }

    pub fn powerlaw(c: f64, p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Config(format!("powerlaw exponent p must be positive, got {p}")));
        }
        if !c.is_finite() {
            return Err(Error::Config(format!("powerlaw scale c must be finite, got {c}")));
        }
        let (gamma, alpha, k_w) = powerlaw_decay(c, p);
        Ok(Self {
            kind: PotentialKind::PowerLaw { c, p },
            decay: Decay {
                gamma: Some(gamma),
                alpha: Some(alpha),
                k_w: Some(k_w),
            },
        })
    }

    pub fn spectral(data: SpectralData) -> Result<Self> {
        data.validate()?;
        Ok(Self {
            kind: PotentialKind::Spectral(data),
            decay: Decay::default(),
        })
    }

    pub fn table(table: TablePotential, decay: Decay) -> Result<Self> {
        table.validate()?;
        Ok(Self {
            kind: PotentialKind::Table(table),
            decay,
        })
    }

    /// The identically zero interaction.
    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::PowerLaw { c: 0.0, p: 1.0 },
            decay: Decay {
                gamma: Some(f64::INFINITY),
                alpha: Some(f64::INFINITY),
                k_w: Some(0.0),
            },
        }
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn decay(&self) -> Decay {
        self.decay
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PotentialKind::Nelson => "nelson",
            PotentialKind::PowerLaw { .. } => "powerlaw",
            PotentialKind::Spectral(_) => "spectral",
            PotentialKind::Table(_) => "table",
        }
    }

    /// Whether derivatives are exact rather than finite differences.
    pub fn is_analytic(&self) -> bool {
        matches!(self.kind, PotentialKind::Nelson | PotentialKind::PowerLaw { .. })
    }

    /// `(c, p)` for the closed-form kinds.
    fn power_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            PotentialKind::Nelson => Some((-1.0, 1.0)),
            PotentialKind::PowerLaw { c, p } => Some((c, p)),
            _ => None,
        }
    }

    /// Radial profile `f(r², t)` with `W(ξ,t) = f(|ξ|², |t|)`.
    #[inline]
    pub fn radial(&self, r_sq: f64, t: f64) -> f64 {
        let t = t.abs();
        match &self.kind {
            PotentialKind::Nelson => -1.0 / (1.0 + r_sq + t * t),
            PotentialKind::PowerLaw { c, p } => {
                if *c == 0.0 {
                    0.0
                } else if *p == 1.0 {
                    c / (1.0 + r_sq + t * t)
                } else {
                    c * pow(1.0 + r_sq + t * t, -p)
                }
            }
            PotentialKind::Spectral(s) => s.radial_value(r_sq.sqrt(), t),
            PotentialKind::Table(tab) => tab.value(r_sq.sqrt(), t),
        }
    }

    /// `W(ξ, t)`.
    #[inline]
    pub fn eval(&self, xi: &[f64], t: f64) -> f64 {
        self.radial(norm_sq(xi), t)
    }

    /// `∇_ξ W(ξ, t)`.
    pub fn grad(&self, xi: &[f64], t: f64) -> Vec<f64> {
        let r_sq = norm_sq(xi);
        let g = self.radial_derivative(r_sq, t);
        xi.iter().map(|x| 2.0 * g * x).collect()
    }

    /// `∂f/∂(r²)` of the radial profile.
    #[inline]
    pub fn radial_derivative(&self, r_sq: f64, t: f64) -> f64 {
        if let Some((c, p)) = self.power_params() {
            let dd = 1.0 + r_sq + t * t;
            return -p * c * pow(dd, -p - 1.0);
        }
        let h = FD_STEP * (1.0 + r_sq);
        if r_sq > h {
            (self.radial(r_sq + h, t) - self.radial(r_sq - h, t)) / (2.0 * h)
        } else {
            (self.radial(r_sq + h, t) - self.radial(r_sq, t)) / h
        }
    }

    /// `∂²f/∂(r²)²` of the radial profile.
    #[inline]
    fn radial_second(&self, r_sq: f64, t: f64) -> f64 {
        if let Some((c, p)) = self.power_params() {
            let dd = 1.0 + r_sq + t * t;
            return p * (p + 1.0) * c * pow(dd, -p - 2.0);
        }
        let h = 1e-3 * (1.0 + r_sq);
        let lo = (r_sq - h).max(0.0);
        let mid = lo + h;
        (self.radial(lo + 2.0 * h, t) - 2.0 * self.radial(mid, t) + self.radial(lo, t)) / (h * h)
    }

    /// Directional second derivative `vᵀ ∇∇W(ξ,t) v`.
    pub fn hess_dir(&self, xi: &[f64], t: f64, v: &[f64]) -> f64 {
        let r_sq = norm_sq(xi);
        let g1 = self.radial_derivative(r_sq, t);
        let g2 = self.radial_second(r_sq, t);
        let xv: f64 = xi.iter().zip(v).map(|(a, b)| a * b).sum();
        2.0 * g1 * norm_sq(v) + 4.0 * g2 * xv * xv
    }

    /// Operator norm of the Hessian `∇_ξ∇_ξ W(ξ,t)` in dimension `xi.len()`.
    pub fn hess_norm(&self, xi: &[f64], t: f64) -> f64 {
        let r_sq = norm_sq(xi);
        let g1 = self.radial_derivative(r_sq, t);
        let g2 = self.radial_second(r_sq, t);
        // eigenvalues: 2 f' + 4 f'' r² along ξ, 2 f' across
        let along = (2.0 * g1 + 4.0 * g2 * r_sq).abs();
        if xi.len() > 1 {
            along.max((2.0 * g1).abs())
        } else {
            along
        }
    }

    /// `sup_ξ |W(ξ, t)|`.
    pub fn envelope(&self, t: f64) -> f64 {
        let t = t.abs();
        match &self.kind {
            PotentialKind::Nelson | PotentialKind::PowerLaw { .. } => {
                let (c, p) = self.power_params().unwrap();
                c.abs() * (1.0 + t * t).powf(-p)
            }
            // |ρ|²/(2ω) ≥ 0, so the modulus is largest at ξ = 0
            PotentialKind::Spectral(s) => s.radial_value(0.0, t).abs(),
            PotentialKind::Table(_) => self.radial_sup(t, |r_sq, t| self.radial(r_sq, t).abs()),
        }
    }

    /// `sup_ξ |∇_ξ W(ξ, t)|`.
    pub fn grad_envelope(&self, t: f64) -> f64 {
        let t = t.abs();
        if let Some((c, p)) = self.power_params() {
            let cc = 1.0 + t * t;
            let r = (cc / (2.0 * p + 1.0)).sqrt();
            return 2.0 * p * c.abs() * r * ((2.0 * p + 1.0) / ((2.0 * p + 2.0) * cc)).powf(p + 1.0);
        }
        self.radial_sup(t, |r_sq, t| 2.0 * r_sq.sqrt() * self.radial_derivative(r_sq, t).abs())
    }

    /// `sup_ξ ‖∇_ξ∇_ξ W(ξ, t)‖`.
    pub fn hess_envelope(&self, t: f64) -> f64 {
        let t = t.abs();
        if let Some((c, p)) = self.power_params() {
            return 2.0 * p * c.abs() * (1.0 + t * t).powf(-p - 1.0);
        }
        self.radial_sup(t, |r_sq, t| {
            let g1 = self.radial_derivative(r_sq, t);
            let g2 = self.radial_second(r_sq, t);
            (2.0 * g1 + 4.0 * g2 * r_sq).abs().max((2.0 * g1).abs())
        })
    }

    /// Sup over a radial mesh, used for kinds without a closed-form envelope.
    fn radial_sup<F: Fn(f64, f64) -> f64>(&self, t: f64, f: F) -> f64 {
        let scale = 1.0 + t;
        let mut best = f(0.0, t);
        for r in logspace(1e-3 * scale, 1e3 * scale, 400) {
            best = best.max(f(r * r, t));
        }
        best
    }

    /// `∫_{-∞}^{∞} sup_ξ |W(ξ,|t|)| dt`, the envelope of the line integral
    /// in the first growth condition. `None` when it diverges.
    pub fn line_integral_envelope(&self) -> Option<f64> {
        integrate_to_infinity(|t| self.envelope(t), 0.0).map(|v| 2.0 * v)
    }
}

/// `(γ, α, K(W))` for `c(1+|ξ|²+t²)^{−p}`.
fn powerlaw_decay(c: f64, p: f64) -> (f64, f64, f64) {
    // sup_t (1+t)²/(1+t²) = 2 at t = 1
    (2.0 * p, 2.0 * p + 2.0, 2.0 * p * c.abs() * 2f64.powf(p + 1.0))
}
