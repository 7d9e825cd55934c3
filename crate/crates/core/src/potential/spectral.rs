use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::gauss_legendre;

/// Dispersion law `ω(k)` of the boson field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dispersion {
    /// `ω(k) = m`
    Constant { value: f64 },
    /// `ω(k) = |k|`
    Linear,
    /// `ω(k) = √(|k|² + m²)`
    Relativistic { mass: f64 },
}

impl Dispersion {
    fn at(&self, k: f64) -> f64 {
        match *self {
            Dispersion::Constant { value } => value,
            Dispersion::Linear => k.abs(),
            Dispersion::Relativistic { mass } => (k * k + mass * mass).sqrt(),
        }
    }
}

/// Radial form factor `ρ(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FormFactor {
    /// Indicator of the ball `|k| ≤ radius`.
    Indicator { radius: f64 },
    /// `ρ(k) = exp(−|k|²/(2 width²))`.
    Gaussian { width: f64 },
}

impl FormFactor {
    fn sq(&self, k: f64) -> f64 {
        match *self {
            FormFactor::Indicator { radius } => {
                if k.abs() <= radius {
                    1.0
                } else {
                    0.0
                }
            }
            FormFactor::Gaussian { width } => (-(k * k) / (width * width)).exp(),
        }
    }

    /// Radius beyond which `ρ` vanishes, if compactly supported.
    fn support(&self) -> Option<f64> {
        match *self {
            FormFactor::Indicator { radius } => Some(radius),
            FormFactor::Gaussian { .. } => None,
        }
    }
}

/// Spectral data and k-space mesh for `W(ξ,t) = ∫ dk/(2ω) |ρ|² e^{−ik·ξ−ω t}`.
///
/// The mesh is a composite Gauss–Legendre rule with `panels` panels of 8
/// nodes per axis on `[-cutoff, cutoff]` (radial `[0, cutoff]` for `d = 3`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub dim: usize,
    pub omega: Dispersion,
    pub rho: FormFactor,
    pub cutoff: f64,
    pub panels: usize,
    /// Relative tolerance between the mesh and its refinement.
    pub tol: f64,
}

/// Quadrature result with its imaginary residue and refinement error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralValue {
    pub re: f64,
    pub im: f64,
    pub refinement_error: f64,
}

const NODES: usize = 8;

impl SpectralData {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Config(format!("spectral potentials support d = 1, 2, 3, got {}", self.dim)));
        }
        if !(self.cutoff > 0.0) || self.panels == 0 || !(self.tol > 0.0) {
            return Err(Error::Config("spectral mesh needs cutoff > 0, panels ≥ 1, tol > 0".into()));
        }
        match self.omega {
            Dispersion::Constant { value } if !(value > 0.0) => {
                return Err(Error::Config("constant dispersion must be positive".into()))
            }
            Dispersion::Relativistic { mass } if mass < 0.0 => {
                return Err(Error::Config("boson mass must be non-negative".into()))
            }
            _ => {}
        }
        match self.rho {
            FormFactor::Indicator { radius } if radius < 0.0 => {
                return Err(Error::Config("form factor radius must be non-negative".into()))
            }
            FormFactor::Gaussian { width } if !(width > 0.0) => {
                return Err(Error::Config("form factor width must be positive".into()))
            }
            _ => {}
        }
        let origin = vec![0.0; self.dim];
        let mut unit = origin.clone();
        unit[0] = 1.0;
        for (xi, t) in [(&origin, 0.0), (&origin, 1.0), (&unit, 0.0)] {
            self.evaluate(xi, t)?;
        }
        Ok(())
    }

    fn upper(&self) -> f64 {
        self.rho.support().map_or(self.cutoff, |r| r.min(self.cutoff))
    }

    /// Quadrature on a mesh with the given panel count; returns `(re, im)`.
    fn quadrature(&self, xi: &[f64], t: f64, panels: usize) -> (f64, f64) {
        let t = t.abs();
        let (x, w) = gauss_legendre(NODES);
        let k_max = self.upper();
        let weight = |k: f64| {
            let om = self.omega.at(k);
            self.rho.sq(k) / (2.0 * om) * (-om * t).exp()
        };
        match self.dim {
            1 => {
                let h = 2.0 * k_max / panels as f64;
                let (mut re, mut im) = (0.0, 0.0);
                for p in 0..panels {
                    let mid = -k_max + (p as f64 + 0.5) * h;
                    for (xn, wn) in x.iter().zip(&w) {
                        let k = mid + 0.5 * h * xn;
                        let f = 0.5 * h * wn * weight(k);
                        let phase = k * xi[0];
                        re += f * phase.cos();
                        im -= f * phase.sin();
                    }
                }
                (re, im)
            }
            2 => {
                let h = 2.0 * k_max / panels as f64;
                let nodes: Vec<(f64, f64)> = (0..panels)
                    .flat_map(|p| {
                        let mid = -k_max + (p as f64 + 0.5) * h;
                        x.iter().zip(&w).map(move |(xn, wn)| (mid + 0.5 * h * xn, 0.5 * h * wn))
                    })
                    .collect();
                let (mut re, mut im) = (0.0, 0.0);
                for &(k1, w1) in &nodes {
                    for &(k2, w2) in &nodes {
                        let k = (k1 * k1 + k2 * k2).sqrt();
                        let f = w1 * w2 * weight(k);
                        let phase = k1 * xi[0] + k2 * xi[1];
                        re += f * phase.cos();
                        im -= f * phase.sin();
                    }
                }
                (re, im)
            }
            _ => {
                // radial reduction: ∫ 4π k² sinc(k r) (...) dk, real by symmetry
                let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                let h = k_max / panels as f64;
                let mut re = 0.0;
                for p in 0..panels {
                    let mid = (p as f64 + 0.5) * h;
                    for (xn, wn) in x.iter().zip(&w) {
                        let k = mid + 0.5 * h * xn;
                        let kr = k * r;
                        let sinc = if kr.abs() < 1e-8 { 1.0 } else { kr.sin() / kr };
                        re += 0.5 * h * wn * 4.0 * std::f64::consts::PI * k * k * weight(k) * sinc;
                    }
                }
                (re, 0.0)
            }
        }
    }

    /// Evaluates on the configured mesh and its two-fold refinement; fails
    /// when they disagree beyond `tol`.
    pub fn evaluate(&self, xi: &[f64], t: f64) -> Result<SpectralValue> {
        if xi.len() != self.dim {
            return Err(Error::Argument(format!(
                "spectral potential is {}-dimensional, got ξ of length {}",
                self.dim,
                xi.len()
            )));
        }
        let (coarse, _) = self.quadrature(xi, t, self.panels);
        let (fine, im) = self.quadrature(xi, t, 2 * self.panels);
        let err = (fine - coarse).abs();
        if !fine.is_finite() || err > self.tol * fine.abs().max(1.0) {
            return Err(Error::Quadrature {
                coarse,
                fine,
                tol: self.tol,
            });
        }
        Ok(SpectralValue {
            re: fine,
            im,
            refinement_error: err,
        })
    }

    /// Real part at `|ξ| = r`, used by the energy code. Convergence has
    /// been checked at construction.
    pub(crate) fn radial_value(&self, r: f64, t: f64) -> f64 {
        let mut xi = vec![0.0; self.dim];
        xi[0] = r;
        self.quadrature(&xi, t, 2 * self.panels).0
    }
}
