//! Numerical checks of the growth and decay conditions on `W`.
//!
//! Suprema over all paths are not computable. For radial potentials the
//! sup over `ξ` is an envelope in `t` alone, which is what the decay
//! conditions actually constrain; path-dependent quantities are maximized
//! over the supplied sample plus the zero path and steep ramps.

use serde::{Deserialize, Serialize};

use super::Potential;
use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::numerics::{fit_line, integrate_to_infinity, logspace, LineFit};
use crate::path::{Grid, IncrementPath, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }
}

/// How a verdict was reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// RMS residual of the log-log fit, or 0 for direct bounds.
    pub residual: f64,
    /// Number of paths, points or evaluations behind the number.
    pub sample_size: usize,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticGrowth {
    pub holds: Verdict,
    /// `max |U_I| / |I|²` over the tested intervals and paths.
    pub c_quadratic: f64,
    /// `∫ sup_ξ |W(ξ,|t|)| dt`, an upper bound for every path.
    pub line_integral: Option<f64>,
    /// Largest truncated `∫ |W(x_{0t},|t|)| dt` over the path sample.
    pub line_integral_sampled: f64,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGrowth {
    pub holds: Verdict,
    /// `max (Q + tail) / (1+|ξ|)`.
    pub c_linear: f64,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantBound {
    pub holds: Verdict,
    /// `2 ∫_0^∞ r sup_ξ|W(ξ,r)| dr`, bounding the quadrant integral for all paths.
    pub c_abs: Option<f64>,
    /// Largest truncated quadrant integral over the path sample.
    pub sampled: f64,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeDecay {
    pub holds: Verdict,
    pub gamma_fit: f64,
    pub fit: Option<LineFit>,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianDecay {
    pub holds: Verdict,
    pub alpha_fit: f64,
    /// Exponent paired with `k_w_fit`: the declared one when known, else the fit.
    pub alpha: f64,
    /// `sup_t sup_ξ‖∇∇W‖ (1+t)^α`.
    pub k_w_fit: f64,
    pub fit: Option<LineFit>,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub potential: String,
    pub h1: QuadraticGrowth,
    pub h2: LinearGrowth,
    pub h3: QuadrantBound,
    pub h3b: EnvelopeDecay,
    pub h4: HessianDecay,
}

impl ConditionReport {
    /// `(name, verdict)` pairs in a fixed order.
    pub fn verdicts(&self) -> [(&'static str, Verdict); 5] {
        [
            ("h1", self.h1.holds),
            ("h2", self.h2.holds),
            ("h3", self.h3.holds),
            ("h3b", self.h3b.holds),
            ("h4", self.h4.holds),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    /// Tolerance on fitted exponents and on fit residuals.
    pub tol: f64,
    /// Fit window for the decay exponents.
    pub fit_range: (f64, f64),
    pub fit_points: usize,
    /// Grid used when no paths are supplied.
    pub grid: Grid,
    /// Slope of the steepest deterministic ramp path.
    pub ramp_slope: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tol: 0.1,
            fit_range: (10.0, 1e3),
            fit_points: 41,
            grid: Grid::new(8.0, 0.25).expect("default grid"),
            ramp_slope: 4.0,
        }
    }
}

const INTERVAL_LENGTHS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
const Q_SHIFTS: [f64; 3] = [0.0, 1.0, 10.0];

fn decay_fit<F: Fn(f64) -> f64>(f: F, opts: &CheckOptions) -> Option<LineFit> {
    let ts = logspace(opts.fit_range.0, opts.fit_range.1, opts.fit_points);
    let (xs, ys): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .map(|t| (t.ln(), f(*t)))
        .filter(|(_, v)| *v > 0.0 && v.is_finite())
        .map(|(x, v)| (x, v.ln()))
        .unzip();
    if xs.len() < 3 {
        return None;
    }
    fit_line(&xs, &ys)
}

/// Test paths: the sample, the zero path and ramps along the first axis.
fn test_paths(paths: &[IncrementPath], opts: &CheckOptions) -> Result<Vec<IncrementPath>> {
    let (grid, d) = match paths.first() {
        Some(p) => (*p.grid(), p.dim()),
        None => (opts.grid, 1),
    };
    if paths.iter().any(|p| p.grid() != &grid || p.dim() != d) {
        return Err(Error::Argument("condition check paths must share grid and dimension".into()));
    }
    let mut out = paths.to_vec();
    out.push(IncrementPath::zeros(grid, d)?);
    for slope in [1.0, opts.ramp_slope] {
        let mut v = vec![0.0; d];
        v[0] = slope;
        out.push(IncrementPath::ramp(grid, &v)?);
    }
    Ok(out)
}

pub fn check_conditions(pot: &Potential, paths: &[IncrementPath], opts: &CheckOptions) -> Result<ConditionReport> {
    let all = test_paths(paths, opts)?;
    let grid = *all[0].grid();
    let d = all[0].dim();
    let ctx = EnergyContext::new(pot.clone(), grid);
    let tol = opts.tol;

    // growth of the self-energy and the line integral
    let mut c_quadratic = 0.0f64;
    let mut n_u = 0;
    for len in INTERVAL_LENGTHS.iter().filter(|l| **l <= 2.0 * grid.half_width()) {
        let interval = Interval::new(-len / 2.0, len / 2.0)?;
        if grid.cells(interval).is_err() {
            continue;
        }
        for x in &all {
            let u = ctx.u_interval(x, interval)?;
            c_quadratic = c_quadratic.max(u.value.abs() / (len * len));
            n_u += 1;
        }
    }
    let line_integral = pot.line_integral_envelope();
    let mid = grid.node_index(0.0)?;
    let mut line_integral_sampled = 0.0f64;
    for x in &all {
        let mut acc = 0.0;
        for k in 0..grid.n_steps() {
            let inc = x.increment_nodes(mid, k);
            acc += grid.dt() * pot.eval(&inc, grid.node(k)).abs();
        }
        line_integral_sampled = line_integral_sampled.max(acc);
    }
    let h1 = QuadraticGrowth {
        holds: Verdict::from_bool(c_quadratic.is_finite() && line_integral.is_some()),
        c_quadratic,
        line_integral,
        line_integral_sampled,
        evidence: Evidence {
            residual: 0.0,
            sample_size: n_u,
            method: "max |U_I|/|I|^2 over sampled, zero and ramp paths; analytic envelope for the line integral"
                .into(),
        },
    };

    // Q(x, ξ, a) ≤ C(1+|ξ|)
    let mut c_linear = 0.0f64;
    let mut n_q = 0;
    let mut tails_finite = true;
    for x in &all {
        for r in 0..=16 {
            let mut xi = vec![0.0; d];
            xi[0] = r as f64;
            for a in Q_SHIFTS {
                let q = ctx.q_quadrant(x, &xi, a)?;
                tails_finite &= q.tail_error.is_finite();
                c_linear = c_linear.max((q.value + q.tail_error) / (1.0 + r as f64));
                n_q += 1;
            }
        }
    }
    let h2 = LinearGrowth {
        holds: Verdict::from_bool(tails_finite),
        c_linear,
        evidence: Evidence {
            residual: 0.0,
            sample_size: n_q,
            method: "max (Q + tail bound)/(1+|xi|), |xi| in 0..16, a in {0,1,10}".into(),
        },
    };

    // quadrant integral of |W(x_st, t-s) - W(0, t-s)|
    let c_abs = integrate_to_infinity(|r| 2.0 * r * pot.envelope(r), 0.0);
    let mut sampled = 0.0f64;
    let pts = grid.node_index(0.0)?;
    for x in &all {
        let mut acc = 0.0;
        for k in pts..grid.n_steps() {
            for l in 0..pts {
                let tau = grid.cell_center(k) - grid.cell_center(l);
                let mut inc = x.increment_nodes(l, k);
                // cell-center increment
                for (c, v) in inc.iter_mut().enumerate() {
                    *v += 0.5 * (x.step(k)[c] - x.step(l)[c]);
                }
                acc += (pot.eval(&inc, tau) - pot.radial(0.0, tau)).abs();
            }
        }
        sampled = sampled.max(acc * grid.dt() * grid.dt());
    }
    let h3 = QuadrantBound {
        holds: Verdict::from_bool(c_abs.is_some()),
        c_abs,
        sampled,
        evidence: Evidence {
            residual: 0.0,
            sample_size: all.len(),
            method: "2 * integral of r sup|W(.,r)| over r > 0".into(),
        },
    };

    // decay of sup_ξ |W|
    let fit_w = decay_fit(|t| pot.envelope(t), opts);
    let h3b = match &fit_w {
        None => EnvelopeDecay {
            holds: Verdict::Inconclusive,
            gamma_fit: f64::NAN,
            fit: None,
            evidence: fit_evidence(None, opts),
        },
        Some(f) => {
            let gamma_fit = -f.slope;
            let holds = if f.residual > tol {
                Verdict::Inconclusive
            } else {
                Verdict::from_bool(gamma_fit - tol > 2.0)
            };
            EnvelopeDecay {
                holds,
                gamma_fit,
                fit: Some(*f),
                evidence: fit_evidence(Some(f), opts),
            }
        }
    };

    // decay of sup_ξ ‖∇∇W‖
    let fit_h = decay_fit(|t| pot.hess_envelope(t), opts);
    let h4 = match &fit_h {
        None => {
            // identically flat Hessian: the bound holds with K = 0
            let zero = (0..opts.fit_points).all(|i| pot.hess_envelope(i as f64) == 0.0);
            HessianDecay {
                holds: if zero { Verdict::Holds } else { Verdict::Inconclusive },
                alpha_fit: if zero { f64::INFINITY } else { f64::NAN },
                alpha: if zero { f64::INFINITY } else { f64::NAN },
                k_w_fit: 0.0,
                fit: None,
                evidence: fit_evidence(None, opts),
            }
        }
        Some(f) => {
            let alpha_fit = -f.slope;
            let alpha = pot.decay().alpha.unwrap_or(alpha_fit);
            let k_w_fit = logspace(1e-3, opts.fit_range.1, 400)
                .into_iter()
                .chain(std::iter::once(0.0))
                .map(|t| pot.hess_envelope(t) * (1.0 + t).powf(alpha))
                .fold(0.0, f64::max);
            let holds = if f.residual > tol {
                Verdict::Inconclusive
            } else {
                Verdict::from_bool(alpha_fit - tol > 3.0 && alpha > 3.0 && k_w_fit.is_finite())
            };
            HessianDecay {
                holds,
                alpha_fit,
                alpha,
                k_w_fit,
                fit: Some(*f),
                evidence: fit_evidence(Some(f), opts),
            }
        }
    };

    Ok(ConditionReport {
        potential: pot.name().into(),
        h1,
        h2,
        h3,
        h3b,
        h4,
    })
}

fn fit_evidence(fit: Option<&LineFit>, opts: &CheckOptions) -> Evidence {
    Evidence {
        residual: fit.map_or(f64::NAN, |f| f.residual),
        sample_size: fit.map_or(0, |f| f.n),
        method: format!(
            "log-log slope over t in [{}, {}], {} points",
            opts.fit_range.0, opts.fit_range.1, opts.fit_points
        ),
    }
}
