//! Experiment specifications in TOML.
//!
//! ```toml
//! [potential]
//! kind = "powerlaw"     # nelson | powerlaw | spectral | table | zero
//! c = 1.0
//! p = 2.0
//!
//! [grid]
//! T = 8.0
//! dt = 0.25
//! d = 1
//!
//! [sampler]
//! lambda = [0.0, 0.1]
//! sweeps = 1000
//! seeds = [1]
//!
//! [analysis]
//! estimators = ["diffusion", "covariance"]
//! require = ["h1", "h2", "h4"]
//!
//! [output]
//! dir = "runs/smoke"
//! ```
//!
//! Every error carries the line of the offending key. The resolved
//! [`ExperimentSpec`] spells out all defaults so the manifest records them.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::energy::{EnergyContext, QuadRule};
use crate::error::{Error, Result};
use crate::path::{Grid, Interval};
use crate::potential::{Decay, Dispersion, FormFactor, Potential, SpectralData, TablePotential};
use crate::sampler::{Proposal, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Conditions,
    Diffusion,
    Certificate,
    Covariance,
    Dobrushin,
    Sigma,
    Clt,
    Mixing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    H1,
    H2,
    H3,
    H3b,
    H4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialSpec {
    Nelson,
    Zero,
    Powerlaw { c: f64, p: f64 },
    Spectral(SpectralData),
    Table { file: PathBuf, decay: Decay },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "T")]
    pub half_width: f64,
    pub dt: f64,
    pub d: usize,
    pub rule: QuadRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub lambda: Vec<f64>,
    pub sweeps: usize,
    pub seeds: Vec<u64>,
    pub rho: f64,
    pub block: usize,
    pub thin: usize,
    pub burn_in: Option<usize>,
    pub audit_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSpec {
    pub estimators: Vec<Estimator>,
    pub require: Vec<Condition>,
    /// Diffusion and certificate interval.
    pub interval: (f64, f64),
    pub block_len: f64,
    pub n_max: usize,
    pub direction: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub probe_slope: f64,
}

impl AnalysisSpec {
    pub fn is_empty(&self) -> bool {
        self.estimators.is_empty() && self.require.is_empty()
    }

    pub fn wants(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    pub sampler: SamplerSpec,
    pub analysis: AnalysisSpec,
    pub output: Option<PathBuf>,
}

// raw TOML layer

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    potential: Option<Spanned<RawPotential>>,
    grid: Option<Spanned<RawGrid>>,
    sampler: Option<Spanned<RawSampler>>,
    analysis: Option<RawAnalysis>,
    output: Option<RawOutput>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    kind: Spanned<String>,
    c: Option<Spanned<f64>>,
    p: Option<Spanned<f64>>,
    omega: Option<Spanned<String>>,
    mass: Option<Spanned<f64>>,
    rho: Option<Spanned<String>>,
    radius: Option<Spanned<f64>>,
    width: Option<Spanned<f64>>,
    cutoff: Option<Spanned<f64>>,
    panels: Option<Spanned<i64>>,
    tol: Option<Spanned<f64>>,
    file: Option<Spanned<String>>,
    gamma: Option<f64>,
    alpha: Option<f64>,
    k_w: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(rename = "T")]
    half_width: Spanned<f64>,
    dt: Spanned<f64>,
    d: Option<Spanned<i64>>,
    rule: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampler {
    lambda: Spanned<Vec<f64>>,
    sweeps: Spanned<i64>,
    seeds: Spanned<Vec<u64>>,
    rho: Option<Spanned<f64>>,
    block: Option<Spanned<i64>>,
    thin: Option<Spanned<i64>>,
    burn_in: Option<Spanned<i64>>,
    audit_every: Option<Spanned<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    estimators: Option<Spanned<Vec<String>>>,
    require: Option<Spanned<Vec<String>>>,
    interval: Option<Spanned<Vec<f64>>>,
    block_len: Option<Spanned<f64>>,
    n_max: Option<Spanned<i64>>,
    direction: Option<Spanned<Vec<f64>>>,
    epsilons: Option<Spanned<Vec<f64>>>,
    probe_slope: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: String,
}

struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn at(&self, span: Range<usize>) -> usize {
        self.0[..span.start.min(self.0.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, span: Range<usize>, msg: impl std::fmt::Display) -> Result<T> {
        Err(Error::Config(format!("line {}: {msg}", self.at(span))))
    }
}

fn positive_int(lines: &Lines, v: &Spanned<i64>, what: &str) -> Result<usize> {
    if *v.get_ref() < 1 {
        return lines.err(v.span(), format!("{what} must be at least 1, got {}", v.get_ref()));
    }
    Ok(*v.get_ref() as usize)
}

fn parse_enum<T: for<'de> Deserialize<'de>>(lines: &Lines, v: &Spanned<String>, what: &str, allowed: &str) -> Result<T> {
    T::deserialize(serde::de::value::StrDeserializer::<serde::de::value::Error>::new(v.get_ref()))
        .or_else(|_| lines.err(v.span(), format!("unknown {what} '{}' (expected one of {allowed})", v.get_ref())))
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(format!("spec file {} not found", path.display())),
            _ => Error::io(path, e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses and validates a spec; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let lines = Lines(text);
        let raw: RawSpec = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| lines.at(s));
            Error::Config(format!("line {line}: {}", e.message().trim()))
        })?;
        let whole = 0..0;
        let pot_raw = match raw.potential {
            Some(p) => p,
            None => return lines.err(whole, "missing [potential] section"),
        };
        let grid_raw = match raw.grid {
            Some(g) => g,
            None => return lines.err(0..0, "missing [grid] section"),
        };
        let grid = parse_grid(&lines, grid_raw.get_ref())?;
        let potential = parse_potential(&lines, pot_raw.get_ref(), grid.d, base)?;
        let sampler = match raw.sampler {
            Some(s) => parse_sampler(&lines, s.get_ref(), &grid)?,
            None => return lines.err(0..0, "missing [sampler] section"),
        };
        let analysis = parse_analysis(&lines, raw.analysis.as_ref(), &grid)?;
        let spec = Self {
            potential,
            grid,
            sampler,
            analysis,
            output: raw.output.map(|o| base.join(o.dir)),
        };
        Ok(spec)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.half_width, self.grid.dt)
    }

    pub fn build_potential(&self) -> Result<Potential> {
        match &self.potential {
            PotentialSpec::Nelson => Ok(Potential::nelson()),
            PotentialSpec::Zero => Ok(Potential::zero()),
            PotentialSpec::Powerlaw { c, p } => Potential::powerlaw(*c, *p),
            PotentialSpec::Spectral(s) => Potential::spectral(s.clone()),
            PotentialSpec::Table { file, decay } => {
                let f = std::fs::File::open(file)
                    .map_err(|_| Error::MissingInput(format!("potential table {} not found", file.display())))?;
                Potential::table(TablePotential::read_csv(std::io::BufReader::new(f))?, *decay)
            }
        }
    }

    pub fn context(&self) -> Result<EnergyContext> {
        Ok(EnergyContext::with_rule(self.build_potential()?, self.grid()?, self.grid.rule))
    }

    /// Sampler configuration for one `(λ, seed)` task.
    pub fn sampler_config(&self, lambda: f64, seed: u64) -> Result<SamplerConfig> {
        let s = &self.sampler;
        let mut cfg = SamplerConfig::new(lambda, self.grid()?, self.grid.d, s.sweeps, seed);
        cfg.proposal = Proposal {
            rho: s.rho,
            block: s.block,
        };
        cfg.thin = s.thin;
        cfg.burn_in = s.burn_in;
        cfg.audit_every = s.audit_every;
        Ok(cfg)
    }
}

fn parse_grid(lines: &Lines, g: &RawGrid) -> Result<GridSpec> {
    let (t, dt) = (*g.half_width.get_ref(), *g.dt.get_ref());
    if !(dt > 0.0 && dt.is_finite()) {
        return lines.err(g.dt.span(), format!("grid dt must be positive, got {dt}"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return lines.err(g.half_width.span(), format!("grid T must be positive, got {t}"));
    }
    if let Err(e) = Grid::new(t, dt) {
        return lines.err(g.half_width.span(), e.to_string().trim_start_matches("configuration error: "));
    }
    let d = match &g.d {
        Some(d) => positive_int(lines, d, "dimension d")?,
        None => 1,
    };
    let rule = match &g.rule {
        Some(r) => parse_enum(lines, r, "quadrature rule", "midpoint, gauss2")?,
        None => QuadRule::Midpoint,
    };
    Ok(GridSpec {
        half_width: t,
        dt,
        d,
        rule,
    })
}

fn need<'a, T>(lines: &Lines, v: &'a Option<Spanned<T>>, kind_span: Range<usize>, key: &str, kind: &str) -> Result<&'a Spanned<T>> {
    v.as_ref()
        .map_or_else(|| lines.err(kind_span, format!("potential kind '{kind}' needs the key '{key}'")), Ok)
}

fn parse_potential(lines: &Lines, p: &RawPotential, dim: usize, base: &Path) -> Result<PotentialSpec> {
    let kind = p.kind.get_ref().as_str();
    let ks = p.kind.span();
    match kind {
        "nelson" => Ok(PotentialSpec::Nelson),
        "zero" => Ok(PotentialSpec::Zero),
        "powerlaw" => {
            let c = need(lines, &p.c, ks.clone(), "c", kind)?;
            let pp = need(lines, &p.p, ks, "p", kind)?;
            if !(*pp.get_ref() > 0.0) {
                return lines.err(pp.span(), format!("powerlaw exponent p must be positive, got {}", pp.get_ref()));
            }
            Ok(PotentialSpec::Powerlaw {
                c: *c.get_ref(),
                p: *pp.get_ref(),
            })
        }
        "spectral" => {
            let omega_key = need(lines, &p.omega, ks.clone(), "omega", kind)?;
            let omega = match omega_key.get_ref().as_str() {
                "linear" => Dispersion::Linear,
                "constant" => Dispersion::Constant {
                    value: *need(lines, &p.mass, ks.clone(), "mass", kind)?.get_ref(),
                },
                "relativistic" => Dispersion::Relativistic {
                    mass: *need(lines, &p.mass, ks.clone(), "mass", kind)?.get_ref(),
                },
                other => {
                    return lines.err(omega_key.span(), format!("unknown dispersion '{other}' (expected linear, constant, relativistic)"))
                }
            };
            let rho_key = need(lines, &p.rho, ks.clone(), "rho", kind)?;
            let rho = match rho_key.get_ref().as_str() {
                "indicator" => FormFactor::Indicator {
                    radius: *need(lines, &p.radius, ks.clone(), "radius", kind)?.get_ref(),
                },
                "gaussian" => FormFactor::Gaussian {
                    width: *need(lines, &p.width, ks.clone(), "width", kind)?.get_ref(),
                },
                other => return lines.err(rho_key.span(), format!("unknown form factor '{other}' (expected indicator, gaussian)")),
            };
            let data = SpectralData {
                dim,
                omega,
                rho,
                cutoff: p.cutoff.as_ref().map_or(8.0, |c| *c.get_ref()),
                panels: match &p.panels {
                    Some(n) => positive_int(lines, n, "panels")?,
                    None => 32,
                },
                tol: p.tol.as_ref().map_or(1e-6, |t| *t.get_ref()),
            };
            if let Err(e) = data.validate() {
                return lines.err(ks, e);
            }
            Ok(PotentialSpec::Spectral(data))
        }
        "table" => {
            let file = need(lines, &p.file, ks, "file", kind)?;
            Ok(PotentialSpec::Table {
                file: base.join(file.get_ref()),
                decay: Decay {
                    gamma: p.gamma,
                    alpha: p.alpha,
                    k_w: p.k_w,
                },
            })
        }
        other => lines.err(ks, format!("unknown potential kind '{other}' (expected nelson, powerlaw, spectral, table, zero)")),
    }
}

fn parse_sampler(lines: &Lines, s: &RawSampler, grid: &GridSpec) -> Result<SamplerSpec> {
    if s.lambda.get_ref().is_empty() {
        return lines.err(s.lambda.span(), "sampler lambda list is empty");
    }
    if let Some(l) = s.lambda.get_ref().iter().find(|l| !l.is_finite()) {
        return lines.err(s.lambda.span(), format!("sampler lambda must be finite, got {l}"));
    }
    if s.seeds.get_ref().is_empty() {
        return lines.err(s.seeds.span(), "sampler seed list is empty");
    }
    let sweeps = positive_int(lines, &s.sweeps, "sweeps")?;
    let rho = s.rho.as_ref().map_or(0.5, |r| *r.get_ref());
    if !(rho > 0.0 && rho < 1.0) {
        let span = s.rho.as_ref().map(|r| r.span()).unwrap_or(0..0);
        return lines.err(span, format!("proposal rho must lie in (0, 1), got {rho}"));
    }
    let block = match &s.block {
        Some(b) => positive_int(lines, b, "proposal block")?,
        None => 4,
    };
    let n_steps = (2.0 * grid.half_width / grid.dt).round() as usize;
    if block > n_steps {
        let span = s.block.as_ref().map(|r| r.span()).unwrap_or(0..0);
        return lines.err(span, format!("proposal block of {block} steps exceeds the {n_steps} grid steps"));
    }
    let burn_in = match &s.burn_in {
        Some(b) => {
            if *b.get_ref() < 0 || *b.get_ref() as usize >= sweeps {
                return lines.err(b.span(), format!("burn_in must lie in [0, sweeps), got {}", b.get_ref()));
            }
            Some(*b.get_ref() as usize)
        }
        None => None,
    };
    Ok(SamplerSpec {
        lambda: s.lambda.get_ref().clone(),
        sweeps,
        seeds: s.seeds.get_ref().clone(),
        rho,
        block,
        thin: match &s.thin {
            Some(t) => positive_int(lines, t, "thin")?,
            None => 1,
        },
        burn_in,
        audit_every: match &s.audit_every {
            Some(a) => positive_int(lines, a, "audit_every")?,
            None => 1000,
        },
    })
}

fn parse_analysis(lines: &Lines, a: Option<&RawAnalysis>, grid: &GridSpec) -> Result<AnalysisSpec> {
    let t = grid.half_width;
    let mut out = AnalysisSpec {
        estimators: vec![],
        require: vec![],
        interval: (-t / 4.0, t / 4.0),
        block_len: 1.0,
        n_max: ((t / 2.0).floor() as usize).saturating_sub(1).max(1),
        direction: {
            let mut v = vec![0.0; grid.d];
            v[0] = 1.0;
            v
        },
        epsilons: vec![],
        probe_slope: 4.0,
    };
    let Some(a) = a else { return Ok(out) };
    if let Some(es) = &a.estimators {
        for name in es.get_ref() {
            let e = parse_enum(
                lines,
                &Spanned::new(es.span(), name.clone()),
                "estimator",
                "conditions, diffusion, certificate, covariance, dobrushin, sigma, clt, mixing",
            )?;
            if !out.estimators.contains(&e) {
                out.estimators.push(e);
            }
        }
    }
    if let Some(rs) = &a.require {
        for name in rs.get_ref() {
            out.require
                .push(parse_enum(lines, &Spanned::new(rs.span(), name.clone()), "condition", "h1, h2, h3, h3b, h4")?);
        }
    }
    if let Some(iv) = &a.interval {
        let v = iv.get_ref();
        if v.len() != 2 || !(v[0] < v[1]) {
            return lines.err(iv.span(), "analysis interval must be [a, b] with a < b");
        }
        let inside = Interval::new(-t / 2.0, t / 2.0)?.contains(&Interval::new(v[0], v[1])?);
        let aligned = Grid::new(t, grid.dt).and_then(|g| g.node_index(v[0]).and(g.node_index(v[1])));
        if !inside || aligned.is_err() {
            return lines.err(iv.span(), format!(
                "analysis interval [{}, {}] must consist of grid nodes in the bulk window [{}, {}]",
                v[0], v[1], -t / 2.0, t / 2.0
            ));
        }
        out.interval = (v[0], v[1]);
    }
    if let Some(l) = &a.block_len {
        let g = Grid::new(t, grid.dt)?;
        let ok = *l.get_ref() > 0.0 && g.steps_in(*l.get_ref()).is_ok() && {
            let k = t / l.get_ref();
            (k - k.round()).abs() < 1e-9
        };
        if !ok {
            return lines.err(l.span(), format!("block_len {} must be a multiple of dt dividing T", l.get_ref()));
        }
        out.block_len = *l.get_ref();
    }
    if let Some(n) = &a.n_max {
        out.n_max = positive_int(lines, n, "n_max")?;
    }
    if let Some(v) = &a.direction {
        if v.get_ref().len() != grid.d || v.get_ref().iter().all(|x| *x == 0.0) {
            return lines.err(v.span(), format!("direction must be a non-zero vector of length d = {}", grid.d));
        }
        out.direction = v.get_ref().clone();
    }
    if let Some(e) = &a.epsilons {
        if let Some(bad) = e.get_ref().iter().find(|x| !(**x > 0.0)) {
            return lines.err(e.span(), format!("epsilons must be positive, got {bad}"));
        }
        out.epsilons = e.get_ref().clone();
    }
    if let Some(p) = &a.probe_slope {
        out.probe_slope = *p.get_ref();
    }
    Ok(out)
}
