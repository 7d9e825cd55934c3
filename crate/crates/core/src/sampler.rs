//! Metropolis sampling of `μ_{λ,T}(dx) ∝ exp(−λ H_T(x)) μ(dx)`.
//!
//! Proposals are preconditioned Crank–Nicolson moves on a contiguous block
//! of steps, `new = √(1−ρ²)·old + ρ·fresh` with fresh `N(0, dt)` noise.
//! They are reversible for the Wiener reference, so the acceptance ratio is
//! `exp(−λ ΔH)` alone.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::estimators::stats::{iact, summarize, z_score, SeriesSummary};
use crate::path::{Grid, IncrementPath, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    /// Mixing weight of the fresh noise, in `(0, 1)`.
    pub rho: f64,
    /// Block length in steps.
    pub block: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub lambda: f64,
    pub grid: Grid,
    pub dim: usize,
    pub proposal: Proposal,
    pub n_sweeps: usize,
    /// Sweeps discarded before sampling; `None` picks
    /// `max(n_sweeps/5, 10·iact)` after the run.
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub seed: u64,
    /// Sweeps between audits of the cached energy.
    pub audit_every: usize,
    /// Only steps inside this interval are updated; the rest stay frozen.
    pub free: Option<Interval>,
}

impl SamplerConfig {
    pub fn new(lambda: f64, grid: Grid, dim: usize, n_sweeps: usize, seed: u64) -> Self {
        Self {
            lambda,
            grid,
            dim,
            proposal: Proposal { rho: 0.5, block: 4 },
            n_sweeps,
            burn_in: None,
            thin: 1,
            seed,
            audit_every: 1000,
            free: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.lambda.is_finite() {
            return bad(format!("lambda must be finite, got {}", self.lambda));
        }
        if !(self.proposal.rho > 0.0 && self.proposal.rho < 1.0) {
            return bad(format!("proposal rho must lie in (0,1), got {}", self.proposal.rho));
        }
        if self.proposal.block == 0 {
            return bad("proposal block must be at least 1 step".into());
        }
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.n_sweeps == 0 || self.thin == 0 || self.audit_every == 0 {
            return bad("sweeps, thin and audit interval must be positive".into());
        }
        if let Some(b) = self.burn_in {
            if b >= self.n_sweeps {
                return bad(format!("burn-in {b} must be smaller than the sweep count {}", self.n_sweeps));
            }
        }
        let free = self.free_cells()?;
        if self.proposal.block > free.len() {
            return bad(format!(
                "proposal block of {} steps exceeds the {} free steps",
                self.proposal.block,
                free.len()
            ));
        }
        Ok(())
    }

    fn free_cells(&self) -> Result<Range<usize>> {
        match self.free {
            None => Ok(0..self.grid.n_steps()),
            Some(i) => self.grid.cells(i),
        }
    }

    /// Proposals per sweep: one per block-length of free steps.
    pub fn moves_per_sweep(&self) -> usize {
        let free = self.free_cells().map_or(self.grid.n_steps(), |r| r.len());
        (free / self.proposal.block).max(1)
    }
}

/// Current state of one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub path: IncrementPath,
    /// Cached `H_T(path)`.
    pub energy: f64,
    pub accepted: u64,
    pub proposed: u64,
    pub rng: ChaCha8Rng,
    positions: Vec<f64>,
}

impl ChainState {
    pub fn new(ctx: &EnergyContext, path: IncrementPath, seed: u64) -> Self {
        Self {
            energy: ctx.total_energy(&path),
            positions: ctx.positions(&path),
            path,
            accepted: 0,
            proposed: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.proposed as f64
    }

    /// Relative drift of the cached energy from a full recomputation.
    pub fn energy_drift(&self, ctx: &EnergyContext) -> f64 {
        let full = ctx.total_energy(&self.path);
        let diff = (self.energy - full).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / full.abs().max(f64::MIN_POSITIVE)
        }
    }

    fn resync(&mut self, ctx: &EnergyContext) {
        self.energy = ctx.total_energy(&self.path);
        self.positions = ctx.positions(&self.path);
    }
}

/// pCN proposal for the steps of `block`. The flag records that the move
/// is reversible with respect to the Wiener reference, which it always is.
pub fn propose_pcn<R: Rng + ?Sized>(path: &IncrementPath, block: Range<usize>, rho: f64, rng: &mut R) -> (Vec<f64>, bool) {
    let d = path.dim();
    let sd = path.grid().dt().sqrt();
    let keep = (1.0 - rho * rho).sqrt();
    let old = &path.steps()[block.start * d..block.end * d];
    let new = old
        .iter()
        .map(|o| {
            let z: f64 = rng.sample(StandardNormal);
            keep * o + rho * sd * z
        })
        .collect();
    (new, true)
}

/// One Metropolis update on a uniformly chosen block. Returns whether the
/// proposal was accepted.
pub fn metropolis_step(ctx: &EnergyContext, state: &mut ChainState, config: &SamplerConfig) -> Result<bool> {
    let free = config.free_cells()?;
    let b = config.proposal.block;
    let start = free.start + state.rng.random_range(0..=free.len() - b);
    let block = start..start + b;
    let (new, _) = propose_pcn(&state.path, block.clone(), config.proposal.rho, &mut state.rng);
    let u: f64 = state.rng.random();
    state.proposed += 1;
    let (dh, _) = ctx.delta_from_positions(&state.path, &state.positions, block.clone(), &new);
    if !dh.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite energy change {dh} at proposal {} on steps {:?} (lambda = {}, cached H = {})",
            state.proposed, block, config.lambda, state.energy
        )));
    }
    let log_ratio = -config.lambda * dh;
    if log_ratio >= 0.0 || u < log_ratio.exp() {
        accept(ctx, state, block, &new, dh);
        Ok(true)
    } else {
        Ok(false)
    }
}

fn accept(ctx: &EnergyContext, state: &mut ChainState, block: Range<usize>, new: &[f64], dh: f64) {
    let d = state.path.dim();
    state.path.steps_mut()[block.start * d..block.end * d].copy_from_slice(new);
    state.energy += dh;
    state.positions = ctx.positions(&state.path);
    state.accepted += 1;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub acceptance_rate: f64,
    /// Integrated autocorrelation time of `H_T` after burn-in, in sweeps.
    pub iact: f64,
    pub burn_in: usize,
    /// `H_T` after every sweep.
    pub energy_trace: Vec<f64>,
    /// Acceptance rate within each sweep.
    pub acceptance_trace: Vec<f64>,
    /// `(sweep, relative drift)` at every cache audit.
    pub audits: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// Thinned post-burn-in paths.
    pub samples: Vec<IncrementPath>,
    /// Sweep index (1-based) of each sample.
    pub sweeps: Vec<usize>,
    pub diagnostics: ChainDiagnostics,
    pub final_state: ChainState,
}

/// Relative tolerance on the cached energy at audits.
pub const AUDIT_TOL: f64 = 1e-8;

/// Runs a chain from `init` (zero path when `None`).
pub fn run_chain(ctx: &EnergyContext, config: &SamplerConfig, init: Option<IncrementPath>) -> Result<ChainOutput> {
    run_chain_observed(ctx, config, init, |_, _| {})
}

/// [`run_chain`] with a callback after every sweep, for streaming consumers.
pub fn run_chain_observed<F>(
    ctx: &EnergyContext,
    config: &SamplerConfig,
    init: Option<IncrementPath>,
    mut observe: F,
) -> Result<ChainOutput>
where
    F: FnMut(usize, &ChainState),
{
    config.validate()?;
    if ctx.grid() != &config.grid {
        return Err(Error::Config("sampler grid differs from the energy grid".into()));
    }
    let init = match init {
        Some(p) => {
            if p.grid() != &config.grid || p.dim() != config.dim {
                return Err(Error::Argument("initial path does not match the sampler grid".into()));
            }
            p
        }
        None => IncrementPath::zeros(config.grid, config.dim)?,
    };
    let mut state = ChainState::new(ctx, init, config.seed);
    let mut warnings = Vec::new();
    if config.lambda < 0.0 {
        warnings.push(format!(
            "lambda = {} < 0: repulsive regime, tightness is only known from the growth bound",
            config.lambda
        ));
    }
    let provisional = config.burn_in.unwrap_or(config.n_sweeps / 5);
    let moves = config.moves_per_sweep();
    let mut energy_trace = Vec::with_capacity(config.n_sweeps);
    let mut acceptance_trace = Vec::with_capacity(config.n_sweeps);
    let mut audits = Vec::new();
    let mut samples = Vec::new();
    let mut sweeps = Vec::new();
    for sweep in 1..=config.n_sweeps {
        let before = state.accepted;
        for _ in 0..moves {
            metropolis_step(ctx, &mut state, config)?;
        }
        acceptance_trace.push((state.accepted - before) as f64 / moves as f64);
        if sweep % config.audit_every == 0 {
            let drift = state.energy_drift(ctx);
            audits.push((sweep, drift));
            if drift > AUDIT_TOL {
                return Err(Error::Numeric(format!(
                    "cached energy drifted by {drift:.3e} (relative) at sweep {sweep}"
                )));
            }
            state.resync(ctx);
        }
        energy_trace.push(state.energy);
        if sweep > provisional && (sweep - provisional).is_multiple_of(config.thin) {
            samples.push(state.path.clone());
            sweeps.push(sweep);
        }
        observe(sweep, &state);
    }
    let tau = iact(&energy_trace[provisional.min(energy_trace.len() - 1)..]);
    let burn_in = match config.burn_in {
        Some(b) => b,
        None => provisional.max((10.0 * tau).ceil() as usize).min(config.n_sweeps - 1),
    };
    if burn_in > provisional {
        let keep = sweeps.iter().position(|s| *s > burn_in).unwrap_or(sweeps.len());
        samples.drain(..keep);
        sweeps.drain(..keep);
    }
    if tau > config.n_sweeps as f64 / 50.0 {
        warnings.push(format!(
            "unconverged: energy autocorrelation time {tau:.1} exceeds n_sweeps/50 = {:.1}",
            config.n_sweeps as f64 / 50.0
        ));
    }
    Ok(ChainOutput {
        samples,
        sweeps,
        diagnostics: ChainDiagnostics {
            acceptance_rate: state.acceptance_rate(),
            iact: tau,
            burn_in,
            energy_trace,
            acceptance_trace,
            audits,
            warnings,
        },
        final_state: state,
    })
}

/// A scalar function of a path used to compare chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// One component of `x_{ab}`.
    Component { a: f64, b: f64, c: usize },
    /// `|x_{ab}|² / (b − a)`.
    NormalizedSquare { a: f64, b: f64 },
    /// `⟨x_{ab}, x_{bc}⟩`.
    Product { a: f64, b: f64, c: f64 },
    /// `sup_{t∈[a,b]} |x_{at}|`.
    SupNorm { a: f64, b: f64 },
    /// `1{|x_{ab}| < r}`.
    BallIndicator { a: f64, b: f64, r: f64 },
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Component { a, b, c } => format!("x[{a},{b}]_{c}"),
            Observable::NormalizedSquare { a, b } => format!("|x[{a},{b}]|^2/{}", b - a),
            Observable::Product { a, b, c } => format!("<x[{a},{b}],x[{b},{c}]>"),
            Observable::SupNorm { a, b } => format!("sup|x[{a},t]| on [{a},{b}]"),
            Observable::BallIndicator { a, b, r } => format!("1(|x[{a},{b}]|<{r})"),
        }
    }

    pub fn eval(&self, path: &IncrementPath) -> Result<f64> {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        Ok(match *self {
            Observable::Component { a, b, c } => path.increment(a, b)?[c],
            Observable::NormalizedSquare { a, b } => sq(&path.increment(a, b)?) / (b - a),
            Observable::Product { a, b, c } => {
                let (u, v) = (path.increment(a, b)?, path.increment(b, c)?);
                u.iter().zip(&v).map(|(x, y)| x * y).sum()
            }
            Observable::SupNorm { a, b } => {
                let g = path.grid();
                let (i, j) = (g.node_index(a)?, g.node_index(b)?);
                (i..=j).map(|k| sq(&path.increment_nodes(i, k)).sqrt()).fold(0.0, f64::max)
            }
            Observable::BallIndicator { a, b, r } => {
                if sq(&path.increment(a, b)?).sqrt() < r {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }
}

/// Ten observables on the central half-window `[−T/2, T/2]`.
pub fn default_panel(grid: &Grid) -> Vec<Observable> {
    let h = grid.half_width() / 2.0;
    let u = (h / 2.0).max(grid.dt());
    vec![
        Observable::Component { a: -u, b: 0.0, c: 0 },
        Observable::Component { a: 0.0, b: u, c: 0 },
        Observable::NormalizedSquare { a: 0.0, b: u },
        Observable::NormalizedSquare { a: -u, b: u },
        Observable::NormalizedSquare { a: -h, b: h },
        Observable::Product { a: -u, b: 0.0, c: u },
        Observable::Product { a: -h, b: 0.0, c: h },
        Observable::SupNorm { a: 0.0, b: u },
        Observable::SupNorm { a: -h, b: h },
        Observable::BallIndicator { a: 0.0, b: u, r: u.sqrt() },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableComparison {
    pub name: String,
    pub a: SeriesSummary,
    pub b: SeriesSummary,
    /// Standardized discrepancy `|mean_a − mean_b| / √(se_a² + se_b²)`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub observables: Vec<ObservableComparison>,
    pub max_z: f64,
    pub diagnostics_a: ChainSummary,
    pub diagnostics_b: ChainSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub acceptance_rate: f64,
    pub iact: f64,
    pub burn_in: usize,
    pub n_samples: usize,
}

impl From<&ChainOutput> for ChainSummary {
    fn from(o: &ChainOutput) -> Self {
        Self {
            acceptance_rate: o.diagnostics.acceptance_rate,
            iact: o.diagnostics.iact,
            burn_in: o.diagnostics.burn_in,
            n_samples: o.samples.len(),
        }
    }
}

pub fn observable_series(samples: &[IncrementPath], obs: &Observable) -> Result<Vec<f64>> {
    samples.iter().map(|p| obs.eval(p)).collect()
}

/// Runs two chains from different initial paths (seeds `seeds.0`, `seeds.1`)
/// and compares post-burn-in means of a panel of observables.
pub fn two_chain_agreement(
    ctx: &EnergyContext,
    config: &SamplerConfig,
    init_a: IncrementPath,
    init_b: IncrementPath,
    seeds: (u64, u64),
    panel: &[Observable],
) -> Result<AgreementReport> {
    let run = |init: IncrementPath, seed: u64| {
        let cfg = SamplerConfig { seed, ..config.clone() };
        run_chain(ctx, &cfg, Some(init))
    };
    let (out_a, out_b) = rayon::join(|| run(init_a, seeds.0), || run(init_b, seeds.1));
    let (out_a, out_b) = (out_a?, out_b?);
    // both chains drop the same number of sweeps
    let burn = out_a.diagnostics.burn_in.max(out_b.diagnostics.burn_in);
    let trim = |o: &ChainOutput| -> Vec<IncrementPath> {
        o.samples
            .iter()
            .zip(&o.sweeps)
            .filter(|(_, s)| **s > burn)
            .map(|(p, _)| p.clone())
            .collect()
    };
    let (sa, sb) = (trim(&out_a), trim(&out_b));
    let mut observables = Vec::with_capacity(panel.len());
    for obs in panel {
        let a = summarize(&observable_series(&sa, obs)?);
        let b = summarize(&observable_series(&sb, obs)?);
        observables.push(ObservableComparison {
            name: obs.name(),
            z: z_score(a.mean, a.std_err, b.mean, b.std_err),
            a,
            b,
        });
    }
    let max_z = observables.iter().map(|o| o.z).fold(0.0, f64::max);
    Ok(AgreementReport {
        observables,
        max_z,
        diagnostics_a: (&out_a).into(),
        diagnostics_b: (&out_b).into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    fn setup(lambda: f64, t: f64, dt: f64, sweeps: usize) -> (EnergyContext, SamplerConfig) {
        let grid = Grid::new(t, dt).unwrap();
        let ctx = EnergyContext::new(Potential::nelson(), grid);
        (ctx, SamplerConfig::new(lambda, grid, 1, sweeps, 17))
    }

    #[test]
    fn tiny_rho_barely_moves() {
        let grid = Grid::new(2.0, 0.25).unwrap();
        let path = crate::path::sample_wiener(grid, 1, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (new, reversible) = propose_pcn(&path, 2..6, 1e-9, &mut rng);
        assert!(reversible);
        for (n, o) in new.iter().zip(&path.steps()[2..6]) {
            assert!((n - o).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_coupling_always_accepts() {
        let (ctx, cfg) = setup(0.0, 2.0, 0.25, 50);
        let out = run_chain(&ctx, &cfg, None).unwrap();
        assert_eq!(out.diagnostics.acceptance_rate, 1.0);
    }

    #[test]
    fn zero_coupling_reproduces_wiener_variance() {
        let (ctx, mut cfg) = setup(0.0, 2.0, 0.25, 10_000);
        cfg.proposal = Proposal { rho: 0.9, block: 4 };
        let out = run_chain(&ctx, &cfg, None).unwrap();
        let xs: Vec<f64> = out.samples.iter().map(|p| p.step(5)[0]).collect();
        let s = summarize(&xs.iter().map(|x| x * x).collect::<Vec<_>>());
        assert!((s.mean - 0.25).abs() < 5.0 * s.std_err, "{s:?}");
        let m = summarize(&xs);
        assert!(m.mean.abs() < 4.0 * m.std_err);
    }

    #[test]
    fn same_seed_gives_identical_streams() {
        let (ctx, cfg) = setup(0.3, 2.0, 0.25, 200);
        let a = run_chain(&ctx, &cfg, None).unwrap();
        let b = run_chain(&ctx, &cfg, None).unwrap();
        assert_eq!(a.diagnostics.energy_trace, b.diagnostics.energy_trace);
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn attractive_potential_rewards_clustered_increments() {
        // two steps: shrinking them makes H_T more negative
        let grid = Grid::new(0.5, 0.5).unwrap();
        let ctx = EnergyContext::new(Potential::nelson(), grid);
        let x = IncrementPath::from_steps(grid, 1, vec![1.0, 1.0]).unwrap();
        let shrink = ctx.delta_h(&x, 1..2, &[0.1]).unwrap();
        let grow = ctx.delta_h(&x, 1..2, &[3.0]).unwrap();
        assert!(shrink < 0.0 && grow > 0.0);
        let cfg = SamplerConfig::new(1.0, grid, 1, 1, 0);
        let mut state = ChainState::new(&ctx, x, 0);
        state.rng = ChaCha8Rng::seed_from_u64(0);
        // a downhill move is accepted with probability one
        assert!((-cfg.lambda * shrink).exp() > 1.0);
    }

    #[test]
    fn cached_energy_survives_audits() {
        let (ctx, mut cfg) = setup(0.5, 4.0, 0.25, 3000);
        cfg.audit_every = 500;
        let out = run_chain(&ctx, &cfg, None).unwrap();
        assert_eq!(out.diagnostics.audits.len(), 6);
        assert!(out.diagnostics.audits.iter().all(|(_, d)| *d <= AUDIT_TOL));
        assert!(out.final_state.energy_drift(&ctx) <= AUDIT_TOL);
    }

    #[test]
    fn frozen_exterior_is_untouched() {
        let (ctx, mut cfg) = setup(0.2, 2.0, 0.25, 100);
        cfg.free = Some(Interval::new(-0.5, 0.5).unwrap());
        let init = IncrementPath::ramp(cfg.grid, &[1.0]).unwrap();
        let out = run_chain(&ctx, &cfg, Some(init.clone())).unwrap();
        let p = &out.final_state.path;
        assert_eq!(&p.steps()[..6], &init.steps()[..6]);
        assert_eq!(&p.steps()[10..], &init.steps()[10..]);
        assert_ne!(&p.steps()[6..10], &init.steps()[6..10]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (_, cfg) = setup(0.2, 2.0, 0.25, 100);
        let bad = [
            SamplerConfig { proposal: Proposal { rho: 1.0, block: 2 }, ..cfg.clone() },
            SamplerConfig { proposal: Proposal { rho: 0.5, block: 0 }, ..cfg.clone() },
            SamplerConfig { burn_in: Some(100), ..cfg.clone() },
            SamplerConfig { proposal: Proposal { rho: 0.5, block: 17 }, ..cfg.clone() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn detailed_balance_on_a_tiny_grid() {
        // 4 steps at λ = 0.1: pair frequencies of a coarse state label must be
        // symmetric, n(a→b) ≈ n(b→a)
        let grid = Grid::new(0.5, 0.25).unwrap();
        let ctx = EnergyContext::new(Potential::nelson(), grid);
        let mut cfg = SamplerConfig::new(0.1, grid, 1, 1, 9);
        cfg.proposal = Proposal { rho: 0.8, block: 2 };
        let label = |p: &IncrementPath| -> usize {
            let x = p.increment_nodes(0, 4)[0];
            ((x / 0.5).floor().clamp(-2.0, 1.0) + 2.0) as usize
        };
        let mut state = ChainState::new(&ctx, IncrementPath::zeros(grid, 1).unwrap(), 9);
        let mut counts = [[0u64; 4]; 4];
        let mut prev = label(&state.path);
        for _ in 0..1_000_000 {
            metropolis_step(&ctx, &mut state, &cfg).unwrap();
            let cur = label(&state.path);
            counts[prev][cur] += 1;
            prev = cur;
        }
        for a in 0..4 {
            for b in a + 1..4 {
                let (x, y) = (counts[a][b] as f64, counts[b][a] as f64);
                if x + y < 100.0 {
                    continue;
                }
                // successive transitions are correlated; Poisson error inflated by 2
                let se = 2.0 * (x + y).sqrt();
                assert!((x - y).abs() < 4.0 * se, "{a}->{b}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn identical_chains_agree_exactly() {
        let (ctx, mut cfg) = setup(0.2, 2.0, 0.25, 300);
        cfg.burn_in = Some(50);
        let z = IncrementPath::zeros(cfg.grid, 1).unwrap();
        let r = two_chain_agreement(&ctx, &cfg, z.clone(), z, (5, 5), &default_panel(&cfg.grid)).unwrap();
        assert_eq!(r.max_z, 0.0);
        assert_eq!(r.observables.len(), 10);
    }

    #[test]
    fn zero_coupling_chains_agree_from_distant_starts() {
        let (ctx, mut cfg) = setup(0.0, 2.0, 0.25, 4000);
        cfg.proposal = Proposal { rho: 0.9, block: 4 };
        let z = IncrementPath::zeros(cfg.grid, 1).unwrap();
        let ramp = IncrementPath::ramp(cfg.grid, &[3.0]).unwrap();
        let r = two_chain_agreement(&ctx, &cfg, z, ramp, (1, 2), &default_panel(&cfg.grid)).unwrap();
        assert!(r.max_z < 4.0, "{r:?}");
    }
}
