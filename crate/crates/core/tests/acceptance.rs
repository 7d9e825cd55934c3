//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line with the
//! numbers behind it; the test fails if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pathgibbs::config::ExperimentSpec;
use pathgibbs::energy::EnergyContext;
use pathgibbs::estimators::certificate::lower_bound_certificate;
use pathgibbs::estimators::clt::{clt_test, CltOptions, CltReport};
use pathgibbs::estimators::covariance::covariance_decay_ibp;
use pathgibbs::estimators::diffusion::diffusion;
use pathgibbs::estimators::dobrushin::dobrushin_bound;
use pathgibbs::estimators::sigma::sigma_sq_estimate;
use pathgibbs::estimators::stats::summarize;
use pathgibbs::numerics::fit_line;
use pathgibbs::path::{Grid, IncrementPath, Interval};
use pathgibbs::potential::{check_conditions, CheckOptions, Potential};
use pathgibbs::runner::{cmd_sample, INCOMPLETE};
use pathgibbs::sampler::{default_panel, propose_pcn, run_chain, two_chain_agreement, SamplerConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn chain(pot: Potential, t: f64, dt: f64, d: usize, lambda: f64, sweeps: usize, seed: u64) -> Vec<IncrementPath> {
    let grid = Grid::new(t, dt).unwrap();
    let ctx = EnergyContext::new(pot, grid);
    let mut cfg = SamplerConfig::new(lambda, grid, d, sweeps, seed);
    cfg.proposal.rho = 0.9;
    run_chain(&ctx, &cfg, None).unwrap().samples
}

/// Wiener reference: per-component variances and disjoint correlations at λ=0.
fn criterion_1() -> Outcome {
    let samples = chain(Potential::nelson(), 4.0, 0.25, 3, 0.0, 20_000, 11);
    let intervals = [(-2.0, 2.0), (0.0, 0.25), (-1.0, 0.5), (1.0, 2.0), (-0.75, -0.25)];
    let mut worst = 0.0f64;
    for (a, b) in intervals {
        for c in 0..3 {
            let sq: Vec<f64> = samples.iter().map(|p| p.increment(a, b).unwrap()[c].powi(2)).collect();
            let s = summarize(&sq);
            worst = worst.max((s.mean - (b - a)).abs() / s.std_err);
        }
    }
    let mut worst_corr = 0.0f64;
    for ((a, b), (c, e)) in [((-2.0, -1.0), (0.0, 1.0)), ((-0.5, 0.0), (0.0, 0.5)), ((0.0, 1.0), (1.0, 2.0))] {
        let prod: Vec<f64> = samples
            .iter()
            .map(|p| p.increment(a, b).unwrap()[0] * p.increment(c, e).unwrap()[0])
            .collect();
        let s = summarize(&prod);
        worst_corr = worst_corr.max(s.mean.abs() / s.std_err);
    }
    outcome(
        worst <= 5.0 && worst_corr <= 5.0,
        format!("max variance z = {worst:.2}, max disjoint-product z = {worst_corr:.2} (limit 5), n = {}", samples.len()),
    )
}

/// `U_[0,1]` of the zero path for the Nelson potential and its convergence order.
fn criterion_2() -> Outcome {
    let exact = -(std::f64::consts::FRAC_PI_2 - 2f64.ln());
    let mut errs = Vec::new();
    let dts = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    for dt in dts {
        let grid = Grid::new(1.0, dt).unwrap();
        let ctx = EnergyContext::new(Potential::nelson(), grid);
        let zero = IncrementPath::zeros(grid, 1).unwrap();
        let u = ctx.u_interval(&zero, Interval::new(0.0, 1.0).unwrap()).unwrap().value;
        errs.push((u - exact).abs());
    }
    let fit = fit_line(&dts.map(f64::ln), &errs.iter().map(|e| e.ln()).collect::<Vec<_>>()).unwrap();
    let last = *errs.last().unwrap();
    outcome(
        last <= 1e-4 && fit.slope >= 0.9,
        format!("|U - exact| = {last:.2e} at dt = 1/64 (limit 1e-4), observed order {:.2} (limit 0.9)", fit.slope),
    )
}

/// Chained incremental energies against one full recomputation.
fn criterion_3() -> Outcome {
    let grid = Grid::new(8.0, 0.25).unwrap();
    assert_eq!(grid.n_steps(), 64);
    let ctx = EnergyContext::new(Potential::nelson(), grid);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut path = pathgibbs::path::sample_wiener(grid, 1, 2).unwrap();
    let h0 = ctx.total_energy(&path);
    let mut acc = 0.0;
    for _ in 0..10_000 {
        let len = rng.random_range(1..=8);
        let start = rng.random_range(0..=64 - len);
        let (new, _) = propose_pcn(&path, start..start + len, 0.7, &mut rng);
        acc += ctx.delta_h(&path, start..start + len, &new).unwrap();
        let mut steps = path.steps().to_vec();
        steps[start..start + len].copy_from_slice(&new);
        path = IncrementPath::from_steps(grid, 1, steps).unwrap();
    }
    let full = ctx.total_energy(&path) - h0;
    let rel = (acc - full).abs() / full.abs().max(h0.abs());
    outcome(rel <= 1e-8, format!("relative mismatch {rel:.2e} after 10^4 moves (limit 1e-8)"))
}

/// Condition checker exponents.
fn criterion_4() -> Outcome {
    let opts = CheckOptions::default();
    let nelson = check_conditions(&Potential::nelson(), &[], &opts).unwrap();
    let power = check_conditions(&Potential::powerlaw(1.0, 2.0).unwrap(), &[], &opts).unwrap();
    let (a, g) = (nelson.h4.alpha_fit, nelson.h3b.gamma_fit);
    let pass = (a - 4.0).abs() <= 0.1 && (g - 2.0).abs() <= 0.1 && !nelson.h3b.holds.holds() && power.h3.holds.holds();
    outcome(
        pass,
        format!(
            "nelson alpha_fit = {a:.3}, gamma_fit = {g:.3}, h3b {:?}; powerlaw(p=2) h3 {:?}",
            nelson.h3b.holds, power.h3.holds
        ),
    )
}

/// Lower-bound certificate against Monte Carlo diffusion.
fn criterion_5() -> Outcome {
    let (a, b) = (-2.0, 2.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, lambda) in [0.0, 0.05, 0.2].into_iter().enumerate() {
        let samples = chain(Potential::nelson(), 8.0, 0.25, 1, lambda, 6000, 50 + k as u64);
        let est = diffusion(&samples, a, b).unwrap();
        let cert = lower_bound_certificate(&Potential::nelson(), lambda, a, b).unwrap();
        let ok = if lambda == 0.0 {
            cert.sigma_minus_sq == 0.5 && (est.normalized - 1.0).abs() <= 5.0 * est.normalized_se
        } else {
            est.normalized >= cert.sigma_minus_sq - 3.0 * est.normalized_se
        };
        pass &= ok;
        parts.push(format!(
            "λ={lambda}: D = {:.3} ± {:.3}, σ₋² = {:.4}",
            est.normalized, est.normalized_se, cert.sigma_minus_sq
        ));
    }
    outcome(pass, parts.join("; "))
}

/// `λ*` for the Nelson potential in dimension `d`, with `σ²` from the
/// unconditioned and probed estimates at `λ = 0`. The attractive potential
/// only shrinks block fluctuations, so the `λ = 0` value is conservative.
fn nelson_lambda_star(grid: Grid, d: usize) -> (f64, f64) {
    let ctx = EnergyContext::new(Potential::nelson(), grid);
    let mut cfg = SamplerConfig::new(0.0, grid, d, 4000, 900 + d as u64);
    cfg.proposal.rho = 0.9;
    let s = sigma_sq_estimate(&ctx, &cfg, 1.0, 4.0).unwrap();
    let report = check_conditions(&Potential::nelson(), &[], &CheckOptions::default()).unwrap();
    let dob = dobrushin_bound(&report, 0.0, 1.0, s.conservative).unwrap();
    (dob.lambda_star, s.conservative)
}

/// Empirical uniqueness at half the Dobrushin threshold.
fn criterion_6() -> Outcome {
    let grid = Grid::new(8.0, 0.25).unwrap();
    let (lambda_star, sigma_sq) = nelson_lambda_star(grid, 1);
    if !(lambda_star > 0.0 && lambda_star.is_finite()) {
        return outcome(false, format!("λ* = {lambda_star}"));
    }
    let ctx = EnergyContext::new(Potential::nelson(), grid);
    let mut cfg = SamplerConfig::new(lambda_star / 2.0, grid, 1, 8000, 0);
    cfg.proposal.rho = 0.9;
    let zero = IncrementPath::zeros(grid, 1).unwrap();
    let ramp = IncrementPath::ramp(grid, &[2.0]).unwrap();
    let rep = two_chain_agreement(&ctx, &cfg, zero, ramp, (61, 62), &default_panel(&grid)).unwrap();
    outcome(
        rep.max_z <= 4.0 && rep.observables.len() == 10,
        format!(
            "σ² = {sigma_sq:.3}, λ* = {lambda_star:.4}; at λ*/2 max |z| over {} observables = {:.2} (limit 4)",
            rep.observables.len(),
            rep.max_z
        ),
    )
}

/// Covariance decay exponent for `c(1+|ξ|²+t²)^{−2}` (γ = 4) at small coupling.
fn criterion_7() -> Outcome {
    let lambda = 1e-3;
    let grid = Grid::new(16.0, 0.25).unwrap();
    let pot = Potential::powerlaw(1.0, 2.0).unwrap();
    let ctx = EnergyContext::new(pot.clone(), grid);
    let mut cfg = SamplerConfig::new(lambda, grid, 1, 4000, 77);
    cfg.proposal.rho = 0.9;
    cfg.thin = 2;
    let samples = run_chain(&ctx, &cfg, None).unwrap().samples;
    let table = covariance_decay_ibp(&ctx, lambda, &samples, 1.0, &[1.0], 12).unwrap();
    let gamma = pot.decay().gamma.unwrap();
    let limit = -(gamma - 2.0) + 0.3;
    match table.fit {
        Some(f) => outcome(
            f.slope <= limit && table.fit_range == (2, 12) && f.n == 11,
            format!(
                "fitted exponent {:.3} ± {:.3} over n = 2..12 ({} lags, truncated at {:?}); limit {limit}",
                f.slope, f.slope_se, f.n, table.truncated_at
            ),
        ),
        None => outcome(false, format!("no fit: table truncated at {:?}", table.truncated_at)),
    }
}

fn ks_line(r: &CltReport) -> String {
    let ds: Vec<String> = r.per_direction.iter().map(|k| format!("{:.3}", k.ks_distance)).collect();
    let ps: Vec<String> = r.per_direction.iter().map(|k| format!("{:.2}", k.p_value)).collect();
    format!("ε={}: n={}, D=[{}], p=[{}], iso z={:.2}", r.epsilon, r.n_batches, ds.join(","), ps.join(","), r.isotropy_max_z)
}

/// Central limit behavior of the rescaled increments.
fn criterion_8() -> Outcome {
    let dirs: Vec<Vec<f64>> = (0..3).map(|c| (0..3).map(|k| f64::from(u8::from(k == c))).collect()).collect();
    let eps = [0.25, 1.0 / 16.0];

    let free = chain(Potential::nelson(), 16.0, 0.25, 3, 0.0, 6000, 81);
    let opts0 = CltOptions {
        known_variance: Some(1.0),
        ..CltOptions::default()
    };
    let r0 = clt_test(&free, &eps, &dirs, &opts0).unwrap();
    let zero_ok = r0.iter().all(|r| !r.flagged && r.per_direction.iter().all(|k| k.passes));

    let (lambda_star, _) = nelson_lambda_star(Grid::new(8.0, 0.25).unwrap(), 3);
    let samples = chain(Potential::nelson(), 16.0, 0.25, 3, lambda_star / 2.0, 12_000, 82);
    let r = clt_test(&samples, &eps, &dirs, &CltOptions::default()).unwrap();
    let (coarse, fine) = (&r[0], &r[1]);
    let monotone = coarse.per_direction.iter().zip(&fine.per_direction).all(|(c, f)| {
        f.ks_distance <= c.ks_distance + 2.0 * (c.ks_se.powi(2) + f.ks_se.powi(2)).sqrt()
    });
    let isotropic = r.iter().all(|x| x.isotropic && !x.flagged);
    outcome(
        zero_ok && monotone && isotropic,
        format!(
            "λ=0 [{}; {}]; λ*/2 = {:.4} [{}; {}]",
            ks_line(&r0[0]),
            ks_line(&r0[1]),
            lambda_star / 2.0,
            ks_line(coarse),
            ks_line(fine)
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Reproducible outputs and crash safety of run directories.
fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[potential]\nkind = \"nelson\"\n[grid]\nT = 4.0\ndt = 0.25\n\
                [sampler]\nlambda = [0.0, 0.1]\nsweeps = 500\nseeds = [3]\n";
    let spec = ExperimentSpec::parse(text, tmp.path()).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cmd_sample(&spec, &a, Some(1), false).unwrap();
    cmd_sample(&spec, &b, Some(1), false).unwrap();
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    let identical = !fa.is_empty() && fa == fb;

    // interrupt a long rerun into `a` and check the completed run survives
    let long = tmp.path().join("long.toml");
    std::fs::write(
        &long,
        "[potential]\nkind = \"nelson\"\n[grid]\nT = 16.0\ndt = 0.125\n[sampler]\nlambda = [0.1]\nsweeps = 100000\nseeds = [1]\n",
    )
    .unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_pathgibbs"))
        .args(["sample", "--threads", "1", "--spec"])
        .arg(&long)
        .arg("--out")
        .arg(&a)
        .spawn()
        .unwrap();
    let partial = tmp.path().join("a.partial");
    let t0 = Instant::now();
    while !partial.join(INCOMPLETE).exists() && t0.elapsed() < Duration::from_secs(30) {
        std::thread::sleep(Duration::from_millis(20));
    }
    std::thread::sleep(Duration::from_millis(300));
    child.kill().unwrap();
    child.wait().unwrap();
    let survived = csv_files(&a) == fa && a.join("manifest.json").exists() && !a.join(INCOMPLETE).exists();
    let marked = partial.join(INCOMPLETE).exists();
    let analyze = Command::new(env!("CARGO_BIN_EXE_pathgibbs"))
        .args(["analyze", "--out"])
        .arg(&partial)
        .output()
        .unwrap();
    let refused = analyze.status.code() == Some(3);
    outcome(
        identical && survived && marked && refused,
        format!(
            "{} CSV files byte-identical: {identical}; completed run intact after kill: {survived}; \
             partial marked {INCOMPLETE}: {marked}; analyze on partial exits 3: {refused}",
            fa.len()
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("reference exactness", criterion_1),
        ("closed-form energy", criterion_2),
        ("incremental energy", criterion_3),
        ("condition checkers", criterion_4),
        ("lower-bound certificate", criterion_5),
        ("Dobrushin threshold", criterion_6),
        ("covariance decay", criterion_7),
        ("central limit", criterion_8),
        ("determinism and persistence", criterion_9),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        println!(
            "criterion {} ({name}): {} [{:.1}s] {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
