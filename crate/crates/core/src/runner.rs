//! The `check | sample | analyze` pipeline behind the command-line tool.
//!
//! A sample run is staged in `<out>.partial` with an `INCOMPLETE` marker and
//! only renamed over `<out>` once every task has finished, so an interrupted
//! run never touches a previously completed directory.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{AnalysisSpec, Condition, Estimator, ExperimentSpec};
use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::estimators::certificate::certificate_from_decay;
use crate::estimators::dobrushin::dobrushin_from_decay;
use crate::estimators::sigma::block_sup_moment;
use crate::estimators::{
    clt_test, covariance_decay, covariance_decay_ibp, diffusion, mixing_proxy, sigma_sq_estimate, CltOptions,
    DiffusionEstimate, LowerBoundCertificate,
};
use crate::path::{read_path_csv, write_path_csv, IncrementPath};
use crate::potential::{check_conditions, CheckOptions, ConditionReport};
use crate::sampler::{run_chain, ChainSummary};

pub const INCOMPLETE: &str = "INCOMPLETE";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskRecord {
    pub name: String,
    pub lambda: f64,
    pub seed: u64,
    pub status: String,
    pub summary: ChainSummary,
    pub warnings: Vec<String>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub spec_hash: String,
    pub code_version: String,
    pub spec: ExperimentSpec,
    pub tasks: Vec<TaskRecord>,
    pub seeds_consumed: Vec<u64>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub task: Option<String>,
    pub passed: bool,
    pub values: Value,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub report: Option<ConditionReport>,
    /// Every condition listed under `require` holds.
    pub required_hold: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(format!("serialization failed: {e}")))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

/// SHA-256 of the resolved spec without its output directory.
pub fn spec_hash(spec: &ExperimentSpec) -> String {
    let mut s = spec.clone();
    s.output = None;
    let text = serde_json::to_string(&s).expect("spec serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed of task `(λ index, base seed)`: a splitmix64 step so that every
/// coupling gets an independent stream.
pub fn task_seed(lambda_index: usize, seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(lambda_index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn task_name(lambda_index: usize, seed: u64) -> String {
    format!("task_l{lambda_index:02}_s{seed}")
}

fn required_hold(report: &ConditionReport, require: &[Condition]) -> bool {
    require.iter().all(|c| match c {
        Condition::H1 => report.h1.holds.holds(),
        Condition::H2 => report.h2.holds.holds(),
        Condition::H3 => report.h3.holds.holds(),
        Condition::H3b => report.h3b.holds.holds(),
        Condition::H4 => report.h4.holds.holds(),
    })
}

fn conditions(spec: &ExperimentSpec) -> Result<ConditionReport> {
    check_conditions(&spec.build_potential()?, &[], &CheckOptions::default())
}

/// Writes `conditions.json` unless the analysis block is empty.
pub fn cmd_check(spec: &ExperimentSpec, out: &Path) -> Result<CheckOutcome> {
    if spec.analysis.is_empty() {
        return Ok(CheckOutcome {
            report: None,
            required_hold: true,
        });
    }
    let report = conditions(spec)?;
    create_dir(out)?;
    write_json(&out.join("conditions.json"), &report)?;
    Ok(CheckOutcome {
        required_hold: required_hold(&report, &spec.analysis.require),
        report: Some(report),
    })
}

fn staging_dir(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

fn run_task(ctx: &EnergyContext, spec: &ExperimentSpec, dir: &Path, li: usize, seed: u64) -> Result<TaskRecord> {
    let start = Instant::now();
    let lambda = spec.sampler.lambda[li];
    let chain_seed = task_seed(li, seed);
    let cfg = spec.sampler_config(lambda, chain_seed)?;
    let out = run_chain(ctx, &cfg, None)?;
    let name = task_name(li, seed);
    let tdir = dir.join(&name);
    let sdir = tdir.join("samples");
    create_dir(&sdir)?;
    for (k, p) in out.samples.iter().enumerate() {
        let path = sdir.join(format!("{k:04}.csv"));
        let f = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(f);
        write_path_csv(&mut w, p, Some(chain_seed)).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))?;
    }
    let diag = &out.diagnostics;
    let path = tdir.join("diagnostics.csv");
    let mut w = BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
    let mut write_diag = || -> std::io::Result<()> {
        writeln!(w, "sweep,energy,acceptance")?;
        for (k, (e, a)) in diag.energy_trace.iter().zip(&diag.acceptance_trace).enumerate() {
            writeln!(w, "{},{e:.16e},{a:.16e}", k + 1)?;
        }
        w.flush()
    };
    write_diag().map_err(io_err(&path))?;
    Ok(TaskRecord {
        name,
        lambda,
        seed: chain_seed,
        status: "complete".into(),
        summary: ChainSummary::from(&out),
        warnings: diag.warnings.clone(),
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs every `(λ, seed)` task. `threads = Some(1)` gives the
/// single-threaded mode in which outputs are reproducible byte for byte;
/// they are in fact reproducible for any thread count since tasks share
/// nothing.
pub fn cmd_sample(spec: &ExperimentSpec, out: &Path, threads: Option<usize>, force: bool) -> Result<RunManifest> {
    if !force && !spec.analysis.require.is_empty() {
        let report = conditions(spec)?;
        if !required_hold(&report, &spec.analysis.require) {
            return Err(Error::Numeric(format!(
                "required conditions {:?} do not all hold for the {} potential; rerun with --force to sample anyway",
                spec.analysis.require, report.potential
            )));
        }
    }
    let start = Instant::now();
    let ctx = spec.context()?;
    let stage = staging_dir(out);
    if stage.exists() {
        fs::remove_dir_all(&stage).map_err(io_err(&stage))?;
    }
    create_dir(&stage)?;
    fs::write(stage.join(INCOMPLETE), "sampling in progress\n").map_err(io_err(&stage))?;

    let jobs: Vec<(usize, u64)> = (0..spec.sampler.lambda.len())
        .flat_map(|li| spec.sampler.seeds.iter().map(move |s| (li, *s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads:?} worker threads: {e}")))?;
    let tasks: Vec<TaskRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|(li, s)| run_task(&ctx, spec, &stage, *li, *s))
            .collect::<Result<_>>()
    })?;
    let manifest = RunManifest {
        spec_hash: spec_hash(spec),
        code_version: env!("CARGO_PKG_VERSION").into(),
        spec: spec.clone(),
        seeds_consumed: tasks.iter().map(|t| t.seed).collect(),
        tasks,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    write_json(&stage.join("manifest.json"), &manifest)?;
    fs::remove_file(stage.join(INCOMPLETE)).map_err(io_err(&stage))?;

    // swap into place; the previous run survives until the new one is whole
    let mut old = out.as_os_str().to_owned();
    old.push(".previous");
    let old = PathBuf::from(old);
    if out.exists() {
        if old.exists() {
            fs::remove_dir_all(&old).map_err(io_err(&old))?;
        }
        fs::rename(out, &old).map_err(io_err(out))?;
    }
    fs::rename(&stage, out).map_err(io_err(out))?;
    if old.exists() {
        fs::remove_dir_all(&old).map_err(io_err(&old))?;
    }
    Ok(manifest)
}

pub fn read_manifest(run_dir: &Path) -> Result<RunManifest> {
    if !run_dir.is_dir() {
        return Err(Error::MissingInput(format!("run directory {} does not exist", run_dir.display())));
    }
    if run_dir.join(INCOMPLETE).exists() {
        return Err(Error::MissingInput(format!("run directory {} is marked {INCOMPLETE}", run_dir.display())));
    }
    let path = run_dir.join("manifest.json");
    let text = fs::read_to_string(&path)
        .map_err(|_| Error::MissingInput(format!("{} has no manifest.json", run_dir.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

pub fn load_samples(task_dir: &Path) -> Result<Vec<IncrementPath>> {
    let sdir = task_dir.join("samples");
    let mut files: Vec<PathBuf> = fs::read_dir(&sdir)
        .map_err(|_| Error::MissingInput(format!("missing samples directory {}", sdir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    if files.is_empty() {
        return Err(Error::MissingInput(format!("no samples in {}", sdir.display())));
    }
    files.sort();
    files
        .iter()
        .map(|p| {
            let f = fs::File::open(p).map_err(io_err(p))?;
            read_path_csv(BufReader::new(f)).map(|(path, _)| path).map_err(|e| match e {
                Error::Format { msg, .. } => Error::Format {
                    path: p.display().to_string(),
                    msg,
                },
                other => other,
            })
        })
        .collect()
}

/// Decay data from the declared values, else from the condition fit.
fn decay_of(ctx: &EnergyContext, report: &ConditionReport) -> (f64, f64, f64) {
    let d = ctx.potential().decay();
    (
        d.gamma.unwrap_or(report.h3b.gamma_fit),
        d.alpha.unwrap_or(report.h4.alpha),
        d.k_w.unwrap_or(report.h4.k_w_fit),
    )
}

fn refusal(e: &Error) -> Value {
    json!({ "refused": e.to_string() })
}

struct TaskAnalysis {
    verdicts: Vec<Verdict>,
    diffusion: Option<DiffusionEstimate>,
    certificate: Option<LowerBoundCertificate>,
}

#[allow(clippy::too_many_arguments)]
fn analyze_task(
    spec: &ExperimentSpec,
    analysis: &AnalysisSpec,
    ctx: &EnergyContext,
    report: Option<&ConditionReport>,
    task: &TaskRecord,
    run_dir: &Path,
    adir: &Path,
    plots: &Path,
) -> Result<TaskAnalysis> {
    let samples = load_samples(&run_dir.join(&task.name))?;
    let dir = adir.join(&task.name);
    create_dir(&dir)?;
    let lambda = task.lambda;
    let mut verdicts = Vec::new();
    let mut verdict = |criterion: &str, passed: bool, values: Value| {
        verdicts.push(Verdict {
            criterion: criterion.into(),
            task: Some(task.name.clone()),
            passed,
            values,
        })
    };
    let (a, b) = analysis.interval;
    let mut out = TaskAnalysis {
        verdicts: vec![],
        diffusion: None,
        certificate: None,
    };

    if analysis.wants(Estimator::Diffusion) || analysis.wants(Estimator::Certificate) {
        let est = diffusion(&samples, a, b)?;
        write_json(&dir.join("diffusion.json"), &est)?;
        if lambda == 0.0 {
            verdict(
                "diffusion_unit_at_zero_coupling",
                (est.normalized - 1.0).abs() <= 5.0 * est.normalized_se,
                json!({ "normalized": est.normalized, "std_err": est.normalized_se }),
            );
        }
        out.diffusion = Some(est);
    }
    if let (true, Some(report)) = (analysis.wants(Estimator::Certificate), report) {
        let (_, alpha, k_w) = decay_of(ctx, report);
        match certificate_from_decay(alpha, k_w, lambda.max(0.0), a, b) {
            Ok(cert) => {
                write_json(&dir.join("certificate.json"), &cert)?;
                let est = out.diffusion.as_ref().expect("diffusion computed above");
                verdict(
                    "certificate_sound",
                    est.normalized >= cert.sigma_minus_sq - 3.0 * est.normalized_se,
                    json!({
                        "normalized": est.normalized,
                        "std_err": est.normalized_se,
                        "sigma_minus_sq": cert.sigma_minus_sq,
                    }),
                );
                out.certificate = Some(cert);
            }
            Err(e) => write_json(&dir.join("certificate.json"), &refusal(&e))?,
        }
    }
    if analysis.wants(Estimator::Covariance) {
        let v = &analysis.direction;
        let direct = covariance_decay(&samples, analysis.block_len, v, analysis.n_max)?;
        write_json(&dir.join("covariance.json"), &direct)?;
        write_csv(&dir.join("covariance.csv"), |w| direct.write_csv(w))?;
        let ibp = covariance_decay_ibp(ctx, lambda, &samples, analysis.block_len, v, analysis.n_max)?;
        write_json(&dir.join("covariance_ibp.json"), &ibp)?;
        write_csv(&dir.join("covariance_ibp.csv"), |w| ibp.write_csv(w))?;
        if let (Some(report), Some(slope)) = (report, ibp.exponent()) {
            let (gamma, _, _) = decay_of(ctx, report);
            verdict(
                "covariance_decay_exponent",
                slope <= -(gamma - 2.0) + 0.3,
                json!({ "exponent": slope, "threshold": -(gamma - 2.0) + 0.3 }),
            );
        }
        let rel = format!("../analysis/{}/covariance_ibp.csv", task.name);
        let script = format!(
            "set datafile separator ','\nset logscale xy\nset xlabel 'n'\nset ylabel '|Cov(Y_0,Y_n)|'\n\
             plot '{rel}' every ::2 using 1:(abs($2)):3 with yerrorbars title 'lambda = {lambda}'\n"
        );
        fs::write(plots.join(format!("covariance_{}.gp", task.name)), script).map_err(io_err(plots))?;
    }
    let mut sigma_sq = None;
    if analysis.wants(Estimator::Sigma) {
        let cfg = spec.sampler_config(lambda, task.seed)?;
        let est = sigma_sq_estimate(ctx, &cfg, analysis.block_len, analysis.probe_slope)?;
        write_json(&dir.join("sigma.json"), &est)?;
        sigma_sq = Some(est.conservative);
    }
    if let (true, Some(report)) = (analysis.wants(Estimator::Dobrushin), report) {
        let s2 = match sigma_sq {
            Some(s) => s,
            None => block_sup_moment(&samples, analysis.block_len)?.mean,
        };
        let (_, alpha, k_w) = decay_of(ctx, report);
        let res = if report.h4.holds.holds() {
            dobrushin_from_decay(alpha, k_w, lambda, analysis.block_len, s2)
        } else {
            Err(Error::Numeric("Hessian decay condition fails".into()))
        };
        match res {
            Ok(d) => {
                write_json(&dir.join("dobrushin.json"), &d)?;
                verdict(
                    "dobrushin_lambda_star_positive",
                    d.lambda_star > 0.0,
                    json!({ "lambda_star": d.lambda_star, "row_bound": d.row_bound, "sigma_sq": s2 }),
                );
            }
            Err(e) => write_json(&dir.join("dobrushin.json"), &refusal(&e))?,
        }
    }
    if analysis.wants(Estimator::Clt) {
        let d = spec.grid.d;
        let dirs: Vec<Vec<f64>> = (0..d)
            .map(|c| (0..d).map(|k| if k == c { 1.0 } else { 0.0 }).collect())
            .collect();
        let eps = if analysis.epsilons.is_empty() {
            vec![4.0 / spec.grid.half_width]
        } else {
            analysis.epsilons.clone()
        };
        let opts = CltOptions {
            known_variance: (lambda == 0.0).then_some(1.0),
            ..CltOptions::default()
        };
        let reports = clt_test(&samples, &eps, &dirs, &opts)?;
        write_json(&dir.join("clt.json"), &reports)?;
        let passed = if lambda == 0.0 {
            reports.iter().all(|r| r.per_direction.iter().all(|k| k.passes))
        } else {
            let (first, last) = (&reports[0], &reports[reports.len() - 1]);
            first.per_direction.iter().zip(&last.per_direction).all(|(p, q)| {
                q.ks_distance <= p.ks_distance + 2.0 * (p.ks_se.powi(2) + q.ks_se.powi(2)).sqrt()
            }) && reports.iter().all(|r| r.isotropic)
        };
        verdict(
            "clt",
            passed,
            json!(reports
                .iter()
                .map(|r| json!({
                    "epsilon": r.epsilon,
                    "ks_distance": r.per_direction.iter().map(|k| k.ks_distance).collect::<Vec<_>>(),
                    "p_value": r.per_direction.iter().map(|k| k.p_value).collect::<Vec<_>>(),
                    "isotropy_max_z": r.isotropy_max_z,
                }))
                .collect::<Vec<_>>()),
        );
        // quantile plot data for the finest scale along the first axis
        let r = &reports[reports.len() - 1];
        let scale = r.epsilon.sqrt();
        let mut xs: Vec<f64> = samples
            .iter()
            .step_by(r.stride.max(1))
            .map(|p| Ok(p.increment(r.interval.start, r.interval.end)?[0] * scale))
            .collect::<Result<_>>()?;
        xs.sort_by(f64::total_cmp);
        let sd = r.per_direction[0].reference_variance.sqrt();
        let normal = Normal::new(0.0, sd.max(1e-300)).expect("valid normal");
        let n = xs.len() as f64;
        let data_name = format!("clt_qq_{}.dat", task.name);
        write_csv(&plots.join(&data_name), |w| {
            writeln!(w, "# theoretical sample")?;
            for (i, x) in xs.iter().enumerate() {
                writeln!(w, "{:.10e} {x:.10e}", normal.inverse_cdf((i as f64 + 0.5) / n))?;
            }
            Ok(())
        })?;
        let script = format!(
            "set xlabel 'normal quantile'\nset ylabel 'sample quantile'\n\
             plot '{data_name}' using 1:2 title 'epsilon = {}', x notitle\n",
            r.epsilon
        );
        fs::write(plots.join(format!("clt_qq_{}.gp", task.name)), script).map_err(io_err(plots))?;
    }
    if analysis.wants(Estimator::Mixing) {
        let t = mixing_proxy(&samples, analysis.block_len, analysis.n_max)?;
        write_json(&dir.join("mixing.json"), &t)?;
    }
    out.verdicts = verdicts;
    Ok(out)
}

fn write_csv<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
{
    let mut w = BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Writes every requested report under `<run>/analysis`, plot scripts under
/// `<run>/plots` and the aggregated `verdicts.json`.
pub fn cmd_analyze(run_dir: &Path, analysis: Option<&AnalysisSpec>) -> Result<Vec<Verdict>> {
    let manifest = read_manifest(run_dir)?;
    let spec = &manifest.spec;
    let analysis = analysis.unwrap_or(&spec.analysis);
    if analysis.is_empty() {
        return Ok(vec![]);
    }
    let ctx = spec.context()?;
    let adir = run_dir.join("analysis");
    let plots = run_dir.join("plots");
    create_dir(&adir)?;
    create_dir(&plots)?;
    let needs_report = analysis.wants(Estimator::Conditions)
        || analysis.wants(Estimator::Certificate)
        || analysis.wants(Estimator::Dobrushin)
        || analysis.wants(Estimator::Covariance)
        || !analysis.require.is_empty();
    let report = if needs_report { Some(conditions(spec)?) } else { None };
    let mut verdicts = Vec::new();
    if let Some(r) = &report {
        write_json(&adir.join("conditions.json"), r)?;
        if !analysis.require.is_empty() {
            verdicts.push(Verdict {
                criterion: "required_conditions".into(),
                task: None,
                passed: required_hold(r, &analysis.require),
                values: json!({ "require": analysis.require, "verdicts": r.verdicts() }),
            });
        }
    }
    let results: Vec<TaskAnalysis> = manifest
        .tasks
        .iter()
        .map(|t| analyze_task(spec, analysis, &ctx, report.as_ref(), t, run_dir, &adir, &plots))
        .collect::<Result<_>>()?;

    if analysis.wants(Estimator::Diffusion) {
        write_csv(&plots.join("diffusion_vs_lambda.dat"), |w| {
            writeln!(w, "# lambda normalized std_err sigma_minus_sq")?;
            for (t, r) in manifest.tasks.iter().zip(&results) {
                if let Some(d) = &r.diffusion {
                    let cert = r.certificate.as_ref().map_or(f64::NAN, |c| c.sigma_minus_sq);
                    writeln!(w, "{} {:.10e} {:.10e} {:.10e}", t.lambda, d.normalized, d.normalized_se, cert)?;
                }
            }
            Ok(())
        })?;
        fs::write(
            plots.join("diffusion_vs_lambda.gp"),
            "set xlabel 'lambda'\nset ylabel 'E[x_ab^2]/|b-a|'\n\
             plot 'diffusion_vs_lambda.dat' using 1:2:3 with yerrorbars title 'Monte Carlo', \\\n     \
             '' using 1:4 with linespoints title 'certified lower bound'\n",
        )
        .map_err(io_err(&plots))?;
    }
    for r in results {
        verdicts.extend(r.verdicts);
    }
    write_json(&run_dir.join("verdicts.json"), &verdicts)?;
    Ok(verdicts)
}
