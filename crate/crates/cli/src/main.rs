//! `microdrift`: command-line laboratory for action drift in near-integrable
//! Hamiltonian systems.
//!
//! Exit codes: 0 success, 2 validation error, 3 numeric failure (hidden
//! resonance, non-convergence, assumption failure), 4 i/o error.

mod config;
mod plots;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use microdrift_core::divisors::SmallDivisorProfile;
use microdrift_core::drift::{
    auto_qmax, epsilon_sweep, micro_drift_run, AdaptedLab, DriftConfig,
};
use microdrift_core::hamiltonian::Angles;
use microdrift_core::integrator::{default_step, integrate, PhaseState};
use microdrift_core::normal_form::verify_lemma_estimates;
use microdrift_core::resonance::adapt_system;
use microdrift_core::{Error as CoreError, ErrorClass};

use config::{parse_eps_decades, parse_float_list, LabConfig};
use record::{write_atomic, RunRecord};

#[derive(Parser)]
#[command(
    name = "microdrift",
    version,
    about = "Measure sqrt(eps)-scale action drift around resonances of near-integrable systems"
)]
struct Cli {
    /// Experiment description file supplying defaults for the subcommands.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for run records (run.json + CSVs).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for sweeps and sampling (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for the low-discrepancy samplers.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SystemArgs {
    /// System definition JSON.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Resonance definition JSON.
    #[arg(long)]
    resonance: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the small-divisor function Psi(Q) by exhaustive search.
    Psi {
        /// Non-resonant frequency block, comma separated.
        #[arg(long)]
        omega_tilde: String,
        #[arg(long, default_value_t = 200)]
        qmax: u32,
        /// Output CSV (columns Q, min_divisor, psi).
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate Delta(x) = sup { Q : Q Psi(Q) <= x }.
    Delta {
        #[arg(long)]
        omega_tilde: String,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        qmax: Option<u32>,
    },
    /// Evaluate mu(sqrt(eps)) = Delta(kappa / sqrt(eps))^{-1}.
    Mu {
        #[arg(long)]
        omega_tilde: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long)]
        qmax: Option<u32>,
    },
    /// Resonant average, critical angle, and derived constants.
    Average {
        #[command(flatten)]
        target: SystemArgs,
        /// Output JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Normal-form remainder sweep against the mu-scaled bounds.
    NormalformCheck {
        #[command(flatten)]
        target: SystemArgs,
        /// Comma-separated eps values.
        #[arg(long)]
        eps_list: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        qmax: Option<u32>,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate one orbit with the implicit midpoint scheme.
    Integrate {
        #[command(flatten)]
        target: SystemArgs,
        /// Initial angles, comma separated (turns).
        #[arg(long)]
        theta0: String,
        /// Initial actions, comma separated.
        #[arg(long)]
        i0: String,
        #[arg(long = "T")]
        t: f64,
        #[arg(long)]
        step: Option<f64>,
        /// Output stride in time units.
        #[arg(long)]
        stride: Option<f64>,
        /// Output CSV (t, theta_1..n, I_1..n, energy).
        #[arg(long)]
        out: PathBuf,
    },
    /// One micro-drift experiment at a fixed eps.
    Drift {
        #[command(flatten)]
        target: SystemArgs,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        mu0: Option<f64>,
        /// Initial transverse angles (comma separated, length n - d;
        /// default all zero).
        #[arg(long)]
        transverse: Option<String>,
        /// Average the report over this many transverse phases.
        #[arg(long)]
        phase_sweep: Option<u32>,
        #[arg(long)]
        qmax: Option<u32>,
        /// Output JSON report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Drift experiments across an eps grid with scaling fits.
    Sweep {
        #[command(flatten)]
        target: SystemArgs,
        /// Grid start:end:count, log spaced (e.g. 1e-2:1e-6:9).
        #[arg(long)]
        eps_decades: Option<String>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        mu0: Option<f64>,
        #[arg(long)]
        phase_sweep: Option<u32>,
        #[arg(long)]
        qmax: Option<u32>,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG plots from a persisted run record.
    Plot {
        /// Directory holding run.json.
        #[arg(long)]
        record: PathBuf,
        /// Output directory (defaults to the record directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // a second init in the same process is harmless for our use
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Numeric => 3,
                ErrorClass::Io => 4,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    2
}

fn run(cli: Cli) -> Result<()> {
    let lab_config = match &cli.config {
        Some(path) => config::load_config(path)?,
        None => LabConfig::default(),
    };
    let seed = cli.seed.unwrap_or(lab_config.seed);

    match cli.command {
        Command::Psi { omega_tilde, qmax, out } => {
            let omega = parse_float_list(&omega_tilde)?;
            let profile = SmallDivisorProfile::build(&omega, qmax, lab_config.kappa)?;
            let table = profile.table();
            write_atomic(&out, record::psi_csv(&table).as_bytes())?;
            println!("psi table with {} rows written to {}", table.len(), out.display());
            if let Some(dir) = &cli.out_dir {
                let mut rec = RunRecord::new(
                    "psi",
                    serde_json::json!({"omega_tilde": omega, "qmax": qmax, "kappa": lab_config.kappa}),
                );
                rec.reports.psi = Some(table);
                rec.persist(dir)?;
            }
            Ok(())
        }
        Command::Delta { omega_tilde, x, qmax } => {
            let omega = parse_float_list(&omega_tilde)?;
            let qmax = match qmax {
                Some(q) => q,
                None => required_qmax_for_x(&omega, x, lab_config.kappa)?,
            };
            let profile = SmallDivisorProfile::build(&omega, qmax, lab_config.kappa)?;
            println!("{}", profile.delta(x)?);
            Ok(())
        }
        Command::Mu { omega_tilde, eps, kappa, qmax } => {
            let omega = parse_float_list(&omega_tilde)?;
            let qmax = match qmax {
                Some(q) => q,
                None => auto_qmax(&omega, kappa, eps)?,
            };
            let profile = SmallDivisorProfile::build(&omega, qmax, kappa)?;
            println!("{}", profile.mu_of_eps(eps)?);
            Ok(())
        }
        Command::Average { target, out } => {
            let system = lab_config.resolve_system(target.system.as_deref())?;
            let resonance = lab_config.resolve_resonance(target.resonance.as_deref())?;
            resonance.validate_against(&system)?;
            let adapted = adapt_system(&system, &resonance)?;
            let averaged = microdrift_core::averaging::AveragedPerturbation::from_adapted(
                &adapted.system,
                adapted.d,
            )?;
            let eps = system.epsilon();
            let modes: Vec<serde_json::Value> = averaged
                .f_omega
                .modes()
                .map(|(k, c)| {
                    let terms: Vec<serde_json::Value> = c
                        .terms()
                        .map(|(alpha, v)| {
                            serde_json::json!({"alpha": alpha, "re": v.re, "im": v.im})
                        })
                        .collect();
                    serde_json::json!({"k": k, "coeff": terms})
                })
                .collect();
            let payload = serde_json::json!({
                "d": averaged.d,
                "f_omega_modes": modes,
                "theta_star": averaged.theta_star,
                "lambda": averaged.constants.lambda,
                "lipschitz": averaged.constants.lipschitz,
                "delta": averaged.constants.delta,
                "c": averaged.constants.c,
                "eps": eps,
                "tau": if eps > 0.0 { Some(averaged.tau(eps)) } else { None },
            });
            write_atomic(&out, serde_json::to_string_pretty(&payload)?.as_bytes())?;
            println!(
                "lambda = {:.6e}, L = {:.6e}, delta = {:.6e}, c = {:.6e} -> {}",
                averaged.constants.lambda,
                averaged.constants.lipschitz,
                averaged.constants.delta,
                averaged.constants.c,
                out.display()
            );
            Ok(())
        }
        Command::NormalformCheck { target, eps_list, samples, kappa, qmax, out } => {
            let system_def = lab_config.resolve_system_def(target.system.as_deref())?;
            let resonance_def = lab_config.resolve_resonance_def(target.resonance.as_deref())?;
            let system = system_def.to_system()?;
            let resonance = resonance_def.to_resonance()?;
            resonance.validate_against(&system)?;
            let eps_values = match &eps_list {
                Some(spec) => parse_float_list(spec)?,
                None => match (&lab_config.eps_list, &lab_config.eps_decades) {
                    (Some(list), _) => list.clone(),
                    (None, Some(spec)) => parse_eps_decades(spec)?,
                    _ => bail!("pass --eps-list or put eps_decades in the config"),
                },
            };
            let samples = samples.unwrap_or(lab_config.samples);
            let kappa = kappa.unwrap_or(lab_config.kappa);
            let adapted = adapt_system(&system, &resonance)?;
            let eps_min = eps_values.iter().copied().fold(f64::MAX, f64::min);
            let qmax = match qmax.or(lab_config.q_max) {
                Some(q) => q,
                None => auto_qmax(&adapted.omega_tilde, kappa, eps_min)?,
            };
            let profile = SmallDivisorProfile::build(&adapted.omega_tilde, qmax, kappa)?;
            let mut omega = vec![0.0; adapted.d];
            omega.extend_from_slice(&adapted.omega_tilde);
            let effective = LabConfig {
                system: Some(system_def),
                resonance: Some(resonance_def),
                kappa,
                q_max: Some(qmax),
                samples,
                seed,
                eps_list: Some(eps_values.clone()),
                ..LabConfig::default()
            };
            let mut rec = RunRecord::new("normalform-check", serde_json::to_value(&effective)?);
            let table = rec.time("normalform_check", || {
                verify_lemma_estimates(
                    &adapted.system,
                    &omega,
                    adapted.d,
                    &profile,
                    &eps_values,
                    samples,
                    seed,
                )
            })?;
            write_atomic(&out, record::nf_csv(&table).as_bytes())?;
            println!(
                "fitted slopes: displacement {:.3}, dtheta {:.3}, dactions {:.3} -> {}",
                table.fit_displacement.map(|f| f.slope).unwrap_or(f64::NAN),
                table.fit_dtheta.map(|f| f.slope).unwrap_or(f64::NAN),
                table.fit_dactions.map(|f| f.slope).unwrap_or(f64::NAN),
                out.display()
            );
            if let Some(dir) = &cli.out_dir {
                rec.reports.normal_form = Some(table);
                rec.persist(dir)?;
            }
            Ok(())
        }
        Command::Integrate { target, theta0, i0, t, step, stride, out } => {
            let system = lab_config.resolve_system(target.system.as_deref())?;
            let theta = parse_float_list(&theta0)?;
            let actions = parse_float_list(&i0)?;
            if theta.len() != system.dim() || actions.len() != system.dim() {
                bail!(
                    "initial condition length must match n = {} (got {} angles, {} actions)",
                    system.dim(),
                    theta.len(),
                    actions.len()
                );
            }
            let h = step.unwrap_or_else(|| default_step(system.epsilon(), 0.0));
            let dt_out = stride.unwrap_or(t / 1000.0);
            let state = PhaseState::new(Angles::new(theta),
                microdrift_core::hamiltonian::Actions::new(actions), 0.0);
            let traj = integrate(&system, &state, t, h, dt_out)?;
            write_atomic(&out, record::trajectory_csv(&traj).as_bytes())?;
            println!(
                "{} samples, step {:.3e}, relative energy drift {:.3e} -> {}",
                traj.samples.len(),
                traj.step,
                traj.energy_rel_drift,
                out.display()
            );
            Ok(())
        }
        Command::Drift { target, eps, kappa, mu0, transverse, phase_sweep, qmax, out } => {
            let system_def = lab_config.resolve_system_def(target.system.as_deref())?;
            let resonance_def = lab_config.resolve_resonance_def(target.resonance.as_deref())?;
            let system = system_def.to_system()?;
            let resonance = resonance_def.to_resonance()?;
            let eps = eps
                .or(lab_config.eps)
                .or(Some(system.epsilon()).filter(|&e| e > 0.0))
                .context("no eps given")?;
            let kappa = kappa.unwrap_or(lab_config.kappa);
            let qmax = match qmax.or(lab_config.q_max) {
                Some(q) => q,
                None => auto_qmax(&resonance.omega_tilde, kappa, eps)?,
            };
            let transverse_phase = match transverse {
                Some(spec) => parse_float_list(&spec)?,
                None => lab_config.transverse.clone().unwrap_or_default(),
            };
            let lab = AdaptedLab::new(&system, &resonance, kappa, qmax)?;
            let drift_config = DriftConfig {
                eps,
                kappa,
                mu0: mu0.unwrap_or(lab_config.mu0),
                transverse_phase: transverse_phase.clone(),
                phase_sweep: phase_sweep.unwrap_or(lab_config.phase_sweep).max(1),
                record_series: true,
                ..DriftConfig::new(eps)
            };
            // the record carries a config file that reproduces this run
            let effective = LabConfig {
                system: Some(system_def),
                resonance: Some(resonance_def),
                kappa,
                mu0: drift_config.mu0,
                q_max: Some(qmax),
                seed,
                eps: Some(eps),
                phase_sweep: drift_config.phase_sweep,
                transverse: (!transverse_phase.is_empty()).then_some(transverse_phase),
                ..LabConfig::default()
            };
            let mut rec = RunRecord::new("drift", serde_json::to_value(&effective)?);
            let report = rec.time("drift", || micro_drift_run(&lab, &drift_config))?;
            if report.mu_exceeded {
                eprintln!(
                    "warning: mu = {:.3e} exceeds mu0 = {:.3e}; proceeding anyway",
                    report.mu, drift_config.mu0
                );
            }
            write_atomic(&out, serde_json::to_string_pretty(&report)?.as_bytes())?;
            println!(
                "drift {:.6e} vs threshold {:.6e} ({}) -> {}",
                report.total,
                report.threshold,
                if report.pass { "PASS" } else { "below" },
                out.display()
            );
            if let Some(dir) = &cli.out_dir {
                rec.reports.drift = Some(report);
                rec.persist(dir)?;
            }
            Ok(())
        }
        Command::Sweep { target, eps_decades, kappa, mu0, phase_sweep, qmax, out } => {
            let system_def = lab_config.resolve_system_def(target.system.as_deref())?;
            let resonance_def = lab_config.resolve_resonance_def(target.resonance.as_deref())?;
            let system = system_def.to_system()?;
            let resonance = resonance_def.to_resonance()?;
            let eps_values = match &eps_decades {
                Some(spec) => parse_eps_decades(spec)?,
                None => match (&lab_config.eps_list, &lab_config.eps_decades) {
                    (Some(list), _) => list.clone(),
                    (None, Some(spec)) => parse_eps_decades(spec)?,
                    _ => bail!("pass --eps-decades or put eps_decades in the config"),
                },
            };
            let kappa = kappa.unwrap_or(lab_config.kappa);
            let eps_min = eps_values.iter().copied().fold(f64::MAX, f64::min);
            let qmax = match qmax.or(lab_config.q_max) {
                Some(q) => q,
                None => auto_qmax(&resonance.omega_tilde, kappa, eps_min)?,
            };
            let lab = AdaptedLab::new(&system, &resonance, kappa, qmax)?;
            let base = DriftConfig {
                kappa,
                mu0: mu0.unwrap_or(lab_config.mu0),
                transverse_phase: lab_config.transverse.clone().unwrap_or_default(),
                phase_sweep: phase_sweep.unwrap_or(lab_config.phase_sweep).max(1),
                ..DriftConfig::new(eps_values[0])
            };
            let effective = LabConfig {
                system: Some(system_def),
                resonance: Some(resonance_def),
                kappa,
                mu0: base.mu0,
                q_max: Some(qmax),
                seed,
                eps_list: Some(eps_values.clone()),
                phase_sweep: base.phase_sweep,
                transverse: lab_config.transverse.clone(),
                ..LabConfig::default()
            };
            let mut rec = RunRecord::new("sweep", serde_json::to_value(&effective)?);
            let sweep = rec.time("sweep", || epsilon_sweep(&lab, &base, &eps_values))?;
            write_atomic(&out, record::sweep_csv(&sweep.reports).as_bytes())?;
            let passes = sweep.reports.iter().filter(|r| r.pass).count();
            println!(
                "{}/{} runs above threshold, total-drift slope {:.3} -> {}",
                passes,
                sweep.reports.len(),
                sweep.fit_total.map(|f| f.slope).unwrap_or(f64::NAN),
                out.display()
            );
            if let Some(dir) = &cli.out_dir {
                rec.reports.sweep = Some(sweep);
                rec.persist(dir)?;
            }
            Ok(())
        }
        Command::Plot { record: record_dir, out } => {
            let out_dir = out.unwrap_or_else(|| record_dir.clone());
            let run_path = record_dir.join("run.json");
            let text = std::fs::read_to_string(&run_path)
                .with_context(|| format!("cannot read {}", run_path.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let reports = &value["reports"];
            let mut emitted = 0usize;
            std::fs::create_dir_all(&out_dir)?;
            if let Some(sweep) = reports.get("sweep") {
                let sweep: microdrift_core::drift::SweepResult =
                    serde_json::from_value(sweep.clone())?;
                let svg = plots::sweep_plot(&sweep);
                write_atomic(&out_dir.join("sweep_plot.svg"), svg.as_bytes())?;
                emitted += 1;
            }
            if let Some(table) = reports.get("psi") {
                let table: Vec<(u32, f64, f64)> = serde_json::from_value(table.clone())?;
                let svg = plots::psi_staircase(&table);
                write_atomic(&out_dir.join("psi_staircase.svg"), svg.as_bytes())?;
                emitted += 1;
            }
            if let Some(drift) = reports.get("drift") {
                let report: microdrift_core::drift::DriftReport =
                    serde_json::from_value(drift.clone())?;
                if let Some(series) = &report.series {
                    let svg = plots::drift_series_plot(series);
                    write_atomic(&out_dir.join("drift_series.svg"), svg.as_bytes())?;
                    emitted += 1;
                } else {
                    println!("drift report has no time series; skipping its plot");
                }
            }
            if emitted == 0 {
                println!("record holds no plottable reports; nothing to do");
            } else {
                println!("{emitted} plot(s) written to {}", out_dir.display());
            }
            Ok(())
        }
    }
}

/// Table order sufficient for `Delta(x)`: `Delta(x) <= x / Psi(1)`.
fn required_qmax_for_x(omega: &[f64], x: f64, kappa: f64) -> Result<u32> {
    let probe = SmallDivisorProfile::build(omega, 1, kappa)?;
    Ok(((x / probe.psi(1)?).ceil() as u32 + 2).max(8))
}
