//! `qmartin`: command-line driver. Exit codes: 0 success, 1 invalid input
//! or run error, 2 a gated acceptance check failed.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qmartin_core::io::write_json_atomic;
use qmartin_core::model::{ModelSpec, PresetSpec, QubitRates};
use qmartin_core::{Integrator, QubitParams};
use serde_json::json;

use config::{fig2b_params, fig2c_params, qubit, xi_grid, RunConfig};

#[derive(Parser)]
#[command(name = "qmartin", version, about = "Quantum-jump entropy-production martingales")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Steady state spectrum of the model.
    Steady,
    /// Fixed-time ensemble with the two-point measurement.
    Ensemble,
    /// Stopping-time fluctuation theorem for one rule.
    Stopping,
    /// Finite-time infima of the entropy productions.
    Infima,
    /// Conditional averages over branches continued from τ.
    BranchTest,
    /// Exhaustive enumeration of short discretized records.
    Oracle,
    /// Three stopping rules at the bias-driven qubit parameters.
    Fig2b,
    /// Infima distributions at weak bias.
    Fig2c,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Ensemble => "ensemble",
            Command::Stopping => "stopping",
            Command::Infima => "infima",
            Command::BranchTest => "branch-test",
            Command::Oracle => "oracle",
            Command::Fig2b => "fig2b",
            Command::Fig2c => "fig2c",
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum Preset {
    Qubit,
    QubitRates,
}

#[derive(ValueEnum, Clone, Copy)]
enum IntegratorArg {
    Euler,
    Exact,
}

#[derive(Args, Default)]
struct Flags {
    /// JSON config (same fields as the flags); a summary.json also works.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; QMARTIN_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long = "out", global = true)]
    out_dir: Option<PathBuf>,

    #[arg(long, value_enum, global = true)]
    preset: Option<Preset>,
    /// Explicit model JSON.
    #[arg(long, global = true, conflicts_with = "preset")]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    omega: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true)]
    gamma_gap: Option<f64>,
    #[arg(long, global = true)]
    gamma_down: Option<f64>,
    #[arg(long, global = true)]
    gamma_up: Option<f64>,
    #[arg(long, global = true)]
    gamma_minus: Option<f64>,
    #[arg(long, global = true)]
    gamma_plus: Option<f64>,

    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    t_final: Option<f64>,
    #[arg(long, global = true)]
    n_traj: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    sample_every: Option<usize>,
    #[arg(long, value_enum, global = true)]
    integrator: Option<IntegratorArg>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    upper: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    lower: Option<f64>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    n_parents: Option<usize>,
    #[arg(long, global = true)]
    n_branches: Option<usize>,
    #[arg(long, global = true)]
    n_slots: Option<usize>,
    #[arg(long, global = true)]
    xi_max: Option<f64>,
    #[arg(long, global = true, requires = "xi_max")]
    xi_step: Option<f64>,
    /// fig2c: add Γt = 10³ and 10⁴.
    #[arg(long, global = true)]
    long: bool,
}

fn any_qubit_flag(f: &Flags) -> bool {
    [f.omega, f.beta, f.eta, f.gamma_gap, f.gamma_down, f.gamma_up, f.gamma_minus, f.gamma_plus]
        .iter()
        .any(Option::is_some)
}

/// Model from flags, layered over the model already in `base` when it is of
/// the same preset kind.
fn model_from_flags(f: &Flags, base: Option<&ModelSpec>) -> Result<Option<ModelSpec>> {
    if let Some(path) = &f.model {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
        return Ok(Some(ModelSpec::from_json(&text).with_context(|| format!("malformed model {}", path.display()))?));
    }
    let kind = match (f.preset, base) {
        (Some(p), _) => p,
        (None, Some(ModelSpec::Preset(PresetSpec::QubitRates(_)))) => Preset::QubitRates,
        (None, _) if any_qubit_flag(f) => Preset::Qubit,
        (None, _) => return Ok(None),
    };
    let spec = match kind {
        Preset::Qubit => {
            let b = match base {
                Some(ModelSpec::Preset(PresetSpec::Qubit(p))) => *p,
                _ => fig2b_params(),
            };
            if f.gamma_down.is_some() || f.gamma_up.is_some() || f.gamma_minus.is_some() || f.gamma_plus.is_some() {
                bail!("absolute rates need --preset qubit-rates");
            }
            PresetSpec::Qubit(QubitParams {
                omega: f.omega.unwrap_or(b.omega),
                beta: f.beta.unwrap_or(b.beta),
                eta: f.eta.unwrap_or(b.eta),
                gamma_gap: f.gamma_gap.unwrap_or(b.gamma_gap),
            })
        }
        Preset::QubitRates => {
            let b = match base {
                Some(ModelSpec::Preset(PresetSpec::QubitRates(r))) => Some(*r),
                _ => None,
            };
            if f.gamma_gap.is_some() {
                bail!("--gamma-gap applies to the qubit preset only");
            }
            let need = |v: Option<f64>, old: Option<f64>, name: &str| {
                v.or(old).with_context(|| format!("--preset qubit-rates needs --{name}"))
            };
            PresetSpec::QubitRates(QubitRates {
                omega: need(f.omega, b.map(|r| r.omega).or(Some(1.0)), "omega")?,
                beta: need(f.beta, b.map(|r| r.beta), "beta")?,
                eta: f.eta.or(b.map(|r| r.eta)).unwrap_or(0.0),
                gamma_down: need(f.gamma_down, b.map(|r| r.gamma_down), "gamma-down")?,
                gamma_up: need(f.gamma_up, b.map(|r| r.gamma_up), "gamma-up")?,
                gamma_minus: f.gamma_minus.or(b.map(|r| r.gamma_minus)).unwrap_or(0.0),
                gamma_plus: f.gamma_plus.or(b.map(|r| r.gamma_plus)).unwrap_or(0.0),
            })
        }
    };
    Ok(Some(ModelSpec::Preset(spec)))
}

fn defaults(cmd: Command, long: bool) -> RunConfig {
    let base = RunConfig { model: qubit(fig2b_params()), seed: Some(0), n_traj: Some(10_000), ..Default::default() };
    match cmd {
        Command::Steady => RunConfig { n_traj: None, ..base },
        Command::Ensemble => RunConfig { t_final: Some(200.0), ..base },
        Command::Stopping => RunConfig { t_final: Some(2000.0), ..base },
        Command::Infima => RunConfig { model: qubit(fig2c_params()), t_final: Some(1000.0), ..base },
        Command::BranchTest => RunConfig {
            t_final: Some(100.0),
            tau: Some(50.0),
            n_parents: Some(200),
            n_branches: Some(10_000),
            n_traj: None,
            ..base
        },
        Command::Oracle => RunConfig { n_slots: Some(4), dt: Some(0.05), n_traj: None, ..base },
        Command::Fig2b => RunConfig { t_final: Some(2000.0), upper: Some(0.3), lower: Some(-0.4), ..base },
        Command::Fig2c => {
            let mut horizons = vec![1000.0, 10_000.0];
            if long {
                horizons.extend([100_000.0, 1_000_000.0]);
            }
            RunConfig { model: qubit(fig2c_params()), horizons: Some(horizons), ..base }
        }
    }
}

fn flags_config(f: &Flags, base: Option<&ModelSpec>) -> Result<RunConfig> {
    let xi = match (f.xi_max, f.xi_step) {
        (Some(max), step) => Some(xi_grid(max, step.unwrap_or(0.2))?),
        (None, _) => None,
    };
    Ok(RunConfig {
        model: model_from_flags(f, base)?,
        dt: f.dt,
        t_final: f.t_final,
        horizons: None,
        n_traj: f.n_traj,
        seed: f.seed,
        sample_every: f.sample_every,
        integrator: f.integrator.map(|i| match i {
            IntegratorArg::Euler => Integrator::Euler,
            IntegratorArg::Exact => Integrator::Exact,
        }),
        upper: f.upper,
        lower: f.lower,
        tau: f.tau,
        n_parents: f.n_parents,
        n_branches: f.n_branches,
        n_slots: f.n_slots,
        xi_grid: xi,
        out_dir: f.out_dir.clone(),
        threads: f.threads,
        long: f.long.then_some(true),
    })
}

fn thread_count(cfg: &RunConfig) -> Result<Option<usize>> {
    match std::env::var("QMARTIN_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => bail!("QMARTIN_THREADS must be a positive integer, got {v:?}"),
        },
        Err(_) => match cfg.threads {
            Some(0) => bail!("--threads must be >= 1"),
            t => Ok(t),
        },
    }
}

fn run(cli: Cli) -> Result<bool> {
    let file = match &cli.flags.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let long = cli.flags.long || file.long.unwrap_or(false);
    let layered = defaults(cli.command, long).overlay(file);
    let flags = flags_config(&cli.flags, layered.model.as_ref())?;
    let mut cfg = layered.overlay(flags);
    if let Some(n) = thread_count(&cfg)? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    commands::ensure_dir(cfg.out_dir())?;
    let outcome = match cli.command {
        Command::Steady => commands::steady(&mut cfg)?,
        Command::Ensemble => commands::ensemble(&mut cfg)?,
        Command::Stopping => commands::stopping(&mut cfg)?,
        Command::Infima => commands::infima(&mut cfg)?,
        Command::BranchTest => commands::branch_test(&mut cfg)?,
        Command::Oracle => commands::oracle(&mut cfg)?,
        Command::Fig2b => commands::fig2b(&mut cfg)?,
        Command::Fig2c => commands::fig2c(&mut cfg)?,
    };
    for c in &outcome.checks {
        let tag = match (c.pass, c.gated) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (not gated)",
        };
        println!("{tag} {}: {}", c.name, c.detail);
    }
    let ok = outcome.checks.iter().all(|c| c.pass || !c.gated);
    let summary = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "seed": cfg.seed(),
        "config": cfg,
        "checks": outcome.checks,
        "status": if ok { "pass" } else { "fail" },
        "results": outcome.results,
    });
    write_json_atomic(&cfg.out_dir().join("summary.json"), &summary)?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let informational = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            let _ = e.print();
            return ExitCode::from(if informational { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
