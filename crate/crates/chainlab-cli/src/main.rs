//! Command-line front end: tilt solving, scaling experiments, density dumps,
//! and the verification battery.
//!
//! Exit codes: 0 success, 1 run or check failure, 2 usage/config errors.

mod check;
mod config;
mod manifest;
mod plots;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use chainlab::experiment::{
    run_bracket_variance, run_drift, run_packet, run_variance_floor, ExperimentReport,
};
use chainlab::gibbs::{solve_theta, toda_digamma_residual};
use chainlab::lax::density;

use config::{ConfigError, ConfigFile};
use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "chainlab",
    about = "Monte Carlo laboratory for periodic anharmonic chains",
    version
)]
struct Cli {
    /// Worker threads for ensemble evaluation (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the tilt parameter of the product measure and print it
    Theta(ThetaArgs),
    /// Drift of conserved quantities along the flow (report + CSV + plot)
    Drift(RunArgs),
    /// Mode-packet constancy along the flow
    Packet(RunArgs),
    /// Equilibrium variance floors and Taylor-tail variances
    Floor(RunArgs),
    /// Bracket mean squares under the quartic-chain measure
    Bracket(RunArgs),
    /// Conserved-quantity density utilities
    Integrals {
        #[command(subcommand)]
        sub: IntegralsCommand,
    },
    /// Draw a constrained ensemble and print it as a CSV snapshot
    Sample(SampleArgs),
    /// Run the built-in verification battery
    Check(CheckArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// fput | toda | harmonic
    #[arg(long)]
    model: String,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    chi: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    members: usize,
    #[arg(long)]
    seed: u64,
    /// constrained_mcmc (zero-sum manifold) or product_theta (unconstrained
    /// tilted product draws)
    #[arg(long, default_value = "constrained_mcmc")]
    method: String,
    /// burn-in sweeps (0 = the 50n default)
    #[arg(long, default_value_t = 0)]
    burn: usize,
    #[arg(long, default_value_t = 5)]
    thin: usize,
    /// 0 = one chain per member
    #[arg(long, default_value_t = 0)]
    chains: usize,
}

#[derive(Args)]
struct ThetaArgs {
    /// fput | toda | harmonic
    #[arg(long)]
    model: String,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    chi: f64,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the sectioned key=value configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides CHAINLAB_OUT and the config file)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum IntegralsCommand {
    /// Print the closed-form density term list as JSON
    Dump {
        #[arg(long)]
        m: usize,
    },
}

#[derive(Args)]
struct CheckArgs {
    /// Smaller grids, finishes within a minute
    #[arg(long)]
    quick: bool,
    /// Corrupt one coefficient to prove the battery can fail (test aid)
    #[arg(long, value_name = "WHICH", hide = true)]
    inject_fault: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match cli.command {
        Command::Theta(args) => cmd_theta(&args),
        Command::Drift(args) => cmd_experiment("drift", &args),
        Command::Packet(args) => cmd_experiment("packet", &args),
        Command::Floor(args) => cmd_experiment("floor", &args),
        Command::Bracket(args) => cmd_experiment("bracket", &args),
        Command::Integrals { sub } => match sub {
            IntegralsCommand::Dump { m } => cmd_integrals_dump(m),
        },
        Command::Sample(args) => cmd_sample(&args),
        Command::Check(args) => cmd_check(&args),
    }
}

fn cmd_sample(args: &SampleArgs) -> ExitCode {
    if !(args.beta > 0.0) || args.n < 3 || args.members == 0 {
        eprintln!("usage error: need beta > 0, n >= 3, members >= 1");
        return ExitCode::from(2);
    }
    let model = match args.model.as_str() {
        "fput" => chainlab::chain::Model::Fput,
        "toda" => chainlab::chain::Model::Toda,
        "harmonic" => chainlab::chain::Model::Harmonic,
        other => {
            eprintln!("usage error: unknown model {other:?} (fput | toda | harmonic)");
            return ExitCode::from(2);
        }
    };
    let method = match args.method.as_str() {
        "constrained_mcmc" => chainlab::gibbs::SamplerMethod::ConstrainedMcmc,
        "product_theta" => chainlab::gibbs::SamplerMethod::ProductTheta,
        other => {
            eprintln!("usage error: unknown method {other:?}");
            return ExitCode::from(2);
        }
    };
    let cfg = chainlab::gibbs::SamplerConfig {
        method,
        n_burn: args.burn,
        thin: args.thin.max(1),
        seed: args.seed,
        chains: args.chains,
    };
    // the quartic coefficient only enters the quartic chain
    let chi = if model == chainlab::chain::Model::Fput { args.chi } else { 0.0 };
    let run = || -> chainlab::Result<String> {
        let tm = solve_theta(args.beta, model, chi)?;
        let states = match method {
            chainlab::gibbs::SamplerMethod::ConstrainedMcmc => {
                tm.ensemble_constrained(args.n, &cfg, args.members)?
            }
            chainlab::gibbs::SamplerMethod::ProductTheta => {
                // unconstrained product rows, deliberately off the manifold
                (0..args.members)
                    .map(|i| {
                        let mut rng = chainlab::gibbs::member_rng(cfg.seed, i as u64);
                        let (p, r) = tm.sample_product(args.n, &mut rng)?;
                        Ok(chainlab::chain::ChainState { p, r })
                    })
                    .collect::<chainlab::Result<Vec<_>>>()?
            }
        };
        Ok(chainlab::gibbs::ensemble_snapshot_csv(&tm, &cfg, &states))
    };
    match run() {
        Ok(csv) => {
            print!("{csv}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sampling failed: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_theta(args: &ThetaArgs) -> ExitCode {
    if !(args.beta > 0.0) {
        eprintln!("usage error: --beta must be positive, got {}", args.beta);
        return ExitCode::from(2);
    }
    let model = match args.model.as_str() {
        "fput" => chainlab::chain::Model::Fput,
        "toda" => chainlab::chain::Model::Toda,
        "harmonic" => chainlab::chain::Model::Harmonic,
        other => {
            eprintln!("usage error: unknown model {other:?} (fput | toda | harmonic)");
            return ExitCode::from(2);
        }
    };
    match solve_theta(args.beta, model, args.chi) {
        Ok(tm) => {
            println!("theta      = {:.12}", tm.theta);
            println!("z          = {:.12e}", tm.z);
            println!("residual   = {:.3e}", tm.r_mean_residual);
            if model == chainlab::chain::Model::Toda {
                println!("digamma_eq = {:.3e}", toda_digamma_residual(&tm));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tilt solve failed: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_integrals_dump(m: usize) -> ExitCode {
    match density(m) {
        Ok(d) => {
            println!("{}", serde_json::to_string(&*d).expect("density serialization"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
    }
}

fn resolve_out_dir(args: &RunArgs, cf: &ConfigFile, kind: &str) -> PathBuf {
    if let Some(dir) = &args.out {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var("CHAINLAB_OUT") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    cf.output_dir()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(format!("out/{kind}")))
}

fn cmd_experiment(kind: &str, args: &RunArgs) -> ExitCode {
    let t0 = Instant::now();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let parsed = match ConfigFile::parse(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match parsed.kind() {
        Ok(k) if k == kind => {}
        Ok(k) => {
            eprintln!("config error: experiment.kind is {k:?} but the {kind} command was invoked");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    }
    let out_dir = resolve_out_dir(args, &parsed, kind);

    // build the typed config (exit 2 on config errors), then run (exit 1 on
    // run failures)
    let run = || -> Result<(serde_json::Value, u64, ExperimentReport), ConfigError> {
        match kind {
            "drift" => {
                let cfg = parsed.drift()?;
                let echo = serde_json::to_value(&cfg).expect("config echo");
                let rep = run_drift(&cfg).map_err(|e| ConfigError(format!("!run: {e}")))?;
                Ok((echo, cfg.sampler.seed, rep))
            }
            "packet" => {
                let cfg = parsed.packet()?;
                let echo = serde_json::to_value(&cfg).expect("config echo");
                let rep = run_packet(&cfg).map_err(|e| ConfigError(format!("!run: {e}")))?;
                Ok((echo, cfg.sampler.seed, rep))
            }
            "floor" => {
                let cfg = parsed.floor()?;
                let echo = serde_json::to_value(&cfg).expect("config echo");
                let rep =
                    run_variance_floor(&cfg).map_err(|e| ConfigError(format!("!run: {e}")))?;
                Ok((echo, cfg.sampler.seed, rep))
            }
            "bracket" => {
                let cfg = parsed.bracket()?;
                let echo = serde_json::to_value(&cfg).expect("config echo");
                let rep =
                    run_bracket_variance(&cfg).map_err(|e| ConfigError(format!("!run: {e}")))?;
                Ok((echo, cfg.sampler.seed, rep))
            }
            _ => unreachable!(),
        }
    };
    let (echo, seed, report) = match run() {
        Ok(v) => v,
        Err(ConfigError(msg)) if msg.starts_with("!run: ") => {
            eprintln!("experiment failed: {}", &msg[6..]);
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };

    match write_outputs(kind, args, &echo, seed, &report, &out_dir, t0) {
        Ok(()) => {
            println!(
                "{kind}: {} cells, {} fits, {} of {} members dropped -> {}",
                report.cells.len(),
                report.fits.len(),
                report.members_dropped,
                report.members_total,
                out_dir.display()
            );
            for f in &report.fits {
                println!(
                    "  fit {} vs {}: slope {:+.3} ± {:.3} (r2 {:.4})",
                    f.quantity, f.axis, f.slope, f.stderr, f.r2
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("output error: {e}");
            ExitCode::from(1)
        }
    }
}

fn write_outputs(
    kind: &str,
    args: &RunArgs,
    config_echo: &serde_json::Value,
    seed: u64,
    report: &ExperimentReport,
    out_dir: &Path,
    t0: Instant,
) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest {
        command: kind.to_string(),
        config_path: args.config.display().to_string(),
        seed,
        out_dir: out_dir.display().to_string(),
        threads: rayon::current_num_threads(),
        artifacts: Vec::new(),
        wall_clock_seconds: 0.0,
    };

    let full = serde_json::json!({
        "kind": report.kind,
        "config": config_echo,
        "cells": report.cells,
        "fits": report.fits,
        "members_total": report.members_total,
        "members_dropped": report.members_dropped,
        "notes": report.notes,
    });
    let json_bytes = serde_json::to_vec_pretty(&full).expect("report serialization");
    let json_path = out_dir.join("report.json");
    std::fs::write(&json_path, &json_bytes)?;
    manifest.record(&json_path, &json_bytes);

    let csv = report.to_csv();
    let csv_path = out_dir.join("report.csv");
    std::fs::write(&csv_path, csv.as_bytes())?;
    manifest.record(&csv_path, csv.as_bytes());

    let gp = plots::gnuplot_script(report, "report.csv");
    let gp_path = out_dir.join("plot.gp");
    std::fs::write(&gp_path, gp.as_bytes())?;
    manifest.record(&gp_path, gp.as_bytes());

    manifest.wall_clock_seconds = t0.elapsed().as_secs_f64();
    let manifest_path = out_dir.join("run_manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_vec_pretty(&manifest).expect("manifest serialization"),
    )?;
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> ExitCode {
    let fault = match args.inject_fault.as_deref() {
        None => check::FaultInjection::None,
        Some("rho") => check::FaultInjection::Rho,
        Some(other) => {
            eprintln!("usage error: unknown fault {other:?} (rho)");
            return ExitCode::from(2);
        }
    };
    let results = check::run_battery(args.quick, fault);
    if check::print_battery(&results) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
