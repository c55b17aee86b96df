//! `uavmc`: plan UAV trajectories and NOMA multicast powers from scenario
//! files, run parameter sweeps and re-verify saved results.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use uav_multicast::asm::{self, SweepParam};
use uav_multicast::io::{self, Scenario};
use uav_multicast::model::{RunMode, RunResult};
use uav_multicast::online::run_online;

#[derive(Parser, Debug)]
#[command(name = "uavmc", version, about = "Joint UAV trajectory and NOMA multicast power planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its result directory.
    Run(RunArgs),
    /// Run a scenario once per (value, seed) and write a results table.
    Sweep(SweepArgs),
    /// Re-check feasibility and objective of a saved result directory.
    Verify {
        /// Result directory written by `run`.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Options shared by `run` and `sweep`.
#[derive(Args, Debug)]
struct Common {
    #[arg(long, default_value = "offline-fixed", value_parser = parse_mode)]
    mode: RunMode,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Drop the online terminal-reachability constraint.
    #[arg(long)]
    no_reachability: bool,
    /// Override the mean group size used for per-slot resampling.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Seed for user placement and mobility; defaults to the scenario's `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Replay a saved `trace.csv` instead of generating users.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// One of T, N, U_g, G, p_max, lambda; defaults to the scenario's sweep.
    #[arg(long)]
    param: Option<SweepParam>,
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Second parameter; the sweep covers every pair of values.
    #[arg(long)]
    outer_param: Option<SweepParam>,
    #[arg(long, value_delimiter = ',')]
    outer_values: Vec<f64>,
    /// Skip writing one result directory per run.
    #[arg(long)]
    table_only: bool,
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    s.parse()
}

fn load(common: &Common) -> Result<Scenario> {
    let mut scenario = io::load_scenario(&common.scenario)
        .with_context(|| format!("loading scenario {}", common.scenario.display()))?;
    if common.no_reachability {
        scenario.config.reachability = false;
    }
    if let Some(l) = common.lambda {
        scenario.config.mobility.lambda = l;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn execute(scenario: &Scenario, mode: RunMode, seed: u64, trace: Option<&Path>) -> Result<RunResult> {
    let trace = match trace {
        Some(path) => io::read_trace(path)?,
        None => scenario.trace(seed),
    };
    let cfg = &scenario.config;
    Ok(match mode {
        RunMode::Online => run_online(cfg, &trace, seed)?,
        _ => asm::run_offline(cfg, &trace, mode, seed)?,
    })
}

fn run(args: RunArgs) -> Result<()> {
    let mut scenario = load(&args.common)?;
    scenario.config = asm::config_for_mode(&scenario.config, args.common.mode);
    let seed = args.seed.unwrap_or(scenario.config.rng_seed);
    let result = execute(&scenario, args.common.mode, seed, args.trace.as_deref())?;
    io::save_result(&result, &scenario, &args.common.out)?;
    println!(
        "{} {}: objective {:.6} bits/s/Hz ({:.6} nats), {} iterations, converged {}",
        scenario.config.name,
        result.mode,
        result.objective_bits(),
        result.objective,
        result.iterations,
        result.converged
    );
    if result.qos_relaxed() {
        println!("QoS relaxed to scale {}; infeasible slots {:?}", result.qos_scale, result.infeasible_slots);
    }
    if result.mode == RunMode::Online {
        println!("terminal error {:.3e} m", result.terminal_error);
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let scenario = load(&args.common)?;
    let defaults = scenario.sweep.clone();
    let param = match (args.param, &defaults) {
        (Some(p), _) => p,
        (None, Some(s)) => s.param.parse().map_err(anyhow::Error::msg)?,
        (None, None) => bail!("no --param given and the scenario has no [sweep] table"),
    };
    let values = if args.values.is_empty() {
        defaults.as_ref().map(|s| s.values.clone()).unwrap_or_default()
    } else {
        args.values
    };
    let seeds = if !args.seeds.is_empty() {
        args.seeds
    } else {
        match defaults.as_ref().map(|s| s.seeds.clone()) {
            Some(s) if !s.is_empty() => s,
            _ => vec![scenario.config.rng_seed],
        }
    };
    let (outer_param, outer_values) = match (args.outer_param, &defaults) {
        (Some(p), _) => (Some(p), args.outer_values),
        (None, Some(s)) if args.param.is_none() && s.outer_param.is_some() => (
            Some(s.outer_param.as_deref().unwrap_or_default().parse().map_err(anyhow::Error::msg)?),
            s.outer_values.clone(),
        ),
        _ => (None, Vec::new()),
    };
    if values.is_empty() {
        bail!("the sweep has no values");
    }

    let out = &args.common.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let outer: Vec<Option<f64>> = match outer_param {
        Some(_) if outer_values.is_empty() => bail!("--outer-param needs --outer-values"),
        Some(_) => outer_values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut failures = 0;
    let mut total = 0;
    for ov in outer {
        let mut base = scenario.clone();
        let mut extra = Vec::new();
        let mut dir = out.clone();
        if let (Some(op), Some(v)) = (outer_param, ov) {
            base.config = asm::apply_param(&scenario.config, op, v)?;
            extra.push((op.to_string(), v));
            dir = out.join(format!("{op}_{v}"));
        }
        let rows = asm::sweep(&base.config, param, &values, &seeds, args.common.mode, |value, seed, result| {
            if !args.table_only {
                let mut run_scenario = base.clone();
                if let Ok(cfg) = asm::apply_param(&base.config, param, value) {
                    run_scenario.config = asm::config_for_mode(&cfg, args.common.mode);
                }
                let run_dir = io::sweep_run_dir(&dir, param, value, seed);
                if let Err(e) = io::save_result(result, &run_scenario, &run_dir) {
                    log::warn!("could not save {}: {e}", run_dir.display());
                }
            }
        });
        let name = match ov {
            Some(v) => format!("sweep_{}_{v}.csv", outer_param.map(|p| p.to_string()).unwrap_or_default()),
            None => "sweep.csv".to_string(),
        };
        io::write_sweep_table(&out.join(&name), param, &rows, &extra)?;
        for r in &rows {
            total += 1;
            match &r.outcome {
                Ok(p) => println!(
                    "{}{param} = {}, seed {}: {:.6} bits/s/Hz",
                    extra.iter().map(|(k, v)| format!("{k} = {v}, ")).collect::<String>(),
                    r.value,
                    r.seed,
                    p.objective / std::f64::consts::LN_2
                ),
                Err(e) => {
                    failures += 1;
                    println!("{param} = {}, seed {}: failed: {e}", r.value, r.seed);
                }
            }
        }
        info!("wrote {}", out.join(&name).display());
    }
    if failures > 0 {
        bail!("{failures} of {total} runs failed");
    }
    Ok(())
}

fn verify(out: &Path) -> Result<()> {
    let problems = io::verify(out).with_context(|| format!("reading {}", out.display()))?;
    if problems.is_empty() {
        println!("{}: ok", out.display());
        Ok(())
    } else {
        for p in &problems {
            eprintln!("violation: {p}");
        }
        bail!("{} check(s) failed", problems.len())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Verify { out } => verify(&out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
