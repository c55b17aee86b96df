//! Offline planning: alternate the trajectory and power steps until neither
//! moves, plus parameter sweeps over whole runs.

use log::{debug, info, warn};

use crate::error::{Error, Result};
use crate::mobility::{generate_pooled_trace, generate_trace, MobilityConfig};
use crate::model::{
    channel_states, check_feasibility, slot_rates, total_objective, IterationRecord, PowerSchedule,
    RunMode, RunResult, ScenarioConfig, Stage, Trajectory, UserTrace,
};
use crate::power::{solve_power, PowerOutcome};
use crate::trajectory::{solve_trajectory, TrajectoryOutcome};

/// Uniform start powers, strictly inside the sum budget.
pub fn initial_powers(cfg: &ScenarioConfig) -> PowerSchedule {
    let g = cfg.num_groups();
    PowerSchedule::uniform(g, cfg.num_slots, cfg.p_max / (2.0 * g as f64))
}

/// Tracks the QoS scale and retries a step under the relaxation policy.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Relaxation {
    pub scale: f64,
    attempts: usize,
    factor: f64,
    max_attempts: usize,
}

impl Relaxation {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Relaxation {
            scale: 1.0,
            attempts: 0,
            factor: cfg.settings.qos_relax_factor,
            max_attempts: cfg.settings.qos_relax_attempts,
        }
    }

    /// Runs `step` at the current scale, relaxing on infeasibility until the
    /// attempts run out.
    pub fn retry<T>(&mut self, family: &str, mut step: impl FnMut(f64) -> Result<T>) -> Result<T> {
        loop {
            match step(self.scale) {
                Err(Error::Infeasible { .. }) if self.attempts < self.max_attempts => {
                    self.attempts += 1;
                    self.scale *= self.factor;
                    warn!("{family} step infeasible; relaxing QoS to scale {}", self.scale);
                }
                Err(Error::Infeasible { .. }) => {
                    return Err(Error::Infeasible {
                        family: family.to_string(),
                        scale: self.scale,
                    })
                }
                other => return other,
            }
        }
    }
}

/// `[slot][group]` required rates at the given scale.
pub fn rate_matrix(cfg: &ScenarioConfig, trace: &UserTrace, scale: f64) -> Vec<Vec<f64>> {
    (0..trace.num_slots())
        .map(|s| {
            (0..trace.slot(s).len())
                .map(|g| cfg.required_rate(g, s, scale))
                .collect()
        })
        .collect()
}

fn check_trace(cfg: &ScenarioConfig, trace: &UserTrace, mode: RunMode) -> Result<()> {
    if trace.num_slots() != cfg.num_slots {
        return Err(Error::config(
            "trace",
            format!("has {} slots, scenario has {}", trace.num_slots(), cfg.num_slots),
        ));
    }
    if let Some(s) = (0..trace.num_slots()).find(|&s| trace.slot(s).len() != cfg.num_groups()) {
        return Err(Error::config("trace", format!("slot {} has the wrong number of groups", s + 1)));
    }
    if mode == RunMode::OfflineFixed && !trace.is_static() {
        return Err(Error::config("trace", "must be constant across slots in offline-fixed mode"));
    }
    Ok(())
}

/// Runs the alternating optimization on a known trace.
pub fn run_offline(cfg: &ScenarioConfig, trace: &UserTrace, mode: RunMode, seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    check_trace(cfg, trace, mode)?;
    let bound = cfg.objective_bound();
    let mut log: Vec<IterationRecord> = Vec::new();
    let mut q = Trajectory::straight(cfg.start, cfg.end, cfg.num_slots);
    let mut p = initial_powers(cfg);
    let mut relax = Relaxation::new(cfg);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=cfg.settings.max_asm_iter {
        iterations = t;
        let TrajectoryOutcome { trajectory, .. } =
            relax.retry("trajectory", |scale| solve_trajectory(&p, trace, cfg, &q, scale, t, &mut log))?;
        let states = channel_states(&trajectory, trace, cfg)?;
        let PowerOutcome { powers, .. } = relax.retry("power", |scale| {
            solve_power(&states, &rate_matrix(cfg, trace, scale), cfg, &p, t, &mut log)
        })?;
        let objective = total_objective(&trajectory, &powers, trace, cfg)?;
        if objective > bound * (1.0 + 1e-12) {
            return Err(Error::BoundViolated { value: objective, bound });
        }
        let dq = trajectory.distance(&q);
        let dp = powers.distance(&p);
        debug!("ASM {t}: objective {objective:.9} nats, |dQ| = {dq:.3e}, |dp| = {dp:.3e}");
        history.push(objective);
        log.push(IterationRecord {
            stage: Stage::Outer,
            outer: t,
            inner: 0,
            movement: dq.max(dp),
            objective,
        });
        q = trajectory;
        p = powers;
        if dq <= cfg.eps_traj && dp <= cfg.eps_power {
            converged = true;
            break;
        }
    }
    if !converged {
        info!("ASM stopped at the iteration cap ({})", cfg.settings.max_asm_iter);
    }

    let report = check_feasibility(&q, &p, trace, cfg, relax.scale)?;
    if let Some(v) = report.first() {
        return Err(Error::Infeasible {
            family: v.to_string(),
            scale: relax.scale,
        });
    }
    let rates = slot_rates(&q, &p, trace, cfg)?;
    let objective = rates.iter().flatten().sum();
    Ok(RunResult {
        mode,
        seed,
        terminal_error: q.points[cfg.num_slots].dist(cfg.end),
        trajectory: q,
        powers: p,
        rates,
        objective,
        objective_history: history,
        converged,
        iterations,
        infeasible_slots: Vec::new(),
        qos_scale: relax.scale,
        trace: trace.clone(),
        log,
    })
}

/// Sweepable scenario parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Horizon `T` in seconds.
    Horizon,
    /// Slot count `N`, with `T` rescaled so that `S_max` stays fixed.
    Slots,
    /// Users per group, nested across values.
    UsersPerGroup,
    /// Group count at a fixed total user count, over a pooled population.
    Groups,
    PowerBudget,
    Lambda,
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "T" => SweepParam::Horizon,
            "N" => SweepParam::Slots,
            "U_g" => SweepParam::UsersPerGroup,
            "G" => SweepParam::Groups,
            "p_max" => SweepParam::PowerBudget,
            "lambda" => SweepParam::Lambda,
            other => return Err(format!("unknown sweep parameter `{other}` (expected T, N, U_g, G, p_max or lambda)")),
        })
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParam::Horizon => "T",
            SweepParam::Slots => "N",
            SweepParam::UsersPerGroup => "U_g",
            SweepParam::Groups => "G",
            SweepParam::PowerBudget => "p_max",
            SweepParam::Lambda => "lambda",
        })
    }
}

fn as_count(param: SweepParam, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 {
        Ok(value as usize)
    } else {
        Err(Error::config(param.to_string(), format!("must be a positive integer, got {value}")))
    }
}

/// The template with one parameter replaced.
pub fn apply_param(template: &ScenarioConfig, param: SweepParam, value: f64) -> Result<ScenarioConfig> {
    let mut cfg = template.clone();
    match param {
        SweepParam::Horizon => cfg.horizon = value,
        SweepParam::Slots => {
            let n = as_count(param, value)?;
            cfg.horizon = template.s_max() * n as f64 / template.v_max;
            cfg.num_slots = n;
        }
        SweepParam::UsersPerGroup => {
            let u = as_count(param, value)?;
            cfg.users_per_group = vec![u; template.num_groups()];
        }
        SweepParam::Groups => {
            let g = as_count(param, value)?;
            let total: usize = template.users_per_group.iter().sum();
            if total % g != 0 {
                return Err(Error::config("G", format!("{g} groups do not divide {total} users evenly")));
            }
            cfg.users_per_group = vec![total / g; g];
        }
        SweepParam::PowerBudget => cfg.p_max = value,
        SweepParam::Lambda => cfg.mobility.lambda = value,
    }
    cfg.validate()?;
    Ok(cfg)
}

/// User trace for a scenario. Group sweeps draw from a pooled population so
/// that every grouping sees the same users.
pub fn scenario_trace(cfg: &ScenarioConfig, seed: u64, pooled: bool) -> UserTrace {
    if pooled {
        generate_pooled_trace(cfg, seed)
    } else {
        generate_trace(cfg, seed)
    }
}

/// The configuration a mode actually runs: offline-fixed holds every user
/// at its initial position, so mobility and size resampling are switched off.
pub fn config_for_mode(cfg: &ScenarioConfig, mode: RunMode) -> ScenarioConfig {
    let mut cfg = cfg.clone();
    if mode == RunMode::OfflineFixed {
        cfg.mobility = MobilityConfig::default();
    }
    cfg
}

/// Runs one scenario in the given mode on its generated trace.
pub fn run_mode(cfg: &ScenarioConfig, mode: RunMode, seed: u64, pooled: bool) -> Result<RunResult> {
    let cfg = &config_for_mode(cfg, mode);
    let trace = scenario_trace(cfg, seed, pooled);
    match mode {
        RunMode::Online => crate::online::run_online(cfg, &trace, seed),
        _ => run_offline(cfg, &trace, mode, seed),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    /// The run's result, or its error message.
    pub outcome: std::result::Result<SweepPoint, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub qos_scale: f64,
}

/// One run per `(value, seed)`; failed runs are recorded and the sweep
/// continues. `on_result` sees every completed run.
pub fn sweep(
    template: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
    seeds: &[u64],
    mode: RunMode,
    mut on_result: impl FnMut(f64, u64, &RunResult),
) -> Vec<SweepRow> {
    let pooled = param == SweepParam::Groups;
    let mut rows = Vec::with_capacity(values.len() * seeds.len());
    for &value in values {
        for &seed in seeds {
            let outcome = apply_param(template, param, value)
                .and_then(|cfg| run_mode(&cfg, mode, seed, pooled))
                .map(|r| {
                    on_result(value, seed, &r);
                    SweepPoint {
                        objective: r.objective,
                        converged: r.converged,
                        iterations: r.iterations,
                        qos_scale: r.qos_scale,
                    }
                })
                .map_err(|e| e.to_string());
            if let Err(e) = &outcome {
                warn!("{param} = {value}, seed {seed}: {e}");
            }
            rows.push(SweepRow { value, seed, outcome });
        }
    }
    rows
}
