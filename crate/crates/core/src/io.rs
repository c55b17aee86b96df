//! On-disk formats: scenario files, result directories and sweep tables.
//!
//! Scenarios and run summaries are TOML; numeric series are CSV with every
//! number written in `{:.8e}` (nine significant digits). Physical inputs
//! are given in the units people quote (dB, bits/s/Hz) and converted to the
//! linear, nats-based [`ScenarioConfig`] on load.
//!
//! A result directory contains:
//!
//! | file | columns |
//! |------|---------|
//! | `trajectory.csv` | `n,x,y` for `n = 0..=N` |
//! | `powers.csv` | `n,g,p,C_nats,C_bits`, slots and groups 1-based |
//! | `trace.csv` | `n,g,u,x,y`, the user positions of every slot |
//! | `log.csv` | `stage,outer,inner,movement,objective` |
//! | `summary.toml` | objective history, flags, seed and the scenario |
//! | `snapshots/slot_NNN.csv` | `role,g,u,x,y`, online runs only |

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::asm::{SweepParam, SweepRow};
use crate::error::{Error, Result};
use crate::mobility::MobilityConfig;
use crate::model::{
    check_feasibility, db_to_linear, linear_to_db, slot_rates, MinRate, Point, PowerSchedule, RunMode,
    RunResult, ScenarioConfig, SolverSettings, Trajectory, UserTrace, ViolationKind,
};

/// Relative tolerance for quantities read back from nine-digit files.
pub const FILE_TOL: f64 = 1e-6;

fn default_true() -> bool {
    true
}

/// Rate requirement in bits/s/Hz: one value for every group and slot, or a
/// `[group][slot]` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateSpec {
    Uniform(f64),
    PerSlot(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityFile {
    #[serde(default)]
    pub speed_min: f64,
    #[serde(default)]
    pub speed_max: f64,
    #[serde(default)]
    pub lambda: f64,
}

/// Solver knobs; omitted keys take the library defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feas_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_newton_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sca_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_asm_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_online_asm_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qos_relax_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qos_relax_attempts: Option<usize>,
}

/// Default sweep shipped with a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub param: String,
    pub values: Vec<f64>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Optional second parameter; the sweep runs over the product.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_param: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outer_values: Vec<f64>,
}

/// The scenario schema as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub users_per_group: Vec<usize>,
    pub num_slots: usize,
    /// Communication time `T` in seconds.
    pub horizon: f64,
    pub v_max: f64,
    pub altitude: f64,
    pub p_max: f64,
    pub noise_power_db: f64,
    pub pathloss_ref_db: f64,
    pub coverage_radius: f64,
    pub start: Point,
    pub end: Point,
    pub min_rate_bps_hz: RateSpec,
    pub eps_traj: f64,
    pub eps_power: f64,
    /// Defaults to `2 R + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord_offset: Option<f64>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_true")]
    pub qos_last_slot: bool,
    #[serde(default = "default_true")]
    pub reachability: bool,
    /// Draw users from one pool so that regroupings see the same users.
    #[serde(default)]
    pub pooled_users: bool,
    /// Explicit static user positions `[group][user]`, replacing the random
    /// placement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users: Option<Vec<Vec<Point>>>,
    #[serde(default)]
    pub mobility: MobilityFile,
    #[serde(default)]
    pub solver: SolverFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepFile>,
}

/// A loaded scenario: the validated configuration plus the file-level
/// options that are not part of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub pooled_users: bool,
    pub users: Option<Vec<Vec<Point>>>,
    pub sweep: Option<SweepFile>,
}

impl Scenario {
    pub fn from_config(config: ScenarioConfig) -> Self {
        Scenario {
            config,
            pooled_users: false,
            users: None,
            sweep: None,
        }
    }

    /// The user trace for `seed`: the explicit positions when given,
    /// otherwise the seeded mobility model.
    pub fn trace(&self, seed: u64) -> UserTrace {
        match &self.users {
            Some(u) => UserTrace::fixed(u.clone(), self.config.num_slots),
            None => crate::asm::scenario_trace(&self.config, seed, self.pooled_users),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if let Some(users) = &self.users {
            let sizes: Vec<usize> = users.iter().map(Vec::len).collect();
            if sizes != self.config.users_per_group {
                return Err(Error::config("users", "sizes must match users_per_group"));
            }
            if !self.config.mobility.is_static() {
                return Err(Error::config("users", "explicit positions require static users"));
            }
        }
        Ok(())
    }
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        let d = SolverSettings::default();
        let s = &self.solver;
        let settings = SolverSettings {
            kkt_tol: s.kkt_tol.unwrap_or(d.kkt_tol),
            feas_tol: s.feas_tol.unwrap_or(d.feas_tol),
            max_newton_iter: s.max_newton_iter.unwrap_or(d.max_newton_iter),
            max_sca_iter: s.max_sca_iter.unwrap_or(d.max_sca_iter),
            max_asm_iter: s.max_asm_iter.unwrap_or(d.max_asm_iter),
            max_online_asm_iter: s.max_online_asm_iter.unwrap_or(d.max_online_asm_iter),
            qos_relax_factor: s.qos_relax_factor.unwrap_or(d.qos_relax_factor),
            qos_relax_attempts: s.qos_relax_attempts.unwrap_or(d.qos_relax_attempts),
        };
        let min_rate = match self.min_rate_bps_hz {
            RateSpec::Uniform(c) => MinRate::Uniform(c * LN_2),
            RateSpec::PerSlot(m) => MinRate::PerSlot(
                m.into_iter()
                    .map(|row| row.into_iter().map(|c| c * LN_2).collect())
                    .collect(),
            ),
        };
        let config = ScenarioConfig {
            name: self.name,
            users_per_group: self.users_per_group,
            num_slots: self.num_slots,
            horizon: self.horizon,
            v_max: self.v_max,
            altitude: self.altitude,
            p_max: self.p_max,
            noise_power: db_to_linear(self.noise_power_db),
            pathloss_ref: db_to_linear(self.pathloss_ref_db),
            coverage_radius: self.coverage_radius,
            start: self.start,
            end: self.end,
            min_rate,
            eps_traj: self.eps_traj,
            eps_power: self.eps_power,
            coord_offset: self.coord_offset.unwrap_or(2.0 * self.coverage_radius + 1.0),
            rng_seed: self.rng_seed,
            qos_last_slot: self.qos_last_slot,
            reachability: self.reachability,
            mobility: MobilityConfig {
                speed_min: self.mobility.speed_min,
                speed_max: self.mobility.speed_max,
                lambda: self.mobility.lambda,
            },
            settings,
        };
        let scenario = Scenario {
            config,
            pooled_users: self.pooled_users,
            users: self.users,
            sweep: self.sweep,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(scenario: &Scenario) -> Self {
        let c = &scenario.config;
        let s = &c.settings;
        let min_rate_bps_hz = match &c.min_rate {
            MinRate::Uniform(r) => RateSpec::Uniform(r / LN_2),
            MinRate::PerSlot(m) => RateSpec::PerSlot(
                m.iter()
                    .map(|row| row.iter().map(|r| r / LN_2).collect())
                    .collect(),
            ),
        };
        ScenarioFile {
            name: c.name.clone(),
            users_per_group: c.users_per_group.clone(),
            num_slots: c.num_slots,
            horizon: c.horizon,
            v_max: c.v_max,
            altitude: c.altitude,
            p_max: c.p_max,
            noise_power_db: linear_to_db(c.noise_power),
            pathloss_ref_db: linear_to_db(c.pathloss_ref),
            coverage_radius: c.coverage_radius,
            start: c.start,
            end: c.end,
            min_rate_bps_hz,
            eps_traj: c.eps_traj,
            eps_power: c.eps_power,
            coord_offset: Some(c.coord_offset),
            rng_seed: c.rng_seed,
            qos_last_slot: c.qos_last_slot,
            reachability: c.reachability,
            pooled_users: scenario.pooled_users,
            users: scenario.users.clone(),
            mobility: MobilityFile {
                speed_min: c.mobility.speed_min,
                speed_max: c.mobility.speed_max,
                lambda: c.mobility.lambda,
            },
            solver: SolverFile {
                kkt_tol: Some(s.kkt_tol),
                feas_tol: Some(s.feas_tol),
                max_newton_iter: Some(s.max_newton_iter),
                max_sca_iter: Some(s.max_sca_iter),
                max_asm_iter: Some(s.max_asm_iter),
                max_online_asm_iter: Some(s.max_online_asm_iter),
                qos_relax_factor: Some(s.qos_relax_factor),
                qos_relax_attempts: Some(s.qos_relax_attempts),
            },
            sweep: scenario.sweep.clone(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn parse_scenario(text: &str, context: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::format(context, e.message()))?;
    file.into_scenario()
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    parse_scenario(&read(path)?, &path.display().to_string())
}

pub fn scenario_to_string(scenario: &Scenario) -> Result<String> {
    toml::to_string(&ScenarioFile::from_scenario(scenario)).map_err(|e| Error::format("scenario", e))
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &scenario_to_string(scenario)?)
}

/// Run summary as stored in `summary.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub seed: u64,
    pub objective_nats: f64,
    pub objective_bits: f64,
    /// Objective after each outer iteration (offline) or cumulative after
    /// each slot (online), in nats.
    pub objective_history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub qos_scale: f64,
    /// 1-based slots whose rate targets were relaxed or dropped.
    pub infeasible_slots: Vec<usize>,
    pub terminal_error: f64,
    pub scenario: ScenarioFile,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format(path.display().to_string(), e)
    }
}

fn num(v: f64) -> String {
    format!("{v:.8e}")
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let found = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::format(
            path.display().to_string(),
            format!("expected columns {}", header.join(",")),
        ));
    }
    r.records()
        .map(|rec| rec.map_err(|e| csv_error(path, e)))
        .collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    let raw = rec.get(i).unwrap_or_default();
    raw.trim().parse().map_err(|_| {
        let line = rec.position().map_or(0, |p| p.line());
        Error::format(format!("{}:{line}", path.display()), format!("cannot parse `{raw}`"))
    })
}

pub fn write_trajectory(path: &Path, trajectory: &Trajectory) -> Result<()> {
    write_rows(
        path,
        &["n", "x", "y"],
        trajectory
            .points
            .iter()
            .enumerate()
            .map(|(n, p)| vec![n.to_string(), num(p.x), num(p.y)]),
    )
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let mut points = Vec::new();
    for (i, rec) in read_rows(path, &["n", "x", "y"])?.iter().enumerate() {
        let n: usize = field(rec, 0, path)?;
        if n != i {
            return Err(Error::format(path.display().to_string(), format!("row {i} has n = {n}")));
        }
        points.push(Point::new(field(rec, 1, path)?, field(rec, 2, path)?));
    }
    Ok(Trajectory { points })
}

pub fn write_powers(path: &Path, powers: &PowerSchedule, rates: &[Vec<f64>]) -> Result<()> {
    let rows = powers.p.iter().zip(rates).enumerate().flat_map(|(s, (ps, cs))| {
        ps.iter().zip(cs).enumerate().map(move |(g, (p, c))| {
            vec![(s + 1).to_string(), (g + 1).to_string(), num(*p), num(*c), num(c / LN_2)]
        })
    });
    write_rows(path, &["n", "g", "p", "C_nats", "C_bits"], rows)
}

/// Reads `powers.csv` back as `(powers, rates in nats)`.
pub fn read_powers(path: &Path) -> Result<(PowerSchedule, Vec<Vec<f64>>)> {
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut c: Vec<Vec<f64>> = Vec::new();
    for rec in read_rows(path, &["n", "g", "p", "C_nats", "C_bits"])? {
        let n: usize = field(&rec, 0, path)?;
        let g: usize = field(&rec, 1, path)?;
        if n == 0 || g == 0 || n > p.len() + 1 {
            return Err(Error::format(path.display().to_string(), format!("bad index n = {n}, g = {g}")));
        }
        if n > p.len() {
            p.push(Vec::new());
            c.push(Vec::new());
        }
        if g != p[n - 1].len() + 1 {
            return Err(Error::format(path.display().to_string(), format!("groups out of order at n = {n}")));
        }
        p[n - 1].push(field(&rec, 2, path)?);
        c[n - 1].push(field(&rec, 3, path)?);
    }
    Ok((PowerSchedule { p }, c))
}

/// Writes a user trace as `n,g,u,x,y` rows with 1-based slots and groups.
pub fn write_trace(path: &Path, trace: &UserTrace) -> Result<()> {
    let rows = trace.slots.iter().enumerate().flat_map(|(s, groups)| {
        groups.iter().enumerate().flat_map(move |(g, users)| {
            users.iter().enumerate().map(move |(u, p)| {
                vec![(s + 1).to_string(), (g + 1).to_string(), (u + 1).to_string(), num(p.x), num(p.y)]
            })
        })
    });
    write_rows(path, &["n", "g", "u", "x", "y"], rows)
}

/// Reads a trace written by [`write_trace`]. Every group must have at least
/// one row in every slot.
pub fn read_trace(path: &Path) -> Result<UserTrace> {
    let mut slots: BTreeMap<usize, BTreeMap<usize, Vec<Point>>> = BTreeMap::new();
    for rec in read_rows(path, &["n", "g", "u", "x", "y"])? {
        let n: usize = field(&rec, 0, path)?;
        let g: usize = field(&rec, 1, path)?;
        slots
            .entry(n)
            .or_default()
            .entry(g)
            .or_default()
            .push(Point::new(field(&rec, 3, path)?, field(&rec, 4, path)?));
    }
    let mut out = Vec::with_capacity(slots.len());
    for (i, (n, groups)) in slots.into_iter().enumerate() {
        if n != i + 1 || groups.keys().copied().ne(1..=groups.len()) {
            return Err(Error::format(path.display().to_string(), format!("slot {n} or its groups are not contiguous")));
        }
        out.push(groups.into_values().collect());
    }
    Ok(UserTrace { slots: out })
}

fn write_log(path: &Path, result: &RunResult) -> Result<()> {
    write_rows(
        path,
        &["stage", "outer", "inner", "movement", "objective"],
        result.log.iter().map(|r| {
            vec![
                r.stage.to_string(),
                r.outer.to_string(),
                r.inner.to_string(),
                num(r.movement),
                num(r.objective),
            ]
        }),
    )
}

/// Per-slot snapshot of an online run: the users observed at slot `n` and
/// the UAV's position at the start and end of the slot.
fn write_snapshots(dir: &Path, result: &RunResult) -> Result<()> {
    let snap = dir.join("snapshots");
    fs::create_dir_all(&snap).map_err(|e| Error::io(&snap, e))?;
    for (s, groups) in result.trace.slots.iter().enumerate() {
        let mut rows = Vec::new();
        for (g, users) in groups.iter().enumerate() {
            for (u, p) in users.iter().enumerate() {
                rows.push(vec!["user".into(), (g + 1).to_string(), (u + 1).to_string(), num(p.x), num(p.y)]);
            }
        }
        for (role, p) in [("uav_start", result.trajectory.points[s]), ("uav_end", result.trajectory.points[s + 1])] {
            rows.push(vec![role.into(), "0".into(), "0".into(), num(p.x), num(p.y)]);
        }
        write_rows(&snap.join(format!("slot_{:03}.csv", s + 1)), &["role", "g", "u", "x", "y"], rows)?;
    }
    Ok(())
}

/// Rounds to the nine significant digits used by every results file.
fn sig9(v: f64) -> f64 {
    num(v).parse().unwrap_or(v)
}

/// The summary of `result`. Results are rounded like the tables; the
/// scenario echo is kept exact so that it reloads losslessly.
pub fn summary_of(result: &RunResult, scenario: &Scenario) -> Summary {
    Summary {
        mode: result.mode.to_string(),
        seed: result.seed,
        objective_nats: sig9(result.objective),
        objective_bits: sig9(result.objective_bits()),
        objective_history: result.objective_history.iter().copied().map(sig9).collect(),
        converged: result.converged,
        iterations: result.iterations,
        qos_scale: sig9(result.qos_scale),
        infeasible_slots: result.infeasible_slots.clone(),
        terminal_error: sig9(result.terminal_error),
        scenario: ScenarioFile::from_scenario(scenario),
    }
}

/// Writes every result file into `dir`, creating it if needed.
pub fn save_result(result: &RunResult, scenario: &Scenario, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_trajectory(&dir.join("trajectory.csv"), &result.trajectory)?;
    write_powers(&dir.join("powers.csv"), &result.powers, &result.rates)?;
    write_trace(&dir.join("trace.csv"), &result.trace)?;
    write_log(&dir.join("log.csv"), result)?;
    let summary = toml::to_string(&summary_of(result, scenario)).map_err(|e| Error::format("summary", e))?;
    write(&dir.join("summary.toml"), &summary)?;
    if result.mode == RunMode::Online {
        write_snapshots(dir, result)?;
    }
    Ok(())
}

/// A result directory read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedRun {
    pub summary: Summary,
    pub scenario: Scenario,
    pub trajectory: Trajectory,
    pub powers: PowerSchedule,
    pub rates: Vec<Vec<f64>>,
    pub trace: UserTrace,
}

pub fn load_result(dir: impl AsRef<Path>) -> Result<SavedRun> {
    let dir = dir.as_ref();
    let path = dir.join("summary.toml");
    let summary: Summary = toml::from_str(&read(&path)?)
        .map_err(|e| Error::format(path.display().to_string(), e.message()))?;
    let scenario = summary.scenario.clone().into_scenario()?;
    let trajectory = read_trajectory(&dir.join("trajectory.csv"))?;
    let (powers, rates) = read_powers(&dir.join("powers.csv"))?;
    let trace = read_trace(&dir.join("trace.csv"))?;
    Ok(SavedRun {
        summary,
        scenario,
        trajectory,
        powers,
        rates,
        trace,
    })
}

/// Re-checks a saved run against the exact model: shape, endpoints, every
/// constraint at the recorded QoS scale and the recorded objective.
///
/// Returns the list of problems found; empty means the run verifies. Slots
/// an online run recorded as infeasible are exempt from the rate check.
pub fn verify(dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let run = load_result(dir)?;
    let cfg = &run.scenario.config;
    let n = cfg.num_slots;
    let mut problems = Vec::new();
    if run.trajectory.points.len() != n + 1 {
        problems.push(format!("trajectory has {} rows, expected {}", run.trajectory.points.len(), n + 1));
    }
    if run.powers.num_slots() != n || run.powers.p.iter().any(|r| r.len() != cfg.num_groups()) {
        problems.push(format!("power table is not {} slots x {} groups", n, cfg.num_groups()));
    }
    if run.trace.num_slots() != n || (0..run.trace.num_slots()).any(|s| run.trace.slot(s).len() != cfg.num_groups()) {
        problems.push("trace does not match the scenario".into());
    }
    if !problems.is_empty() {
        return Ok(problems);
    }
    if run.trajectory.points[0].dist(cfg.start) > FILE_TOL {
        problems.push("trajectory does not start at the start point".into());
    }
    let online = run.summary.mode == RunMode::Online.to_string();
    if (!online || cfg.reachability) && run.trajectory.points[n].dist(cfg.end) > FILE_TOL {
        problems.push("trajectory does not end at the end point".into());
    }
    let report = check_feasibility(&run.trajectory, &run.powers, &run.trace, cfg, run.summary.qos_scale)?;
    for v in &report.violations {
        let tolerated = match v.kind {
            ViolationKind::Speed { .. } => v.magnitude <= FILE_TOL * cfg.s_max().max(1.0),
            ViolationKind::SumPower { .. } => v.magnitude <= FILE_TOL * cfg.p_max,
            ViolationKind::MinRate { slot, .. } => {
                v.magnitude <= FILE_TOL || (online && run.summary.infeasible_slots.contains(&slot))
            }
            ViolationKind::PowerFloor { .. } => false,
        };
        if !tolerated {
            problems.push(v.to_string());
        }
    }
    let rates = slot_rates(&run.trajectory, &run.powers, &run.trace, cfg)?;
    let objective: f64 = rates.iter().flatten().sum();
    let recorded = run.summary.objective_nats;
    if (objective - recorded).abs() > FILE_TOL * recorded.abs().max(1.0) {
        problems.push(format!("objective {objective:.9e} nats differs from the recorded {recorded:.9e}"));
    }
    Ok(problems)
}

/// Appends one row per sweep run to a CSV table with columns
/// `param,value,seed,objective_nats,objective_bits,converged,iterations,qos_scale,error`.
pub fn write_sweep_table(path: &Path, param: SweepParam, rows: &[SweepRow], extra: &[(String, f64)]) -> Result<()> {
    let mut header: Vec<String> = extra.iter().map(|(k, _)| k.clone()).collect();
    header.extend(
        ["param", "value", "seed", "objective_nats", "objective_bits", "converged", "iterations", "qos_scale", "error"]
            .map(String::from),
    );
    let prefix: Vec<String> = extra.iter().map(|(_, v)| num(*v)).collect();
    let body = rows.iter().map(|r| {
        let mut row = prefix.clone();
        row.extend([param.to_string(), num(r.value), r.seed.to_string()]);
        match &r.outcome {
            Ok(p) => row.extend([
                num(p.objective),
                num(p.objective / LN_2),
                p.converged.to_string(),
                p.iterations.to_string(),
                num(p.qos_scale),
                String::new(),
            ]),
            Err(e) => row.extend([String::new(), String::new(), String::new(), String::new(), String::new(), e.clone()]),
        }
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(path, &header, body)
}

/// Directory name for one run inside a sweep output directory.
pub fn sweep_run_dir(root: &Path, param: SweepParam, value: f64, seed: u64) -> PathBuf {
    root.join(format!("{param}_{value}_seed{seed}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_config;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn scenario_round_trip_is_lossless() {
        let mut cfg = reference_config();
        cfg.mobility.speed_max = 2.5;
        cfg.min_rate = MinRate::PerSlot(vec![vec![0.1, 0.2, 0.3, 0.0, 0.05, 0.12]; 3]);
        let sc = Scenario::from_config(cfg.clone());
        let back = parse_scenario(&scenario_to_string(&sc).unwrap(), "test").unwrap().config;
        assert!(rel(back.noise_power, cfg.noise_power) < 1e-12);
        assert!(rel(back.pathloss_ref, cfg.pathloss_ref) < 1e-12);
        if let (MinRate::PerSlot(a), MinRate::PerSlot(b)) = (&back.min_rate, &cfg.min_rate) {
            for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
                assert!((x - y).abs() <= 1e-12 * y.abs());
            }
        } else {
            panic!("rate matrix lost");
        }
        let mut exact = back.clone();
        exact.noise_power = cfg.noise_power;
        exact.pathloss_ref = cfg.pathloss_ref;
        exact.min_rate = cfg.min_rate.clone();
        assert_eq!(exact, cfg);
    }

    #[test]
    fn missing_slot_count_is_named() {
        let sc = Scenario::from_config(reference_config());
        let text: String = scenario_to_string(&sc)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("num_slots"))
            .collect::<Vec<_>>()
            .join("\n");
        let err = parse_scenario(&text, "test").unwrap_err().to_string();
        assert!(err.contains("num_slots"), "{err}");
    }

    #[test]
    fn unreachable_end_is_rejected() {
        let mut cfg = reference_config();
        cfg.horizon = 3.0;
        let text = scenario_to_string(&Scenario::from_config(cfg)).unwrap();
        assert!(matches!(parse_scenario(&text, "test"), Err(Error::Unreachable { .. })));
    }

    #[test]
    fn trace_round_trip_with_varying_sizes() {
        let trace = UserTrace {
            slots: vec![
                vec![vec![Point::new(1.0, 2.0)], vec![Point::new(-3.5, 0.25), Point::new(4.0, 4.0)]],
                vec![vec![Point::new(1.5, 2.0), Point::new(0.0, 0.0)], vec![Point::new(-3.0, 0.5)]],
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace(&path, &trace).unwrap();
        assert_eq!(read_trace(&path).unwrap(), trace);
    }
}
