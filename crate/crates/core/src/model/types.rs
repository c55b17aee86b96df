use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobility::MobilityConfig;

/// Breaking-point distance slack used when checking the speed constraint.
pub const TOL_GEOM: f64 = 1e-6;
/// Sum-power slack used when checking the per-slot power budget.
pub const TOL_POW: f64 = 1e-9;
/// Strictly positive lower bound on every group power.
pub const P_FLOOR: f64 = 1e-8;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        (self - other).norm_sq()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Moves from `self` toward `target` by at most `step` meters.
    pub fn step_toward(self, target: Point, step: f64) -> Point {
        let d = self.dist(target);
        if d <= step || d == 0.0 {
            target
        } else {
            self + (target - self) * (step / d)
        }
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Minimum multicast rate per group and slot, in nats.
#[derive(Debug, Clone, PartialEq)]
pub enum MinRate {
    Uniform(f64),
    /// Indexed `[group][slot]`.
    PerSlot(Vec<Vec<f64>>),
}

impl MinRate {
    pub fn at(&self, group: usize, slot: usize) -> f64 {
        match self {
            MinRate::Uniform(c) => *c,
            MinRate::PerSlot(m) => m[group][slot],
        }
    }

    pub fn scaled(&self, factor: f64) -> MinRate {
        match self {
            MinRate::Uniform(c) => MinRate::Uniform(c * factor),
            MinRate::PerSlot(m) => MinRate::PerSlot(
                m.iter()
                    .map(|row| row.iter().map(|c| c * factor).collect())
                    .collect(),
            ),
        }
    }
}

/// Numerical knobs of the nested solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub kkt_tol: f64,
    pub feas_tol: f64,
    pub max_newton_iter: usize,
    pub max_sca_iter: usize,
    pub max_asm_iter: usize,
    pub max_online_asm_iter: usize,
    pub qos_relax_factor: f64,
    pub qos_relax_attempts: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            kkt_tol: 1e-6,
            feas_tol: 1e-8,
            max_newton_iter: 500,
            max_sca_iter: 50,
            max_asm_iter: 30,
            max_online_asm_iter: 10,
            qos_relax_factor: 0.5,
            qos_relax_attempts: 3,
        }
    }
}

/// Every physical and algorithmic parameter of one run, in linear units.
///
/// Rates are in nats, powers in watts, lengths in meters. The coverage disk
/// is centered at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub users_per_group: Vec<usize>,
    pub num_slots: usize,
    pub horizon: f64,
    pub v_max: f64,
    pub altitude: f64,
    pub p_max: f64,
    pub noise_power: f64,
    pub pathloss_ref: f64,
    pub coverage_radius: f64,
    pub start: Point,
    pub end: Point,
    pub min_rate: MinRate,
    pub eps_traj: f64,
    pub eps_power: f64,
    pub coord_offset: f64,
    pub rng_seed: u64,
    /// Whether the trajectory subproblem enforces the rate constraint at the
    /// final slot as well (the alternative stops at slot N-1).
    pub qos_last_slot: bool,
    /// Online mode only: keep the terminal point reachable.
    pub reachability: bool,
    pub mobility: MobilityConfig,
    pub settings: SolverSettings,
}

impl ScenarioConfig {
    pub fn num_groups(&self) -> usize {
        self.users_per_group.len()
    }

    /// Maximum distance between consecutive breaking points.
    pub fn s_max(&self) -> f64 {
        self.v_max * self.horizon / self.num_slots as f64
    }

    pub fn slot_duration(&self) -> f64 {
        self.horizon / self.num_slots as f64
    }

    /// Distance still travelable once the UAV sits at breaking point `n`.
    pub fn s_remain(&self, n: usize) -> f64 {
        self.s_max() * (self.num_slots.saturating_sub(n)) as f64
    }

    /// Rate group `group` must reach in 0-based slot `slot`, after scaling by
    /// `scale`. Zero when the final slot is exempt.
    pub fn required_rate(&self, group: usize, slot: usize, scale: f64) -> f64 {
        if slot + 1 == self.num_slots && !self.qos_last_slot {
            0.0
        } else {
            self.min_rate.at(group, slot) * scale
        }
    }

    /// Upper bound on the total objective: every group overhead, at full
    /// power and without interference, in every slot.
    pub fn objective_bound(&self) -> f64 {
        let per = (self.p_max * self.pathloss_ref
            / (self.altitude * self.altitude * self.noise_power))
            .ln_1p();
        (self.num_slots * self.num_groups()) as f64 * per
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        }
        if self.users_per_group.is_empty() {
            return Err(Error::config("num_groups", "must be at least 1"));
        }
        if let Some(g) = self.users_per_group.iter().position(|&u| u == 0) {
            return Err(Error::config(
                "users_per_group",
                format!("group {g} must have at least one user"),
            ));
        }
        if self.num_slots == 0 {
            return Err(Error::config("num_slots", "must be at least 1"));
        }
        positive("horizon", self.horizon)?;
        positive("v_max", self.v_max)?;
        positive("altitude", self.altitude)?;
        positive("p_max", self.p_max)?;
        positive("noise_power", self.noise_power)?;
        positive("pathloss_ref", self.pathloss_ref)?;
        positive("coverage_radius", self.coverage_radius)?;
        // Infinite tolerances are allowed and stop after one iteration.
        for (field, eps) in [("eps_traj", self.eps_traj), ("eps_power", self.eps_power)] {
            if !(eps > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {eps}")));
            }
        }
        positive("coord_offset", self.coord_offset)?;
        if self.p_max <= P_FLOOR * self.num_groups() as f64 {
            return Err(Error::config("p_max", "must exceed the power floor of every group"));
        }
        match &self.min_rate {
            MinRate::Uniform(c) => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::config("min_rate", "must be non-negative"));
                }
            }
            MinRate::PerSlot(m) => {
                if m.len() != self.num_groups() || m.iter().any(|r| r.len() != self.num_slots) {
                    return Err(Error::config("min_rate", "matrix must be num_groups x num_slots"));
                }
                if m.iter().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
                    return Err(Error::config("min_rate", "must be non-negative"));
                }
            }
        }
        let reach = self.start.dist(self.end);
        let budget = self.s_max() * self.num_slots as f64;
        if reach > budget + TOL_GEOM {
            return Err(Error::Unreachable {
                distance: reach,
                budget,
            });
        }
        self.mobility.validate()?;
        Ok(())
    }
}

/// Per-slot user positions, indexed `[slot][group][user]`, slot 0 being time slot 1.
///
/// Group sizes may differ between slots (online arrivals and departures).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserTrace {
    pub slots: Vec<Vec<Vec<Point>>>,
}

impl UserTrace {
    /// A trace whose users never move.
    pub fn fixed(positions: Vec<Vec<Point>>, num_slots: usize) -> Self {
        UserTrace {
            slots: vec![positions; num_slots],
        }
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn num_groups(&self) -> usize {
        self.slots.first().map_or(0, |s| s.len())
    }

    pub fn users(&self, slot: usize, group: usize) -> &[Point] {
        &self.slots[slot][group]
    }

    pub fn slot(&self, slot: usize) -> &[Vec<Point>] {
        &self.slots[slot]
    }

    pub fn is_static(&self) -> bool {
        self.slots.windows(2).all(|w| w[0] == w[1])
    }

    pub fn group_sizes(&self, slot: usize) -> Vec<usize> {
        self.slots[slot].iter().map(Vec::len).collect()
    }
}

/// The `N + 1` breaking points `q[0..=N]` of the UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<Point>,
}

impl Trajectory {
    /// Uniform interpolation between the endpoints.
    pub fn straight(start: Point, end: Point, num_slots: usize) -> Self {
        let points = (0..=num_slots)
            .map(|n| start + (end - start) * (n as f64 / num_slots as f64))
            .collect();
        Trajectory { points }
    }

    pub fn num_slots(&self) -> usize {
        self.points.len() - 1
    }

    /// Position used during slot `slot` (0-based), i.e. breaking point `slot + 1`.
    pub fn slot_point(&self, slot: usize) -> Point {
        self.points[slot + 1]
    }

    /// Frobenius distance between two trajectories.
    pub fn distance(&self, other: &Trajectory) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| a.dist_sq(*b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_point_distance(&self, other: &Trajectory) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| a.dist(*b))
            .fold(0.0, f64::max)
    }
}

/// Group transmit powers, indexed `[slot][group]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSchedule {
    pub p: Vec<Vec<f64>>,
}

impl PowerSchedule {
    pub fn uniform(num_groups: usize, num_slots: usize, value: f64) -> Self {
        PowerSchedule {
            p: vec![vec![value; num_groups]; num_slots],
        }
    }

    pub fn num_slots(&self) -> usize {
        self.p.len()
    }

    pub fn get(&self, group: usize, slot: usize) -> f64 {
        self.p[slot][group]
    }

    pub fn slot(&self, slot: usize) -> &[f64] {
        &self.p[slot]
    }

    pub fn distance(&self, other: &PowerSchedule) -> f64 {
        self.p
            .iter()
            .flatten()
            .zip(other.p.iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}
