use std::fmt;
use std::str::FromStr;

use super::types::{PowerSchedule, Trajectory, UserTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    OfflineFixed,
    OfflineMobile,
    Online,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::OfflineFixed => "offline-fixed",
            RunMode::OfflineMobile => "offline-mobile",
            RunMode::Online => "online",
        })
    }
}

impl FromStr for RunMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "offline-fixed" => Ok(RunMode::OfflineFixed),
            "offline-mobile" => Ok(RunMode::OfflineMobile),
            "online" => Ok(RunMode::Online),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Trajectory,
    Power,
    Outer,
    Slot,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Trajectory => "trajectory",
            Stage::Power => "power",
            Stage::Outer => "outer",
            Stage::Slot => "slot",
        })
    }
}

/// One line of the run log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub stage: Stage,
    /// Outer (ASM) iteration, or the 1-based slot for online runs.
    pub outer: usize,
    pub inner: usize,
    pub movement: f64,
    /// Exact objective after this step, in nats.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub mode: RunMode,
    pub seed: u64,
    pub trajectory: Trajectory,
    pub powers: PowerSchedule,
    /// Exact rates `[slot][group]` in nats.
    pub rates: Vec<Vec<f64>>,
    pub objective: f64,
    pub objective_history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// 1-based slots whose QoS could not be met (online mode).
    pub infeasible_slots: Vec<usize>,
    /// Factor applied to the reserved rates; below 1 when QoS was relaxed.
    pub qos_scale: f64,
    /// Distance between the final UAV position and the configured end point.
    pub terminal_error: f64,
    pub trace: UserTrace,
    pub log: Vec<IterationRecord>,
}

impl RunResult {
    pub fn qos_relaxed(&self) -> bool {
        self.qos_scale < 1.0
    }

    pub fn objective_bits(&self) -> f64 {
        self.objective / std::f64::consts::LN_2
    }

    /// Largest drop between consecutive history entries (0 when monotone).
    pub fn max_history_drop(&self) -> f64 {
        self.objective_history
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}
