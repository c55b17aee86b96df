//! Exact free-space channel, SIC ordering and multicast capacity.

use super::types::{Point, PowerSchedule, ScenarioConfig, Trajectory, UserTrace};
use crate::error::{Error, Result};

/// Free-space gain `mu0 / (H^2 + |q - r|^2)` from a UAV at `q` to a user at `r`.
pub fn channel_gain(q: Point, r: Point, altitude: f64, pathloss_ref: f64) -> f64 {
    pathloss_ref / (altitude * altitude + q.dist_sq(r))
}

/// Worst gain of a multicast group; `None` for an empty group.
pub fn representative_gain(gains: &[f64]) -> Option<f64> {
    gains.iter().copied().reduce(f64::min)
}

/// For each group, the groups whose signals it cannot cancel.
///
/// Group `j` is above `g` when its representative gain is strictly larger,
/// or equal with a larger index (lower index is treated as weaker).
pub fn sic_order(h_rep: &[f64]) -> Vec<Vec<usize>> {
    (0..h_rep.len())
        .map(|g| {
            (0..h_rep.len())
                .filter(|&j| h_rep[j] > h_rep[g] || (h_rep[j] == h_rep[g] && j > g))
                .collect()
        })
        .collect()
}

/// `ln(1 + p h / (h * interference + noise))`.
pub fn capacity(power: f64, gain: f64, interfering_power: f64, noise_power: f64) -> f64 {
    (power * gain / (gain * interfering_power + noise_power)).ln_1p()
}

/// Derived channel quantities of one slot for a given UAV position.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotChannelState {
    /// Per-user gains, `[group][user]`.
    pub gains: Vec<Vec<f64>>,
    pub h_rep: Vec<f64>,
    pub sic_above: Vec<Vec<usize>>,
    /// Largest squared 3-D distance per group.
    pub max_dist_sq: Vec<f64>,
}

impl SlotChannelState {
    pub fn new(q: Point, users: &[Vec<Point>], cfg: &ScenarioConfig) -> Result<Self> {
        Self::with_slot(q, users, cfg.altitude, cfg.pathloss_ref, 0)
    }

    pub(crate) fn with_slot(
        q: Point,
        users: &[Vec<Point>],
        altitude: f64,
        pathloss_ref: f64,
        slot: usize,
    ) -> Result<Self> {
        let gains: Vec<Vec<f64>> = users
            .iter()
            .map(|grp| {
                grp.iter()
                    .map(|&r| channel_gain(q, r, altitude, pathloss_ref))
                    .collect()
            })
            .collect();
        let h_rep = gains
            .iter()
            .enumerate()
            .map(|(g, gs)| representative_gain(gs).ok_or(Error::EmptyGroup { group: g, slot }))
            .collect::<Result<Vec<_>>>()?;
        let max_dist_sq = users
            .iter()
            .map(|grp| {
                grp.iter()
                    .map(|&r| altitude * altitude + q.dist_sq(r))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let sic_above = sic_order(&h_rep);
        Ok(SlotChannelState {
            gains,
            h_rep,
            sic_above,
            max_dist_sq,
        })
    }

    pub fn num_groups(&self) -> usize {
        self.h_rep.len()
    }

    /// Sum of powers of the groups `g` cannot cancel.
    pub fn interfering_power(&self, powers: &[f64], g: usize) -> f64 {
        self.sic_above[g].iter().map(|&j| powers[j]).sum()
    }

    /// NOMA interference `I_g`.
    pub fn interference(&self, powers: &[f64], g: usize) -> f64 {
        self.h_rep[g] * self.interfering_power(powers, g)
    }

    /// Interference plus noise, the tight value of the `Psi` epigraph.
    pub fn psi(&self, powers: &[f64], g: usize, noise_power: f64) -> f64 {
        self.interference(powers, g) + noise_power
    }
}

/// Multicast capacity of group `g` in nats for the slot described by `state`.
pub fn multicast_capacity(powers: &[f64], state: &SlotChannelState, g: usize, noise_power: f64) -> f64 {
    capacity(
        powers[g],
        state.h_rep[g],
        state.interfering_power(powers, g),
        noise_power,
    )
}

/// Channel state of every slot along a trajectory.
pub fn channel_states(
    trajectory: &Trajectory,
    trace: &UserTrace,
    cfg: &ScenarioConfig,
) -> Result<Vec<SlotChannelState>> {
    (0..trace.num_slots())
        .map(|s| {
            SlotChannelState::with_slot(
                trajectory.slot_point(s),
                trace.slot(s),
                cfg.altitude,
                cfg.pathloss_ref,
                s + 1,
            )
        })
        .collect()
}

/// Exact per-slot rates `[slot][group]` in nats.
pub fn slot_rates(
    trajectory: &Trajectory,
    powers: &PowerSchedule,
    trace: &UserTrace,
    cfg: &ScenarioConfig,
) -> Result<Vec<Vec<f64>>> {
    let states = channel_states(trajectory, trace, cfg)?;
    Ok(states
        .iter()
        .enumerate()
        .map(|(s, st)| {
            (0..st.num_groups())
                .map(|g| multicast_capacity(powers.slot(s), st, g, cfg.noise_power))
                .collect()
        })
        .collect())
}

/// Sum of all multicast capacities over slots and groups, through the exact model.
pub fn total_objective(
    trajectory: &Trajectory,
    powers: &PowerSchedule,
    trace: &UserTrace,
    cfg: &ScenarioConfig,
) -> Result<f64> {
    Ok(slot_rates(trajectory, powers, trace, cfg)?
        .iter()
        .flatten()
        .sum())
}
