//! Domain types and the exact physical model: free-space gains, group
//! representatives, SIC ordering, NOMA interference and multicast capacity.
//!
//! Everything here is a pure function of its inputs. The approximations used
//! by the solvers live elsewhere; this module is the ground truth they are
//! checked against.

mod channel;
mod feasibility;
mod result;
mod types;

pub use channel::{
    capacity, channel_gain, channel_states, multicast_capacity, representative_gain, sic_order,
    slot_rates, total_objective, SlotChannelState,
};
pub use feasibility::{check_feasibility, FeasibilityReport, Violation, ViolationKind, TOL_RATE};
pub use result::{IterationRecord, RunMode, RunResult, Stage};
pub use types::{
    db_to_linear, linear_to_db, MinRate, Point, PowerSchedule, ScenarioConfig, SolverSettings,
    Trajectory, UserTrace, P_FLOOR, TOL_GEOM, TOL_POW,
};

/// Parameters of the reference network: 2 W, 50 m radius, -90 dB noise,
/// 25 m altitude, 10 m/s, -30 dB reference gain, 0.25 bps/Hz.
pub fn reference_config() -> ScenarioConfig {
    ScenarioConfig {
        name: "reference".into(),
        users_per_group: vec![5, 5, 5],
        num_slots: 6,
        horizon: 12.0,
        v_max: 10.0,
        altitude: 25.0,
        p_max: 2.0,
        noise_power: db_to_linear(-90.0),
        pathloss_ref: db_to_linear(-30.0),
        coverage_radius: 50.0,
        start: Point::new(-40.0, 0.0),
        end: Point::new(40.0, 0.0),
        min_rate: MinRate::Uniform(0.25 * std::f64::consts::LN_2),
        eps_traj: 1e-2,
        eps_power: 1e-3,
        coord_offset: 2.0 * 50.0 + 1.0,
        rng_seed: 1,
        qos_last_slot: true,
        reachability: true,
        mobility: crate::mobility::MobilityConfig::default(),
        settings: SolverSettings::default(),
    }
}

#[cfg(test)]
pub(crate) fn test_config() -> ScenarioConfig {
    reference_config()
}
