use std::fmt;

use super::channel::slot_rates;
use super::types::{PowerSchedule, ScenarioConfig, Trajectory, UserTrace, TOL_GEOM, TOL_POW};
use crate::error::Result;

/// Slack below which a rate shortfall counts as round-off rather than a violation.
pub const TOL_RATE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViolationKind {
    /// Consecutive breaking points `n - 1` and `n` too far apart.
    Speed { n: usize },
    /// Group rate below its reserved minimum (slot is 1-based).
    MinRate { group: usize, slot: usize },
    /// Slot power budget exceeded (slot is 1-based).
    SumPower { slot: usize },
    /// Group power below the floor or non-finite (slot is 1-based).
    PowerFloor { group: usize, slot: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Amount by which the constraint is exceeded, in its own units.
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ViolationKind::Speed { n } => {
                write!(f, "speed constraint between q[{}] and q[{n}] exceeded by {:.6e} m", n - 1, self.magnitude)
            }
            ViolationKind::MinRate { group, slot } => write!(
                f,
                "min-rate constraint of group {} at slot {slot} short by {:.6e} nats",
                group + 1,
                self.magnitude
            ),
            ViolationKind::SumPower { slot } => {
                write!(f, "sum-power constraint at slot {slot} exceeded by {:.6e} W", self.magnitude)
            }
            ViolationKind::PowerFloor { group, slot } => write!(
                f,
                "power of group {} at slot {slot} below floor by {:.6e} W",
                group + 1,
                self.magnitude
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// Lists every violated speed, min-rate and sum-power constraint.
///
/// `min_rate_scale` multiplies the reserved rates (1.0 for the nominal QoS).
pub fn check_feasibility(
    trajectory: &Trajectory,
    powers: &PowerSchedule,
    trace: &UserTrace,
    cfg: &ScenarioConfig,
    min_rate_scale: f64,
) -> Result<FeasibilityReport> {
    let mut violations = Vec::new();
    let s_max = cfg.s_max();
    for n in 1..trajectory.points.len() {
        let d = trajectory.points[n].dist(trajectory.points[n - 1]);
        if d > s_max + TOL_GEOM {
            violations.push(Violation {
                kind: ViolationKind::Speed { n },
                magnitude: d - s_max,
            });
        }
    }
    let rates = slot_rates(trajectory, powers, trace, cfg)?;
    for (s, row) in powers.p.iter().enumerate() {
        for (g, &p) in row.iter().enumerate() {
            if !(p.is_finite() && p >= super::types::P_FLOOR * (1.0 - 1e-9)) {
                violations.push(Violation {
                    kind: ViolationKind::PowerFloor { group: g, slot: s + 1 },
                    magnitude: super::types::P_FLOOR - p,
                });
            }
        }
        for (g, &c) in rates[s].iter().enumerate() {
            let need = cfg.required_rate(g, s, min_rate_scale);
            if c < need - TOL_RATE {
                violations.push(Violation {
                    kind: ViolationKind::MinRate { group: g, slot: s + 1 },
                    magnitude: need - c,
                });
            }
        }
        let total: f64 = row.iter().sum();
        if total > cfg.p_max + TOL_POW {
            violations.push(Violation {
                kind: ViolationKind::SumPower { slot: s + 1 },
                magnitude: total - cfg.p_max,
            });
        }
    }
    Ok(FeasibilityReport { violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{channel::total_objective, test_config, Point};

    fn instance() -> (ScenarioConfig, UserTrace, Trajectory, PowerSchedule) {
        let mut cfg = test_config();
        cfg.users_per_group = vec![2, 2];
        cfg.num_slots = 4;
        cfg.horizon = 8.0; // S_max = 20 m
        cfg.start = Point::new(-30.0, 0.0);
        cfg.end = Point::new(30.0, 0.0);
        let trace = UserTrace::fixed(
            vec![
                vec![Point::new(-10.0, 10.0), Point::new(5.0, 20.0)],
                vec![Point::new(20.0, -15.0), Point::new(-25.0, -30.0)],
            ],
            4,
        );
        let traj = Trajectory::straight(cfg.start, cfg.end, 4);
        let powers = PowerSchedule::uniform(2, 4, cfg.p_max / 2.0);
        (cfg, trace, traj, powers)
    }

    #[test]
    fn straight_line_equal_split_is_feasible() {
        let (cfg, trace, traj, powers) = instance();
        // Direct evaluation: the weakest group keeps SINR close to 1, far above
        // exp(0.25 ln 2) - 1.
        let rates = slot_rates(&traj, &powers, &trace, &cfg).unwrap();
        assert!(rates.iter().flatten().all(|&c| c > 0.25 * std::f64::consts::LN_2));
        let rep = check_feasibility(&traj, &powers, &trace, &cfg, 1.0).unwrap();
        assert!(rep.is_feasible(), "{:?}", rep);
        assert!(total_objective(&traj, &powers, &trace, &cfg).unwrap() > 0.0);
    }

    #[test]
    fn forced_sum_power_violation() {
        let (cfg, trace, traj, mut powers) = instance();
        powers.p[0][0] = cfg.p_max + 1.0;
        let rep = check_feasibility(&traj, &powers, &trace, &cfg, 1.0).unwrap();
        let v = rep
            .violations
            .iter()
            .find(|v| v.kind == ViolationKind::SumPower { slot: 1 })
            .unwrap();
        assert!(v.magnitude >= 1.0);
    }

    #[test]
    fn forced_speed_violation() {
        let (cfg, trace, mut traj, powers) = instance();
        let s = cfg.s_max();
        traj.points[1] = traj.points[0] + Point::new(0.0, s + 5.0);
        let rep = check_feasibility(&traj, &powers, &trace, &cfg, 1.0).unwrap();
        let v = rep
            .violations
            .iter()
            .find(|v| v.kind == ViolationKind::Speed { n: 1 })
            .unwrap();
        assert!((v.magnitude - 5.0).abs() < 1e-9);
    }

    #[test]
    fn rate_violation_reported() {
        let (mut cfg, trace, traj, powers) = instance();
        cfg.min_rate = crate::model::MinRate::Uniform(50.0);
        let rep = check_feasibility(&traj, &powers, &trace, &cfg, 1.0).unwrap();
        assert_eq!(rep.violations.len(), 8);
        assert!(rep.violations.iter().all(|v| matches!(v.kind, ViolationKind::MinRate { .. })));
    }
}
