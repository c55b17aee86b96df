//! Online planning: the UAV learns user positions one slot at a time and
//! commits to one breaking point per slot.
//!
//! Each slot runs a short alternation between a single-point trajectory step
//! and a single-slot power step. With reachability enabled the chosen point
//! must stay within `S_remain[n]` of the terminal point, which keeps the
//! terminal point reachable by induction. The final slot only allocates
//! power at the position actually reached.

use log::{debug, warn};

use crate::asm::Relaxation;
use crate::error::{Error, Result};
use crate::model::{
    multicast_capacity, IterationRecord, Point, PowerSchedule, RunMode, RunResult, ScenarioConfig,
    SlotChannelState, Stage, Trajectory, UserTrace,
};
use crate::power::{solve_power, PowerOutcome};
use crate::trajectory::{solve_sca, Link, SlotTerm, TrajectoryProblem};

/// Everything the planner knows when slot `slot` (1-based) starts.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineState<'a> {
    pub slot: usize,
    /// Breaking point `q[n-1]`.
    pub position: Point,
    /// User positions observed for this slot, `[group][user]`.
    pub users: &'a [Vec<Point>],
    /// Powers of the previous slot, used as the warm start.
    pub previous_powers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotPlan {
    pub point: Point,
    pub powers: Vec<f64>,
    pub iterations: usize,
    pub qos_scale: f64,
}

fn slot_rates(point: Point, users: &[Vec<Point>], powers: &[f64], cfg: &ScenarioConfig, slot: usize) -> Result<Vec<f64>> {
    let st = SlotChannelState::with_slot(point, users, cfg.altitude, cfg.pathloss_ref, slot)?;
    Ok((0..st.num_groups())
        .map(|g| multicast_capacity(powers, &st, g, cfg.noise_power))
        .collect())
}

fn slot_min_rate(cfg: &ScenarioConfig, users: &[Vec<Point>], slot: usize, scale: f64) -> Vec<f64> {
    (0..users.len()).map(|g| cfg.required_rate(g, slot - 1, scale)).collect()
}

/// One mini-alternation from `start` at a fixed QoS scale.
fn alternate_from(
    state: &OnlineState<'_>,
    start: Point,
    cfg: &ScenarioConfig,
    scale: f64,
    log: &mut Vec<IterationRecord>,
) -> Result<SlotPlan> {
    let n = state.slot;
    let s_max = cfg.s_max();
    let min_rate = slot_min_rate(cfg, state.users, n, scale);
    let mut q = start;
    let mut p = state.previous_powers.clone();
    // Re-balance the previous slot's powers for this slot's channel first; a
    // failure here is not final since moving may still meet the targets.
    let st = SlotChannelState::with_slot(q, state.users, cfg.altitude, cfg.pathloss_ref, n)?;
    match solve_power(
        std::slice::from_ref(&st),
        std::slice::from_ref(&min_rate),
        cfg,
        &PowerSchedule { p: vec![p.clone()] },
        n,
        log,
    ) {
        Ok(out) => p = out.powers.p.into_iter().next().unwrap_or_default(),
        Err(Error::Infeasible { .. }) => {}
        Err(e) => return Err(e),
    }
    let mut iterations = 0;
    for it in 1..=cfg.settings.max_online_asm_iter {
        iterations = it;
        let mut links = vec![Link {
            from: 0,
            to: 1,
            budget: s_max,
        }];
        if cfg.reachability {
            links.push(Link {
                from: 1,
                to: 2,
                budget: cfg.s_remain(n),
            });
        }
        let problem = TrajectoryProblem {
            points: vec![state.position, q, cfg.end],
            free: vec![false, true, false],
            links,
            slots: vec![SlotTerm {
                point: 1,
                slot: n,
                users: state.users,
                powers: &p,
                min_rate: min_rate.clone(),
            }],
            constant_objective: 0.0,
        };
        let out = solve_sca(problem, cfg, n, log)?;
        let q_next = out.points[1];
        let st = SlotChannelState::with_slot(q_next, state.users, cfg.altitude, cfg.pathloss_ref, n)?;
        let PowerOutcome { powers, .. } = solve_power(
            std::slice::from_ref(&st),
            std::slice::from_ref(&min_rate),
            cfg,
            &PowerSchedule { p: vec![p.clone()] },
            n,
            log,
        )?;
        let dq = q_next.dist(q);
        let dp = powers.distance(&PowerSchedule { p: vec![p.clone()] });
        q = q_next;
        p = powers.p.into_iter().next().unwrap_or_default();
        if dq <= cfg.eps_traj && dp <= cfg.eps_power {
            break;
        }
    }
    Ok(SlotPlan {
        point: q,
        powers: p,
        iterations,
        qos_scale: scale,
    })
}

/// Largest QoS shortfall and sum rate of a plan, for ranking candidates.
fn rank(plan: &SlotPlan, state: &OnlineState<'_>, cfg: &ScenarioConfig) -> Result<(f64, f64)> {
    let rates = slot_rates(plan.point, state.users, &plan.powers, cfg, state.slot)?;
    let min_rate = slot_min_rate(cfg, state.users, state.slot, plan.qos_scale);
    let shortfall = rates.iter().zip(&min_rate).map(|(r, c)| c - r).fold(0.0, f64::max);
    Ok((shortfall, rates.iter().sum()))
}

/// The mini-alternation at a fixed QoS scale, started from the straight step
/// toward the terminal point and, when it keeps the terminal point
/// reachable, from the current position. The better result is kept.
fn plan_slot_at_scale(
    state: &OnlineState<'_>,
    cfg: &ScenarioConfig,
    scale: f64,
    log: &mut Vec<IterationRecord>,
) -> Result<SlotPlan> {
    let mut starts = vec![state.position.step_toward(cfg.end, cfg.s_max())];
    if !cfg.reachability || state.position.dist(cfg.end) <= cfg.s_remain(state.slot) {
        starts.push(state.position);
    }
    let mut best: Option<(SlotPlan, (f64, f64))> = None;
    let mut last_err = None;
    for start in starts {
        match alternate_from(state, start, cfg, scale, log) {
            Ok(plan) => {
                let key = rank(&plan, state, cfg)?;
                let better = match &best {
                    None => true,
                    Some((_, (short, obj))) => key.0 < *short || (key.0 == *short && key.1 > *obj),
                };
                if better {
                    best = Some((plan, key));
                }
            }
            Err(e @ Error::Infeasible { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    match best {
        Some((plan, _)) => Ok(plan),
        None => Err(last_err.expect("at least one start")),
    }
}

/// Chooses `q[n]` and the slot-`n` powers, for `n <= N - 1`.
///
/// Only the slot's own users enter the decision. When the QoS targets are
/// out of reach the relaxation policy applies; failing that, the slot is
/// planned without QoS and `qos_scale` is reported as 0.
pub fn plan_slot(state: &OnlineState<'_>, cfg: &ScenarioConfig, log: &mut Vec<IterationRecord>) -> Result<SlotPlan> {
    let mut relax = Relaxation::new(cfg);
    match relax.retry("online slot", |scale| plan_slot_at_scale(state, cfg, scale, log)) {
        Err(Error::Infeasible { .. }) => {
            warn!("slot {}: QoS unreachable, planning without it", state.slot);
            plan_slot_at_scale(state, cfg, 0.0, log)
        }
        other => other,
    }
}

/// Powers for the final slot at the reached position `q_final`.
pub fn plan_final_slot(
    q_final: Point,
    users: &[Vec<Point>],
    previous_powers: &[f64],
    cfg: &ScenarioConfig,
    log: &mut Vec<IterationRecord>,
) -> Result<(Vec<f64>, f64)> {
    let n = cfg.num_slots;
    let st = SlotChannelState::with_slot(q_final, users, cfg.altitude, cfg.pathloss_ref, n)?;
    let init = PowerSchedule {
        p: vec![previous_powers.to_vec()],
    };
    let mut relax = Relaxation::new(cfg);
    let attempt = relax.retry("final slot", |scale| {
        solve_power(
            std::slice::from_ref(&st),
            &[slot_min_rate(cfg, users, n, scale)],
            cfg,
            &init,
            n,
            log,
        )
    });
    let (out, scale) = match attempt {
        Ok(out) => (out, relax.scale),
        Err(Error::Infeasible { .. }) => (
            solve_power(std::slice::from_ref(&st), &[vec![0.0; users.len()]], cfg, &init, n, log)?,
            0.0,
        ),
        Err(e) => return Err(e),
    };
    Ok((out.powers.p.into_iter().next().unwrap_or_default(), scale))
}

/// Plays the whole horizon, revealing slot `n` of `trace` only when slot `n`
/// starts.
pub fn run_online(cfg: &ScenarioConfig, trace: &UserTrace, seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    if trace.num_slots() != cfg.num_slots {
        return Err(Error::config("trace", "slot count differs from the scenario"));
    }
    let n_slots = cfg.num_slots;
    let g = cfg.num_groups();
    let mut log = Vec::new();
    let mut points = vec![cfg.start];
    let mut powers: Vec<Vec<f64>> = Vec::with_capacity(n_slots);
    let mut rates: Vec<Vec<f64>> = Vec::with_capacity(n_slots);
    let mut infeasible = Vec::new();
    let mut min_scale: f64 = 1.0;
    let mut history = Vec::with_capacity(n_slots);
    let mut total = 0.0;
    let mut prev_p = vec![cfg.p_max / (2.0 * g as f64); g];
    let mut iterations = 0;

    for n in 1..n_slots {
        let state = OnlineState {
            slot: n,
            position: *points.last().expect("start point"),
            users: trace.slot(n - 1),
            previous_powers: prev_p.clone(),
        };
        let plan = plan_slot(&state, cfg, &mut log)?;
        iterations += plan.iterations;
        if plan.qos_scale < 1.0 {
            infeasible.push(n);
            min_scale = min_scale.min(plan.qos_scale);
        }
        let r = slot_rates(plan.point, state.users, &plan.powers, cfg, n)?;
        total += r.iter().sum::<f64>();
        debug!("slot {n}: q = {}, rate {:.6}", plan.point, r.iter().sum::<f64>());
        log.push(IterationRecord {
            stage: Stage::Slot,
            outer: n,
            inner: plan.iterations,
            movement: plan.point.dist(state.position),
            objective: total,
        });
        history.push(total);
        points.push(plan.point);
        prev_p = plan.powers.clone();
        powers.push(plan.powers);
        rates.push(r);
    }

    let last = *points.last().expect("start point");
    let q_final = last.step_toward(cfg.end, cfg.s_max());
    let users = trace.slot(n_slots - 1);
    let (p_final, scale) = plan_final_slot(q_final, users, &prev_p, cfg, &mut log)?;
    if scale < 1.0 {
        infeasible.push(n_slots);
        min_scale = min_scale.min(scale);
    }
    let r = slot_rates(q_final, users, &p_final, cfg, n_slots)?;
    total += r.iter().sum::<f64>();
    log.push(IterationRecord {
        stage: Stage::Slot,
        outer: n_slots,
        inner: 1,
        movement: q_final.dist(last),
        objective: total,
    });
    history.push(total);
    points.push(q_final);
    powers.push(p_final);
    rates.push(r);

    Ok(RunResult {
        mode: RunMode::Online,
        seed,
        terminal_error: q_final.dist(cfg.end),
        trajectory: Trajectory { points },
        powers: PowerSchedule { p: powers },
        objective: rates.iter().flatten().sum(),
        rates,
        objective_history: history,
        converged: true,
        iterations,
        infeasible_slots: infeasible,
        qos_scale: min_scale,
        trace: trace.clone(),
        log,
    })
}
