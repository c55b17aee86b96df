//! Power allocation for a fixed trajectory.
//!
//! Each capacity splits as `C_g = F_g - G_g` with
//!
//! ```text
//! F_g(p) = ln(h_g p_g + h_g sum_{j in O_g} p_j + sigma^2)
//! G_g(p) = ln(h_g sum_{j in O_g} p_j + sigma^2)
//! ```
//!
//! both concave. Replacing `G_g` by its tangent `Ĝ_g` at the previous iterate
//! gives a concave minorant of the objective, so every slot becomes a convex
//! program and repeating the linearization never lowers the true objective.
//! Slots are independent and are solved one at a time.

use log::debug;

use crate::convex::{solve, Affine, ConvexProgram, NegLogSum, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::model::{
    multicast_capacity, IterationRecord, PowerSchedule, ScenarioConfig, SlotChannelState, Stage,
    P_FLOOR,
};

/// `F_g(p)`.
pub fn f_term(p: &[f64], g: usize, state: &SlotChannelState, noise_power: f64) -> f64 {
    let h = state.h_rep[g];
    (h * p[g] + h * state.interfering_power(p, g) + noise_power).ln()
}

/// `G_g(p)`; equals `ln sigma^2` when no group is stronger than `g`.
pub fn g_term(p: &[f64], g: usize, state: &SlotChannelState, noise_power: f64) -> f64 {
    (state.h_rep[g] * state.interfering_power(p, g) + noise_power).ln()
}

/// Gradient of `G_g` at `p_prev`: `h / (h sum p_prev + sigma^2)` on every
/// `j in O_g`, zero elsewhere.
pub fn g_gradient(p_prev: &[f64], g: usize, state: &SlotChannelState, noise_power: f64) -> Vec<(usize, f64)> {
    let h = state.h_rep[g];
    let d = h / (h * state.interfering_power(p_prev, g) + noise_power);
    state.sic_above[g].iter().map(|&j| (j, d)).collect()
}

/// First-order expansion `Ĝ_g(p)` of `G_g` around `p_prev`.
pub fn g_linearized(p: &[f64], p_prev: &[f64], g: usize, state: &SlotChannelState, noise_power: f64) -> f64 {
    g_term(p_prev, g, state, noise_power)
        + g_gradient(p_prev, g, state, noise_power)
            .iter()
            .map(|&(j, d)| d * (p[j] - p_prev[j]))
            .sum::<f64>()
}

/// `Ĝ_g` as an affine function of the slot powers.
fn g_linearized_affine(p_prev: &[f64], g: usize, state: &SlotChannelState, noise_power: f64) -> Affine {
    let grad = g_gradient(p_prev, g, state, noise_power);
    let constant = g_term(p_prev, g, state, noise_power) - grad.iter().map(|&(j, d)| d * p_prev[j]).sum::<f64>();
    Affine::new(grad, constant)
}

/// The argument of `F_g` as an affine function.
fn f_argument(g: usize, state: &SlotChannelState, noise_power: f64) -> Affine {
    let h = state.h_rep[g];
    let mut coeffs = vec![(g, h)];
    coeffs.extend(state.sic_above[g].iter().map(|&j| (j, h)));
    Affine::new(coeffs, noise_power)
}

/// Exact sum rate of one slot.
pub fn slot_objective(p: &[f64], state: &SlotChannelState, noise_power: f64) -> f64 {
    (0..state.num_groups())
        .map(|g| multicast_capacity(p, state, g, noise_power))
        .sum()
}

/// The convex program of one linearization step:
///
/// ```text
/// minimize   sum_g -(F_g - Ĝ_g)
/// subject to C_g - F_g + Ĝ_g <= 0   for every g with C_g > 0
///            sum_g p_g <= p_max,   p_g >= p_floor
/// ```
pub fn linearized_program(
    state: &SlotChannelState,
    p_prev: &[f64],
    min_rate: &[f64],
    p_max: f64,
    noise_power: f64,
) -> ConvexProgram {
    let ng = state.num_groups();
    let mut logs = Vec::with_capacity(ng);
    let mut linear = Affine::new(Vec::new(), 0.0);
    let mut rate_constraints = Vec::new();
    for g in 0..ng {
        let ghat = g_linearized_affine(p_prev, g, state, noise_power);
        logs.push((1.0, f_argument(g, state, noise_power)));
        linear.constant += ghat.constant;
        linear.coeffs.extend(ghat.coeffs.iter().copied());
        if min_rate[g] > 0.0 {
            let mut lin = ghat.clone();
            lin.constant += min_rate[g];
            rate_constraints.push(NegLogSum::new(vec![(1.0, f_argument(g, state, noise_power))], lin));
        }
    }
    let mut program = ConvexProgram::new(ng, Box::new(NegLogSum::new(logs, linear)));
    for c in rate_constraints {
        program.constrain(c);
    }
    program.constrain(Affine::new((0..ng).map(|g| (g, 1.0)).collect(), -p_max));
    program.lower = vec![P_FLOOR; ng];
    program.warm_start = Some(p_prev.to_vec());
    program
}

/// Result of one linearization step on a single slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotStep {
    pub powers: Vec<f64>,
    pub status: SolveStatus,
}

/// Solves one linearized slot program around `p_prev`.
pub fn solve_slot_power(
    state: &SlotChannelState,
    p_prev: &[f64],
    min_rate: &[f64],
    p_max: f64,
    noise_power: f64,
    opts: &SolverOptions,
) -> SlotStep {
    let program = linearized_program(state, p_prev, min_rate, p_max, noise_power);
    let report = solve(&program, opts);
    SlotStep {
        powers: report.x,
        status: report.status,
    }
}

/// Largest shortfall of the exact rates below `min_rate` (0 when met).
pub fn rate_shortfall(p: &[f64], state: &SlotChannelState, min_rate: &[f64], noise_power: f64) -> f64 {
    (0..state.num_groups())
        .map(|g| min_rate[g] - multicast_capacity(p, state, g, noise_power))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    pub powers: PowerSchedule,
    pub iterations: usize,
    /// The last step moved the schedule by at most `eps_power`.
    pub converged: bool,
}

/// Runs the linearization loop on every slot of `states`.
///
/// `min_rate` is indexed `[slot][group]`. `init` must have one row per state.
/// All slots advance in lockstep so that the stopping rule sees the movement
/// of the whole schedule. A step that would lower a slot's exact rate sum is
/// discarded for that slot.
pub fn solve_power(
    states: &[SlotChannelState],
    min_rate: &[Vec<f64>],
    cfg: &ScenarioConfig,
    init: &PowerSchedule,
    outer: usize,
    log: &mut Vec<IterationRecord>,
) -> Result<PowerOutcome> {
    let opts = SolverOptions::from(&cfg.settings);
    let sigma2 = cfg.noise_power;
    let mut p = init.clone();
    let mut iterations = 0;
    let mut converged = false;
    for t2 in 1..=cfg.settings.max_sca_iter {
        iterations = t2;
        let mut next = p.clone();
        for (s, state) in states.iter().enumerate() {
            let prev = p.slot(s);
            let step = solve_slot_power(state, prev, &min_rate[s], cfg.p_max, sigma2, &opts);
            let cand = project(&step.powers, cfg.p_max);
            let cand_short = rate_shortfall(&cand, state, &min_rate[s], sigma2);
            let prev_short = rate_shortfall(prev, state, &min_rate[s], sigma2);
            if step.status == SolveStatus::Infeasible && cand_short > 0.0 {
                debug!("power step infeasible at slot {} (shortfall {cand_short:.3e})", s + 1);
                return Err(Error::Infeasible {
                    family: format!("power (slot {})", s + 1),
                    scale: 1.0,
                });
            }
            let accept = if prev_short > 0.0 {
                cand_short < prev_short
            } else {
                cand_short <= 0.0 && slot_objective(&cand, state, sigma2) >= slot_objective(prev, state, sigma2)
            };
            if accept {
                next.p[s] = if prev_short > 0.0 {
                    cand
                } else {
                    extrapolate(prev, cand, state, &min_rate[s], cfg.p_max, sigma2)
                };
            }
        }
        let movement = next.distance(&p);
        p = next;
        let objective: f64 = states
            .iter()
            .enumerate()
            .map(|(s, st)| slot_objective(p.slot(s), st, sigma2))
            .sum();
        log.push(IterationRecord {
            stage: Stage::Power,
            outer,
            inner: t2,
            movement,
            objective,
        });
        if movement <= cfg.eps_power {
            converged = true;
            break;
        }
    }
    Ok(PowerOutcome {
        powers: p,
        iterations,
        converged,
    })
}

/// Longest multiple of the step `cand - prev` tried by [`extrapolate`].
const MAX_EXTRAPOLATION: f64 = 4096.0;

/// Pushes an accepted step further along its own direction.
///
/// At high SNR the exact slot objective is nearly flat while the minorant
/// keeps the full curvature of `F_g`, so one linearization step moves the
/// powers by only about `sigma^2 / h`. Doubling the step while the exact
/// objective rises and the exact constraints hold keeps the ascent property
/// and reaches the optimum in a handful of iterations.
fn extrapolate(
    prev: &[f64],
    cand: Vec<f64>,
    state: &SlotChannelState,
    min_rate: &[f64],
    p_max: f64,
    noise_power: f64,
) -> Vec<f64> {
    let d: Vec<f64> = cand.iter().zip(prev).map(|(c, p)| c - p).collect();
    // Largest factor that stays inside the floor and the sum budget.
    let mut limit = MAX_EXTRAPOLATION;
    for (p, dj) in prev.iter().zip(&d) {
        if *dj < 0.0 {
            limit = limit.min((P_FLOOR - p) / dj);
        }
    }
    let (total, dtotal): (f64, f64) = (prev.iter().sum(), d.iter().sum());
    if dtotal > 0.0 {
        limit = limit.min((p_max - total) / dtotal);
    }
    let mut best = cand;
    let mut best_obj = slot_objective(&best, state, noise_power);
    let mut factor = 1.0;
    while factor < limit {
        factor = (2.0 * factor).min(limit);
        let trial: Vec<f64> = prev
            .iter()
            .zip(&d)
            .map(|(p, dj)| (p + factor * dj).max(P_FLOOR))
            .collect();
        let obj = slot_objective(&trial, state, noise_power);
        if trial.iter().sum::<f64>() > p_max
            || obj < best_obj
            || rate_shortfall(&trial, state, min_rate, noise_power) > 0.0
        {
            break;
        }
        best = trial;
        best_obj = obj;
    }
    best
}

/// Clamps to the floor and scales back inside the sum budget; a no-op for
/// the strictly interior points the barrier solver returns.
fn project(p: &[f64], p_max: f64) -> Vec<f64> {
    let mut out: Vec<f64> = p.iter().map(|v| v.max(P_FLOOR)).collect();
    let total: f64 = out.iter().sum();
    if total > p_max {
        let f = p_max / total;
        for v in &mut out {
            *v = (*v * f).max(P_FLOOR);
        }
    }
    out
}
