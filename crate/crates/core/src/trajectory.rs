//! Trajectory optimization for fixed powers by successive geometric programs.
//!
//! With `ĥ_g = mu0 / L_g` and the epigraphs
//!
//! ```text
//! L_g   >= H^2 + |q - r_gu|^2          for every user u of group g
//! Psi_g >= mu0 I_g / L_g + sigma^2     I_g: frozen interfering power
//! ```
//!
//! each capacity reads `-ln(L Psi / (L Psi + p mu0))`. Condensing every
//! non-posynomial denominator at the current iterate yields a GP whose
//! optimum is a conservative surrogate of the true problem, exact at the
//! expansion point. Iterating re-expands at the new point.
//!
//! The SIC order is frozen inside each GP. Because the order can change
//! between iterates, every GP step is checked against the exact model and
//! shortened by halving until the exact objective does not drop.

use log::{debug, trace};

use crate::condense::{
    distance_epigraph_posynomial, distance_epigraph_weights, gamma_monomial, interference_posynomial,
    min_rate_monomial, objective_term_weights, speed_constraint_posynomial, speed_weights, Operand,
    PointOperand,
};
use crate::convex::{gp_to_convex, solve, GpProblem, Monomial, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::model::{
    multicast_capacity, IterationRecord, Point, PowerSchedule, ScenarioConfig, SlotChannelState, Stage,
    Trajectory, UserTrace, TOL_GEOM,
};

/// Largest number of step halvings tried before an SCA loop stops.
const MAX_HALVINGS: usize = 12;

/// Tight epigraph values `(L, Psi)`, each indexed `[slot][group]`.
pub type Epigraphs = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// `L = max_u (H^2 + |q - r|^2)` and `Psi = I + sigma^2` on every slot.
pub fn initialize_epigraphs(
    trajectory: &Trajectory,
    trace: &UserTrace,
    powers: &PowerSchedule,
    cfg: &ScenarioConfig,
) -> Result<Epigraphs> {
    let states = crate::model::channel_states(trajectory, trace, cfg)?;
    let l = states.iter().map(|s| s.max_dist_sq.clone()).collect();
    let psi = states
        .iter()
        .enumerate()
        .map(|(n, s)| {
            (0..s.num_groups())
                .map(|g| s.psi(powers.slot(n), g, cfg.noise_power))
                .collect()
        })
        .collect();
    Ok((l, psi))
}

/// A distance limit between two breaking points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub budget: f64,
}

/// One slot whose rate depends on a free breaking point.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTerm<'a> {
    /// Index of the breaking point serving this slot.
    pub point: usize,
    /// 1-based slot number, for diagnostics.
    pub slot: usize,
    pub users: &'a [Vec<Point>],
    pub powers: &'a [f64],
    /// Required rate per group in nats; 0 leaves the group unconstrained.
    pub min_rate: Vec<f64>,
}

/// A trajectory subproblem: some breaking points free, the rest fixed.
#[derive(Debug, Clone)]
pub struct TrajectoryProblem<'a> {
    pub points: Vec<Point>,
    pub free: Vec<bool>,
    pub links: Vec<Link>,
    pub slots: Vec<SlotTerm<'a>>,
    /// Added to the slot rates when logging, for slots not in `slots`.
    pub constant_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub points: Vec<Point>,
    pub iterations: usize,
    pub converged: bool,
    /// Exact rate sum over `slots` at the returned points.
    pub objective: f64,
}

/// Exact evaluation of a candidate point set: rate sum and largest QoS
/// shortfall over the problem's slots.
fn evaluate(problem: &TrajectoryProblem<'_>, points: &[Point], cfg: &ScenarioConfig) -> Result<(f64, f64)> {
    let mut objective = 0.0;
    let mut shortfall: f64 = 0.0;
    for term in &problem.slots {
        let st = SlotChannelState::with_slot(
            points[term.point],
            term.users,
            cfg.altitude,
            cfg.pathloss_ref,
            term.slot,
        )?;
        for g in 0..st.num_groups() {
            let c = multicast_capacity(term.powers, &st, g, cfg.noise_power);
            objective += c;
            shortfall = shortfall.max(term.min_rate[g] - c);
        }
    }
    Ok((objective, shortfall))
}

/// True when the feasible set of the free points is a single configuration:
/// a chain whose end points are exactly `sum budgets` apart, or free points
/// each squeezed between two fixed points as far apart as their two budgets.
fn is_forced(problem: &TrajectoryProblem<'_>) -> bool {
    let n = problem.points.len();
    let chain = problem.links.len() == n - 1
        && problem.links.iter().enumerate().all(|(k, l)| l.from == k && l.to == k + 1);
    if chain {
        let budget: f64 = problem.links.iter().map(|l| l.budget).sum();
        return problem.points[0].dist(problem.points[n - 1]) >= budget - TOL_GEOM;
    }
    (0..n).filter(|&i| problem.free[i]).all(|i| {
        let anchors: Vec<(Point, f64)> = problem
            .links
            .iter()
            .filter_map(|l| {
                let other = if l.from == i { l.to } else if l.to == i { l.from } else { return None };
                (!problem.free[other]).then(|| (problem.points[other], l.budget))
            })
            .collect();
        anchors.iter().enumerate().any(|(a, &(pa, ba))| {
            anchors[a + 1..]
                .iter()
                .any(|&(pb, bb)| pa.dist(pb) >= ba + bb - TOL_GEOM)
        })
    })
}

/// Builds the condensed GP at the expansion point `points`.
///
/// Variables are the shifted coordinates of every free point followed by
/// `(L, Psi)` for every slot term and group. The objective drops the
/// constant factor of the `Gamma` product.
pub fn build_gp(problem: &TrajectoryProblem<'_>, cfg: &ScenarioConfig) -> Result<(GpProblem, Vec<Option<(usize, usize)>>)> {
    let off = Point::new(cfg.coord_offset, cfg.coord_offset);
    let shifted: Vec<Point> = problem.points.iter().map(|&p| p + off).collect();
    let mut gp = GpProblem::new();
    let mut start = Vec::new();
    let mut var_of: Vec<Option<(usize, usize)>> = vec![None; problem.points.len()];
    for (i, &free) in problem.free.iter().enumerate() {
        if free {
            let ix = gp.add_var(format!("x{i}"));
            let iy = gp.add_var(format!("y{i}"));
            start.push(shifted[i].x);
            start.push(shifted[i].y);
            var_of[i] = Some((ix, iy));
        }
    }
    let operand = |i: usize| match var_of[i] {
        Some((ix, iy)) => PointOperand::var(ix, iy),
        None => PointOperand::fixed(shifted[i]),
    };

    for link in &problem.links {
        if !(problem.free[link.from] || problem.free[link.to]) {
            continue;
        }
        let w = speed_weights(shifted[link.to], shifted[link.from], link.budget)?;
        gp.constrain(
            format!("speed[{}-{}]", link.from, link.to),
            speed_constraint_posynomial(operand(link.to), operand(link.from), &w, link.budget),
        );
    }

    let mut objective = Monomial::constant(1.0);
    for term in &problem.slots {
        let q = problem.points[term.point];
        let st = SlotChannelState::with_slot(q, term.users, cfg.altitude, cfg.pathloss_ref, term.slot)?;
        let qop = operand(term.point);
        for g in 0..st.num_groups() {
            let l0 = st.max_dist_sq[g];
            let interf = st.interfering_power(term.powers, g);
            let psi0 = cfg.pathloss_ref * interf / l0 + cfg.noise_power;
            let l = Operand::Var(gp.add_var(format!("L{}_{g}", term.slot)));
            let psi = Operand::Var(gp.add_var(format!("Psi{}_{g}", term.slot)));
            start.push(l0);
            start.push(psi0);
            for (u, &r) in term.users[g].iter().enumerate() {
                let rs = r + off;
                let w = distance_epigraph_weights(shifted[term.point], rs, l0)?;
                gp.constrain(
                    format!("dist[{},{g},{u}]", term.slot),
                    distance_epigraph_posynomial(qop, l, rs, &w, cfg.altitude),
                );
            }
            gp.constrain(
                format!("interf[{},{g}]", term.slot),
                interference_posynomial(psi, l, interf, cfg.noise_power, cfg.pathloss_ref),
            );
            let p = term.powers[g];
            let w = objective_term_weights(l0, psi0, p, cfg.pathloss_ref)?;
            let gamma = gamma_monomial(l, psi, &w, p, cfg.pathloss_ref);
            if term.min_rate[g] > 0.0 {
                gp.constrain(format!("rate[{},{g}]", term.slot), min_rate_monomial(&gamma, term.min_rate[g]));
            }
            for &(v, a) in &gamma.exps {
                objective = objective.times_var(v, a);
            }
        }
    }
    gp.set_objective(objective);
    gp.warm_start = Some(start);
    Ok((gp, var_of))
}

/// The SCA loop on a generic trajectory subproblem.
///
/// Returns `Error::Infeasible` when the very first GP has no strictly
/// feasible point and the starting configuration misses the QoS targets.
pub fn solve_sca(
    mut problem: TrajectoryProblem<'_>,
    cfg: &ScenarioConfig,
    outer: usize,
    log: &mut Vec<IterationRecord>,
) -> Result<ScaOutcome> {
    let opts = SolverOptions::from(&cfg.settings);
    let off = Point::new(cfg.coord_offset, cfg.coord_offset);
    let (mut objective, mut shortfall) = evaluate(&problem, &problem.points, cfg)?;
    if !problem.free.iter().any(|&f| f) || problem.slots.is_empty() || is_forced(&problem) {
        if shortfall > 0.0 {
            return Err(Error::Infeasible {
                family: "trajectory".into(),
                scale: 1.0,
            });
        }
        return Ok(ScaOutcome {
            points: problem.points,
            iterations: 0,
            converged: true,
            objective,
        });
    }

    let mut iterations = 0;
    let mut converged = false;
    for t1 in 1..=cfg.settings.max_sca_iter {
        iterations = t1;
        let (gp, var_of) = build_gp(&problem, cfg)?;
        let report = solve(&gp_to_convex(&gp)?, &opts);
        if report.status == SolveStatus::Infeasible {
            debug!("trajectory GP infeasible at SCA iteration {t1} (violation {:.3e})", report.max_violation);
            if shortfall > 0.0 {
                return Err(Error::Infeasible {
                    family: "trajectory".into(),
                    scale: 1.0,
                });
            }
            converged = true;
            break;
        }
        let x: Vec<f64> = report.x.iter().map(|v| v.exp()).collect();
        let candidate: Vec<Point> = problem
            .points
            .iter()
            .zip(&var_of)
            .map(|(&p, v)| match v {
                Some((ix, iy)) => Point::new(x[*ix], x[*iy]) - off,
                None => p,
            })
            .collect();

        // Exact-model safeguard along the segment towards the GP solution.
        let mut theta = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<Point> = problem
                .points
                .iter()
                .zip(&candidate)
                .map(|(&a, &b)| a + (b - a) * theta)
                .collect();
            let (obj, short) = evaluate(&problem, &trial, cfg)?;
            let better = if shortfall > 0.0 {
                short < shortfall
            } else {
                short <= 0.0 && obj >= objective
            };
            if better {
                accepted = Some((trial, obj, short));
                break;
            }
            theta *= 0.5;
        }
        let Some((next, obj, short)) = accepted else {
            trace!("no ascent along the GP step at SCA iteration {t1}; stopping");
            converged = true;
            log.push(IterationRecord {
                stage: Stage::Trajectory,
                outer,
                inner: t1,
                movement: 0.0,
                objective: objective + problem.constant_objective,
            });
            break;
        };
        let movement = next
            .iter()
            .zip(&problem.points)
            .map(|(a, b)| a.dist_sq(*b))
            .sum::<f64>()
            .sqrt();
        problem.points = next;
        objective = obj;
        shortfall = short;
        log.push(IterationRecord {
            stage: Stage::Trajectory,
            outer,
            inner: t1,
            movement,
            objective: objective + problem.constant_objective,
        });
        if movement <= cfg.eps_traj {
            converged = true;
            break;
        }
    }
    if shortfall > 0.0 {
        return Err(Error::Infeasible {
            family: "trajectory".into(),
            scale: 1.0,
        });
    }
    Ok(ScaOutcome {
        points: problem.points,
        iterations,
        converged,
        objective,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub trajectory: Trajectory,
    /// Tight `(L, Psi)` at the returned trajectory.
    pub epigraphs: Epigraphs,
    pub iterations: usize,
    pub converged: bool,
}

/// Optimizes all interior breaking points for fixed powers.
///
/// `min_rate_scale` multiplies the configured reserved rates.
pub fn solve_trajectory(
    powers: &PowerSchedule,
    trace: &UserTrace,
    cfg: &ScenarioConfig,
    init: &Trajectory,
    min_rate_scale: f64,
    outer: usize,
    log: &mut Vec<IterationRecord>,
) -> Result<TrajectoryOutcome> {
    let n = cfg.num_slots;
    let mut free = vec![true; n + 1];
    free[0] = false;
    free[n] = false;
    let links = (1..=n)
        .map(|k| Link {
            from: k - 1,
            to: k,
            budget: cfg.s_max(),
        })
        .collect();
    // Slot s is served by breaking point s + 1; the last one is fixed.
    let slots: Vec<SlotTerm<'_>> = (0..n.saturating_sub(1))
        .map(|s| SlotTerm {
            point: s + 1,
            slot: s + 1,
            users: trace.slot(s),
            powers: powers.slot(s),
            min_rate: (0..trace.slot(s).len())
                .map(|g| cfg.required_rate(g, s, min_rate_scale))
                .collect(),
        })
        .collect();
    let last = n - 1;
    let last_state = SlotChannelState::with_slot(init.points[n], trace.slot(last), cfg.altitude, cfg.pathloss_ref, n)?;
    let constant_objective = crate::power::slot_objective(powers.slot(last), &last_state, cfg.noise_power);
    let problem = TrajectoryProblem {
        points: init.points.clone(),
        free,
        links,
        slots,
        constant_objective,
    };
    let out = solve_sca(problem, cfg, outer, log)?;
    let trajectory = Trajectory { points: out.points };
    let epigraphs = initialize_epigraphs(&trajectory, trace, powers, cfg)?;
    Ok(TrajectoryOutcome {
        trajectory,
        epigraphs,
        iterations: out.iterations,
        converged: out.converged,
    })
}
