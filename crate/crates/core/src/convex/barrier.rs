//! Log-barrier interior-point method with a Phase-I feasibility search.

use log::trace;
use nalgebra::{DMatrix, DVector};

use super::functions::{Affine, SmoothConvex, SparseVec};
use super::{ConvexProgram, SolveReport, SolveStatus, Solver, SolverOptions};

const ALPHA: f64 = 0.01;
const BETA: f64 = 0.5;
const MU: f64 = 20.0;
const MAX_CENTERING: usize = 80;
const DECREMENT_TOL: f64 = 1e-13;

/// Dense Newton barrier solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct BarrierSolver;

impl Solver for BarrierSolver {
    fn solve(&self, program: &ConvexProgram, opts: &SolverOptions) -> SolveReport {
        let mut budget = Budget {
            used: 0,
            cap: opts.max_iter,
        };
        let bounds = bound_constraints(program);
        let cons: Vec<&dyn SmoothConvex> = program
            .constraints
            .iter()
            .map(|c| c.as_ref() as &dyn SmoothConvex)
            .chain(bounds.iter().map(|c| c as &dyn SmoothConvex))
            .collect();
        let n = program.num_vars;
        let x0 = initial_point(program);

        let feasible_start = program.objective.value(&x0).is_finite() && max_value(&cons, &x0) < 0.0;
        let x = if feasible_start {
            x0
        } else {
            match phase_one(program.objective.as_ref(), &cons, &x0, opts, &mut budget) {
                PhaseOne::Interior(x) => x,
                PhaseOne::Empty { x, violation } => {
                    return report(program.objective.as_ref(), &cons, x, f64::INFINITY, budget.used, SolveStatus::Infeasible)
                        .with_violation(violation)
                }
            }
        };

        let problem = Barrier {
            objective: program.objective.as_ref(),
            constraints: &cons,
            n,
        };
        let m = cons.len() as f64;
        let mut x = x;
        let mut t = 1.0;
        loop {
            problem.center(&mut x, t, &mut budget);
            if budget.exhausted() {
                break;
            }
            if m / t <= opts.kkt_tol {
                if problem.stationarity(&x, t) > opts.kkt_tol {
                    problem.center(&mut x, t, &mut budget);
                }
                break;
            }
            t *= MU;
        }
        let kkt = problem.stationarity(&x, t).max(m / t);
        let status = if kkt <= opts.kkt_tol {
            SolveStatus::Optimal
        } else {
            SolveStatus::MaxIter
        };
        report(program.objective.as_ref(), &cons, x, kkt, budget.used, status)
    }
}

struct Budget {
    used: usize,
    cap: usize,
}

impl Budget {
    fn tick(&mut self) -> bool {
        self.used += 1;
        self.used <= self.cap
    }

    fn exhausted(&self) -> bool {
        self.used >= self.cap
    }
}

fn bound_constraints(program: &ConvexProgram) -> Vec<Affine> {
    let mut out = Vec::new();
    for i in 0..program.num_vars {
        if program.lower[i].is_finite() {
            out.push(Affine::new(vec![(i, -1.0)], program.lower[i]));
        }
        if program.upper[i].is_finite() {
            out.push(Affine::new(vec![(i, 1.0)], -program.upper[i]));
        }
    }
    out
}

fn initial_point(program: &ConvexProgram) -> Vec<f64> {
    if let Some(w) = &program.warm_start {
        return w.clone();
    }
    (0..program.num_vars)
        .map(|i| {
            let (l, u) = (program.lower[i], program.upper[i]);
            match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l + 1.0,
                (false, true) => u - 1.0,
                (false, false) => 0.0,
            }
        })
        .collect()
}

fn max_value(cons: &[&dyn SmoothConvex], x: &[f64]) -> f64 {
    cons.iter()
        .map(|c| c.value(x))
        .fold(f64::NEG_INFINITY, |a, v| if v.is_nan() { f64::INFINITY } else { a.max(v) })
}

fn report(
    objective: &dyn SmoothConvex,
    cons: &[&dyn SmoothConvex],
    x: Vec<f64>,
    kkt: f64,
    iterations: usize,
    status: SolveStatus,
) -> SolveReport {
    let viol = max_value(cons, &x).max(0.0);
    SolveReport {
        objective: objective.value(&x),
        x,
        max_violation: viol,
        kkt_residual: kkt,
        iterations,
        status,
    }
}

impl SolveReport {
    fn with_violation(mut self, v: f64) -> Self {
        self.max_violation = self.max_violation.max(v);
        self
    }
}

/// `t f0(x) - sum ln(-g_i(x))`.
struct Barrier<'a> {
    objective: &'a dyn SmoothConvex,
    constraints: &'a [&'a dyn SmoothConvex],
    n: usize,
}

impl Barrier<'_> {
    fn value(&self, x: &[f64], t: f64) -> f64 {
        let f = self.objective.value(x);
        if !f.is_finite() {
            return f64::INFINITY;
        }
        let mut v = t * f;
        for c in self.constraints {
            let g = c.value(x);
            if !(g < 0.0) {
                return f64::INFINITY;
            }
            v -= (-g).ln();
        }
        v
    }

    fn grad_hess(&self, x: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut sg = SparseVec::new();
        self.objective.gradient(x, &mut sg);
        for &(i, v) in &sg {
            grad[i] += t * v;
        }
        self.objective.add_hessian(x, t, &mut hess);
        for c in self.constraints {
            let g = c.value(x);
            let inv = -1.0 / g;
            c.gradient(x, &mut sg);
            for &(i, v) in &sg {
                grad[i] += inv * v;
            }
            for &(i, vi) in &sg {
                for &(j, vj) in &sg {
                    hess[(i, j)] += inv * inv * vi * vj;
                }
            }
            c.add_hessian(x, inv, &mut hess);
        }
        (grad, hess)
    }

    /// Infinity norm of the Lagrangian gradient with the central-path duals
    /// `1 / (-t g_i)`.
    fn stationarity(&self, x: &[f64], t: f64) -> f64 {
        let mut grad = DVector::zeros(self.n);
        let mut sg = SparseVec::new();
        self.objective.gradient(x, &mut sg);
        for &(i, v) in &sg {
            grad[i] += v;
        }
        for c in self.constraints {
            let dual = -1.0 / (t * c.value(x));
            c.gradient(x, &mut sg);
            for &(i, v) in &sg {
                grad[i] += dual * v;
            }
        }
        grad.amax()
    }

    /// Damped Newton minimization of the barrier at fixed `t`. Returns true
    /// when the Newton decrement reached tolerance.
    fn center(&self, x: &mut Vec<f64>, t: f64, budget: &mut Budget) -> bool {
        let mut phi = self.value(x, t);
        for _ in 0..MAX_CENTERING {
            if !budget.tick() {
                return false;
            }
            let (grad, hess) = self.grad_hess(x, t);
            let Some(step) = newton_step(hess, &grad) else {
                return false;
            };
            let dec = -grad.dot(&step);
            if dec / 2.0 <= DECREMENT_TOL || dec <= 0.0 {
                return true;
            }
            // In the quadratic region the Armijo test drowns in round-off of
            // `phi`; accept any interior full step there.
            let quadratic = dec < 1e-6;
            let mut s = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + s * d).collect();
                let v = self.value(&trial, t);
                if v.is_finite() && (quadratic || v <= phi - ALPHA * s * dec) {
                    phi = v;
                    *x = trial;
                    break;
                }
                s *= BETA;
                if s < 1e-16 {
                    return true;
                }
            }
        }
        false
    }
}

fn newton_step(mut hess: DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let scale = (0..n).map(|i| hess[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += ridge;
        }
        if let Some(ch) = h.cholesky() {
            let step = ch.solve(&(-grad));
            if step.iter().all(|v| v.is_finite()) {
                return Some(step);
            }
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 100.0 };
    }
    hess.fill(0.0);
    None
}

enum PhaseOne {
    Interior(Vec<f64>),
    Empty { x: Vec<f64>, violation: f64 },
}

/// Minimizes `s` subject to `g_i(x) <= s`, stopping at the first centered
/// point that is strictly feasible for the original constraints.
fn phase_one(
    objective: &dyn SmoothConvex,
    cons: &[&dyn SmoothConvex],
    x0: &[f64],
    opts: &SolverOptions,
    budget: &mut Budget,
) -> PhaseOne {
    let n = x0.len();
    let lifted: Vec<Lifted> = cons.iter().map(|c| Lifted { inner: *c, n }).collect();
    let floor = Affine::new(vec![(n, -1.0)], -1.0); // s >= -1
    let domain = DomainGuard { objective, n };
    let mut all: Vec<&dyn SmoothConvex> = lifted.iter().map(|c| c as &dyn SmoothConvex).collect();
    all.push(&floor);
    all.push(&domain);
    let s_obj = Affine::new(vec![(n, 1.0)], 0.0);
    let problem = Barrier {
        objective: &s_obj,
        constraints: &all,
        n: n + 1,
    };
    let g0 = max_value(cons, x0);
    let mut z: Vec<f64> = x0.to_vec();
    z.push(if g0.is_finite() { g0.max(-0.5) + 1.0 } else { 1e3 });
    if !objective.value(x0).is_finite() {
        return PhaseOne::Empty {
            x: x0.to_vec(),
            violation: f64::INFINITY,
        };
    }
    let m = all.len() as f64;
    let mut t = 1.0;
    loop {
        let _ = problem.center(&mut z, t, budget);
        let x = &z[..n];
        if max_value(cons, x) < 0.0 {
            return PhaseOne::Interior(x.to_vec());
        }
        if budget.exhausted() || m / t < 0.1 * opts.feas_tol {
            let violation = max_value(cons, x).max(0.0);
            trace!("phase one stopped at s = {:.3e}", z[n]);
            return PhaseOne::Empty {
                x: x.to_vec(),
                violation,
            };
        }
        t *= MU;
    }
}

/// `g(x) - s` over the lifted variable vector `(x, s)`.
#[derive(Debug)]
struct Lifted<'a> {
    inner: &'a dyn SmoothConvex,
    n: usize,
}

impl SmoothConvex for Lifted<'_> {
    fn value(&self, z: &[f64]) -> f64 {
        self.inner.value(&z[..self.n]) - z[self.n]
    }

    fn gradient(&self, z: &[f64], out: &mut SparseVec) {
        self.inner.gradient(&z[..self.n], out);
        out.push((self.n, -1.0));
    }

    fn add_hessian(&self, z: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        self.inner.add_hessian(&z[..self.n], scale, hess);
    }
}

/// Keeps Phase-I iterates inside the objective's domain: -1 inside, +inf outside.
#[derive(Debug)]
struct DomainGuard<'a> {
    objective: &'a dyn SmoothConvex,
    n: usize,
}

impl SmoothConvex for DomainGuard<'_> {
    fn value(&self, z: &[f64]) -> f64 {
        if self.objective.value(&z[..self.n]).is_finite() {
            -1.0
        } else {
            f64::INFINITY
        }
    }

    fn gradient(&self, _z: &[f64], out: &mut SparseVec) {
        out.clear();
    }

    fn add_hessian(&self, _z: &[f64], _scale: f64, _hess: &mut DMatrix<f64>) {}
}
