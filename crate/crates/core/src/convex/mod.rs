//! Smooth convex programs and the solver used for both SCA subproblems.
//!
//! The trajectory step arrives here as a geometric program (see [`gp`]) and
//! is solved in log-space; the power step is built directly from
//! [`NegLogSum`] and [`Affine`] pieces.

mod barrier;
mod functions;
pub mod gp;

pub use barrier::BarrierSolver;
pub use functions::{Affine, LogSumExp, NegLogSum, SmoothConvex, SparseVec};
pub use gp::{gp_to_convex, GpProblem, Monomial, Posynomial};

use crate::model::SolverSettings;

/// `minimize f0(x) s.t. g_i(x) <= 0, lower <= x <= upper`.
#[derive(Debug)]
pub struct ConvexProgram {
    pub num_vars: usize,
    pub objective: Box<dyn SmoothConvex>,
    pub constraints: Vec<Box<dyn SmoothConvex>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub warm_start: Option<Vec<f64>>,
}

impl ConvexProgram {
    pub fn new(num_vars: usize, objective: Box<dyn SmoothConvex>) -> Self {
        ConvexProgram {
            num_vars,
            objective,
            constraints: Vec::new(),
            lower: vec![f64::NEG_INFINITY; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            warm_start: None,
        }
    }

    pub fn constrain(&mut self, g: impl SmoothConvex + 'static) {
        self.constraints.push(Box::new(g));
    }

    /// Largest constraint or bound violation at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let cons = self
            .constraints
            .iter()
            .map(|c| c.value(x))
            .fold(0.0, f64::max);
        let bounds = (0..self.num_vars)
            .map(|i| (self.lower[i] - x[i]).max(x[i] - self.upper[i]))
            .fold(0.0, f64::max);
        cons.max(bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub kkt_residual: f64,
    /// Newton iterations, Phase I included.
    pub iterations: usize,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub kkt_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kkt_tol: 1e-6,
            feas_tol: 1e-8,
            max_iter: 500,
        }
    }
}

impl From<&SolverSettings> for SolverOptions {
    fn from(s: &SolverSettings) -> Self {
        SolverOptions {
            kkt_tol: s.kkt_tol,
            feas_tol: s.feas_tol,
            max_iter: s.max_newton_iter,
        }
    }
}

/// Pluggable backend for the convex subproblems.
pub trait Solver {
    fn solve(&self, program: &ConvexProgram, opts: &SolverOptions) -> SolveReport;
}

/// Solves with the default barrier method.
pub fn solve(program: &ConvexProgram, opts: &SolverOptions) -> SolveReport {
    BarrierSolver.solve(program, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Square;

    impl SmoothConvex for Square {
        fn value(&self, x: &[f64]) -> f64 {
            x[0] * x[0]
        }
        fn gradient(&self, x: &[f64], out: &mut SparseVec) {
            out.clear();
            out.push((0, 2.0 * x[0]));
        }
        fn add_hessian(&self, _x: &[f64], scale: f64, h: &mut nalgebra::DMatrix<f64>) {
            h[(0, 0)] += 2.0 * scale;
        }
    }

    #[test]
    fn textbook_kkt() {
        // min x^2 s.t. x >= 1
        let mut p = ConvexProgram::new(1, Box::new(Square));
        p.constrain(Affine::new(vec![(0, -1.0)], 1.0));
        let r = solve(&p, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-5, "{:?}", r);
        assert!((r.objective - 1.0).abs() < 1e-5);
        assert!(r.kkt_residual <= 1e-6);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn monotone_objective_hits_bound() {
        // min -ln(1 + x) s.t. 0 <= x <= 3
        let obj = NegLogSum::new(vec![(1.0, Affine::new(vec![(0, 1.0)], 1.0))], Affine::new(vec![], 0.0));
        let mut p = ConvexProgram::new(1, Box::new(obj));
        p.lower[0] = 0.0;
        p.upper[0] = 3.0;
        let r = solve(&p, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-5);
    }

    #[test]
    fn infeasible_detected() {
        // x <= -1 and x >= 1
        let mut p = ConvexProgram::new(1, Box::new(Square));
        p.constrain(Affine::new(vec![(0, 1.0)], 1.0));
        p.constrain(Affine::new(vec![(0, -1.0)], 1.0));
        let r = solve(&p, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.max_violation > 0.5);
    }

    #[test]
    fn warm_start_and_determinism() {
        let mut p = ConvexProgram::new(1, Box::new(Square));
        p.constrain(Affine::new(vec![(0, -1.0)], 1.0));
        p.warm_start = Some(vec![5.0]);
        let a = solve(&p, &SolverOptions::default());
        let b = solve(&p, &SolverOptions::default());
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_cap_reports_max_iter() {
        let mut p = ConvexProgram::new(1, Box::new(Square));
        p.constrain(Affine::new(vec![(0, -1.0)], 1.0));
        p.warm_start = Some(vec![5.0]);
        let r = solve(
            &p,
            &SolverOptions {
                max_iter: 3,
                ..SolverOptions::default()
            },
        );
        assert_eq!(r.status, SolveStatus::MaxIter);
        assert!(r.x[0] > 1.0);
    }
}
