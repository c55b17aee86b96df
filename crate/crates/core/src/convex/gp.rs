//! Geometric programs in posynomial form and their log-space convex image.
//!
//! A GP here is
//!
//! ```text
//! minimize   m0(x)
//! subject to f_i(x) <= 1,   x > 0
//! ```
//!
//! with `m0` a monomial and each `f_i` a posynomial. Substituting `y = ln x`
//! turns `ln m0` into an affine function and `ln f_i` into a log-sum-exp.

use std::fmt;

use super::functions::{Affine, LogSumExp};
use super::ConvexProgram;
use crate::error::{Error, Result};

/// `coef * prod_i x_i^{a_i}` over sparse exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub exps: Vec<(usize, f64)>,
}

impl Monomial {
    pub fn new(coef: f64, exps: Vec<(usize, f64)>) -> Self {
        Monomial { coef, exps }
    }

    pub fn constant(coef: f64) -> Self {
        Monomial { coef, exps: Vec::new() }
    }

    /// Multiplies in `x_var^power`.
    pub fn times_var(mut self, var: usize, power: f64) -> Self {
        match self.exps.iter_mut().find(|(v, _)| *v == var) {
            Some(e) => e.1 += power,
            None => self.exps.push((var, power)),
        }
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exps
            .iter()
            .fold(self.coef, |acc, &(i, a)| acc * x[i].powf(a))
    }

    /// `ln coef + a . y`, the monomial in log variables.
    pub fn log_affine(&self) -> Affine {
        Affine::new(self.exps.clone(), self.coef.ln())
    }
}

/// A sum of monomials.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Posynomial { terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Multiplies every term by a monomial.
    pub fn times(&self, m: &Monomial) -> Posynomial {
        Posynomial {
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let mut out = Monomial::new(t.coef * m.coef, t.exps.clone());
                    for &(v, a) in &m.exps {
                        out = out.times_var(v, a);
                    }
                    out
                })
                .collect(),
        }
    }
}

impl From<Monomial> for Posynomial {
    fn from(m: Monomial) -> Self {
        Posynomial { terms: vec![m] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpConstraint {
    pub label: String,
    pub lhs: Posynomial,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GpProblem {
    pub var_names: Vec<String>,
    pub objective: Option<Monomial>,
    pub constraints: Vec<GpConstraint>,
    /// Initial point in the original (positive) variables.
    pub warm_start: Option<Vec<f64>>,
}

impl GpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.var_names.push(name.into());
        self.var_names.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn set_objective(&mut self, m: Monomial) {
        self.objective = Some(m);
    }

    /// Adds `lhs <= 1`.
    pub fn constrain(&mut self, label: impl Into<String>, lhs: impl Into<Posynomial>) {
        self.constraints.push(GpConstraint {
            label: label.into(),
            lhs: lhs.into(),
        });
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.as_ref().map_or(1.0, |m| m.eval(x))
    }

    /// Largest `f_i(x) - 1` (0 when every constraint holds).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.lhs.eval(x) - 1.0)
            .fold(0.0, f64::max)
    }
}

/// Log-transforms a GP. The resulting program minimizes `ln m0(e^y)`.
pub fn gp_to_convex(gp: &GpProblem) -> Result<ConvexProgram> {
    let objective = gp.objective.clone().unwrap_or_else(|| Monomial::constant(1.0));
    check_coefficients("objective", std::slice::from_ref(&objective))?;
    let mut program = ConvexProgram::new(gp.num_vars(), Box::new(objective.log_affine()));
    for c in &gp.constraints {
        check_coefficients(&c.label, &c.lhs.terms)?;
        if c.lhs.terms.is_empty() {
            continue;
        }
        program.constrain(LogSumExp::new(
            c.lhs.terms.iter().map(Monomial::log_affine).collect(),
        ));
    }
    if let Some(w) = &gp.warm_start {
        if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveCoordinate {
                what: format!("warm start of `{}`", gp.var_names[i]),
                value: *v,
            });
        }
        program.warm_start = Some(w.iter().map(|v| v.ln()).collect());
    }
    Ok(program)
}

fn check_coefficients(label: &str, terms: &[Monomial]) -> Result<()> {
    match terms.iter().position(|t| !(t.coef > 0.0 && t.coef.is_finite())) {
        Some(term) => Err(Error::NonPositiveCoefficient {
            constraint: label.to_string(),
            term,
            coef: terms[term].coef,
        }),
        None => Ok(()),
    }
}

fn write_monomial(f: &mut fmt::Formatter<'_>, m: &Monomial, names: &[String]) -> fmt::Result {
    write!(f, "{:.8e}", m.coef)?;
    for &(v, a) in &m.exps {
        write!(f, " * {}^{:.8e}", names[v], a)?;
    }
    Ok(())
}

/// Plain-text dump: one `var` line per variable, the objective, then one
/// `s.t.` block per constraint with a term per line.
impl fmt::Display for GpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# gp: {} variables, {} constraints", self.num_vars(), self.constraints.len())?;
        for (i, name) in self.var_names.iter().enumerate() {
            match &self.warm_start {
                Some(w) => writeln!(f, "var {i} {name} start {:.8e}", w[i])?,
                None => writeln!(f, "var {i} {name}")?,
            }
        }
        write!(f, "minimize ")?;
        write_monomial(f, self.objective.as_ref().unwrap_or(&Monomial::constant(1.0)), &self.var_names)?;
        writeln!(f)?;
        for c in &self.constraints {
            writeln!(f, "s.t. {} <= 1", c.label)?;
            for t in &c.lhs.terms {
                write!(f, "  + ")?;
                write_monomial(f, t, &self.var_names)?;
                writeln!(f)?;
            }
        }
        Ok(())
    }
}
