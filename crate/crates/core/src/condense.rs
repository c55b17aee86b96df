//! Monomial condensation of the trajectory subproblem.
//!
//! Each non-GP constraint of the trajectory step has the shape
//! `numerator / (u_1 + ... + u_k) <= 1` with posynomial numerator. Replacing
//! the denominator by the weighted geometric mean `prod (u_i / w_i)^{w_i}`,
//! with `w_i = u_i / sum u` taken at an expansion point, under-estimates it
//! everywhere (AM-GM) and is exact at the expansion point. The resulting
//! posynomial constraint is therefore an inner approximation.
//!
//! Coordinates here live in the shifted frame, where every x and y is
//! strictly positive.
//!
//! The numeric functions evaluate a condensed expression at a point; the
//! `*_posynomial` builders emit the same expressions as GP terms.

use crate::convex::{Monomial, Posynomial};
use crate::error::{Error, Result};
use crate::model::Point;

/// Weights smaller than this are clamped and the set renormalized.
pub const WEIGHT_FLOOR: f64 = 1e-9;

/// Normalizes strictly positive terms into condensation weights.
pub fn condensation_weights<const K: usize>(terms: [f64; K]) -> [f64; K] {
    let total: f64 = terms.iter().sum();
    let mut w = terms.map(|t| t / total);
    if w.iter().any(|&v| v < WEIGHT_FLOOR) {
        for v in &mut w {
            *v = v.max(WEIGHT_FLOOR);
        }
        let s: f64 = w.iter().sum();
        for v in &mut w {
            *v /= s;
        }
    }
    w
}

/// `prod (u_i / w_i)^{w_i}`.
pub fn weighted_geometric_mean(terms: &[f64], weights: &[f64]) -> f64 {
    terms
        .iter()
        .zip(weights)
        .map(|(u, w)| w * (u / w).ln())
        .sum::<f64>()
        .exp()
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveCoordinate {
            what: what.to_string(),
            value: v,
        })
    }
}

fn positive_point(what: &str, p: Point) -> Result<()> {
    positive(what, p.x)?;
    positive(what, p.y)
}

// ---- speed constraint -------------------------------------------------------

/// `(alpha, beta, gamma)` for `2 x x' + 2 y y' + S_max^2` at the expansion
/// point `(q, q_prev)`.
pub fn speed_weights(q: Point, q_prev: Point, s_max: f64) -> Result<[f64; 3]> {
    positive_point("q[n]", q)?;
    positive_point("q[n-1]", q_prev)?;
    positive("S_max", s_max)?;
    Ok(condensation_weights([
        2.0 * q.x * q_prev.x,
        2.0 * q.y * q_prev.y,
        s_max * s_max,
    ]))
}

/// Exact ratio `(x^2 + x'^2 + y^2 + y'^2) / (2 x x' + 2 y y' + S_max^2)`;
/// at most 1 iff `|q - q_prev| <= S_max`.
pub fn speed_ratio(q: Point, q_prev: Point, s_max: f64) -> f64 {
    (q.norm_sq() + q_prev.norm_sq()) / (2.0 * q.dot(q_prev) + s_max * s_max)
}

/// The condensed speed constraint evaluated at `(q, q_prev)`.
pub fn speed_constraint_monomial(q: Point, q_prev: Point, weights: &[f64; 3], s_max: f64) -> f64 {
    let denom = weighted_geometric_mean(
        &[2.0 * q.x * q_prev.x, 2.0 * q.y * q_prev.y, s_max * s_max],
        weights,
    );
    (q.norm_sq() + q_prev.norm_sq()) / denom
}

// ---- distance epigraph ------------------------------------------------------

/// `(eta, kappa, vartheta)` for `2 x_q x_r + 2 y_q y_r + L` at the expansion
/// point `(q, L_prev)`.
pub fn distance_epigraph_weights(q: Point, r: Point, l_prev: f64) -> Result<[f64; 3]> {
    positive_point("q[n]", q)?;
    positive_point("user position", r)?;
    positive("L", l_prev)?;
    Ok(condensation_weights([2.0 * q.x * r.x, 2.0 * q.y * r.y, l_prev]))
}

/// Exact ratio `(|q|^2 + |r|^2 + H^2) / (2 q.r + L)`; at most 1 iff
/// `H^2 + |q - r|^2 <= L`.
pub fn distance_ratio(q: Point, l: f64, r: Point, altitude: f64) -> f64 {
    (q.norm_sq() + r.norm_sq() + altitude * altitude) / (2.0 * q.dot(r) + l)
}

/// The condensed distance-epigraph constraint evaluated at `(q, L)`.
pub fn distance_epigraph_monomial(q: Point, l: f64, r: Point, weights: &[f64; 3], altitude: f64) -> f64 {
    let denom = weighted_geometric_mean(&[2.0 * q.x * r.x, 2.0 * q.y * r.y, l], weights);
    (q.norm_sq() + r.norm_sq() + altitude * altitude) / denom
}

// ---- objective terms --------------------------------------------------------

/// `(nu, xi)` for `L Psi + p mu0` at the expansion point.
pub fn objective_term_weights(l_prev: f64, psi_prev: f64, p: f64, mu0: f64) -> Result<[f64; 2]> {
    positive("L", l_prev)?;
    positive("Psi", psi_prev)?;
    positive("p", p)?;
    Ok(condensation_weights([l_prev * psi_prev, p * mu0]))
}

/// Exact ratio `L Psi / (L Psi + p mu0)`, equal to `exp(-C)` when `L` and
/// `Psi` are tight.
pub fn gamma_ratio(l: f64, psi: f64, p: f64, mu0: f64) -> f64 {
    l * psi / (l * psi + p * mu0)
}

/// `Gamma = L Psi (L Psi / nu)^{-nu} (p mu0 / xi)^{-xi}`.
pub fn gamma_term(l: f64, psi: f64, weights: &[f64; 2], p: f64, mu0: f64) -> f64 {
    l * psi / weighted_geometric_mean(&[l * psi, p * mu0], weights)
}

/// `(mu0 * I / L + sigma^2) / Psi` with `I` the frozen interfering power.
pub fn interference_epigraph_constraint(
    psi: f64,
    l: f64,
    p_fixed: &[f64],
    sic_above: &[usize],
    noise_power: f64,
    mu0: f64,
) -> f64 {
    let interf: f64 = sic_above.iter().map(|&j| p_fixed[j]).sum();
    (mu0 * interf / l + noise_power) / psi
}

/// `Gamma * exp(C_rsv)`.
pub fn min_rate_constraint_gp(gamma: f64, min_rate: f64) -> f64 {
    gamma * min_rate.exp()
}

// ---- GP builders ------------------------------------------------------------

/// A scalar that is either a GP variable or a known positive constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Operand {
    Var(usize),
    Const(f64),
}

impl Operand {
    pub fn value(self, x: &[f64]) -> f64 {
        match self {
            Operand::Var(i) => x[i],
            Operand::Const(c) => c,
        }
    }
}

/// A 2-D point whose coordinates are GP operands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointOperand {
    pub x: Operand,
    pub y: Operand,
}

impl PointOperand {
    pub fn fixed(p: Point) -> Self {
        PointOperand {
            x: Operand::Const(p.x),
            y: Operand::Const(p.y),
        }
    }

    pub fn var(ix: usize, iy: usize) -> Self {
        PointOperand {
            x: Operand::Var(ix),
            y: Operand::Var(iy),
        }
    }

    pub fn value(self, x: &[f64]) -> Point {
        Point::new(self.x.value(x), self.y.value(x))
    }
}

/// Multiplies `m` by `op^power`.
pub fn pow_into(m: Monomial, op: Operand, power: f64) -> Monomial {
    match op {
        Operand::Var(i) => m.times_var(i, power),
        Operand::Const(c) => Monomial::new(m.coef * c.powf(power), m.exps),
    }
}

fn square(op: Operand) -> Monomial {
    pow_into(Monomial::constant(1.0), op, 2.0)
}

/// `prod (u_i / w_i)^{-w_i}` with `u_i = coef_i * prod ops^1`.
fn inverse_condensed(factors: &[(f64, &[Operand])], weights: &[f64]) -> Monomial {
    let mut m = Monomial::constant(1.0);
    for ((coef, ops), &w) in factors.iter().zip(weights) {
        m.coef *= (coef / w).powf(-w);
        for &op in *ops {
            m = pow_into(m, op, -w);
        }
    }
    m
}

/// Condensed speed constraint between two (possibly fixed) breaking points.
pub fn speed_constraint_posynomial(
    q: PointOperand,
    q_prev: PointOperand,
    weights: &[f64; 3],
    s_max: f64,
) -> Posynomial {
    let numerator = Posynomial::new(vec![square(q.x), square(q_prev.x), square(q.y), square(q_prev.y)]);
    let inv = inverse_condensed(
        &[
            (2.0, &[q.x, q_prev.x]),
            (2.0, &[q.y, q_prev.y]),
            (s_max * s_max, &[]),
        ],
        weights,
    );
    simplify(numerator.times(&inv))
}

/// Condensed distance epigraph `H^2 + |q - r|^2 <= L` for a free point.
pub fn distance_epigraph_posynomial(
    q: PointOperand,
    l: Operand,
    r: Point,
    weights: &[f64; 3],
    altitude: f64,
) -> Posynomial {
    let numerator = Posynomial::new(vec![
        square(q.x),
        square(q.y),
        Monomial::constant(r.norm_sq() + altitude * altitude),
    ]);
    let inv = inverse_condensed(
        &[(2.0 * r.x, &[q.x]), (2.0 * r.y, &[q.y]), (1.0, &[l])],
        weights,
    );
    simplify(numerator.times(&inv))
}

/// Exact epigraph `(H^2 + d^2) / L <= 1` for a breaking point that is not a
/// variable.
pub fn fixed_distance_posynomial(squared_3d_distance: f64, l: Operand) -> Posynomial {
    pow_into(Monomial::constant(squared_3d_distance), l, -1.0).into()
}

/// `Gamma` as a monomial in `(L, Psi)`.
pub fn gamma_monomial(l: Operand, psi: Operand, weights: &[f64; 2], p: f64, mu0: f64) -> Monomial {
    let [nu, xi] = *weights;
    // (L Psi)^{1 - nu} nu^{nu} (p mu0 / xi)^{-xi}
    let coef = nu.powf(nu) * (p * mu0 / xi).powf(-xi);
    let m = pow_into(Monomial::constant(coef), l, 1.0 - nu);
    pow_into(m, psi, 1.0 - nu)
}

/// `mu0 I L^{-1} Psi^{-1} + sigma^2 Psi^{-1}`.
pub fn interference_posynomial(psi: Operand, l: Operand, interfering_power: f64, noise_power: f64, mu0: f64) -> Posynomial {
    let mut terms = vec![pow_into(Monomial::constant(noise_power), psi, -1.0)];
    if interfering_power > 0.0 {
        let m = pow_into(Monomial::constant(mu0 * interfering_power), l, -1.0);
        terms.push(pow_into(m, psi, -1.0));
    }
    Posynomial::new(terms)
}

/// `Gamma exp(C_rsv)`.
pub fn min_rate_monomial(gamma: &Monomial, min_rate: f64) -> Monomial {
    Monomial::new(gamma.coef * min_rate.exp(), gamma.exps.clone())
}

/// Drops zero exponents and merges constant-only terms.
fn simplify(p: Posynomial) -> Posynomial {
    let mut constant = 0.0;
    let mut terms = Vec::with_capacity(p.terms.len());
    for mut t in p.terms {
        t.exps.retain(|&(_, a)| a != 0.0);
        if t.exps.is_empty() {
            constant += t.coef;
        } else {
            terms.push(t);
        }
    }
    if constant > 0.0 {
        terms.push(Monomial::constant(constant));
    }
    Posynomial::new(terms)
}
