use std::fmt;

use nalgebra::DMatrix;

/// Sparse linear form `sum_i coef_i * x[i]`.
pub type SparseVec = Vec<(usize, f64)>;

/// A twice-differentiable convex function of the program variables.
///
/// `value` returns `+inf` outside the function's domain so that line
/// searches can reject such points.
pub trait SmoothConvex: fmt::Debug + Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Writes the gradient into `out` as sparse `(index, value)` pairs.
    fn gradient(&self, x: &[f64], out: &mut SparseVec);

    /// Adds `scale * hessian(x)` into `hess`.
    fn add_hessian(&self, x: &[f64], scale: f64, hess: &mut DMatrix<f64>);
}

fn dot(a: &[(usize, f64)], x: &[f64]) -> f64 {
    a.iter().map(|&(i, c)| c * x[i]).sum()
}

fn accumulate(out: &mut SparseVec, i: usize, v: f64) {
    match out.iter_mut().find(|(j, _)| *j == i) {
        Some(e) => e.1 += v,
        None => out.push((i, v)),
    }
}

fn add_outer(hess: &mut DMatrix<f64>, a: &[(usize, f64)], b: &[(usize, f64)], scale: f64) {
    for &(i, ai) in a {
        for &(j, bj) in b {
            hess[(i, j)] += scale * ai * bj;
        }
    }
}

/// `constant + a . x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub coeffs: SparseVec,
    pub constant: f64,
}

impl Affine {
    pub fn new(coeffs: SparseVec, constant: f64) -> Self {
        Affine { coeffs, constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + dot(&self.coeffs, x)
    }
}

impl SmoothConvex for Affine {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    fn gradient(&self, _x: &[f64], out: &mut SparseVec) {
        out.clear();
        for &(i, c) in &self.coeffs {
            accumulate(out, i, c);
        }
    }

    fn add_hessian(&self, _x: &[f64], _scale: f64, _hess: &mut DMatrix<f64>) {}
}

/// `ln sum_k exp(a_k . x + b_k)`, the log-space image of a posynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSumExp {
    pub terms: Vec<Affine>,
}

impl LogSumExp {
    pub fn new(terms: Vec<Affine>) -> Self {
        assert!(!terms.is_empty(), "log-sum-exp needs at least one term");
        LogSumExp { terms }
    }

    fn softmax(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let z: Vec<f64> = self.terms.iter().map(|t| t.eval(x)).collect();
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = z.iter().map(|zi| (zi - zmax).exp()).collect();
        let total: f64 = w.iter().sum();
        (w.into_iter().map(|wi| wi / total).collect(), zmax + total.ln())
    }
}

impl SmoothConvex for LogSumExp {
    fn value(&self, x: &[f64]) -> f64 {
        self.softmax(x).1
    }

    fn gradient(&self, x: &[f64], out: &mut SparseVec) {
        out.clear();
        let (w, _) = self.softmax(x);
        for (t, wk) in self.terms.iter().zip(w) {
            for &(i, c) in &t.coeffs {
                accumulate(out, i, wk * c);
            }
        }
    }

    fn add_hessian(&self, x: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        if self.terms.len() == 1 {
            return;
        }
        let (w, _) = self.softmax(x);
        let mut mean = SparseVec::new();
        for (t, &wk) in self.terms.iter().zip(&w) {
            add_outer(hess, &t.coeffs, &t.coeffs, scale * wk);
            for &(i, c) in &t.coeffs {
                accumulate(&mut mean, i, wk * c);
            }
        }
        add_outer(hess, &mean, &mean, -scale);
    }
}

/// `sum_i -w_i ln(u_i(x)) + linear(x)` with affine `u_i` and `w_i >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegLogSum {
    pub logs: Vec<(f64, Affine)>,
    pub linear: Affine,
}

impl NegLogSum {
    pub fn new(logs: Vec<(f64, Affine)>, linear: Affine) -> Self {
        debug_assert!(logs.iter().all(|(w, _)| *w >= 0.0));
        NegLogSum { logs, linear }
    }
}

impl SmoothConvex for NegLogSum {
    fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.linear.eval(x);
        for (w, u) in &self.logs {
            let ui = u.eval(x);
            if !(ui > 0.0) {
                return f64::INFINITY;
            }
            v -= w * ui.ln();
        }
        v
    }

    fn gradient(&self, x: &[f64], out: &mut SparseVec) {
        self.linear.gradient(x, out);
        for (w, u) in &self.logs {
            let ui = u.eval(x);
            for &(i, c) in &u.coeffs {
                accumulate(out, i, -w * c / ui);
            }
        }
    }

    fn add_hessian(&self, x: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        for (w, u) in &self.logs {
            let ui = u.eval(x);
            add_outer(hess, &u.coeffs, &u.coeffs, scale * w / (ui * ui));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(f: &dyn SmoothConvex, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let h = 1e-6 * x[i].abs().max(1.0);
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (f.value(&a) - f.value(&b)) / (2.0 * h)
            })
            .collect()
    }

    fn dense(g: &SparseVec, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        for &(i, v) in g {
            d[i] += v;
        }
        d
    }

    #[test]
    fn lse_gradient_and_hessian_match_differences() {
        let f = LogSumExp::new(vec![
            Affine::new(vec![(0, 1.0), (1, -2.0)], 0.3),
            Affine::new(vec![(1, 1.5), (2, 0.5)], -1.0),
            Affine::new(vec![(0, -0.7)], 2.0),
        ]);
        let x = [0.2, -0.4, 1.1];
        let mut g = SparseVec::new();
        f.gradient(&x, &mut g);
        let g = dense(&g, 3);
        let fd = fd_gradient(&f, &x);
        for i in 0..3 {
            assert!((g[i] - fd[i]).abs() < 1e-7);
        }
        let mut h = DMatrix::zeros(3, 3);
        f.add_hessian(&x, 1.0, &mut h);
        for j in 0..3 {
            let mut xp = x;
            xp[j] += 1e-6;
            let mut gp = SparseVec::new();
            f.gradient(&xp, &mut gp);
            let gp = dense(&gp, 3);
            for i in 0..3 {
                assert!((h[(i, j)] - (gp[i] - g[i]) / 1e-6).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn neg_log_domain() {
        let f = NegLogSum::new(
            vec![(1.0, Affine::new(vec![(0, 1.0)], 0.0))],
            Affine::new(vec![], 0.0),
        );
        assert!(f.value(&[-1.0]).is_infinite());
        assert!((f.value(&[2.0]) + 2f64.ln()).abs() < 1e-15);
    }
}
