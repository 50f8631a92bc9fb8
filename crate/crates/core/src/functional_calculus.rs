//! Functions of Gram-selfadjoint matrices: by diagonalisation, and by
//! resolvent quadrature as an independent route.

use crate::error::{Error, Result};
use crate::linalg::{c64, herm_eigen, identity, op_norm, solve, CMat};
use crate::operator_assembly::DiscreteOperator;
use crate::tolerances::GAP_RELATIVE;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Sign of a spectral half-line.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn other(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// `H = V diag(values) V^{-1}` with `V* G V = 1`, so `V^{-1} = V* G`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMat,
    pub inverse: CMat,
}

impl EigenDecomposition {
    pub fn apply(&self, f: impl Fn(f64) -> c64) -> CMat {
        let v = &self.vectors;
        let scaled = CMat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * f(self.values[j]));
        &scaled * &self.inverse
    }

    pub fn gap(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `1_{R_+}` or `1_{R_-}`; errors when the gap is below the relative threshold.
    pub fn projection(&self, sign: Sign) -> Result<CMat> {
        let threshold = GAP_RELATIVE * self.spectral_radius();
        let gap = self.gap();
        if gap < threshold {
            return Err(Error::SpectralGap { gap, threshold });
        }
        let s = sign.value();
        Ok(self.apply(|l| if l * s > 0.0 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) }))
    }

    /// Matrix of an operator in the eigenbasis, `V^{-1} A V`.
    pub fn to_eigenbasis(&self, a: &CMat) -> CMat {
        &(&self.inverse * a) * &self.vectors
    }

    pub fn from_eigenbasis(&self, a: &CMat) -> CMat {
        &(&self.vectors * a) * &self.inverse
    }
}

/// Congruence of `G H v = lambda G v` to a standard Hermitian problem.
pub fn eig_decompose(op: &DiscreteOperator) -> Result<EigenDecomposition> {
    let res = op.selfadjoint_residual();
    if res > 1e-10 {
        return Err(Error::Adjoint { residual: res });
    }
    let hs = op.gram.to_sym(&op.matrix);
    let (values, y) = herm_eigen(&hs)?;
    let vectors = op.gram.vectors_from_sym(&y);
    let inverse = &vectors.adjoint() * op.gram.matrix();
    Ok(EigenDecomposition { values, vectors, inverse })
}

pub fn spectral_projection(op: &DiscreteOperator, sign: Sign) -> Result<CMat> {
    eig_decompose(op)?.projection(sign)
}

/// `(H^2 + 1)^{1/2}`
pub fn s_operator(op: &DiscreteOperator) -> Result<CMat> {
    Ok(eig_decompose(op)?.apply(|l| c64::new((l * l + 1.0).sqrt(), 0.0)))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    /// `|H|^{-1} = (2/pi) int_0^inf (H^2 + l^2)^{-1} dl`
    InverseAbs,
    /// `sgn H = H |H|^{-1}`
    Sign,
    /// `(H^2 + 1)^{-1/2} = (2/pi) int_0^inf (H^2 + 1 + s^2)^{-1} ds`
    InverseSqrtSquarePlusOne,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureMethod {
    /// tanh-sinh on `(0, 50 |H|]` plus the asymptotic tail series
    Truncated,
    /// tanh-sinh after `l = tan(theta pi / 2)`
    TanSubstitution,
}

#[derive(Clone, Debug)]
pub struct QuadratureResult {
    pub value: CMat,
    /// Difference to the half-resolution rule plus any tail remainder.
    pub error_estimate: f64,
    pub nodes: usize,
    pub method: QuadratureMethod,
}

/// Tanh-sinh rule on `(0, 1)` with `2n + 1` nodes, as `(x, 1 - x, w)`.
pub fn tanh_sinh_unit(n: usize) -> Vec<(f64, f64, f64)> {
    let tmax = 3.2;
    let h = tmax / n.max(1) as f64;
    let mut out = Vec::with_capacity(2 * n + 1);
    for k in -(n as i64)..=(n as i64) {
        let t = k as f64 * h;
        let u = 0.5 * PI * t.sinh();
        // x in (-1, 1) mapped to (0, 1): y = (1 + x) / 2 = 1 / (1 + e^{-2u})
        let y = 1.0 / (1.0 + (-2.0 * u).exp());
        let ym = 1.0 / (1.0 + (2.0 * u).exp());
        let w = 0.5 * h * 0.5 * PI * t.cosh() / u.cosh().powi(2);
        if w > 0.0 && y > 0.0 && ym > 0.0 {
            out.push((y, ym, w));
        }
    }
    out
}

/// Sum of a matrix-valued integrand over a tanh-sinh rule; returns the
/// full-resolution sum and the sum with every other node (step `2h`).
fn ts_sum(n: usize, f: &mut dyn FnMut(f64, f64) -> CMat, dim: usize) -> (CMat, CMat) {
    let nodes = tanh_sinh_unit(n);
    let mut fine = CMat::zeros(dim, dim);
    let mut coarse = CMat::zeros(dim, dim);
    let centre = nodes.len() / 2;
    for (idx, (y, ym, w)) in nodes.iter().enumerate() {
        let v = f(*y, *ym);
        fine += &crate::linalg::scale_re(&v, *w);
        if (idx as i64 - centre as i64) % 2 == 0 {
            coarse += &crate::linalg::scale_re(&v, 2.0 * w);
        }
    }
    (fine, coarse)
}

/// Resolvent-integral evaluation of `kind` with at most `nodes` nodes.
pub fn resolvent_functional(op: &DiscreteOperator, kind: Functional, nodes: usize, tol: f64) -> Result<QuadratureResult> {
    let n = (nodes.max(3) - 1) / 2;
    let dim = op.dim();
    let h = &op.matrix;
    let id = identity(dim);
    let h2 = h * h;
    let a = match kind {
        Functional::InverseSqrtSquarePlusOne => &h2 + &id,
        _ => h2,
    };
    let norm_a = op.gram.norm(&a);
    let lambda = 50.0 * norm_a.sqrt();
    // primary: (0, Lambda] plus tail
    let mut f = |y: f64, _ym: f64| {
        let l = lambda * y;
        let m = &a + &crate::linalg::scale_re(&id, l * l);
        crate::linalg::scale_re(&solve(&m, &id), lambda)
    };
    let (fine, coarse) = ts_sum(n, &mut f, dim);
    let mut tail = crate::linalg::scale_re(&id, 1.0 / lambda);
    let mut ap = id.clone();
    for k in 1..3 {
        ap = &ap * &a;
        let c = if k % 2 == 1 { -1.0 } else { 1.0 } / ((2 * k + 1) as f64 * lambda.powi(2 * k as i32 + 1));
        tail += &crate::linalg::scale_re(&ap, c);
    }
    let remainder = norm_a.powi(3) / (7.0 * lambda.powi(7));
    let total = &fine + &tail;
    let scale = op_norm(&total).max(1e-300);
    let est = op_norm(&(&fine - &coarse)) + remainder;
    let (mut value, mut error_estimate, mut method) = (total, est, QuadratureMethod::Truncated);
    if est > tol * scale {
        let mut g = |y: f64, ym: f64| {
            let c = (0.5 * PI * ym).sin();
            let s = (0.5 * PI * y).sin();
            let m = &crate::linalg::scale_re(&a, c * c) + &crate::linalg::scale_re(&id, s * s);
            crate::linalg::scale_re(&solve(&m, &id), 0.5 * PI)
        };
        let (fine, coarse) = ts_sum(n, &mut g, dim);
        let scale = op_norm(&fine).max(1e-300);
        let est = op_norm(&(&fine - &coarse));
        value = fine;
        error_estimate = est;
        method = QuadratureMethod::TanSubstitution;
        if est > tol * scale {
            return Err(Error::Quadrature { estimate: est / scale, tolerance: tol });
        }
    }
    value = crate::linalg::scale_re(&value, 2.0 / PI);
    error_estimate *= 2.0 / PI;
    if kind == Functional::Sign {
        value = h * &value;
    }
    Ok(QuadratureResult { value, error_estimate, nodes: 2 * n + 1, method })
}

/// Scalar version of the `|a|^{-1}` rule, used for convergence-order studies.
pub fn scalar_inverse_abs(a: f64, nodes: usize, method: QuadratureMethod) -> f64 {
    let n = (nodes.max(3) - 1) / 2;
    let mut s = 0.0;
    match method {
        QuadratureMethod::Truncated => {
            let lambda = 50.0 * a.abs();
            for (y, _, w) in tanh_sinh_unit(n) {
                let l = lambda * y;
                s += w * lambda / (a * a + l * l);
            }
            let a2 = a * a;
            s += 1.0 / lambda - a2 / (3.0 * lambda.powi(3)) + a2 * a2 / (5.0 * lambda.powi(5));
        }
        QuadratureMethod::TanSubstitution => {
            for (y, ym, w) in tanh_sinh_unit(n) {
                let c = (0.5 * PI * ym).sin();
                let sn = (0.5 * PI * y).sin();
                s += w * 0.5 * PI / (a * a * c * c + sn * sn);
            }
        }
    }
    2.0 / PI * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FamilySpec, GridSpec};
    use crate::linalg::max_abs;
    use crate::operator_assembly::assemble_h;
    use crate::spin_algebra::clifford;

    fn bump_op(m: usize) -> DiscreteOperator {
        let fam = FamilySpec::bump(1.0).build().unwrap();
        let g = GridSpec::new(m, 2.0 * PI).unwrap();
        assemble_h(&clifford(), &fam, &g, 0.3).unwrap()
    }

    #[test]
    fn eigendecomposition_reconstructs() {
        let op = bump_op(16);
        let e = eig_decompose(&op).unwrap();
        let back = e.apply(|l| c64::new(l, 0.0));
        assert!(max_abs(&(&back - &op.matrix)) < 1e-11);
        let vgv = &(&e.vectors.adjoint() * op.gram.matrix()) * &e.vectors;
        assert!(max_abs(&(&vgv - &identity(32))) < 1e-11);
    }

    #[test]
    fn projections_are_complementary() {
        let op = bump_op(16);
        let e = eig_decompose(&op).unwrap();
        let p = e.projection(Sign::Plus).unwrap();
        let q = e.projection(Sign::Minus).unwrap();
        assert!(max_abs(&(&(&p + &q) - &identity(32))) < 1e-11);
        assert!(max_abs(&(&(&p * &p) - &p)) < 1e-11);
        assert!(op.gram.selfadjoint_residual(&p) < 1e-11);
    }

    #[test]
    fn quadrature_matches_diagonalisation() {
        let op = bump_op(16);
        let e = eig_decompose(&op).unwrap();
        let sign = e.apply(|l| c64::new(l.signum(), 0.0));
        let q = resolvent_functional(&op, Functional::Sign, 201, 1e-7).unwrap();
        assert!(max_abs(&(&q.value - &sign)) < 1e-6, "{}", max_abs(&(&q.value - &sign)));
        let isq = e.apply(|l| c64::new(1.0 / (l * l + 1.0).sqrt(), 0.0));
        let q = resolvent_functional(&op, Functional::InverseSqrtSquarePlusOne, 201, 1e-7).unwrap();
        assert!(max_abs(&(&q.value - &isq)) < 1e-6);
    }

    #[test]
    fn scalar_rule_converges_fast() {
        let mut prev = f64::INFINITY;
        for &n in &[21, 41, 81, 161] {
            let e = (scalar_inverse_abs(4.0, n, QuadratureMethod::TanSubstitution) - 0.25).abs();
            assert!(e < prev || e < 1e-15);
            prev = e;
        }
        assert!(prev < 1e-13);
    }

    #[test]
    fn gapless_projection_is_refused() {
        let fam = FamilySpec::flat(0.0).build().unwrap();
        let g = GridSpec::new(8, 2.0 * PI).unwrap();
        let op = assemble_h(&clifford(), &fam, &g, 0.0).unwrap();
        assert!(matches!(spectral_projection(&op, Sign::Plus), Err(Error::SpectralGap { .. })));
    }
}
