//! Clifford representation, the spinor pairing `beta`, frame connection
//! coefficients and the spin connection of the reduced metric
//! `g = -dt^2 + h dx^2` in the parallel frame `e0 = d_t`, `e1 = h^{-1/2} d_x`.

use crate::error::Result;
use crate::geometry::MetricFamily;
use crate::linalg::{c64, ONE, ZERO};
use serde::Serialize;

pub type Mat2 = [[c64; 2]; 2];

/// Minkowski signature `(-, +)`.
pub const ETA: [f64; 2] = [-1.0, 1.0];

pub fn m2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut o = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    o
}

pub fn m2_add(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

pub fn m2_scale(a: &Mat2, z: c64) -> Mat2 {
    [[a[0][0] * z, a[0][1] * z], [a[1][0] * z, a[1][1] * z]]
}

pub fn m2_adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

pub fn m2_identity() -> Mat2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

pub fn m2_norm(a: &Mat2) -> f64 {
    a.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `gamma[a] = gamma(e_a)` with `gamma_a gamma_b + gamma_b gamma_a = 2 eta_ab`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CliffordRep {
    pub gamma: [Mat2; 2],
    pub beta: Mat2,
}

/// `gamma0 = [[0,1],[-1,0]]`, `gamma1 = [[1,0],[0,-1]]`, `beta = i gamma0`.
pub fn clifford() -> CliffordRep {
    let i = c64::new(0.0, 1.0);
    let g0 = [[ZERO, ONE], [-ONE, ZERO]];
    let g1 = [[ONE, ZERO], [ZERO, -ONE]];
    CliffordRep { gamma: [g0, g1], beta: m2_scale(&g0, i) }
}

impl CliffordRep {
    /// `gamma0 gamma1`
    pub fn g01(&self) -> Mat2 {
        m2_mul(&self.gamma[0], &self.gamma[1])
    }

    /// `i beta gamma0`, the pointwise density of the Cauchy-surface pairing.
    pub fn pairing_density(&self) -> Mat2 {
        m2_scale(&m2_mul(&self.beta, &self.gamma[0]), c64::new(0.0, 1.0))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraCheck {
    pub name: String,
    pub residual: f64,
}

/// Residuals of the Clifford relations, `beta* = beta`,
/// `gamma_a* beta = -beta gamma_a` and positivity of `i beta gamma0`
/// (reported as `max(0, -lambda_min)` plus the Hermiticity defect).
pub fn check_invariants(rep: &CliffordRep) -> Vec<AlgebraCheck> {
    let mut out = Vec::new();
    let id = m2_identity();
    for a in 0..2 {
        for b in a..2 {
            let ac = m2_add(&m2_mul(&rep.gamma[a], &rep.gamma[b]), &m2_mul(&rep.gamma[b], &rep.gamma[a]));
            let target = if a == b { m2_scale(&id, c64::new(2.0 * ETA[a], 0.0)) } else { [[ZERO; 2]; 2] };
            let d = m2_add(&ac, &m2_scale(&target, -ONE));
            out.push(AlgebraCheck { name: format!("clifford_{a}{b}"), residual: m2_norm(&d) });
        }
    }
    let d = m2_add(&rep.beta, &m2_scale(&m2_adjoint(&rep.beta), -ONE));
    out.push(AlgebraCheck { name: "beta_hermitian".into(), residual: m2_norm(&d) });
    for a in 0..2 {
        let lhs = m2_mul(&m2_adjoint(&rep.gamma[a]), &rep.beta);
        let rhs = m2_mul(&rep.beta, &rep.gamma[a]);
        out.push(AlgebraCheck { name: format!("beta_gamma{a}"), residual: m2_norm(&m2_add(&lhs, &rhs)) });
    }
    let p = rep.pairing_density();
    let herm = m2_norm(&m2_add(&p, &m2_scale(&m2_adjoint(&p), -ONE)));
    // 2x2 Hermitian: eigenvalues from trace and determinant
    let tr = 0.5 * (p[0][0].re + p[1][1].re);
    let det = p[0][0].re * p[1][1].re - p[0][1].norm_sqr();
    let disc = (tr * tr - det).max(0.0).sqrt();
    let lmin = tr - disc;
    out.push(AlgebraCheck { name: "pairing_positive".into(), residual: herm + if lmin > 0.0 { 0.0 } else { 1.0 - lmin } });
    out
}

/// Frame connection coefficients `gamma[c][a][b] = Gamma^c_{ab}` defined by
/// `nabla_{e_a} e_b = Gamma^c_{ab} e_c` for a reduced family.  Only
/// `Gamma^0_{11} = Gamma^1_{10} = K = d_t h / (2h)` are non-zero.
pub fn frame_connection(family: &MetricFamily, t: f64, x: f64) -> Result<[[[f64; 2]; 2]; 2]> {
    let fr = frame_transport(family, t, x)?;
    let mut g = [[[0.0; 2]; 2]; 2];
    g[0][1][1] = fr.k;
    g[1][1][0] = fr.k;
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameData {
    /// `e1 = u1 d_x`
    pub u1: f64,
    /// extrinsic curvature scalar `K = d_t h / (2h)`
    pub k: f64,
}

pub fn frame_transport(family: &MetricFamily, t: f64, x: f64) -> Result<FrameData> {
    let h = family.spatial.sample(t, &[x])?;
    Ok(FrameData { u1: h.value[0].powf(-0.5), k: 0.5 * h.dt[0] / h.value[0] })
}

/// `sigma_a = 1/4 Gamma^c_{ab} gamma_c eta^{bd} gamma_d`.
pub fn spin_connection(rep: &CliffordRep, conn: &[[[f64; 2]; 2]; 2], a: usize) -> Mat2 {
    let mut s = [[ZERO; 2]; 2];
    for c in 0..2 {
        for b in 0..2 {
            let coef = conn[c][a][b];
            if coef == 0.0 {
                continue;
            }
            // eta is diagonal, so d = b
            let term = m2_mul(&rep.gamma[c], &rep.gamma[b]);
            s = m2_add(&s, &m2_scale(&term, c64::new(0.25 * coef * ETA[b], 0.0)));
        }
    }
    s
}

pub fn spin_connection_x(rep: &CliffordRep, family: &MetricFamily, t: f64, x: f64) -> Result<Mat2> {
    Ok(spin_connection(rep, &frame_connection(family, t, x)?, 1))
}

/// Spinor parallel transport `T(t, 0)` along `d_t` at each node, in the
/// transported frame: the solution of `d_s T = -sigma_0(s) T`, `T(0) = 1`,
/// computed with RK4.  For the parallel frame `sigma_0` vanishes and `T` is
/// the identity on frame components.
pub fn transport_operator(rep: &CliffordRep, family: &MetricFamily, t: f64, nodes: &[f64]) -> Result<Vec<Mat2>> {
    let steps = ((t.abs() / 0.05).ceil() as usize).max(1);
    let dt = t / steps as f64;
    let mut out = Vec::with_capacity(nodes.len());
    for &x in nodes {
        let sigma0 = |s: f64| -> Result<Mat2> { Ok(spin_connection(rep, &frame_connection(family, s, x)?, 0)) };
        let mut tr = m2_identity();
        for n in 0..steps {
            let s = n as f64 * dt;
            let f = |s: f64, y: &Mat2| -> Result<Mat2> { Ok(m2_scale(&m2_mul(&sigma0(s)?, y), c64::new(-1.0, 0.0))) };
            let k1 = f(s, &tr)?;
            let k2 = f(s + dt / 2.0, &m2_add(&tr, &m2_scale(&k1, c64::new(dt / 2.0, 0.0))))?;
            let k3 = f(s + dt / 2.0, &m2_add(&tr, &m2_scale(&k2, c64::new(dt / 2.0, 0.0))))?;
            let k4 = f(s + dt, &m2_add(&tr, &m2_scale(&k3, c64::new(dt, 0.0))))?;
            let inc = m2_add(&m2_add(&k1, &m2_scale(&k2, c64::new(2.0, 0.0))), &m2_add(&m2_scale(&k3, c64::new(2.0, 0.0)), &k4));
            tr = m2_add(&tr, &m2_scale(&inc, c64::new(dt / 6.0, 0.0)));
        }
        out.push(tr);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FamilySpec;
    use crate::tolerances::ALGEBRA;

    #[test]
    fn invariants_hold() {
        for c in check_invariants(&clifford()) {
            assert!(c.residual < ALGEBRA, "{} = {}", c.name, c.residual);
        }
    }

    #[test]
    fn flipped_gamma1_entry_is_detected() {
        let mut rep = clifford();
        rep.gamma[1][1][1] = ONE;
        let bad = check_invariants(&rep).into_iter().filter(|c| c.residual > ALGEBRA).count();
        assert!(bad > 0);
    }

    #[test]
    fn spin_connection_is_half_k_gamma01() {
        let rep = clifford();
        let fam = FamilySpec::bump(1.0).build().unwrap();
        let (t, x) = (0.4, 1.3);
        let s = spin_connection_x(&rep, &fam, t, x).unwrap();
        let k = frame_transport(&fam, t, x).unwrap().k;
        let expect = m2_scale(&rep.g01(), c64::new(0.5 * k, 0.0));
        assert!(m2_norm(&m2_add(&s, &m2_scale(&expect, -ONE))) < 1e-14);
        // metric compatibility: sigma* beta + beta sigma = 0
        let d = m2_add(&m2_mul(&m2_adjoint(&s), &rep.beta), &m2_mul(&rep.beta, &s));
        assert!(m2_norm(&d) < 1e-14);
    }

    #[test]
    fn static_metric_has_no_spin_connection() {
        let rep = clifford();
        let fam = FamilySpec::static_bump().build().unwrap();
        assert!(m2_norm(&spin_connection_x(&rep, &fam, 3.0, 0.2).unwrap()) == 0.0);
    }

    #[test]
    fn transport_is_identity_in_parallel_frame() {
        let rep = clifford();
        let fam = FamilySpec::bump(1.0).build().unwrap();
        for tr in transport_operator(&rep, &fam, 2.0, &[0.0, 1.0]).unwrap() {
            assert!(m2_norm(&m2_add(&tr, &m2_scale(&m2_identity(), -ONE))) < 1e-14);
        }
    }
}
