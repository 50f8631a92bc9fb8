//! Collocation discretisation of the transported-frame Hamiltonian.
//!
//! Layout: spinor index `s` and node `j` map to `s * M + j`.  For a reduced
//! family (`c = 1`, `b = 0`) the Hamiltonian acting on data transported to
//! the initial surface is
//!
//! ```text
//! H(t) = W^{-1} [ i g0 g1 (h^{-1/2} d_x + sigma_1) + i g0 m ] W - (i/4) d_t h / h,
//! W    = (h_0 / h_t)^{1/4}
//! ```
//!
//! where the last term is the density correction written with the factor
//! `i^{-1}` demanded by `d_t = i H`.  It cancels the spin-connection term
//! `i g0 g1 sigma_1 = (i/2) K` exactly, and `nu_0 H` is Hermitian for the
//! Gram form `nu_0 = (i beta g0) (x) diag(sqrt(h_0) L / M)`.

use crate::error::{Error, Result};
use crate::functional_calculus::eig_decompose;
use crate::geometry::{conformal_reduce, GridSpec, MetricFamily, TimeEnd};
use crate::linalg::{c64, kron, pointwise, CMat, Gram, ZERO};
use crate::spin_algebra::{m2_add, m2_mul, m2_scale, spin_connection_x, CliffordRep, Mat2};
use serde::Serialize;
use std::sync::Arc;

/// A matrix together with the Gram form it is selfadjoint for.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub matrix: CMat,
    pub gram: Arc<Gram>,
}

impl DiscreteOperator {
    pub fn new(matrix: CMat, gram: Arc<Gram>) -> Self {
        DiscreteOperator { matrix, gram }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn norm(&self) -> f64 {
        self.gram.norm(&self.matrix)
    }

    pub fn selfadjoint_residual(&self) -> f64 {
        self.gram.selfadjoint_residual(&self.matrix)
    }
}

/// Fourier collocation derivative `F^{-1} diag(i k) F` (dense circulant).
pub fn spectral_derivative(grid: &GridSpec) -> CMat {
    let m = grid.points;
    let k = grid.wavenumbers();
    let x = grid.nodes();
    // D_{jl} = (1/M) sum_n i k_n exp(i k_n (x_j - x_l)); depends on j - l only
    let row: Vec<c64> = (0..m)
        .map(|d| {
            let dx = x[d] - x[0];
            let mut s = ZERO;
            for kn in &k {
                s += c64::new(0.0, *kn) * c64::from_polar(1.0, kn * dx);
            }
            s / m as f64
        })
        .collect();
    let sign = |jl: isize| -> c64 {
        // antiperiodic modes pick up a sign when wrapping around the circle
        let idx = jl.rem_euclid(m as isize) as usize;
        let wraps = jl < 0;
        match (grid.spin, wraps) {
            (crate::geometry::SpinStructure::Antiperiodic, true) => -row[idx],
            _ => row[idx],
        }
    };
    CMat::from_fn(m, m, |j, l| sign(j as isize - l as isize))
}

/// Pointwise Gram density `sqrt(h_0) L / M` at the nodes.
pub fn gram_weights(family: &MetricFamily, grid: &GridSpec) -> Result<Vec<f64>> {
    let h0 = family.spatial.sample(0.0, &grid.nodes())?;
    Ok(h0.value.iter().map(|h| h.sqrt() * grid.spacing()).collect())
}

/// Discrete Cauchy-surface form `nu_0 = (i beta g0) (x) diag(sqrt(h_0) L / M)`.
pub fn gram_nu0(rep: &CliffordRep, family: &MetricFamily, grid: &GridSpec) -> Result<Gram> {
    let w = gram_weights(family, grid)?;
    let p = rep.pairing_density();
    let pm = CMat::from_fn(2, 2, |i, j| p[i][j]);
    Gram::new(kron(&pm, &crate::linalg::diag_real(&w)))
}

fn check_reduced(family: &MetricFamily, grid: &GridSpec) -> Result<()> {
    if !family.is_reduced() {
        return Err(Error::family(&family.name, "assembly needs unit lapse and zero shift; reduce the family first"));
    }
    if (family.circumference - grid.circumference).abs() > 1e-12 * grid.circumference {
        return Err(Error::config("grid.circumference", "does not match the family circumference"));
    }
    if let Some(b) = family.bandwidth() {
        if 4 * b > grid.points {
            return Err(Error::config(
                "grid.points",
                format!("field bandwidth {b} exceeds M/4 = {}", grid.points / 4),
            ));
        }
    }
    Ok(())
}

/// Inputs of one assembly: everything pointwise at the nodes.
struct Slice {
    h: Vec<f64>,
    h0: Vec<f64>,
    mass: Vec<f64>,
    spin: Option<Vec<Mat2>>,
    density: Option<Vec<f64>>,
}

fn assemble_slice(rep: &CliffordRep, deriv: &CMat, s: &Slice) -> CMat {
    let m = s.h.len();
    let i = c64::new(0.0, 1.0);
    let g01 = CMat::from_fn(2, 2, |a, b| rep.g01()[a][b] * i);
    let w: Vec<f64> = (0..m).map(|j| (s.h0[j] / s.h[j]).powf(0.25)).collect();
    let left: Vec<f64> = (0..m).map(|j| s.h[j].powf(-0.5) / w[j]).collect();
    let dmat = crate::linalg::scale_rows_cols(deriv, &left, &w);
    let mut out = kron(&g01, &dmat);
    let ig0 = m2_scale(&rep.gamma[0], i);
    let ig01 = m2_scale(&rep.g01(), i);
    let blocks: Vec<Mat2> = (0..m)
        .map(|j| {
            let mut b = m2_scale(&ig0, c64::new(s.mass[j], 0.0));
            if let Some(sp) = &s.spin {
                b = m2_add(&b, &m2_mul(&ig01, &sp[j]));
            }
            if let Some(d) = &s.density {
                let z = c64::new(0.0, -0.25 * d[j]);
                b[0][0] += z;
                b[1][1] += z;
            }
            b
        })
        .collect();
    let p = pointwise(&blocks);
    out += &p;
    out
}

/// Transported-frame Hamiltonian at time `t` for a reduced family.
pub fn assemble_h(rep: &CliffordRep, family: &MetricFamily, grid: &GridSpec, t: f64) -> Result<DiscreteOperator> {
    let gram = Arc::new(gram_nu0(rep, family, grid)?);
    let deriv = spectral_derivative(grid);
    Ok(DiscreteOperator::new(assemble_h_with(rep, family, grid, &deriv, t)?, gram))
}

/// Same as [`assemble_h`] with a precomputed derivative matrix.
pub fn assemble_h_with(rep: &CliffordRep, family: &MetricFamily, grid: &GridSpec, deriv: &CMat, t: f64) -> Result<CMat> {
    check_reduced(family, grid)?;
    let nodes = grid.nodes();
    let h = family.spatial.sample(t, &nodes)?;
    let h0 = family.spatial.sample(0.0, &nodes)?;
    let mass = family.mass.sample(t, &nodes)?;
    if h.value.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::family(&family.name, format!("spatial metric not positive at t = {t}")));
    }
    let spin = nodes.iter().map(|&x| spin_connection_x(rep, family, t, x)).collect::<Result<Vec<_>>>()?;
    let density = (0..nodes.len()).map(|j| h.dt[j] / h.value[j]).collect();
    let slice = Slice { h: h.value, h0: h0.value, mass: mass.value, spin: Some(spin), density: Some(density) };
    Ok(assemble_slice(rep, deriv, &slice))
}

/// Asymptotic Hamiltonian: the static operator of the limit metric, conjugated
/// by `(h_0 / h_inf)^{1/4}` so that it acts on the same Hilbert space.
pub fn assemble_h_asymptotic(rep: &CliffordRep, family: &MetricFamily, grid: &GridSpec, end: TimeEnd) -> Result<DiscreteOperator> {
    let gram = Arc::new(gram_nu0(rep, family, grid)?);
    let deriv = spectral_derivative(grid);
    Ok(DiscreteOperator::new(assemble_h_asymptotic_with(rep, family, grid, &deriv, end)?, gram))
}

pub fn assemble_h_asymptotic_with(rep: &CliffordRep, family: &MetricFamily, grid: &GridSpec, deriv: &CMat, end: TimeEnd) -> Result<CMat> {
    check_reduced(family, grid)?;
    let lim = family.asymptotic(end)?;
    let nodes = grid.nodes();
    let slice = Slice {
        h: lim.spatial.sample(0.0, &nodes)?.value,
        h0: family.spatial.sample(0.0, &nodes)?.value,
        mass: lim.mass.sample(0.0, &nodes)?.value,
        spin: None,
        density: None,
    };
    Ok(assemble_slice(rep, deriv, &slice))
}

#[derive(Clone, Debug, Serialize)]
pub struct MassiveReport {
    pub end: TimeEnd,
    /// `min_x (c^2 m^2 - d(cm) h^{-1} d(cm))` of the limit fields.
    pub sufficient_value: f64,
    /// Smallest `|lambda|` of the asymptotic Hamiltonian.
    pub gap: f64,
    pub norm: f64,
    /// `gap >= GAP_RELATIVE * norm`
    pub massive: bool,
}

/// Massive-condition check at one end.  The family must be shift-free (apply
/// the flow reduction first); the lapse is allowed and removed here.
pub fn check_massive(rep: &CliffordRep, family: &MetricFamily, grid: &GridSpec, end: TimeEnd) -> Result<MassiveReport> {
    if family.has_shift() {
        return Err(Error::family(&family.name, "remove the shift before checking the massive condition"));
    }
    let lim = family.asymptotic(end)?;
    let nodes = grid.nodes();
    let c = lim.lapse.sample(0.0, &nodes)?;
    let h = lim.spatial.sample(0.0, &nodes)?;
    let m = lim.mass.sample(0.0, &nodes)?;
    let mut suff = f64::INFINITY;
    for j in 0..nodes.len() {
        let cm = c.value[j] * m.value[j];
        let dcm = c.dx[j] * m.value[j] + c.value[j] * m.dx[j];
        suff = suff.min(cm * cm - dcm * dcm / h.value[j]);
    }
    let reduced = conformal_reduce(family)?;
    let op = assemble_h_asymptotic(rep, &reduced, grid, end)?;
    let eig = eig_decompose(&op)?;
    let gap = eig.values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let norm = eig.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(MassiveReport {
        end,
        sufficient_value: suff,
        gap,
        norm,
        massive: gap >= crate::tolerances::GAP_RELATIVE * norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FamilySpec, FieldSpec, FourierSeries, SpinStructure, Term, TimeProfile};
    use crate::linalg::{fro_norm, max_abs};
    use crate::spin_algebra::clifford;
    use std::f64::consts::PI;

    #[test]
    fn derivative_is_exact_on_modes() {
        for spin in [SpinStructure::Periodic, SpinStructure::Antiperiodic] {
            let g = GridSpec::with_spin(16, 2.0 * PI, spin).unwrap();
            let d = spectral_derivative(&g);
            let x = g.nodes();
            for &k in &[1.0, 3.0, 7.0, -5.0] {
                let k = if spin == SpinStructure::Antiperiodic { k + 0.5 } else { k };
                let f = CMat::from_fn(16, 1, |j, _| c64::from_polar(1.0, k * x[j]));
                let df = &d * &f;
                for j in 0..16 {
                    assert!((df[(j, 0)] - c64::new(0.0, k) * f[(j, 0)]).norm() < 1e-12);
                }
            }
            // anti-Hermitian
            assert!(max_abs(&(&d + d.adjoint())) < 1e-13);
        }
    }

    #[test]
    fn hamiltonian_is_gram_selfadjoint() {
        let rep = clifford();
        let fam = FamilySpec::bump(1.0).build().unwrap();
        let g = GridSpec::new(32, 2.0 * PI).unwrap();
        for &t in &[-2.0, 0.0, 0.5, 7.0] {
            let h = assemble_h(&rep, &fam, &g, t).unwrap();
            assert!(h.selfadjoint_residual() < 1e-13, "t={t}: {}", h.selfadjoint_residual());
        }
    }

    #[test]
    fn density_and_spin_terms_cancel() {
        // pointwise part at zero mass and constant-in-x metric is exactly zero
        let rep = clifford();
        let fam = FamilySpec::Custom {
            mu: 1.0,
            lapse: None,
            shift: None,
            spatial: FieldSpec { terms: vec![Term { spatial: FourierSeries::constant(1.0), time: TimeProfile::Exp { rate: 0.7 } }] },
            mass: FieldSpec::constant(0.0),
            circumference: 2.0 * PI,
        }
        .build()
        .unwrap();
        let g = GridSpec::new(8, 2.0 * PI).unwrap();
        let t = 0.9;
        let h = assemble_h(&rep, &fam, &g, t).unwrap();
        // what remains is the kinetic term alone
        let hs = (0.7 * t).exp().powf(-0.5);
        let g01 = CMat::from_fn(2, 2, |a, b| rep.g01()[a][b] * c64::new(0.0, hs));
        let kin = kron(&g01, &spectral_derivative(&g));
        assert!(max_abs(&(&h.matrix - &kin)) < 1e-14);
    }

    #[test]
    fn shifted_family_is_rejected() {
        let rep = clifford();
        let fam = FamilySpec::shifted(1.0).build().unwrap();
        let g = GridSpec::new(16, 2.0 * PI).unwrap();
        assert!(assemble_h(&rep, &fam, &g, 0.0).is_err());
    }

    #[test]
    fn flat_asymptote_equals_static_operator() {
        let rep = clifford();
        let fam = FamilySpec::flat(1.0).build().unwrap();
        let g = GridSpec::new(16, 2.0 * PI).unwrap();
        let a = assemble_h(&rep, &fam, &g, 3.0).unwrap();
        let b = assemble_h_asymptotic(&rep, &fam, &g, TimeEnd::Future).unwrap();
        assert!(fro_norm(&(&a.matrix - &b.matrix)) < 1e-14);
    }
}
