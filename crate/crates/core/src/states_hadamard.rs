//! State covariances built from a pair of complementary projections, and the
//! numerical surrogates for the Hadamard property.
//!
//! In the discrete pairing the factor `i beta gamma(n)` already sits inside the
//! Gram matrix, so the surface covariances are `lambda = G c` and the CAR sum
//! rule reads `lambda^+ + lambda^- = G`.

use crate::adiabatic_projections::annulus_norms;
use crate::error::{Error, Result};
use crate::evolution::{ConjugatedGenerator, Propagator, StepperConfig};
use crate::fit::{loglog_fit, LineFit};
use crate::functional_calculus::{eig_decompose, Sign};
use crate::geometry::GridSpec;
use crate::linalg::{c64, herm_eigenvalues, hermitize, identity, kron, op_norm, scale_re, scale_rows_cols, CMat, Gram};
use crate::problem::Problem;
use crate::spin_algebra::{m2_mul, m2_scale, CliffordRep};
use crate::tolerances::{GAP_RELATIVE, POSITIVITY, SLOPE_FAILURE, SMOOTHING_SLOPE, SYMBOL_SLOPE};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Out,
    In,
    Vacuum,
    Custom,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CovarianceDiagnostics {
    pub min_eig_plus: f64,
    pub min_eig_minus: f64,
    /// `|lambda^+ + lambda^- - G| / |G|`
    pub sum_rule: f64,
    pub scale: f64,
}

#[derive(Clone, Debug)]
pub struct StateCovariances {
    pub c_plus: CMat,
    pub c_minus: CMat,
    pub gram: Arc<Gram>,
    pub lambda_plus: CMat,
    pub lambda_minus: CMat,
    pub provenance: Provenance,
    pub diagnostics: CovarianceDiagnostics,
}

/// `lambda^{+-} = G c^{+-}`, with positivity and the sum rule checked.
pub fn cauchy_covariances(c_plus: CMat, c_minus: CMat, gram: Arc<Gram>, provenance: Provenance) -> Result<StateCovariances> {
    let g = gram.matrix();
    let lambda_plus = g * &c_plus;
    let lambda_minus = g * &c_minus;
    let scale = op_norm(g);
    let min_eig = |l: &CMat| -> Result<f64> { Ok(herm_eigenvalues(&hermitize(l))?[0]) };
    let min_eig_plus = min_eig(&lambda_plus)?;
    let min_eig_minus = min_eig(&lambda_minus)?;
    let sum_rule = op_norm(&(&(&lambda_plus + &lambda_minus) - g)) / scale;
    let tol = POSITIVITY * scale;
    for (which, v) in [("lambda+", min_eig_plus), ("lambda-", min_eig_minus)] {
        if v < -tol {
            return Err(Error::Positivity { which: which.into(), min_eig: v, tolerance: tol });
        }
    }
    Ok(StateCovariances {
        c_plus,
        c_minus,
        gram,
        lambda_plus,
        lambda_minus,
        provenance,
        diagnostics: CovarianceDiagnostics { min_eig_plus, min_eig_minus, sum_rule, scale },
    })
}

/// Covariances of the ground state of a time-independent Hamiltonian.
pub fn static_vacuum(problem: &Problem) -> Result<StateCovariances> {
    if !problem.is_static() {
        return Err(Error::NotStatic(problem.physical.name.clone()));
    }
    let eig = eig_decompose(&problem.hamiltonian(0.0)?)?;
    let threshold = GAP_RELATIVE * eig.spectral_radius().max(1.0);
    if eig.gap() < threshold {
        return Err(Error::SpectralGap { gap: eig.gap(), threshold });
    }
    let cp = eig.projection(Sign::Plus)?;
    let cm = eig.projection(Sign::Minus)?;
    cauchy_covariances(cp, cm, problem.gram.clone(), Provenance::Vacuum)
}

#[derive(Clone, Debug)]
pub struct TwoPoint {
    /// `G U(t,0) c^+ U(0,s)`
    pub plus: CMat,
    pub minus: CMat,
    /// `|Lambda^+ + Lambda^- - G U(t,s)| / |G|` with `U(t,s)` propagated directly
    pub sum_rule: f64,
}

/// `U(t,0) c U(0,s)`
pub fn evolved_kernel(c: &CMat, prop: &mut Propagator, t: f64, s: f64) -> Result<CMat> {
    let ut = prop.from_zero(t)?;
    let us = prop.to_zero(s)?;
    Ok(&(&ut * c) * &us)
}

pub fn spacetime_two_point(cov: &StateCovariances, prop: &mut Propagator, t: f64, s: f64) -> Result<TwoPoint> {
    let g = cov.gram.matrix();
    let plus = g * &evolved_kernel(&cov.c_plus, prop, t, s)?;
    let minus = g * &evolved_kernel(&cov.c_minus, prop, t, s)?;
    let direct = g * &prop.matrix(t, s)?;
    let sum_rule = op_norm(&(&(&plus + &minus) - &direct)) / op_norm(g);
    Ok(TwoPoint { plus, minus, sum_rule })
}

/// `|(d_t - i H(t)) K(t,s)| / (|H| |K|)` for `K = U(t,0) c U(0,s)`, with the
/// time derivative by fourth-order differences of step `h`.
pub fn intertwining_residual(c: &CMat, prop: &mut Propagator, t: f64, s: f64, h: f64) -> Result<f64> {
    let k0 = evolved_kernel(c, prop, t, s)?;
    let mut k = Vec::with_capacity(4);
    for off in [-2.0, -1.0, 1.0, 2.0] {
        let u = prop.matrix(t + off * h, t)?;
        k.push(&u * &k0);
    }
    let mut d = scale_re(&k[0], 1.0);
    d -= scale_re(&k[1], 8.0);
    d += scale_re(&k[2], 8.0);
    d -= &k[3];
    let d = scale_re(&d, 1.0 / (12.0 * h));
    let h_t = prop.generator().matrix(t)?;
    let res = &d - &crate::linalg::scale(&(&h_t * &k0), crate::linalg::I);
    let g = prop.gram().clone();
    Ok(g.norm(&res) / (g.norm(&h_t) * g.norm(&k0)).max(1e-300))
}

/// `lambda(t) = G U(t,0) c U(0,t)` against `U(s,t)* lambda(s) U(s,t)`, relative to `|G|`.
pub fn time_consistency(c: &CMat, prop: &mut Propagator, t: f64, s: f64) -> Result<f64> {
    let g = prop.gram().matrix().clone();
    let lt = &g * &evolved_kernel(c, prop, t, t)?;
    let ls = &g * &evolved_kernel(c, prop, s, s)?;
    let u = prop.matrix(s, t)?;
    let rhs = &(&u.adjoint() * &ls) * &u;
    Ok(op_norm(&(&lt - &rhs)) / op_norm(&g))
}

/// `|L~ - c_t^{1/2} L c_s^{-3/2}| / |L~|` for kernels on the coordinate time measure.
pub fn conformal_covariance_check(lambda: &CMat, lambda_tilde: &CMat, c_t: &[f64], c_s: &[f64]) -> f64 {
    let l: Vec<f64> = [c_t, c_t].concat().iter().map(|c| c.sqrt()).collect();
    let r: Vec<f64> = [c_s, c_s].concat().iter().map(|c| c.powf(-1.5)).collect();
    let mapped = scale_rows_cols(lambda, &l, &r);
    op_norm(&(lambda_tilde - &mapped)) / op_norm(lambda_tilde).max(1e-300)
}

/// Kernel of the physical operator on the coordinate time measure,
/// `U(t,0) c U(0,s) c_s`: the lapse is the density of the spacetime volume
/// relative to the surface measure.
pub fn coordinate_kernel(k: &CMat, c_s: &[f64]) -> CMat {
    let ones = vec![1.0; k.nrows()];
    scale_rows_cols(k, &ones, &[c_s, c_s].concat())
}

/// Dual-frame check for a family with a static lapse: the reduced-frame kernel
/// `K~ = U~(t,0) c~ U~(0,s)` against the kernel propagated independently with
/// the physical-frame generator `C^{-1/2} H~ C^{1/2}` from the lifted `c`.
pub fn conformal_dual_frame(problem: Arc<Problem>, c_reduced: &CMat, cfg: &StepperConfig, t: f64, s: f64) -> Result<f64> {
    if !problem.flowed.lapse.is_static() {
        return Err(Error::NotStatic(format!("{}: lapse", problem.physical.name)));
    }
    let c = problem.lapse(0.0)?;
    let mut reduced = Propagator::new(problem.clone(), cfg.clone());
    let k_tilde = evolved_kernel(c_reduced, &mut reduced, t, s)?;
    let l: Vec<f64> = [&c[..], &c[..]].concat().iter().map(|v| v.powf(-0.5)).collect();
    let r: Vec<f64> = l.iter().map(|v| 1.0 / v).collect();
    let c_phys = scale_rows_cols(c_reduced, &l, &r);
    let mut physical = Propagator::new(Arc::new(ConjugatedGenerator::new(problem, &c)?), cfg.clone());
    let k = evolved_kernel(&c_phys, &mut physical, t, s)?;
    Ok(conformal_covariance_check(&coordinate_kernel(&k, &c), &k_tilde, &c, &c))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymbolSlice {
    /// node index, `None` for the x-average
    pub node: Option<usize>,
    pub deviations: Vec<f64>,
    pub fit: Option<LineFit>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymbolReport {
    pub sign: Sign,
    pub modes: Vec<i64>,
    pub average: SymbolSlice,
    pub slices: Vec<SymbolSlice>,
    /// every deviation below round-off: no slope to fit
    pub exact: bool,
    /// worst slope over the average and the slices
    pub slope: Option<f64>,
    pub passed: bool,
}

/// `1_{R+-}` of the principal symbol `-gamma0 gamma1 k / sqrt(h)`: `(1 +- sgn(k) sigma) / 2`.
pub fn principal_projection(rep: &CliffordRep, k: f64, sign: Sign) -> [[c64; 2]; 2] {
    let g01 = m2_mul(&rep.gamma[0], &rep.gamma[1]);
    let sigma = m2_scale(&g01, c64::new(-k.signum() * sign.value(), 0.0));
    let mut out = [[c64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            out[i][j] = (sigma[i][j] + c64::new(id, 0.0)) * 0.5;
        }
    }
    out
}

fn norm2(a: &[[c64; 2]; 2]) -> f64 {
    let m = CMat::from_fn(2, 2, |i, j| a[i][j]);
    op_norm(&m)
}

/// Left symbol `a(x_j, k_n) = e^{-i k_n x_j} sum_l A_{jl} e^{i k_n x_l}`, per spin block.
fn left_symbol(a: &CMat, grid: &GridSpec) -> Vec<Vec<[[c64; 2]; 2]>> {
    let m = grid.points;
    let x = grid.nodes();
    let k = grid.wavenumbers();
    let e = CMat::from_fn(m, m, |l, n| c64::from_polar(1.0, k[n] * x[l]));
    let mut out = vec![vec![[[c64::new(0.0, 0.0); 2]; 2]; m]; m];
    for s in 0..2 {
        for r in 0..2 {
            let block = CMat::from_fn(m, m, |i, j| a[(s * m + i, r * m + j)]);
            let b = &block * &e;
            for j in 0..m {
                for n in 0..m {
                    out[j][n][s][r] = b[(j, n)] * c64::from_polar(1.0, -k[n] * x[j]);
                }
            }
        }
    }
    out
}

/// Deviation of `c` from the principal-symbol projection on the band
/// `k_lo <= |n| <= k_hi`, for the x-average and four x-slices.
pub fn hadamard_symbol_test(c: &CMat, rep: &CliffordRep, grid: &GridSpec, band: (i64, i64), sign: Sign) -> Result<SymbolReport> {
    let m = grid.points;
    let sym = left_symbol(c, grid);
    let k = grid.wavenumbers();
    let modes: Vec<i64> = (band.0.max(1)..=band.1).collect();
    let index_of = |n: i64| (0..m).find(|&i| grid.mode_index(i) == n);
    let deviation_at = |a: &dyn Fn(usize) -> [[c64; 2]; 2]| -> Vec<f64> {
        modes
            .iter()
            .map(|&n| {
                [n, -n]
                    .iter()
                    .filter_map(|&nn| index_of(nn))
                    .map(|i| {
                        let p = principal_projection(rep, k[i], sign);
                        let s = a(i);
                        let mut d = [[c64::new(0.0, 0.0); 2]; 2];
                        for r in 0..2 {
                            for q in 0..2 {
                                d[r][q] = s[r][q] - p[r][q];
                            }
                        }
                        norm2(&d)
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    };
    let fit_of = |dev: &[f64]| -> Option<LineFit> {
        if dev.iter().all(|d| *d < 1e-13) {
            return None;
        }
        let (x, y): (Vec<f64>, Vec<f64>) =
            modes.iter().zip(dev).filter(|(_, d)| **d > 0.0).map(|(n, d)| (*n as f64, *d)).unzip();
        loglog_fit(&x, &y)
    };
    let avg_dev = deviation_at(&|i| {
        let mut s = [[c64::new(0.0, 0.0); 2]; 2];
        for row in &sym {
            for r in 0..2 {
                for q in 0..2 {
                    s[r][q] += row[i][r][q] / m as f64;
                }
            }
        }
        s
    });
    let average = SymbolSlice { node: None, fit: fit_of(&avg_dev), deviations: avg_dev };
    let slices: Vec<SymbolSlice> = [0, m / 4, m / 2, 3 * m / 4]
        .iter()
        .map(|&j| {
            let dev = deviation_at(&|i| sym[j][i]);
            SymbolSlice { node: Some(j), fit: fit_of(&dev), deviations: dev }
        })
        .collect();
    let all: Vec<&SymbolSlice> = std::iter::once(&average).chain(slices.iter()).collect();
    let exact = all.iter().all(|s| s.deviations.iter().all(|d| *d < 1e-13));
    let slope = all.iter().filter_map(|s| s.fit.as_ref().map(|f| f.slope)).reduce(f64::max);
    if let Some(sl) = slope {
        if sl > SLOPE_FAILURE {
            return Err(Error::HadamardDiagnostic { test: format!("symbol ({sign:?})"), slope: sl });
        }
    }
    let passed = exact || slope.map_or(false, |s| s <= SYMBOL_SLOPE);
    Ok(SymbolReport { sign, modes, average, slices, exact, slope, passed })
}

/// Exchanges `c^+` and `c^-` on the Fourier modes with `n > 0`.
pub fn swapped_on_positive_modes(c_plus: &CMat, c_minus: &CMat, grid: &GridSpec) -> (CMat, CMat) {
    let m = grid.points;
    let f = grid.fourier_matrix();
    let d: Vec<f64> = (0..m).map(|n| if grid.mode_index(n) > 0 { 1.0 } else { 0.0 }).collect();
    let q1 = &(&f.adjoint() * &crate::linalg::diag_real(&d)) * &f;
    let q = kron(&identity(2), &q1);
    let qc = &identity(2 * m) - &q;
    let bad_plus = &(&(&q * c_minus) * &q) + &(&(&qc * c_plus) * &qc);
    let bad_minus = &identity(2 * m) - &bad_plus;
    (bad_plus, bad_minus)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub annuli: Vec<(f64, f64)>,
    pub fit: Option<LineFit>,
    pub slope: Option<f64>,
    pub meets_threshold: bool,
}

/// Frequency decay of `c - P~(0)` over row annuli with lower edge at least 4.
pub fn smoothing_difference_test(c: &CMat, p_tilde: &CMat, gram: &Gram, grid: &GridSpec, threshold: f64) -> SmoothingReport {
    let diff = c - p_tilde;
    let annuli: Vec<(f64, f64)> = annulus_norms(&diff, gram, grid).into_iter().filter(|(k, _)| *k > 4.0).collect();
    let pts: Vec<(f64, f64)> = annuli.iter().cloned().filter(|(_, v)| *v > 1e-300).collect();
    let fit = if pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        loglog_fit(&x, &y)
    } else {
        None
    };
    let slope = fit.as_ref().map(|f| f.slope);
    let zero = annuli.iter().all(|(_, v)| *v < 1e-13);
    SmoothingReport { annuli, slope, meets_threshold: zero || slope.map_or(false, |s| s <= threshold), fit }
}

pub fn smoothing_threshold(order: usize) -> f64 {
    SMOOTHING_SLOPE - crate::tolerances::SLOPE_GAIN * order.saturating_sub(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FamilySpec;
    use crate::linalg::{max_abs, zeros};
    use crate::spin_algebra::clifford;
    use std::f64::consts::PI;

    fn problem(spec: FamilySpec, m: usize) -> Arc<Problem> {
        Arc::new(Problem::new(spec.build().unwrap(), GridSpec::new(m, 2.0 * PI).unwrap()).unwrap())
    }

    #[test]
    fn flat_vacuum_blocks_match_closed_form() {
        let p = problem(FamilySpec::flat(1.0), 16);
        let vac = static_vacuum(&p).unwrap();
        assert!(vac.diagnostics.sum_rule < 1e-14);
        assert!(vac.diagnostics.min_eig_plus > -1e-12);
        // rank M
        let tr: f64 = (0..32).map(|i| vac.c_plus[(i, i)].re).sum();
        assert!((tr - 16.0).abs() < 1e-10);
        // Fourier block at k: (1 + H_k / sqrt(k^2 + 1)) / 2, H_k = [[0, k + i], [k - i, 0]]
        let g = p.grid.clone();
        let f = kron(&identity(2), &g.fourier_matrix());
        let ch = &(&f * &vac.c_plus) * f.adjoint();
        for n in [1usize, 3, 13] {
            let k = g.wavenumbers()[n];
            let w = (k * k + 1.0).sqrt();
            let hk = [[c64::new(0.0, 0.0), c64::new(k, 1.0)], [c64::new(k, -1.0), c64::new(0.0, 0.0)]];
            for s in 0..2 {
                for r in 0..2 {
                    let id = if s == r { 1.0 } else { 0.0 };
                    let want = (hk[s][r] / w + c64::new(id, 0.0)) * 0.5;
                    assert!((ch[(s * 16 + n, r * 16 + n)] - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn massless_flat_has_a_kernel() {
        let p = problem(FamilySpec::flat(0.0), 16);
        assert!(matches!(static_vacuum(&p), Err(Error::SpectralGap { .. })));
        assert!(matches!(static_vacuum(&problem(FamilySpec::bump(1.5), 8)), Err(Error::NotStatic(_))));
    }

    #[test]
    fn trivial_pair_and_negative_pair() {
        let gram = Arc::new(Gram::from_diag(&[1.0, 2.0]).unwrap());
        let cov = cauchy_covariances(identity(2), zeros(2, 2), gram.clone(), Provenance::Custom).unwrap();
        assert_eq!(cov.diagnostics.sum_rule, 0.0);
        assert_eq!(cov.diagnostics.min_eig_minus, 0.0);
        let bad = scale_re(&identity(2), -1.0);
        let two = scale_re(&identity(2), 2.0);
        assert!(matches!(cauchy_covariances(two, bad, gram, Provenance::Custom), Err(Error::Positivity { .. })));
    }

    #[test]
    fn static_vacuum_identities() {
        let p = problem(FamilySpec::static_bump(), 16);
        let vac = static_vacuum(&p).unwrap();
        let mut prop = Propagator::new(p.clone(), StepperConfig::default());
        let tp = spacetime_two_point(&vac, &mut prop, 0.0, 0.0).unwrap();
        assert!(max_abs(&(&tp.plus - &vac.lambda_plus)) < 1e-14);
        assert!(time_consistency(&vac.c_plus, &mut prop, 3.0, 0.0).unwrap() < 1e-9);
        assert!(time_consistency(&vac.c_plus, &mut prop, 1.0, 1.0).unwrap() < 1e-14);
        let tp = spacetime_two_point(&vac, &mut prop, 2.0, -1.0).unwrap();
        assert!(tp.sum_rule < 1e-10);
        assert!(intertwining_residual(&vac.c_plus, &mut prop, 0.7, 0.0, 1e-3).unwrap() < 1e-8);
    }

    #[test]
    fn flat_vacuum_symbol_decays_and_swap_fails() {
        let p = problem(FamilySpec::flat(1.0), 64);
        let vac = static_vacuum(&p).unwrap();
        let rep = clifford();
        let r = hadamard_symbol_test(&vac.c_plus, &rep, &p.grid, (8, 16), Sign::Plus).unwrap();
        // deviation ~ m / (2k): slope -1
        assert!((r.slope.unwrap() + 1.0).abs() < 0.1, "{:?}", r.slope);
        assert!(r.passed);
        let (bp, _) = swapped_on_positive_modes(&vac.c_plus, &vac.c_minus, &p.grid);
        assert!(matches!(hadamard_symbol_test(&bp, &rep, &p.grid, (8, 16), Sign::Plus), Err(Error::HadamardDiagnostic { .. })));
    }

    #[test]
    fn conformal_map_of_constant_factor() {
        let l = CMat::from_fn(4, 4, |i, j| c64::new((i + j) as f64, i as f64 - j as f64));
        let two = [2.0, 2.0];
        let half = scale_re(&l, 0.5);
        assert!(conformal_covariance_check(&l, &half, &two, &two) < 1e-15);
        let one = [1.0, 1.0];
        assert_eq!(conformal_covariance_check(&l, &l, &one, &one), 0.0);
    }

    #[test]
    fn dual_frame_agrees_for_a_varying_lapse() {
        let p = problem(FamilySpec::lapsed(1.5), 8);
        let c0 = static_vacuum(&problem(FamilySpec::static_bump(), 8)).unwrap().c_plus;
        let cfg = StepperConfig { tol: 1e-10, ..Default::default() };
        let r = conformal_dual_frame(p.clone(), &c0, &cfg, 1.0, 0.0).unwrap();
        assert!(r < 1e-6, "{r}");
        // the undressed kernel is not covariant
        let c = p.lapse(0.0).unwrap();
        let mut prop = Propagator::new(p.clone(), cfg);
        let k = evolved_kernel(&c0, &mut prop, 1.0, 0.0).unwrap();
        assert!(conformal_covariance_check(&k, &k, &c, &c) > 1e-2);
    }

    #[test]
    fn smoothing_of_identical_objects_is_exact() {
        let g = GridSpec::new(32, 2.0 * PI).unwrap();
        let gram = Gram::from_diag(&vec![1.0; 64]).unwrap();
        let c = identity(64);
        let r = smoothing_difference_test(&c, &c, &gram, &g, smoothing_threshold(1));
        assert!(r.meets_threshold && r.slope.is_none());
        assert_eq!(smoothing_threshold(2), -2.6);
    }
}
