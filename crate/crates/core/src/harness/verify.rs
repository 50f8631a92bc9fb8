//! Invariant suite over the built-in families.  One entry per documented
//! invariant; `verify_with` takes the Clifford representation so a broken one
//! can be injected.

use super::config::Config;
use super::container::Array;
use super::Check;
use crate::adiabatic_projections::{Adiabatic, CorrectionMode};
use crate::error::Result;
use crate::evolution::{Propagator, StepperConfig};
use crate::fit::{japanese, loglog_fit};
use crate::functional_calculus::{eig_decompose, resolvent_functional, scalar_inverse_abs, spectral_projection, Functional, QuadratureMethod, Sign};
use crate::geometry::{christoffel, geometric_samples, reduce, verify_decay, FamilySpec, GridSpec, TimeEnd};
use crate::linalg::{c64, herm_apply, herm_eigen, herm_eigenvalues, hermitize, identity, kron, scale_re, CMat, Gram};
use crate::moller_scattering::{lift_to_physical, moller_projection, Direction, ProjectionResiduals, Schedule};
use crate::operator_assembly::DiscreteOperator;
use crate::problem::Problem;
use crate::spin_algebra::{check_invariants, clifford, frame_transport, transport_operator, CliffordRep, m2_mul, m2_norm, m2_add, m2_scale};
use crate::states_hadamard::{cauchy_covariances, static_vacuum, Provenance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// `(module, invariant)` for every entry the suite reports.
pub const INVARIANTS: &[(&str, &str)] = &[
    ("geometry", "decay_exponents"),
    ("geometry", "reduction_preserves_decay"),
    ("geometry", "christoffel_time_differences"),
    ("spin_algebra", "clifford_invariants"),
    ("spin_algebra", "frame_closed_form"),
    ("spin_algebra", "transport_cocycle"),
    ("operator_assembly", "hamiltonian_selfadjoint"),
    ("operator_assembly", "flat_block_spectrum"),
    ("operator_assembly", "hamiltonian_decay"),
    ("functional_calculus", "quadrature_convergence"),
    ("functional_calculus", "sign_involution"),
    ("functional_calculus", "projection_scale_invariance"),
    ("evolution", "self_convergence"),
    ("evolution", "time_reversal"),
    ("evolution", "static_commutes"),
    ("adiabatic_projections", "dressing_spectrum"),
    ("adiabatic_projections", "dressing_unitary"),
    ("adiabatic_projections", "corrected_projection_identities"),
    ("moller_scattering", "projection_identities"),
    ("moller_scattering", "out_in_asymmetry"),
    ("moller_scattering", "schedule_doubling"),
    ("states_hadamard", "purity"),
    ("states_hadamard", "car_compatibility"),
    ("states_hadamard", "flat_vacuum_blocks"),
    ("cli_harness", "idempotent_rerun"),
    ("cli_harness", "output_round_trip"),
];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

pub fn verify() -> VerifyReport {
    verify_with(&clifford())
}

pub fn verify_with(rep: &CliffordRep) -> VerifyReport {
    let mut checks = Vec::with_capacity(INVARIANTS.len());
    for (module, name) in INVARIANTS {
        let c = match run_check(rep, name) {
            Ok(c) => c,
            Err(e) => Check::flag(module, name, false, e.to_string()),
        };
        checks.push(Check { module: module.to_string(), name: name.to_string(), ..c });
    }
    VerifyReport { passed: checks.iter().all(|c| c.passed), checks }
}

fn grid(m: usize) -> GridSpec {
    GridSpec::new(m, 2.0 * PI).expect("valid grid")
}

fn problem(rep: &CliffordRep, spec: FamilySpec, m: usize) -> Result<Arc<Problem>> {
    Ok(Arc::new(Problem::with_rep(rep.clone(), spec.build()?, grid(m))?))
}

fn sym_eigenvalues(gram: &Gram, a: &CMat) -> Result<Vec<f64>> {
    herm_eigenvalues(&hermitize(&gram.to_sym(a)))
}

fn exp_i(gram: &Gram, r: &CMat, s: f64) -> Result<CMat> {
    let (vals, vecs) = herm_eigen(&hermitize(&gram.to_sym(r)))?;
    let ph: Vec<c64> = vals.iter().map(|l| c64::from_polar(1.0, s * l)).collect();
    Ok(gram.from_sym(&herm_apply(&ph, &vecs)))
}

fn run_check(rep: &CliffordRep, name: &str) -> Result<Check> {
    let m = "";
    Ok(match name {
        "decay_exponents" => {
            let mut worst: f64 = 0.0;
            for spec in [FamilySpec::bump(1.0), FamilySpec::shifted(1.5)] {
                let fam = spec.build()?;
                let r = verify_decay(&fam, &geometric_samples(5.0, 2.0, 8, true), 0)?;
                for f in r.fields.iter().filter(|f| f.exponent.is_finite()) {
                    worst = worst.max(fam.mu - f.exponent);
                }
            }
            Check::below(m, name, worst, 0.2)
        }
        "reduction_preserves_decay" => {
            let fam = reduce(&FamilySpec::shifted(1.0).build()?)?;
            let r = verify_decay(&fam, &geometric_samples(5.0, 2.0, 8, true), 0)?;
            Check::flag(m, name, fam.is_reduced() && r.compliant, format!("reduced {}, compliant {}", fam.is_reduced(), r.compliant))
        }
        "christoffel_time_differences" => {
            let fam = FamilySpec::bump(1.0).build()?;
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let d = 1e-4;
            let mut worst: f64 = 0.0;
            for _ in 0..10 {
                let (t, x) = (rng.gen_range(-5.0..5.0), rng.gen_range(0.0..2.0 * PI));
                let h = fam.spatial.value(t, x)?;
                let dh = (fam.spatial.value(t + d, x)? - fam.spatial.value(t - d, x)?) / (2.0 * d);
                let g = christoffel(&fam, t, x)?;
                worst = worst.max((g[1][0][1] - dh / (2.0 * h)).abs()).max((g[0][1][1] - dh / 2.0).abs());
            }
            Check::below(m, name, worst, 1e-6)
        }
        "clifford_invariants" => {
            let worst = check_invariants(rep).iter().map(|c| c.residual).fold(0.0, f64::max);
            Check::below(m, name, worst, 1e-14)
        }
        "frame_closed_form" => {
            let fam = FamilySpec::bump(1.0).build()?;
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let (t, x) = (rng.gen_range(-20.0..20.0), rng.gen_range(0.0..2.0 * PI));
                let u = frame_transport(&fam, t, x)?.u1;
                worst = worst.max((u - fam.spatial.value(t, x)?.powf(-0.5)).abs());
            }
            Check::below(m, name, worst, 1e-12)
        }
        "transport_cocycle" => {
            let fam = FamilySpec::bump(1.0).build()?;
            let nodes = grid(8).nodes();
            let inv = |a: &[[c64; 2]; 2]| {
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
            };
            let (tt, ts, tr) = (transport_operator(rep, &fam, 1.5, &nodes)?, transport_operator(rep, &fam, 0.7, &nodes)?, transport_operator(rep, &fam, -0.4, &nodes)?);
            let mut worst: f64 = 0.0;
            for j in 0..nodes.len() {
                // T(t,s) T(s,r) - T(t,r), with T(a,b) = T(a,0) T(b,0)^{-1}
                let ab = m2_mul(&m2_mul(&tt[j], &inv(&ts[j])), &m2_mul(&ts[j], &inv(&tr[j])));
                let direct = m2_mul(&tt[j], &inv(&tr[j]));
                worst = worst.max(m2_norm(&m2_add(&ab, &m2_scale(&direct, c64::new(-1.0, 0.0)))));
            }
            Check::below(m, name, worst, 1e-12)
        }
        "hamiltonian_selfadjoint" => {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut worst: f64 = 0.0;
            for n in ["flat", "static", "bump", "cosmological-ramp", "shifted"] {
                let p = problem(rep, FamilySpec::builtin(n, None)?, 8)?;
                for _ in 0..20 {
                    worst = worst.max(p.hamiltonian(rng.gen_range(-50.0..50.0))?.selfadjoint_residual());
                }
            }
            Check::below(m, name, worst, 1e-8)
        }
        "flat_block_spectrum" => {
            let mut worst: f64 = 0.0;
            for (spec, t) in [(FamilySpec::flat(1.0), 0.0), (FamilySpec::ramp(), 0.3)] {
                let p = problem(rep, spec, 16)?;
                let h = p.reduced.spatial.value(t, 0.0)?;
                let mass = p.reduced.mass.value(t, 0.0)?;
                let mut want: Vec<f64> = p
                    .grid
                    .wavenumbers()
                    .iter()
                    .flat_map(|k| {
                        let w = (k * k / h + mass * mass).sqrt();
                        [w, -w]
                    })
                    .collect();
                want.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let got = eig_decompose(&p.hamiltonian(t)?)?.values;
                worst = worst.max(got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            }
            Check::below(m, name, worst, 1e-10)
        }
        "hamiltonian_decay" => {
            let p = problem(rep, FamilySpec::bump(1.0), 8)?;
            let hinf = p.asymptotic(TimeEnd::Future)?.matrix;
            let ts = geometric_samples(10.0, 2.0, 6, false);
            let ns: Vec<f64> = ts.iter().map(|t| Ok(p.gram.norm(&(&p.hamiltonian(*t)?.matrix - &hinf)))).collect::<Result<_>>()?;
            let rate = loglog_fit(&ts.iter().map(|t| japanese(*t)).collect::<Vec<_>>(), &ns).map_or(0.0, |f| -f.slope);
            Check::below(m, name, p.physical.mu - 0.2 - rate, 0.0).with_detail(format!("rate {rate:.3}"))
        }
        "quadrature_convergence" => {
            let a = 4.0;
            let errs: Vec<f64> = [9, 17, 33, 65].iter().map(|n| (scalar_inverse_abs(a, *n, QuadratureMethod::TanSubstitution) - 1.0 / a).abs()).collect();
            let monotone = errs.windows(2).all(|w| w[1] <= w[0] || w[1] < 1e-14);
            Check::flag(m, name, monotone && errs[3] < 1e-10, format!("{errs:?}"))
        }
        "sign_involution" => {
            let p = problem(rep, FamilySpec::static_bump(), 8)?;
            let h = p.hamiltonian(0.0)?;
            let s = resolvent_functional(&h, Functional::Sign, 400, 1e-6)?.value;
            let s2 = resolvent_functional(&DiscreteOperator::new(s, p.gram.clone()), Functional::Sign, 400, 1e-6)?.value;
            let e = eig_decompose(&h)?;
            let exact = &e.projection(Sign::Plus)? - &e.projection(Sign::Minus)?;
            Check::below(m, name, p.gram.norm(&(&s2 - &exact)), 1e-6)
        }
        "projection_scale_invariance" => {
            let p = problem(rep, FamilySpec::bump(1.0), 8)?;
            let h = p.hamiltonian(0.4)?;
            let h2 = DiscreteOperator::new(scale_re(&h.matrix, 2.0), h.gram.clone());
            let d = p.gram.norm(&(&spectral_projection(&h, Sign::Plus)? - &spectral_projection(&h2, Sign::Plus)?));
            Check::below(m, name, d, 1e-12)
        }
        "self_convergence" => {
            let p = problem(rep, FamilySpec::bump(1.5), 8)?;
            let u = |dt: f64| Propagator::new(p.clone(), StepperConfig { dt_base: dt, tol: 1.0, ..Default::default() }).matrix(1.0, 0.0);
            let (a, b, c) = (u(0.02)?, u(0.01)?, u(0.005)?);
            let order = (p.gram.norm(&(&a - &b)) / p.gram.norm(&(&b - &c))).log2();
            Check::below(m, name, (order - 2.0).abs(), 0.4).with_detail(format!("order {order:.3}"))
        }
        "time_reversal" => {
            let p = problem(rep, FamilySpec::bump(1.5), 8)?;
            let mut prop = Propagator::new(p.clone(), StepperConfig::default());
            let f = prop.matrix(2.0, -1.0)?;
            let b = prop.matrix(-1.0, 2.0)?;
            Check::below(m, name, p.gram.norm(&(&b - &p.gram.unitary_inverse(&f))), crate::tolerances::UNITARITY)
        }
        "static_commutes" => {
            let p = problem(rep, FamilySpec::static_bump(), 8)?;
            let u = Propagator::new(p.clone(), StepperConfig::default()).matrix(3.0, 0.0)?;
            let h = p.hamiltonian(0.0)?.matrix;
            Check::below(m, name, p.gram.norm(&(&(&u * &h) - &(&h * &u))) / p.gram.norm(&h), 1e-8)
        }
        "dressing_spectrum" => {
            let p = problem(rep, FamilySpec::bump(1.5), 8)?;
            let ad = Adiabatic::for_problem(p.clone())?;
            let t = 0.5;
            let r = ad.correction(t, 1, CorrectionMode::PaperLeading)?;
            let hm = ad.instant(t)?.hamiltonian();
            let conj = &(&exp_i(&p.gram, &r, 1.0)? * &hm) * &exp_i(&p.gram, &r, -1.0)?;
            let dressed = ad.dressed_hamiltonian(t, 1, CorrectionMode::PaperLeading)?;
            let bound = p.gram.norm(&(&dressed - &conj));
            let (a, b) = (sym_eigenvalues(&p.gram, &hm)?, sym_eigenvalues(&p.gram, &dressed)?);
            let shift = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            Check::below(m, name, shift, bound * (1.0 + 1e-6) + 1e-12).with_detail(format!("shift {shift:e}, |i^-1 (d e^iR) e^-iR| {bound:e}"))
        }
        "dressing_unitary" => {
            let p = problem(rep, FamilySpec::bump(1.5), 8)?;
            let ad = Adiabatic::for_problem(p.clone())?;
            let r = ad.correction(0.5, 1, CorrectionMode::SylvesterExact)?;
            Check::below(m, name, p.gram.unitarity_residual(&exp_i(&p.gram, &r, 1.0)?), 1e-10)
        }
        "corrected_projection_identities" => {
            let p = problem(rep, FamilySpec::bump(1.5), 8)?;
            let ad = Adiabatic::for_problem(p.clone())?;
            let (pp, r) = ad.corrected_projection(0.5, 1, CorrectionMode::PaperLeading)?;
            let pm = &(&exp_i(&p.gram, &r, -1.0)? * &ad.projections(0.5)?.1) * &exp_i(&p.gram, &r, 1.0)?;
            Check::below(m, name, ProjectionResiduals::of(&p.gram, &pp, &pm).max(), 1e-10)
        }
        "projection_identities" | "purity" => {
            let p = problem(rep, FamilySpec::bump(1.5), 8)?;
            let ad = Adiabatic::for_problem(p.clone())?;
            let mut prop = Propagator::new(p.clone(), StepperConfig { tol: 1e-6, ..Default::default() });
            let r = moller_projection(&mut prop, &ad, Direction::Out, &Schedule { t_max: 160.0, ..Default::default() })?;
            if name == "purity" {
                let cov = cauchy_covariances(r.c_plus.clone(), r.c_minus.clone(), p.gram.clone(), Provenance::Out)?;
                let res = ProjectionResiduals::of(&cov.gram, &cov.c_plus, &cov.c_minus).max();
                Check::below(m, name, res, crate::tolerances::PROJECTION_IDENTITY)
            } else {
                Check::below(m, name, r.purified.max(), crate::tolerances::PROJECTION_IDENTITY)
            }
        }
        "out_in_asymmetry" => {
            let s = Schedule { t_max: 160.0, ..Default::default() };
            let diff = |spec: FamilySpec| -> Result<f64> {
                let p = problem(rep, spec, 8)?;
                let ad = Adiabatic::for_problem(p.clone())?;
                let mut prop = Propagator::new(p.clone(), StepperConfig { tol: 1e-6, ..Default::default() });
                let o = moller_projection(&mut prop, &ad, Direction::Out, &s)?;
                let i = moller_projection(&mut prop, &ad, Direction::In, &s)?;
                Ok(p.gram.norm(&(&o.c_plus - &i.c_plus)))
            };
            let (bump, stat) = (diff(FamilySpec::bump(1.5))?, diff(FamilySpec::static_bump())?);
            Check::flag(m, name, bump > 1e-4 && stat < 1e-6, format!("bump {bump:e}, static {stat:e}"))
        }
        "schedule_doubling" => {
            let p = problem(rep, FamilySpec::bump(1.5), 8)?;
            let ad = Adiabatic::for_problem(p.clone())?;
            let mut prop = Propagator::new(p.clone(), StepperConfig { tol: 1e-7, ..Default::default() });
            let a = moller_projection(&mut prop, &ad, Direction::Out, &Schedule { t_max: 160.0, ..Default::default() })?;
            let b = moller_projection(&mut prop, &ad, Direction::Out, &Schedule { t_max: 320.0, ..Default::default() })?;
            Check::below(m, name, p.gram.norm(&(&a.c_plus - &b.c_plus)), a.tail_bound)
        }
        "car_compatibility" => {
            let p = problem(rep, FamilySpec::static_bump(), 8)?;
            let vac = static_vacuum(&p)?;
            let mut worst = vac.diagnostics.sum_rule;
            let mut prop = Propagator::new(p.clone(), StepperConfig::default());
            let u = prop.from_zero(2.0)?;
            let ui = p.gram.unitary_inverse(&u);
            let ev = |c: &CMat| &(&u * c) * &ui;
            let moved = cauchy_covariances(ev(&vac.c_plus), ev(&vac.c_minus), p.gram.clone(), Provenance::Custom)?;
            worst = worst.max(moved.diagnostics.sum_rule);
            let c0: Vec<f64> = p.grid.nodes().iter().map(|x| 1.0 + 0.5 * x.sin()).collect();
            let fake = crate::moller_scattering::ScatteringResult {
                c_plus: vac.c_plus.clone(),
                c_minus: vac.c_minus.clone(),
                direction: Direction::Out,
                method: crate::moller_scattering::Method::Moller,
                schedule: vec![],
                residuals: vec![],
                mu_hat: None,
                exponent_variance: None,
                extrapolated: false,
                tail_bound: 0.0,
                raw: ProjectionResiduals::of(&p.gram, &vac.c_plus, &vac.c_minus),
                purified: ProjectionResiduals::of(&p.gram, &vac.c_plus, &vac.c_minus),
                lifted: false,
            };
            let (l, g) = lift_to_physical(&fake, &p.gram, &c0)?;
            let lifted = cauchy_covariances(l.c_plus, l.c_minus, Arc::new(g), Provenance::Custom)?;
            worst = worst.max(lifted.diagnostics.sum_rule);
            Check::below(m, name, worst, crate::tolerances::SUM_RULE)
        }
        "flat_vacuum_blocks" => {
            let p = problem(rep, FamilySpec::flat(1.0), 16)?;
            let vac = static_vacuum(&p)?;
            let f = kron(&identity(2), &p.grid.fourier_matrix());
            let ch = &(&f * &vac.c_plus) * f.adjoint();
            let h_blocks = p.hamiltonian(0.0)?.matrix;
            let hh = &(&f * &h_blocks) * f.adjoint();
            let mut worst: f64 = 0.0;
            let mm = 16;
            for (n, k) in p.grid.wavenumbers().iter().enumerate() {
                let w = (k * k + 1.0).sqrt();
                for s in 0..2 {
                    for r in 0..2 {
                        let id = if s == r { 1.0 } else { 0.0 };
                        let want = (hh[(s * mm + n, r * mm + n)] / w + c64::new(id, 0.0)) * 0.5;
                        worst = worst.max((ch[(s * mm + n, r * mm + n)] - want).norm());
                    }
                }
            }
            Check::below(m, name, worst, 1e-10)
        }
        "idempotent_rerun" => {
            let mut cfg = Config::new(FamilySpec::flat(1.0), 8);
            cfg.scattering.t_max = 40.0;
            let root = std::env::temp_dir().join(format!("dirac-lab-verify-{}", std::process::id()));
            let a = super::run(&cfg, &root)?;
            let b = super::run(&cfg, &root)?;
            let _ = std::fs::remove_dir_all(&root);
            Check::flag(m, name, b.reused && a.manifest == b.manifest, format!("reused {}", b.reused))
        }
        "output_round_trip" => {
            let mut cfg = Config::new(FamilySpec::bump(1.5), 16);
            cfg.diagnostics.symbol_band = Some([2, 4]);
            let back = Config::parse(&cfg.to_toml())?;
            let mat = CMat::from_fn(3, 3, |i, j| c64::new(i as f64 * 0.1, j as f64 / 7.0));
            let arr = Array::decode(&Array::from_matrix(&mat).encode())?.to_matrix()?;
            let row = super::sweep::SweepRow::failed(1.0, 16, 80.0, "x,\"y\"");
            let row_back = super::sweep::SweepRow::from_csv(&super::sweep::rows_to_csv(std::slice::from_ref(&row))?)?;
            Check::flag(m, name, back == cfg && arr == mat && row_back == vec![row], "")
        }
        other => Check::flag(m, other, false, "no such invariant"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_invariant_is_reported_once() {
        let names: std::collections::BTreeSet<_> = INVARIANTS.iter().collect();
        assert_eq!(names.len(), INVARIANTS.len());
        assert!(matches!(run_check(&clifford(), "nonsense"), Ok(c) if !c.passed));
    }

    #[test]
    fn flipped_gamma_entry_breaks_the_algebra() {
        let mut rep = clifford();
        rep.gamma[1][1][1] = -rep.gamma[1][1][1];
        let c = run_check(&rep, "clifford_invariants").unwrap();
        assert!(!c.passed);
        assert!(run_check(&clifford(), "clifford_invariants").unwrap().passed);
    }
}
