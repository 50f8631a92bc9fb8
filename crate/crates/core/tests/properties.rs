use dirac_lab::evolution::{Propagator, StepperConfig};
use dirac_lab::functional_calculus::{spectral_projection, Sign};
use dirac_lab::geometry::{FamilySpec, GridSpec};
use dirac_lab::harness::container::Array;
use dirac_lab::harness::Config;
use dirac_lab::linalg::{c64, herm_eigenvalues, hermitize, identity, CMat};
use dirac_lab::moller_scattering::{purify, ProjectionResiduals};
use dirac_lab::spin_algebra::{check_invariants, clifford};
use dirac_lab::Problem;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn problem(spec: FamilySpec, m: usize) -> Arc<Problem> {
    Arc::new(Problem::new(spec.build().unwrap(), GridSpec::new(m, 2.0 * PI).unwrap()).unwrap())
}

fn family() -> impl Strategy<Value = FamilySpec> {
    prop_oneof![
        (0.3f64..2.0).prop_map(FamilySpec::bump),
        (0.3f64..2.0).prop_map(FamilySpec::shifted),
        (0.3f64..2.0).prop_map(FamilySpec::lapsed),
        Just(FamilySpec::static_bump()),
        Just(FamilySpec::ramp()),
    ]
}

fn matrix(max: usize) -> impl Strategy<Value = CMat> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), r * c)
            .prop_map(move |v| CMat::from_fn(r, c, |i, j| c64::new(v[i * c + j].0, v[i * c + j].1)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn container_round_trip(m in matrix(6)) {
        let back = Array::decode(&Array::from_matrix(&m).encode()).unwrap().to_matrix().unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn container_rejects_truncation(m in matrix(4), cut in 1usize..16) {
        let bytes = Array::from_matrix(&m).encode();
        prop_assert!(Array::decode(&bytes[..bytes.len() - cut.min(bytes.len())]).is_err());
    }

    #[test]
    fn config_toml_round_trip(mu in 0.2f64..3.0, half in 2usize..40, t_max in 40.0f64..640.0, seed in any::<u64>()) {
        let mut cfg = Config::new(FamilySpec::bump(mu), 2 * half);
        cfg.seed = seed;
        cfg.scattering.t_max = t_max;
        let back = Config::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn odd_grids_are_rejected(half in 2usize..40) {
        prop_assert!(GridSpec::new(2 * half + 1, 2.0 * PI).is_err());
    }

    #[test]
    fn flat_spectrum_is_relativistic(mass in 0.2f64..3.0, half in 2usize..10) {
        let m = 2 * half;
        let p = problem(FamilySpec::flat(mass), m);
        let h = p.hamiltonian(0.0).unwrap();
        let got = herm_eigenvalues(&hermitize(&p.gram.to_sym(&h.matrix))).unwrap();
        let mut want: Vec<f64> = (0..m as i64)
            .map(|n| if n < m as i64 / 2 { n } else { n - m as i64 })
            .flat_map(|n| { let w = ((n * n) as f64 + mass * mass).sqrt(); [w, -w] })
            .collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonian_is_gram_selfadjoint(spec in family(), t in -50.0f64..50.0) {
        let p = problem(spec, 8);
        prop_assert!(p.hamiltonian(t).unwrap().selfadjoint_residual() < 1e-10);
        let g = herm_eigenvalues(&hermitize(p.gram.matrix())).unwrap();
        prop_assert!(g[0] > 0.0);
    }

    #[test]
    fn spectral_projections_are_complementary(spec in family(), t in -20.0f64..20.0) {
        let p = problem(spec, 8);
        let h = p.hamiltonian(t).unwrap();
        let pp = spectral_projection(&h, Sign::Plus).unwrap();
        let pm = spectral_projection(&h, Sign::Minus).unwrap();
        prop_assert!(ProjectionResiduals::of(&p.gram, &pp, &pm).max() < 1e-10);
    }

    #[test]
    fn purify_restores_a_projection(t in -5.0f64..5.0, eps in 1e-6f64..1e-3, seed in any::<u64>()) {
        let p = problem(FamilySpec::bump(1.0), 8);
        let pp = spectral_projection(&p.hamiltonian(t).unwrap(), Sign::Plus).unwrap();
        let mut s = seed;
        let noisy = CMat::from_fn(pp.nrows(), pp.ncols(), |i, j| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            pp[(i, j)] + c64::new(eps * ((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5), 0.0)
        });
        let c = purify(&p.gram, &noisy).unwrap();
        let cm = &identity(c.nrows()) - &c;
        prop_assert!(ProjectionResiduals::of(&p.gram, &c, &cm).max() < 1e-10);
        prop_assert!(p.gram.norm(&(&c - &pp)) < 10.0 * eps * c.nrows() as f64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn propagator_is_a_unitary_cocycle(t in -5.0f64..5.0, s in -5.0f64..5.0, r in -5.0f64..5.0) {
        let p = problem(FamilySpec::bump(1.5), 8);
        let mut prop = Propagator::new(p.clone(), StepperConfig::default());
        let (ts, sr, tr) = (prop.matrix(t, s).unwrap(), prop.matrix(s, r).unwrap(), prop.matrix(t, r).unwrap());
        prop_assert!(p.gram.unitarity_residual(&tr) < 1e-8);
        prop_assert!(p.gram.norm(&(&(&ts * &sr) - &tr)) < 1e-5);
    }
}

#[test]
fn clifford_relations_hold() {
    for c in check_invariants(&clifford()) {
        assert!(c.residual < 1e-12, "{} {}", c.name, c.residual);
    }
}
