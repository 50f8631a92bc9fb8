//! One experiment, start to finish, into its own directory.

use super::config::{hex_digest, Config};
use super::Check;
use crate::adiabatic_projections::{Adiabatic, CorrectionMode};
use crate::error::{Error, Result};
use crate::evolution::{Propagator, StepperConfig};
use crate::functional_calculus::{eig_decompose, Sign};
use crate::geometry::{geometric_samples, verify_decay, DecayReport, GridSpec, TimeEnd};
use crate::linalg::{c64, CMat};
use crate::moller_scattering::{cook_accelerated_limit, lift_to_physical, moller_projection, CookReport, Direction, ScatteringResult};
use crate::operator_assembly::{check_massive, MassiveReport};
use crate::problem::Problem;
use crate::states_hadamard::{
    cauchy_covariances, hadamard_symbol_test, intertwining_residual, smoothing_difference_test, spacetime_two_point,
    static_vacuum, time_consistency, CovarianceDiagnostics, Provenance, SmoothingReport, StateCovariances, SymbolReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub schema: u32,
    pub package: String,
    pub version: String,
    pub config_hash: String,
    pub family_hash: String,
    pub family: String,
    pub seed: u64,
    pub grid: GridSpec,
    pub evolution: StepperConfig,
    pub tolerances: super::Tolerances,
    /// file name -> SHA-256
    pub files: BTreeMap<String, String>,
    /// SHA-256 over the sorted `name:hash` lines of `files`
    pub results_hash: String,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(dir.join("manifest.json"))?)?)
    }

    /// Every listed file is present with the recorded digest.
    pub fn intact(&self, dir: &Path) -> bool {
        self.files.iter().all(|(name, h)| std::fs::read(dir.join(name)).map(|b| hex_digest(&b) == *h).unwrap_or(false))
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// the directory already held this run; nothing was recomputed
    pub reused: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CookSummary {
    pub direction: Direction,
    pub report: CookReport,
    pub mu_hat: Option<f64>,
    pub tail_bound: f64,
    /// `|c_cook - c_moller|` in the Gram norm
    pub moller_difference: f64,
    pub combined_tail: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResults {
    pub family: String,
    pub points: usize,
    pub mu: f64,
    pub is_static: bool,
    pub lapse_lifted: bool,
    pub scattering: Vec<ScatteringResult>,
    pub cook: Vec<CookSummary>,
    /// `|c_out - c_vac|` and `|c_in - c_vac|` for static families
    pub vacuum_difference: Option<(f64, f64)>,
    /// `|c+_out - c+_in|`
    pub out_in_difference: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymbolOutcome {
    pub direction: Direction,
    pub sign: Sign,
    pub report: Option<SymbolReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairResidual {
    pub t: f64,
    pub s: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoPointResidual {
    pub direction: Direction,
    pub t: f64,
    pub s: f64,
    pub sum_rule: f64,
    pub intertwining: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub massive: Vec<MassiveReport>,
    pub decay: Option<DecayReport>,
    pub max_drift: f64,
    pub steps: usize,
    pub covariances: Vec<(Direction, CovarianceDiagnostics)>,
    pub symbol: Vec<SymbolOutcome>,
    pub smoothing: Option<SmoothingReport>,
    pub time_consistency: Vec<PairResidual>,
    pub two_point: Vec<TwoPointResidual>,
    /// `| |U v|_G / |v|_G - 1 |` for seeded random vectors at `t_max`
    pub probes: Vec<f64>,
    pub checks: Vec<Check>,
}

/// `<root>/<family>-<first 12 hex digits of the config hash>`
pub fn run_dir(config: &Config, root: &Path) -> PathBuf {
    root.join(format!("{}-{}", config.family.label(), &config.hash()[..12]))
}

/// Runs `config` into its directory under `root`; a directory whose manifest
/// matches the config and whose files are intact is returned untouched.
pub fn run(config: &Config, root: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let dir = run_dir(config, root);
    if let Ok(m) = Manifest::load(&dir) {
        if m.config_hash == config.hash() && m.intact(&dir) {
            return Ok(RunOutcome { dir, manifest: m, reused: true });
        }
    }
    // reductions in the dense kernels must not depend on thread count
    faer::set_global_parallelism(faer::Par::Seq);
    std::fs::create_dir_all(&dir)?;
    let mut files = BTreeMap::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        files.insert(name.to_string(), hex_digest(&bytes));
        std::fs::write(dir.join(name), bytes)?;
        Ok(())
    };
    put("config.toml", config.to_toml().into_bytes())?;
    let computed = compute(config)?;
    for (name, bytes) in computed {
        put(&name, bytes)?;
    }
    let results_hash = hex_digest(files.iter().map(|(k, v)| format!("{k}:{v}\n")).collect::<String>().as_bytes());
    let grid = config.grid()?;
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config.hash(),
        family_hash: config.family_hash(),
        family: config.family.label().into(),
        seed: config.seed,
        grid,
        evolution: config.evolution.clone(),
        tolerances: config.diagnostics.tolerances.clone(),
        files,
        results_hash,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(RunOutcome { dir, manifest, reused: false })
}

fn matrix_bytes(m: &CMat) -> Vec<u8> {
    super::container::Array::from_matrix(m).encode()
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Container(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Container(e.to_string()))
}

/// The pipeline; returns `(file name, contents)` pairs.
fn compute(config: &Config) -> Result<Vec<(String, Vec<u8>)>> {
    let tol = &config.diagnostics.tolerances;
    let grid = config.grid()?;
    let family = config.family.build().map_err(|e| e.at("family"))?;
    let problem = Arc::new(Problem::new(family, grid).map_err(|e| e.at("problem"))?);
    let mut out: Vec<(String, Vec<u8>)> = Vec::new();
    let mut checks = Vec::new();

    let mut massive = Vec::new();
    for end in [TimeEnd::Past, TimeEnd::Future] {
        let r = check_massive(&problem.rep, &problem.flowed, &problem.grid, end).map_err(|e| e.at("massive"))?;
        checks.push(Check::flag("operator_assembly", &format!("massive_{end:?}").to_lowercase(), r.massive, format!("gap {:e}", r.gap)));
        massive.push(r);
    }
    let decay = if problem.is_static() {
        None
    } else {
        let r = verify_decay(&problem.physical, &geometric_samples(5.0, 2.0, 8, true), 0).map_err(|e| e.at("decay"))?;
        checks.push(Check::flag("geometry", "decay_compliant", r.compliant, ""));
        Some(r)
    };

    let mut prop = Propagator::new(problem.clone(), config.evolution.clone());
    let ad = Adiabatic::for_problem(problem.clone()).map_err(|e| e.at("adiabatic"))?;
    let schedule = config.scattering.schedule();
    let mut scattering = Vec::new();
    let mut cook = Vec::new();
    for &dir in &config.scattering.directions {
        let stage = format!("moller-{dir:?}").to_lowercase();
        let r = moller_projection(&mut prop, &ad, dir, &schedule).map_err(|e| e.at(&stage))?;
        if config.scattering.cook {
            let (c, rep) = cook_accelerated_limit(&mut prop, &ad, dir, &schedule).map_err(|e| e.at("cook"))?;
            let diff = problem.gram.norm(&(&c.c_plus - &r.c_plus));
            cook.push(CookSummary {
                direction: dir,
                report: rep,
                mu_hat: c.mu_hat,
                tail_bound: c.tail_bound,
                moller_difference: diff,
                combined_tail: c.tail_bound + r.tail_bound,
            });
        }
        let label = format!("{dir:?}").to_lowercase();
        checks.push(Check::below("moller_scattering", &format!("projection_residual_{label}"), r.purified.max(), tol.projection_identity));
        if let (Some(mu_hat), false) = (r.mu_hat, problem.is_static()) {
            checks.push(
                Check::below("moller_scattering", &format!("exponent_{label}"), (mu_hat - problem.physical.mu).abs(), tol.exponent)
                    .with_detail(format!("mu_hat {mu_hat:.4}")),
            );
        }
        scattering.push(r);
    }
    for c in &cook {
        checks.push(Check::below("moller_scattering", "cook_agreement", c.moller_difference, c.combined_tail.max(f64::MIN_POSITIVE)));
    }

    let find = |d: Direction| scattering.iter().find(|r| r.direction == d);
    let out_in_difference = match (find(Direction::Out), find(Direction::In)) {
        (Some(a), Some(b)) => Some(problem.gram.norm(&(&a.c_plus - &b.c_plus))),
        _ => None,
    };
    let vacuum_difference = if problem.is_static() {
        let vac = static_vacuum(&problem).map_err(|e| e.at("vacuum"))?;
        let d = |dir| find(dir).map_or(0.0, |r: &ScatteringResult| problem.gram.norm(&(&r.c_plus - &vac.c_plus)));
        let v = (d(Direction::Out), d(Direction::In));
        checks.push(Check::below("states_hadamard", "vacuum_equals_scattering", v.0.max(v.1), tol.static_projection));
        Some(v)
    } else {
        None
    };

    let mut covariances = Vec::new();
    let mut states: Vec<StateCovariances> = Vec::new();
    for r in &scattering {
        let prov = if r.direction == Direction::Out { Provenance::Out } else { Provenance::In };
        let cov = cauchy_covariances(r.c_plus.clone(), r.c_minus.clone(), problem.gram.clone(), prov).map_err(|e| e.at("covariances"))?;
        checks.push(Check::below("states_hadamard", "car_sum_rule", cov.diagnostics.sum_rule, tol.sum_rule));
        covariances.push((r.direction, cov.diagnostics.clone()));
        states.push(cov);
    }

    let m = problem.grid.points as i64;
    let band = config.diagnostics.symbol_band.map(|[a, b]| (a, b)).unwrap_or((8, m / 4));
    let mut symbol = Vec::new();
    if band.1 > band.0 {
        for r in &scattering {
            for sign in [Sign::Plus, Sign::Minus] {
                let c = if sign == Sign::Plus { &r.c_plus } else { &r.c_minus };
                let (report, error) = match hadamard_symbol_test(c, &problem.rep, &problem.grid, band, sign) {
                    Ok(rep) => (Some(rep), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                let passed = report.as_ref().map_or(false, |r| r.passed);
                checks.push(Check::flag("states_hadamard", &format!("symbol_{:?}_{sign:?}", r.direction).to_lowercase(), passed, error.clone().unwrap_or_default()));
                symbol.push(SymbolOutcome { direction: r.direction, sign, report, error });
            }
        }
    }

    let smoothing = match find(Direction::Out) {
        Some(r) if problem.grid.points >= 32 => {
            let order = config.diagnostics.smoothing_order;
            let (pt, _) = ad.corrected_projection(0.0, order, CorrectionMode::PaperLeading).map_err(|e| e.at("smoothing"))?;
            let threshold = tol.smoothing_slope - tol.slope_gain * order.saturating_sub(1) as f64;
            let rep = smoothing_difference_test(&r.c_plus, &pt, &problem.gram, &problem.grid, threshold);
            checks.push(Check::flag("states_hadamard", "smoothing", rep.meets_threshold, format!("slope {:?}", rep.slope)));
            Some(rep)
        }
        _ => None,
    };

    let mut tc = Vec::new();
    if let Some(st) = states.first() {
        for &[t, s] in &config.diagnostics.time_pairs {
            let res = time_consistency(&st.c_plus, &mut prop, t, s).map_err(|e| e.at("time-consistency"))?;
            checks.push(Check::below("states_hadamard", "time_consistency", res, tol.sum_rule));
            tc.push(PairResidual { t, s, residual: res });
        }
    }
    let mut two_point = Vec::new();
    for st in &states {
        let dir = if st.provenance == Provenance::In { Direction::In } else { Direction::Out };
        for &[t, s] in &config.diagnostics.two_point {
            let tp = spacetime_two_point(st, &mut prop, t, s).map_err(|e| e.at("two-point"))?;
            let iw = intertwining_residual(&st.c_plus, &mut prop, t, s, config.diagnostics.intertwining_step).map_err(|e| e.at("two-point"))?;
            checks.push(Check::below("states_hadamard", "two_point_sum_rule", tp.sum_rule, tol.sum_rule));
            if config.diagnostics.dump_kernels {
                let tag = format!("{dir:?}_t{t}_s{s}").to_lowercase();
                out.push((format!("kernel_plus_{tag}.dar"), matrix_bytes(&tp.plus)));
                out.push((format!("kernel_minus_{tag}.dar"), matrix_bytes(&tp.minus)));
            }
            two_point.push(TwoPointResidual { direction: dir, t, s, sum_rule: tp.sum_rule, intertwining: iw });
        }
    }

    // seeded unitarity spot check at the far end of the schedule
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let t_far = schedule.times().last().copied().unwrap_or(0.0);
    let u = prop.from_zero(t_far).map_err(|e| e.at("probes"))?;
    let g = problem.gram.matrix();
    let gnorm = |v: &CMat| (v.adjoint() * g * v)[(0, 0)].re.sqrt();
    let n = problem.dim();
    let probes: Vec<f64> = (0..config.diagnostics.probes)
        .map(|_| {
            let v = CMat::from_fn(n, 1, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            (gnorm(&(&u * &v)) / gnorm(&v) - 1.0).abs()
        })
        .collect();
    checks.push(Check::below("evolution", "unitarity_drift", prop.max_drift(), tol.unitarity));
    if let Some(p) = probes.iter().cloned().reduce(f64::max) {
        checks.push(Check::below("evolution", "probe_norm", p, tol.unitarity));
    }
    if problem.is_static() {
        let h = problem.hamiltonian(0.0)?;
        let eig = eig_decompose(&h)?;
        let dt = 1.0;
        let exact = eig.apply(|l| c64::from_polar(1.0, l * dt));
        let num = prop.from_zero(dt)?;
        checks.push(Check::below("evolution", "static_exponential", problem.gram.norm(&(&num - &exact)), tol.static_propagator));
    }

    // lifted copies for a non-trivial lapse
    let lapse_lifted = !problem.physical.has_unit_lapse();
    let c0 = problem.lapse(0.0)?;
    for r in &scattering {
        let label = format!("{:?}", r.direction).to_lowercase();
        out.push((format!("c_plus_{label}.dar"), matrix_bytes(&r.c_plus)));
        out.push((format!("c_minus_{label}.dar"), matrix_bytes(&r.c_minus)));
        if lapse_lifted {
            let (l, _) = lift_to_physical(r, &problem.gram, &c0)?;
            out.push((format!("c_plus_{label}_physical.dar"), matrix_bytes(&l.c_plus)));
            out.push((format!("c_minus_{label}_physical.dar"), matrix_bytes(&l.c_minus)));
        }
    }
    for st in &states {
        let label = format!("{:?}", st.provenance).to_lowercase();
        out.push((format!("lambda_plus_{label}.dar"), matrix_bytes(&st.lambda_plus)));
        out.push((format!("lambda_minus_{label}.dar"), matrix_bytes(&st.lambda_minus)));
    }

    let mut rows = Vec::new();
    for r in &scattering {
        for (t, d) in &r.residuals {
            rows.push(vec![format!("{:?}", r.direction).to_lowercase(), "moller".into(), t.to_string(), d.to_string()]);
        }
    }
    for c in &cook {
        for (t, d) in &c.report.integrand {
            rows.push(vec![format!("{:?}", c.direction).to_lowercase(), "cook-integrand".into(), t.to_string(), d.to_string()]);
        }
    }
    out.push(("residuals.csv".into(), csv_bytes(&["direction", "series", "t", "norm"], &rows)?));

    let results = RunResults {
        family: config.family.label().into(),
        points: problem.grid.points,
        mu: problem.physical.mu,
        is_static: problem.is_static(),
        lapse_lifted,
        scattering,
        cook,
        vacuum_difference,
        out_in_difference,
    };
    let diagnostics = Diagnostics {
        massive,
        decay,
        max_drift: prop.max_drift(),
        steps: prop.steps_taken,
        covariances,
        symbol,
        smoothing,
        time_consistency: tc,
        two_point,
        probes,
        checks,
    };
    out.push(("results.json".into(), serde_json::to_vec_pretty(&results)?));
    out.push(("diagnostics.json".into(), serde_json::to_vec_pretty(&diagnostics)?));
    Ok(out)
}

/// Reads one of the run's matrices back.
pub fn load_matrix(dir: &Path, name: &str) -> Result<CMat> {
    super::container::read_matrix(&dir.join(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FamilySpec;
    use crate::harness::config::Config;

    fn quick(family: FamilySpec, m: usize) -> Config {
        let mut c = Config::new(family, m);
        c.scattering.t_max = 40.0;
        c.evolution.tol = 1e-6;
        c
    }

    #[test]
    fn static_run_is_idempotent_and_consistent() {
        let root = tempfile::tempdir().unwrap();
        let cfg = quick(FamilySpec::static_bump(), 8);
        let a = run(&cfg, root.path()).unwrap();
        assert!(!a.reused);
        let res: RunResults = serde_json::from_slice(&std::fs::read(a.dir.join("results.json")).unwrap()).unwrap();
        let (o, i) = res.vacuum_difference.unwrap();
        assert!(o < 1e-6 && i < 1e-6);
        let b = run(&cfg, root.path()).unwrap();
        assert!(b.reused);
        assert_eq!(a.manifest, b.manifest);
        let c = load_matrix(&a.dir, "c_plus_out.dar").unwrap();
        assert_eq!(c.nrows(), 16);
    }

    #[test]
    fn tampered_run_is_recomputed() {
        let root = tempfile::tempdir().unwrap();
        let cfg = quick(FamilySpec::flat(1.0), 8);
        let a = run(&cfg, root.path()).unwrap();
        std::fs::write(a.dir.join("results.json"), b"{}").unwrap();
        let b = run(&cfg, root.path()).unwrap();
        assert!(!b.reused);
        assert_eq!(a.manifest, b.manifest);
    }
}
