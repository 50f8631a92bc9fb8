//! Out/in projections as long-time limits of evolved asymptotic projections,
//! with exponent fits, extrapolation and tail bounds.

use crate::adiabatic_projections::{Adiabatic, CorrectionMode};
use crate::error::{Error, Result};
use crate::evolution::{lifted_gram, Propagator, StepperConfig};
use crate::fit::loglog_fit;
use crate::functional_calculus::{eig_decompose, Sign};
use crate::geometry::TimeEnd;
use crate::linalg::{c64, identity, scale_re, scale_rows_cols, CMat, Gram, I};
use crate::operator_assembly::DiscreteOperator;
use crate::tolerances::{FIT_VARIANCE, PROJECTION_IDENTITY};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Out,
    In,
}

impl Direction {
    pub fn end(self) -> TimeEnd {
        match self {
            Direction::Out => TimeEnd::Future,
            Direction::In => TimeEnd::Past,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Direction::Out => 1.0,
            Direction::In => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Moller,
    Cook,
}

/// Geometric schedule `|T_j| = t0 r^j <= t_max`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub t0: f64,
    pub ratio: f64,
    pub t_max: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { t0: 10.0, ratio: 2.0, t_max: 640.0 }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) {
            return Err(Error::config("scattering.t0", "must be positive"));
        }
        if !(self.ratio > 1.0) {
            return Err(Error::config("scattering.ratio", "must exceed 1"));
        }
        if !(self.t_max >= self.t0 * self.ratio * self.ratio) {
            return Err(Error::config("scattering.t_max", "schedule needs at least three times"));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = self.t0;
        while t <= self.t_max * (1.0 + 1e-12) {
            out.push(t);
            t *= self.ratio;
        }
        out
    }
}

/// Idempotency, completeness and selfadjointness defects of a pair.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProjectionResiduals {
    pub idempotent_plus: f64,
    pub idempotent_minus: f64,
    pub completeness: f64,
    pub selfadjoint: f64,
}

impl ProjectionResiduals {
    pub fn of(gram: &Gram, cp: &CMat, cm: &CMat) -> Self {
        let n = cp.nrows();
        let idem = |c: &CMat| gram.norm(&(&(c * c) - c));
        ProjectionResiduals {
            idempotent_plus: idem(cp),
            idempotent_minus: idem(cm),
            completeness: gram.norm(&(&(cp + cm) - identity(n))),
            selfadjoint: gram.selfadjoint_residual(cp).max(gram.selfadjoint_residual(cm)),
        }
    }

    pub fn max(&self) -> f64 {
        self.idempotent_plus.max(self.idempotent_minus).max(self.completeness).max(self.selfadjoint)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScatteringResult {
    #[serde(skip, default = "empty")]
    pub c_plus: CMat,
    #[serde(skip, default = "empty")]
    pub c_minus: CMat,
    pub direction: Direction,
    pub method: Method,
    pub schedule: Vec<f64>,
    /// `(T_j, |A_{j+1} - A_j|)` with `T_j` the earlier time
    pub residuals: Vec<(f64, f64)>,
    pub mu_hat: Option<f64>,
    /// sample variance of the consecutive-pair exponents
    pub exponent_variance: Option<f64>,
    pub extrapolated: bool,
    pub tail_bound: f64,
    pub raw: ProjectionResiduals,
    pub purified: ProjectionResiduals,
    pub lifted: bool,
}

fn empty() -> CMat {
    CMat::zeros(0, 0)
}

impl ScatteringResult {
    pub fn residuals_ok(&self) -> bool {
        self.purified.max() <= PROJECTION_IDENTITY
    }
}

/// Projection onto the eigenvalues above 1/2 of the selfadjoint part.
pub fn purify(gram: &Arc<Gram>, c: &CMat) -> Result<CMat> {
    let sym = scale_re(&(c + &gram.adjoint(c)), 0.5);
    let eig = eig_decompose(&DiscreteOperator::new(sym, gram.clone()))?;
    Ok(eig.apply(|l| if l > 0.5 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) }))
}

struct Limit {
    value: CMat,
    residuals: Vec<(f64, f64)>,
    mu_hat: Option<f64>,
    variance: Option<f64>,
    extrapolated: bool,
    tail_bound: f64,
}

/// Fits the decay of consecutive differences and extrapolates.
fn limit(gram: &Gram, times: &[f64], seq: &[CMat]) -> Result<Limit> {
    let d: Vec<f64> = seq.windows(2).map(|w| gram.norm(&(&w[1] - &w[0]))).collect();
    let ts: Vec<f64> = times.iter().map(|t| t.abs()).collect();
    let residuals: Vec<(f64, f64)> = ts.iter().zip(&d).map(|(t, v)| (*t, *v)).collect();
    let last = seq.last().expect("nonempty schedule").clone();
    let scale = seq.iter().map(|a| gram.norm(a)).fold(0.0, f64::max).max(1.0);
    if d.iter().all(|v| *v <= 1e-12 * scale) {
        return Ok(Limit { value: last, residuals, mu_hat: None, variance: None, extrapolated: false, tail_bound: d.last().copied().unwrap_or(0.0) });
    }
    let fit = loglog_fit(&ts[..d.len()], &d).ok_or_else(|| Error::InsufficientData("Moller schedule too short".into()))?;
    let mu_hat = -fit.slope;
    if !(mu_hat > 0.05) {
        return Err(Error::Convergence { mu_hat, trajectory: residuals });
    }
    let pairs: Vec<f64> = d
        .windows(2)
        .zip(ts.windows(2))
        .map(|(dv, tv)| (dv[0] / dv[1]).ln() / (tv[1] / tv[0]).ln())
        .collect();
    let variance = if pairs.len() >= 2 {
        let mean = pairs.iter().sum::<f64>() / pairs.len() as f64;
        Some(pairs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (pairs.len() - 1) as f64)
    } else {
        None
    };
    let n = ts.len();
    let r = ts[n - 1] / ts[n - 2];
    let factor = 1.0 / (r.powf(mu_hat) - 1.0);
    let d_last = *d.last().unwrap();
    let stable = variance.map_or(false, |v| v <= FIT_VARIANCE);
    // geometric tail with the smaller of the global and the last local exponent
    let local = pairs.last().copied().filter(|p| *p > 0.0).unwrap_or(mu_hat);
    let mut tail_bound = d_last / (r.powf(mu_hat.min(local)) - 1.0);
    let value = if stable {
        // A_inf ~ A_J + (A_J - A_{J-1}) / (r^mu - 1)
        let richardson = |j: usize| &seq[j] + &scale_re(&(&seq[j] - &seq[j - 1]), factor);
        let value = richardson(n - 1);
        if n >= 3 {
            tail_bound = tail_bound.max(gram.norm(&(&value - &richardson(n - 2))));
        }
        value
    } else {
        last
    };
    Ok(Limit { value, residuals, mu_hat: Some(mu_hat), variance, extrapolated: stable, tail_bound })
}

fn finish(gram: &Arc<Gram>, direction: Direction, method: Method, times: Vec<f64>, lim: Limit) -> Result<ScatteringResult> {
    let n = gram.dim();
    let raw_plus = lim.value;
    let raw_minus = &identity(n) - &raw_plus;
    let raw = ProjectionResiduals::of(gram, &raw_plus, &raw_minus);
    let c_plus = purify(gram, &raw_plus)?;
    let c_minus = &identity(n) - &c_plus;
    let purified = ProjectionResiduals::of(gram, &c_plus, &c_minus);
    Ok(ScatteringResult {
        c_plus,
        c_minus,
        direction,
        method,
        schedule: times,
        residuals: lim.residuals,
        mu_hat: lim.mu_hat,
        exponent_variance: lim.variance,
        extrapolated: lim.extrapolated,
        tail_bound: lim.tail_bound,
        raw,
        purified,
        lifted: false,
    })
}

/// `A_j = U(0, T_j) 1_{R+}(H_{+-infty}) U(T_j, 0)` and its limit.
pub fn moller_projection(prop: &mut Propagator, ad: &Adiabatic, direction: Direction, schedule: &Schedule) -> Result<ScatteringResult> {
    schedule.validate()?;
    let gram = prop.gram().clone();
    let p = ad.asymptotic_projection(direction.end(), Sign::Plus)?;
    let times: Vec<f64> = schedule.times().into_iter().map(|t| t * direction.sign()).collect();
    if ad.is_static() {
        // U commutes with H, so the sequence is constant
        let lim = Limit { value: p, residuals: Vec::new(), mu_hat: None, variance: None, extrapolated: false, tail_bound: 0.0 };
        return finish(&gram, direction, Method::Moller, times, lim);
    }
    let mut seq = Vec::with_capacity(times.len());
    for &t in &times {
        let u = prop.from_zero(t)?;
        let ui = gram.unitary_inverse(&u);
        seq.push(&(&ui * &p) * &u);
    }
    let lim = limit(&gram, &times, &seq)?;
    finish(&gram, direction, Method::Moller, times, lim)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CookReport {
    /// `(|t|, |D(t)|)` for the order-one corrected integrand
    pub integrand: Vec<(f64, f64)>,
    pub integrand_exponent: Option<f64>,
    /// Simpson integral of `U(0,t) D~(t) U(t,0)` against the telescoped difference
    pub quadrature_window: f64,
    pub quadrature_residual: f64,
}

/// `B(T) = U(0,T) P~(T) U(T,0) = P~(0) + int_0^T U(0,t) D~(t) U(t,0) dt` with
/// the order-one corrected projection, evaluated on the schedule.
pub fn cook_accelerated_limit(
    prop: &mut Propagator,
    ad: &Adiabatic,
    direction: Direction,
    schedule: &Schedule,
) -> Result<(ScatteringResult, CookReport)> {
    schedule.validate()?;
    let gram = prop.gram().clone();
    let times: Vec<f64> = schedule.times().into_iter().map(|t| t * direction.sign()).collect();
    let mode = CorrectionMode::PaperLeading;
    if ad.is_static() {
        let p0 = ad.projections(0.0)?.0;
        let lim = Limit { value: p0, residuals: Vec::new(), mu_hat: None, variance: None, extrapolated: false, tail_bound: 0.0 };
        let rep = CookReport { integrand: Vec::new(), integrand_exponent: None, quadrature_window: 0.0, quadrature_residual: 0.0 };
        return Ok((finish(&gram, direction, Method::Cook, times, lim)?, rep));
    }
    let mut seq = Vec::with_capacity(times.len());
    let mut integrand = Vec::with_capacity(times.len());
    for &t in &times {
        let (pt, _) = ad.corrected_projection(t, 1, mode)?;
        let u = prop.from_zero(t)?;
        let ui = gram.unitary_inverse(&u);
        seq.push(&(&ui * &pt) * &u);
        integrand.push((t.abs(), ad.cook_integrand(t, 1, mode)?.gram_norm));
    }
    let (it, iv): (Vec<f64>, Vec<f64>) = integrand.iter().cloned().unzip();
    let integrand_exponent = loglog_fit(&it, &iv).map(|f| -f.slope);
    let window = 0.25 * direction.sign();
    let quadrature_residual = quadrature_check(prop, ad, window, 100)?;
    let lim = limit(&gram, &times, &seq)?;
    let res = finish(&gram, direction, Method::Cook, times, lim)?;
    Ok((res, CookReport { integrand, integrand_exponent, quadrature_window: window, quadrature_residual }))
}

/// `dP~/dt + [P~, iH]` conjugated back to time 0, i.e. the derivative of
/// `U(0,t) P~(t) U(t,0)` written through the dressed integrand:
/// `e^{-iR} D e^{iR} - i [P~, R_{-infty}]`.
fn transported_integrand(ad: &Adiabatic, t: f64, u: &CMat) -> Result<CMat> {
    let gram = ad.gram();
    let mode = CorrectionMode::PaperLeading;
    let d = ad.cook_integrand(t, 1, mode)?.matrix;
    let (pt, r) = ad.corrected_projection(t, 1, mode)?;
    let ep = crate::linalg::herm_eigen(&crate::linalg::hermitize(&gram.to_sym(&r)))?;
    let e = |s: f64| {
        let vals: Vec<c64> = ep.0.iter().map(|l| c64::from_polar(1.0, s * l)).collect();
        gram.from_sym(&crate::linalg::herm_apply(&vals, &ep.1))
    };
    let mut dt = &(&e(-1.0) * &d) * &e(1.0);
    let rm = ad.gap_correction(t)?;
    dt -= crate::linalg::scale(&crate::linalg::commutator(&pt, &rm), I);
    let ui = gram.unitary_inverse(u);
    Ok(&(&ui * &dt) * u)
}

/// Relative mismatch between composite Simpson quadrature of the Cook
/// integrand on `[0, window]` and `B(window) - B(0)`.  The short flow is
/// recomputed at tolerance `1e-9` or finer so stepping error stays below the
/// Simpson error.
pub fn quadrature_check(prop: &Propagator, ad: &Adiabatic, window: f64, intervals: usize) -> Result<f64> {
    let n = intervals + intervals % 2;
    let h = window / n as f64;
    let cfg = StepperConfig { tol: prop.config.tol.min(1e-9), ..prop.config.clone() };
    let mut prop = Propagator::new(prop.generator().clone(), cfg);
    let gram = prop.gram().clone();
    let mut u = identity(gram.dim());
    let mut acc = transported_integrand(ad, 0.0, &u)?;
    for i in 1..=n {
        let (t0, t1) = ((i - 1) as f64 * h, i as f64 * h);
        u = &prop.matrix(t1, t0)? * &u;
        let w = if i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += scale_re(&transported_integrand(ad, t1, &u)?, w);
    }
    let integral = scale_re(&acc, h / 3.0);
    let b0 = ad.corrected_projection(0.0, 1, CorrectionMode::PaperLeading)?.0;
    let bt = {
        let p = ad.corrected_projection(window, 1, CorrectionMode::PaperLeading)?.0;
        let ui = gram.unitary_inverse(&u);
        &(&ui * &p) * &u
    };
    let tele = &bt - &b0;
    Ok(gram.norm(&(&integral - &tele)) / gram.norm(&tele).max(1e-300))
}

/// `c -> c_0^{-1/2} c c_0^{1/2}` and the physical Gram `c_0^{1/2} G c_0^{1/2}`.
pub fn lift_to_physical(result: &ScatteringResult, gram: &Gram, c0: &[f64]) -> Result<(ScatteringResult, Gram)> {
    let l: Vec<f64> = [c0, c0].concat().iter().map(|c| c.powf(-0.5)).collect();
    let r: Vec<f64> = [c0, c0].concat().iter().map(|c| c.sqrt()).collect();
    let phys = lifted_gram(gram, c0)?;
    let mut out = result.clone();
    out.c_plus = scale_rows_cols(&result.c_plus, &l, &r);
    out.c_minus = scale_rows_cols(&result.c_minus, &l, &r);
    out.purified = ProjectionResiduals::of(&phys, &out.c_plus, &out.c_minus);
    out.lifted = true;
    Ok((out, phys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::StepperConfig;
    use crate::geometry::{FamilySpec, GridSpec};
    use crate::linalg::max_abs;
    use crate::problem::Problem;
    use std::f64::consts::PI;

    fn setup(spec: FamilySpec, m: usize) -> (Propagator, Adiabatic) {
        let p = Arc::new(Problem::new(spec.build().unwrap(), GridSpec::new(m, 2.0 * PI).unwrap()).unwrap());
        let prop = Propagator::new(p.clone(), StepperConfig { tol: 1e-6, ..Default::default() });
        (prop, Adiabatic::for_problem(p).unwrap())
    }

    #[test]
    fn schedule_is_geometric() {
        assert_eq!(Schedule::default().times(), vec![10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0]);
        assert!(Schedule { t_max: 15.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn static_limits_are_the_spectral_projections() {
        let (mut prop, ad) = setup(FamilySpec::static_bump(), 16);
        let s = Schedule { t_max: 40.0, ..Default::default() };
        let out = moller_projection(&mut prop, &ad, Direction::Out, &s).unwrap();
        let p = ad.projections(0.0).unwrap().0;
        assert!(max_abs(&(&out.c_plus - &p)) < 1e-10);
        let (cook, _) = cook_accelerated_limit(&mut prop, &ad, Direction::In, &s).unwrap();
        assert!(max_abs(&(&cook.c_plus - &p)) < 1e-10);
        assert!(out.residuals_ok());
    }

    #[test]
    fn limit_recovers_a_power_tail() {
        let gram = Gram::from_diag(&[1.0, 2.0]).unwrap();
        let a = CMat::from_fn(2, 2, |i, j| c64::new((i + 2 * j) as f64, 0.5));
        let c = CMat::from_fn(2, 2, |i, j| c64::new(1.0 - i as f64, j as f64));
        let ts: Vec<f64> = Schedule::default().times();
        let seq: Vec<CMat> = ts.iter().map(|t| &a + &scale_re(&c, t.powf(-1.3))).collect();
        let lim = limit(&gram, &ts, &seq).unwrap();
        assert!((lim.mu_hat.unwrap() - 1.3).abs() < 1e-10);
        assert!(lim.extrapolated);
        assert!(gram.norm(&(&lim.value - &a)) < 1e-12);
    }

    #[test]
    fn flat_sequence_is_rejected() {
        let gram = Gram::from_diag(&[1.0]).unwrap();
        let ts = Schedule::default().times();
        let seq: Vec<CMat> = ts.iter().enumerate().map(|(i, _)| CMat::from_fn(1, 1, |_, _| c64::new((i % 2) as f64, 0.0))).collect();
        assert!(matches!(limit(&gram, &ts, &seq), Err(Error::Convergence { .. })));
    }

    #[test]
    fn lift_preserves_projection_identities() {
        let (mut prop, ad) = setup(FamilySpec::bump(1.5), 8);
        let s = Schedule { t_max: 40.0, ..Default::default() };
        let out = moller_projection(&mut prop, &ad, Direction::Out, &s).unwrap();
        let x = GridSpec::new(8, 2.0 * PI).unwrap().nodes();
        let c: Vec<f64> = x.iter().map(|x| 1.0 + 0.5 * x.sin()).collect();
        let (lifted, g) = lift_to_physical(&out, prop.gram(), &c).unwrap();
        assert!(lifted.purified.max() < 1e-9, "{:?}", lifted.purified);
        assert!(g.selfadjoint_residual(&lifted.c_plus) < 1e-9);
        let (same, _) = lift_to_physical(&out, prop.gram(), &[4.0; 8]).unwrap();
        assert!(max_abs(&(&same.c_plus - &out.c_plus)) < 1e-14);
    }

    #[test]
    fn cook_integrand_integrates_to_the_telescoped_difference() {
        let (prop, ad) = setup(FamilySpec::bump(1.5), 8);
        let r = quadrature_check(&prop, &ad, 0.25, 100).unwrap();
        assert!(r < 1e-5, "relative mismatch {r}");
    }
}
