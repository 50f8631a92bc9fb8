//! Cauchy evolution `d_t U(t,s) = i H(t) U(t,s)` for a Gram-selfadjoint
//! generator.  Steps are taken in the frame `L* U L^{-*}` (`G = L L*`) where
//! the generator is Hermitian, so every step is exactly unitary up to the
//! accuracy of the Hermitian eigensolver or the linear solve.

use crate::error::{Error, Result};
use crate::fit::japanese;
use crate::linalg::{c64, fro_norm, herm_eigen, hermitize, identity, kron, solve, CMat, Gram, I};
use crate::operator_assembly::DiscreteOperator;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A time-dependent Gram-selfadjoint matrix `t -> H(t)` with a fixed Gram form.
pub trait Generator: Send + Sync {
    fn matrix(&self, t: f64) -> Result<CMat>;
    fn gram(&self) -> &Arc<Gram>;
    fn is_static(&self) -> bool {
        false
    }
    fn operator(&self, t: f64) -> Result<DiscreteOperator> {
        Ok(DiscreteOperator::new(self.matrix(t)?, self.gram().clone()))
    }
}

/// Generator given by a closure; used for synthetic paths.
pub struct MatrixPath {
    f: Box<dyn Fn(f64) -> CMat + Send + Sync>,
    gram: Arc<Gram>,
    fixed: bool,
}

impl MatrixPath {
    pub fn new(gram: Arc<Gram>, f: impl Fn(f64) -> CMat + Send + Sync + 'static) -> Self {
        MatrixPath { f: Box::new(f), gram, fixed: false }
    }

    pub fn constant(gram: Arc<Gram>, h: CMat) -> Self {
        MatrixPath { f: Box::new(move |_| h.clone()), gram, fixed: true }
    }
}

impl Generator for MatrixPath {
    fn matrix(&self, t: f64) -> Result<CMat> {
        Ok((self.f)(t))
    }
    fn gram(&self) -> &Arc<Gram> {
        &self.gram
    }
    fn is_static(&self) -> bool {
        self.fixed
    }
}

/// `C^{-1/2} H C^{1/2}` for a time-independent positive lapse `C` at the
/// nodes: the generator seen by the physical operator when the conformal
/// factor does not depend on time.  Its Gram form is `C^{1/2} G C^{1/2}`.
pub struct ConjugatedGenerator {
    inner: Arc<dyn Generator>,
    left: Vec<f64>,
    right: Vec<f64>,
    gram: Arc<Gram>,
}

impl ConjugatedGenerator {
    pub fn new(inner: Arc<dyn Generator>, lapse: &[f64]) -> Result<Self> {
        let half: Vec<f64> = [lapse, lapse].concat().iter().map(|c| c.sqrt()).collect();
        let inv: Vec<f64> = half.iter().map(|c| 1.0 / c).collect();
        let g = crate::linalg::scale_rows_cols(inner.gram().matrix(), &half, &half);
        Ok(ConjugatedGenerator { left: inv, right: half, gram: Arc::new(Gram::new(g)?), inner })
    }
}

impl Generator for ConjugatedGenerator {
    fn matrix(&self, t: f64) -> Result<CMat> {
        Ok(crate::linalg::scale_rows_cols(&self.inner.matrix(t)?, &self.left, &self.right))
    }
    fn gram(&self) -> &Arc<Gram> {
        &self.gram
    }
    fn is_static(&self) -> bool {
        self.inner.is_static()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// exponential midpoint rule
    Magnus2,
    /// Cayley transform of the midpoint generator
    CrankNicolson,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StepperConfig {
    pub scheme: Scheme,
    /// step size for `|t| <= growth_start`
    pub dt_base: f64,
    /// beyond this `|t|` the base step grows like `|t|`
    pub growth_start: f64,
    /// local error allowance per unit time
    pub tol: f64,
    pub dt_min: f64,
    /// allowed `|U* G U - G| / |G|` at every recorded interval
    pub drift_budget: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            scheme: Scheme::Magnus2,
            dt_base: 0.05,
            growth_start: 10.0,
            tol: 1e-7,
            dt_min: 1e-7,
            drift_budget: crate::tolerances::UNITARITY,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, f: &str| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(Error::config(f, "must be positive")) };
        pos(self.dt_base, "evolution.dt_base")?;
        pos(self.growth_start, "evolution.growth_start")?;
        pos(self.tol, "evolution.tol")?;
        pos(self.dt_min, "evolution.dt_min")?;
        pos(self.drift_budget, "evolution.drift_budget")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DriftRecord {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub residual: f64,
}

/// Propagator with checkpoints `U(t_i, 0)` kept in the symmetric frame.
pub struct Propagator {
    gen: Arc<dyn Generator>,
    pub config: StepperConfig,
    checkpoints: Vec<(f64, CMat)>,
    pub drift: Vec<DriftRecord>,
    pub steps_taken: usize,
}

fn power_norm(a: &CMat, iters: usize) -> f64 {
    let n = a.ncols();
    let mut v = CMat::from_fn(n, 1, |i, _| c64::from_polar(1.0 / (n as f64).sqrt(), 0.7 * i as f64));
    let mut est = 0.0;
    for _ in 0..iters {
        let w2 = a.adjoint() * (a * &v);
        let nv = fro_norm(&w2);
        if nv == 0.0 {
            return 0.0;
        }
        est = nv.sqrt();
        v = crate::linalg::scale_re(&w2, 1.0 / nv);
    }
    est
}

impl Propagator {
    pub fn new(gen: Arc<dyn Generator>, config: StepperConfig) -> Self {
        Propagator { gen, config, checkpoints: Vec::new(), drift: Vec::new(), steps_taken: 0 }
    }

    pub fn generator(&self) -> &Arc<dyn Generator> {
        &self.gen
    }

    pub fn gram(&self) -> &Arc<Gram> {
        self.gen.gram()
    }

    fn sym_h(&self, t: f64) -> Result<CMat> {
        Ok(hermitize(&self.gram().to_sym(&self.gen.matrix(t)?)))
    }

    /// Step size at `t`: the base step (growing like `|t|` late) capped by the
    /// leading local error `dt^3 |[H, dH/dt]| / 12 <= tol dt` of the midpoint rule.
    pub fn step_size(&self, t: f64) -> Result<f64> {
        let c = &self.config;
        let base = c.dt_base * (t.abs() / c.growth_start).max(1.0);
        let d = 1e-4 * japanese(t);
        let hp = self.sym_h(t + d)?;
        let hm = self.sym_h(t - d)?;
        let h0 = self.sym_h(t)?;
        let hdot = crate::linalg::scale_re(&(&hp - &hm), 0.5 / d);
        let comm = crate::linalg::commutator(&h0, &hdot);
        let cn = power_norm(&comm, 8);
        let dt = if cn > 0.0 { base.min((12.0 * c.tol / cn).sqrt()) } else { base };
        Ok(dt.max(c.dt_min))
    }

    fn step_matrix(&self, hs: &CMat, dt: f64) -> Result<CMat> {
        match self.config.scheme {
            Scheme::Magnus2 => {
                let (w, v) = herm_eigen(hs)?;
                let vals: Vec<c64> = w.iter().map(|l| c64::from_polar(1.0, dt * l)).collect();
                Ok(crate::linalg::herm_apply(&vals, &v))
            }
            Scheme::CrankNicolson => {
                let n = hs.nrows();
                let a = crate::linalg::axpy(&identity(n), I * (0.5 * dt), hs);
                let b = crate::linalg::axpy(&identity(n), -I * (0.5 * dt), hs);
                Ok(solve(&b, &a))
            }
        }
    }

    /// `U(t, s) u` in the symmetric frame.
    fn advance(&mut self, s: f64, t: f64, mut u: CMat) -> Result<(CMat, usize)> {
        if s == t {
            return Ok((u, 0));
        }
        if self.gen.is_static() {
            let hs = self.sym_h(s)?;
            let (w, v) = herm_eigen(&hs)?;
            let vals: Vec<c64> = w.iter().map(|l| c64::from_polar(1.0, (t - s) * l)).collect();
            return Ok((&crate::linalg::herm_apply(&vals, &v) * &u, 1));
        }
        let dir = (t - s).signum();
        let mut tau = s;
        let mut steps = 0;
        while (t - tau) * dir > 0.0 {
            let h = self.step_size(tau)?.min((t - tau).abs());
            let next = if (t - tau).abs() - h < 1e-12 * japanese(t) { t } else { tau + dir * h };
            let hs = self.sym_h(0.5 * (tau + next))?;
            u = &self.step_matrix(&hs, next - tau)? * &u;
            tau = next;
            steps += 1;
        }
        self.steps_taken += steps;
        Ok((u, steps))
    }

    fn record(&mut self, t0: f64, t1: f64, steps: usize, us: &CMat) -> Result<()> {
        let n = us.nrows();
        let d = &(us.adjoint() * us) - identity(n);
        let residual = crate::linalg::op_norm(&d);
        self.drift.push(DriftRecord { t0, t1, steps, residual });
        if residual > self.config.drift_budget {
            return Err(Error::UnitarityDrift { t0, t1, residual, budget: self.config.drift_budget });
        }
        Ok(())
    }

    /// `U(t, 0)`, continued from the nearest checkpoint on the same side of 0.
    pub fn from_zero(&mut self, t: f64) -> Result<CMat> {
        let n = self.gram().dim();
        if t == 0.0 {
            return Ok(identity(n));
        }
        if let Some((_, u)) = self.checkpoints.iter().find(|(tc, _)| *tc == t) {
            return Ok(self.gram().from_sym(u));
        }
        let start = self
            .checkpoints
            .iter()
            .filter(|(tc, _)| tc * t > 0.0 && tc.abs() < t.abs())
            .max_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
            .map(|(tc, u)| (*tc, u.clone()))
            .unwrap_or((0.0, identity(n)));
        let (us, steps) = self.advance(start.0, t, start.1)?;
        self.record(0.0, t, steps, &us)?;
        let out = self.gram().from_sym(&us);
        self.checkpoints.push((t, us));
        self.checkpoints.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(out)
    }

    /// `U(0, t) = U(t, 0)^{-1}`, the Gram adjoint of [`Propagator::from_zero`].
    pub fn to_zero(&mut self, t: f64) -> Result<CMat> {
        let u = self.from_zero(t)?;
        Ok(self.gram().unitary_inverse(&u))
    }

    /// `U(t, s)` propagated directly from `s` to `t`, not through checkpoints.
    pub fn matrix(&mut self, t: f64, s: f64) -> Result<CMat> {
        let n = self.gram().dim();
        let (us, steps) = self.advance(s, t, identity(n))?;
        self.record(s, t, steps, &us)?;
        Ok(self.gram().from_sym(&us))
    }

    /// `U(t, s) f` for column vectors `f`.
    pub fn evolve(&mut self, f: &CMat, s: f64, t: f64) -> Result<CMat> {
        let g = self.gram().clone();
        let fs = g.to_sym_vectors(f);
        let (us, steps) = self.advance(s, t, fs.clone())?;
        let n0 = fro_norm(&fs);
        let residual = if n0 > 0.0 { (fro_norm(&us) - n0).abs() / n0 } else { 0.0 };
        self.drift.push(DriftRecord { t0: s, t1: t, steps, residual });
        if residual > self.config.drift_budget {
            return Err(Error::UnitarityDrift { t0: s, t1: t, residual, budget: self.config.drift_budget });
        }
        Ok(g.vectors_from_sym(&us))
    }

    /// Checkpoints `(t, U(t, 0))` in the original frame, sorted by `t`.
    pub fn checkpoints(&self) -> Vec<(f64, CMat)> {
        self.checkpoints.iter().map(|(t, u)| (*t, self.gram().from_sym(u))).collect()
    }

    pub fn insert_checkpoint(&mut self, t: f64, u: &CMat) {
        let us = self.gram().to_sym(u);
        self.checkpoints.retain(|(tc, _)| *tc != t);
        self.checkpoints.push((t, us));
        self.checkpoints.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().map(|d| d.residual).fold(0.0, f64::max)
    }
}

/// `U = c_t^{-1/2} U~ c_s^{1/2}` for the two-dimensional conformal change.
pub fn conformal_lift(u_tilde: &CMat, c_t: &[f64], c_s: &[f64]) -> CMat {
    let l: Vec<f64> = [c_t, c_t].concat().iter().map(|c| c.powf(-0.5)).collect();
    let r: Vec<f64> = [c_s, c_s].concat().iter().map(|c| c.sqrt()).collect();
    crate::linalg::scale_rows_cols(u_tilde, &l, &r)
}

/// Gram form transported by the lift, `c^{1/2} G~ c^{1/2}`.
pub fn lifted_gram(gram: &Gram, c: &[f64]) -> Result<Gram> {
    let h: Vec<f64> = [c, c].concat().iter().map(|v| v.sqrt()).collect();
    Gram::new(crate::linalg::scale_rows_cols(gram.matrix(), &h, &h))
}

/// `kron(1_2, diag(v))`
pub fn spin_diag(v: &[f64]) -> CMat {
    kron(&identity(2), &crate::linalg::diag_real(v))
}
