//! Instantaneous and corrected projections along a Hamiltonian path, the
//! dressing `R(t)` and the Cook integrand `dP/dt + [P, i H~]`.
//!
//! Time derivatives are fourth-order central differences with step
//! `1e-3 <t>`.  Everything needed at one base time (projections at shifted
//! times, the iterates `S_n`, the exponentials `exp(iR)`) is memoised on the
//! same stencil so that the recursion costs `O(N^2)` eigensolves, not `5^N`.

use crate::error::{Error, Result};
use crate::evolution::Generator;
use crate::fit::{japanese, loglog_fit, LineFit};
use crate::functional_calculus::{eig_decompose, EigenDecomposition, Sign};
use crate::geometry::{GridSpec, TimeEnd};
use crate::linalg::{c64, commutator, herm_eigen, hermitize, identity, kron, op_norm, scale, scale_re, zeros, CMat, Gram, I};
use crate::operator_assembly::DiscreteOperator;
use crate::problem::Problem;
use crate::tolerances::GAP_RELATIVE;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Rank allowed for the eigenvalue push.
pub const RANK_BUDGET: usize = 8;

/// Relative step of the time differences.
pub const FD_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionMode {
    /// `S = -(2 eps)^{-1} dP/dt`, `eps = (H^2 + 1)^{1/2}`
    PaperLeading,
    /// off-diagonal Sylvester solve in the eigenbasis
    SylvesterExact,
}

/// `C^infty` step: 1 for `s <= 0`, 0 for `s >= 1`.
fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / (1.0 - s)).exp();
        let b = (-1.0 / s).exp();
        a / (a + b)
    }
}

/// Finite-rank eigenvalue push keeping the spectrum out of `(-delta/2, delta/2)`.
///
/// Eigenvalues are sorted; the lowest `n_minus` form the negative branch.  A
/// positive-branch value `l` becomes `l + (delta - l) eta(l)` with `eta = 1`
/// below `delta/2` and `0` above `delta`; the negative branch is mirrored.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GapModification {
    pub n_minus: usize,
    pub delta: f64,
    pub rank_budget: usize,
}

impl GapModification {
    fn eta(&self, x: f64) -> f64 {
        if self.delta <= 0.0 {
            return 0.0;
        }
        smooth_step((x - 0.5 * self.delta) / (0.5 * self.delta))
    }

    /// Modified values and the rank of the change.
    pub fn modify(&self, values: &[f64]) -> Result<(Vec<f64>, usize)> {
        let mut rank = 0;
        let out: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let (e, v) = if i >= self.n_minus {
                    let e = self.eta(l);
                    (e, l + (self.delta - l) * e)
                } else {
                    let e = self.eta(-l);
                    (e, l - (self.delta + l) * e)
                };
                if e > 0.0 {
                    rank += 1;
                }
                v
            })
            .collect();
        if rank > self.rank_budget {
            return Err(Error::Modification { rank, budget: self.rank_budget });
        }
        Ok((out, rank))
    }
}

/// Spectral data of `H(t) + R_{-infty}(t)` at one time.
#[derive(Clone, Debug)]
pub struct Instant {
    /// eigendecomposition with the modified values
    pub eig: EigenDecomposition,
    pub original: Vec<f64>,
    pub rank: usize,
}

impl Instant {
    pub fn projection(&self, sign: Sign) -> CMat {
        let s = sign.value();
        self.eig.apply(|l| if l * s > 0.0 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
    }

    /// `H + R_{-infty}`
    pub fn hamiltonian(&self) -> CMat {
        self.eig.apply(|l| c64::new(l, 0.0))
    }

    /// `R_{-infty}(t)`
    pub fn modification(&self) -> CMat {
        let d: Vec<c64> = self.eig.values.iter().zip(&self.original).map(|(a, b)| c64::new(a - b, 0.0)).collect();
        let v = &self.eig.vectors;
        let scaled = CMat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * d[j]);
        &scaled * &self.eig.inverse
    }

    pub fn gap(&self) -> f64 {
        self.eig.gap()
    }

    fn n_plus_start(&self) -> usize {
        self.eig.values.iter().filter(|l| **l < 0.0).count()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModificationScan {
    pub times: Vec<f64>,
    pub ranks: Vec<usize>,
    pub gaps_before: Vec<f64>,
    pub gaps_after: Vec<f64>,
    /// smallest interval containing every time with a nonzero push
    pub support: Option<(f64, f64)>,
    pub max_selfadjoint_residual: f64,
}

#[derive(Clone, Debug)]
pub struct CookIntegrand {
    pub matrix: CMat,
    pub gram_norm: f64,
    pub frequency_slope: Option<LineFit>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub order: usize,
    pub gram_norm: f64,
    pub frequency_slope: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinementReport {
    pub t: f64,
    pub levels: Vec<RefinementLevel>,
    pub best_order: usize,
    pub saturated: bool,
}

/// A Gram-selfadjoint path with its asymptotic spectral data.
pub struct Adiabatic {
    gen: Arc<dyn Generator>,
    pub modification: GapModification,
    past: EigenDecomposition,
    future: EigenDecomposition,
    pub grid: Option<GridSpec>,
}

fn exp_i(gram: &Gram, r: &CMat, s: f64) -> Result<CMat> {
    let (w, v) = herm_eigen(&hermitize(&gram.to_sym(r)))?;
    let vals: Vec<c64> = w.iter().map(|l| c64::from_polar(1.0, s * l)).collect();
    Ok(gram.from_sym(&crate::linalg::herm_apply(&vals, &v)))
}

fn fd4(f: [&CMat; 4], h: f64) -> CMat {
    // f = [x(-2), x(-1), x(1), x(2)]
    let mut d = scale_re(f[0], 1.0);
    d -= scale_re(f[1], 8.0);
    d += scale_re(f[2], 8.0);
    d -= f[3];
    scale_re(&d, 1.0 / (12.0 * h))
}

impl Adiabatic {
    pub fn new(gen: Arc<dyn Generator>, past: CMat, future: CMat) -> Result<Self> {
        let g = gen.gram().clone();
        let past = eig_decompose(&DiscreteOperator::new(past, g.clone()))?;
        let future = eig_decompose(&DiscreteOperator::new(future, g))?;
        let n_past = past.values.iter().filter(|l| **l < 0.0).count();
        let n_future = future.values.iter().filter(|l| **l < 0.0).count();
        if n_past != n_future {
            return Err(Error::SpectralFlow { past: n_past, future: n_future });
        }
        let gap = past.gap().min(future.gap());
        let threshold = GAP_RELATIVE * past.spectral_radius().max(future.spectral_radius());
        if gap < threshold {
            return Err(Error::SpectralGap { gap, threshold });
        }
        let modification = GapModification { n_minus: n_past, delta: 0.5 * gap, rank_budget: RANK_BUDGET };
        Ok(Adiabatic { gen, modification, past, future, grid: None })
    }

    pub fn for_problem(p: Arc<Problem>) -> Result<Self> {
        let past = p.asymptotic(TimeEnd::Past)?.matrix;
        let future = p.asymptotic(TimeEnd::Future)?.matrix;
        let grid = p.grid.clone();
        let mut a = Self::new(p, past, future)?;
        a.grid = Some(grid);
        Ok(a)
    }

    pub fn generator(&self) -> &Arc<dyn Generator> {
        &self.gen
    }

    pub fn gram(&self) -> &Arc<Gram> {
        self.gen.gram()
    }

    pub fn is_static(&self) -> bool {
        self.gen.is_static()
    }

    pub fn asymptotic_projection(&self, end: TimeEnd, sign: Sign) -> Result<CMat> {
        match end {
            TimeEnd::Past => self.past.projection(sign),
            TimeEnd::Future => self.future.projection(sign),
        }
    }

    pub fn instant(&self, t: f64) -> Result<Instant> {
        let mut eig = eig_decompose(&self.gen.operator(t)?)?;
        let original = eig.values.clone();
        let (values, rank) = self.modification.modify(&original)?;
        eig.values = values;
        let inst = Instant { eig, original, rank };
        let threshold = GAP_RELATIVE * inst.eig.spectral_radius();
        if inst.gap() < threshold {
            return Err(Error::SpectralGap { gap: inst.gap(), threshold });
        }
        Ok(inst)
    }

    /// `R_{-infty}(t)`
    pub fn gap_correction(&self, t: f64) -> Result<CMat> {
        Ok(self.instant(t)?.modification())
    }

    /// Samples the push over `times`; fails if the budget is exceeded anywhere.
    pub fn scan(&self, times: &[f64]) -> Result<ModificationScan> {
        let mut scan = ModificationScan {
            times: times.to_vec(),
            ranks: Vec::new(),
            gaps_before: Vec::new(),
            gaps_after: Vec::new(),
            support: None,
            max_selfadjoint_residual: 0.0,
        };
        for &t in times {
            let inst = self.instant(t)?;
            scan.ranks.push(inst.rank);
            scan.gaps_before.push(inst.original.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min));
            scan.gaps_after.push(inst.gap());
            if inst.rank > 0 {
                let r = inst.modification();
                let res = self.gram().selfadjoint_residual(&r);
                scan.max_selfadjoint_residual = scan.max_selfadjoint_residual.max(res);
                scan.support = Some(match scan.support {
                    None => (t, t),
                    Some((a, b)) => (a.min(t), b.max(t)),
                });
            }
        }
        Ok(scan)
    }

    pub fn projections(&self, t: f64) -> Result<(CMat, CMat)> {
        let inst = self.instant(t)?;
        Ok((inst.projection(Sign::Plus), inst.projection(Sign::Minus)))
    }

    fn stencil(&self, t: f64, mode: CorrectionMode) -> Stencil<'_> {
        Stencil {
            ad: self,
            t,
            h: FD_STEP * japanese(t),
            mode,
            inst: HashMap::new(),
            proj: HashMap::new(),
            s: HashMap::new(),
            exp: HashMap::new(),
        }
    }

    /// `dP^+/dt`
    pub fn dt_projection(&self, t: f64) -> Result<CMat> {
        if self.is_static() {
            let n = self.gram().dim();
            return Ok(zeros(n, n));
        }
        self.stencil(t, CorrectionMode::PaperLeading).dp(0)
    }

    /// `S(t)` and `R(t) = P^+ S P^- + (P^+ S P^-)^dagger`.
    pub fn first_correction(&self, t: f64, mode: CorrectionMode) -> Result<(CMat, CMat)> {
        let mut st = self.stencil(t, mode);
        let s = st.s(0, 0)?;
        let r = st.r(1, 0)?;
        Ok((s, r))
    }

    /// `R_N(t)`; `N = 0` is no correction.
    pub fn correction(&self, t: f64, order: usize, mode: CorrectionMode) -> Result<CMat> {
        self.stencil(t, mode).r(order, 0)
    }

    pub fn dressed_hamiltonian(&self, t: f64, order: usize, mode: CorrectionMode) -> Result<CMat> {
        self.stencil(t, mode).dressed(order, 0)
    }

    /// `e^{iR} H e^{-iR} + i^{-1} (d_t e^{iR}) e^{-iR}` for an arbitrary dressing `r`.
    pub fn dressed_with(&self, t: f64, r: &dyn Fn(f64) -> Result<CMat>) -> Result<CMat> {
        let h = FD_STEP * japanese(t);
        let g = self.gram();
        let e = |tau: f64| exp_i(g, &r(tau)?, 1.0);
        let ep = e(t)?;
        let em = exp_i(g, &r(t)?, -1.0)?;
        let d = fd4([&e(t - 2.0 * h)?, &e(t - h)?, &e(t + h)?, &e(t + 2.0 * h)?], h);
        let hh = self.instant(t)?.hamiltonian();
        Ok(&(&(&ep * &hh) * &em) + &scale(&(&d * &em), -I))
    }

    /// `dP/dt + [P, i H~]` with `H~` dressed to the given order.
    pub fn cook_integrand(&self, t: f64, order: usize, mode: CorrectionMode) -> Result<CookIntegrand> {
        let n = self.gram().dim();
        let d = if self.is_static() { zeros(n, n) } else { self.stencil(t, mode).cook(order, 0)? };
        Ok(self.integrand_report(d))
    }

    fn integrand_report(&self, d: CMat) -> CookIntegrand {
        let gram_norm = self.gram().norm(&d);
        let frequency_slope = self.grid.as_ref().and_then(|g| frequency_slope(&d, self.gram(), g));
        CookIntegrand { matrix: d, gram_norm, frequency_slope }
    }

    /// `P~^+(t) = e^{-iR} P^+ e^{iR}` and `R(t)`.
    pub fn corrected_projection(&self, t: f64, order: usize, mode: CorrectionMode) -> Result<(CMat, CMat)> {
        let mut st = self.stencil(t, mode);
        let r = st.r(order, 0)?;
        let p = st.p(0)?;
        if order == 0 {
            return Ok((p, r));
        }
        let (ep, em) = st.exps(order, 0)?;
        Ok((&(&em * &p) * &ep, r))
    }

    /// Cook integrands for orders `0..=n_max`, stopping early once an extra
    /// order no longer buys `0.8` in frequency slope.
    pub fn recursive_refine(&self, t: f64, n_max: usize, mode: CorrectionMode) -> Result<RefinementReport> {
        let n_max = n_max.min(4);
        let mut st = self.stencil(t, mode);
        let mut levels: Vec<RefinementLevel> = Vec::new();
        let mut saturated = false;
        let mut best = 0;
        for order in 0..=n_max {
            let rep = self.integrand_report(st.cook(order, 0)?);
            let slope = rep.frequency_slope.as_ref().map(|f| f.slope);
            if let (Some(prev), Some(cur)) = (levels.last().and_then(|l| l.frequency_slope), slope) {
                if cur > prev - crate::tolerances::SLOPE_GAIN {
                    saturated = true;
                    levels.push(RefinementLevel { order, gram_norm: rep.gram_norm, frequency_slope: slope });
                    break;
                }
            }
            best = order;
            levels.push(RefinementLevel { order, gram_norm: rep.gram_norm, frequency_slope: slope });
        }
        Ok(RefinementReport { t, levels, best_order: best, saturated })
    }
}

struct Stencil<'a> {
    ad: &'a Adiabatic,
    t: f64,
    h: f64,
    mode: CorrectionMode,
    inst: HashMap<i64, Instant>,
    proj: HashMap<i64, CMat>,
    s: HashMap<(usize, i64), CMat>,
    exp: HashMap<(usize, i64), (CMat, CMat)>,
}

impl Stencil<'_> {
    fn time(&self, j: i64) -> f64 {
        self.t + j as f64 * self.h
    }

    fn instant(&mut self, j: i64) -> Result<&Instant> {
        if !self.inst.contains_key(&j) {
            let i = self.ad.instant(self.time(j))?;
            self.inst.insert(j, i);
        }
        Ok(&self.inst[&j])
    }

    fn p(&mut self, j: i64) -> Result<CMat> {
        if let Some(p) = self.proj.get(&j) {
            return Ok(p.clone());
        }
        let p = self.instant(j)?.projection(Sign::Plus);
        self.proj.insert(j, p.clone());
        Ok(p)
    }

    fn dp(&mut self, j: i64) -> Result<CMat> {
        let a = self.p(j - 2)?;
        let b = self.p(j - 1)?;
        let c = self.p(j + 1)?;
        let d = self.p(j + 2)?;
        Ok(fd4([&a, &b, &c, &d], self.h))
    }

    /// `L^{-1} X`: `(2 eps)^{-1} X`, or the exact inverse of `X -> H X - X H`
    /// on the `(+,-)` block.
    fn invert(&mut self, j: i64, x: &CMat) -> Result<CMat> {
        let mode = self.mode;
        let inst = self.instant(j)?;
        let eig = &inst.eig;
        let xh = eig.to_eigenbasis(x);
        let n = xh.nrows();
        let out = match mode {
            CorrectionMode::PaperLeading => {
                CMat::from_fn(n, n, |i, k| xh[(i, k)] * (0.5 / (eig.values[i] * eig.values[i] + 1.0).sqrt()))
            }
            CorrectionMode::SylvesterExact => {
                let np = inst.n_plus_start();
                let floor = GAP_RELATIVE * eig.spectral_radius();
                let mut out = zeros(n, n);
                for i in np..n {
                    for k in 0..np {
                        let den = eig.values[i] - eig.values[k];
                        if den.abs() < floor {
                            return Err(Error::Degeneracy { denominator: den });
                        }
                        out[(i, k)] = xh[(i, k)] / den;
                    }
                }
                out
            }
        };
        Ok(eig.from_eigenbasis(&out))
    }

    /// Iterate `S_n`: `S_0 = -L^{-1} dP/dt`, `S_n = S_{n-1} - L^{-1} P^+ D_n P^-`.
    fn s(&mut self, level: usize, j: i64) -> Result<CMat> {
        if let Some(s) = self.s.get(&(level, j)) {
            return Ok(s.clone());
        }
        let s = if level == 0 {
            let dp = self.dp(j)?;
            scale_re(&self.invert(j, &dp)?, -1.0)
        } else {
            let prev = self.s(level - 1, j)?;
            let d = self.cook(level, j)?;
            let pp = self.p(j)?;
            let pm = &identity(pp.nrows()) - &pp;
            let block = &(&pp * &d) * &pm;
            &prev - &self.invert(j, &block)?
        };
        self.s.insert((level, j), s.clone());
        Ok(s)
    }

    /// `R_N = T(S_{N-1})`.
    fn r(&mut self, order: usize, j: i64) -> Result<CMat> {
        let n = self.ad.gram().dim();
        if order == 0 {
            return Ok(zeros(n, n));
        }
        let s = self.s(order - 1, j)?;
        let pp = self.p(j)?;
        let pm = &identity(n) - &pp;
        let off = &(&pp * &s) * &pm;
        Ok(&off + &self.ad.gram().adjoint(&off))
    }

    fn exps(&mut self, order: usize, j: i64) -> Result<(CMat, CMat)> {
        if let Some(e) = self.exp.get(&(order, j)) {
            return Ok(e.clone());
        }
        let r = self.r(order, j)?;
        let g = self.ad.gram().clone();
        let e = (exp_i(&g, &r, 1.0)?, exp_i(&g, &r, -1.0)?);
        self.exp.insert((order, j), e.clone());
        Ok(e)
    }

    fn dressed(&mut self, order: usize, j: i64) -> Result<CMat> {
        let hh = self.instant(j)?.hamiltonian();
        if order == 0 {
            return Ok(hh);
        }
        let (ep, em) = self.exps(order, j)?;
        let a = self.exps(order, j - 2)?.0;
        let b = self.exps(order, j - 1)?.0;
        let c = self.exps(order, j + 1)?.0;
        let d = self.exps(order, j + 2)?.0;
        let de = fd4([&a, &b, &c, &d], self.h);
        Ok(&(&(&ep * &hh) * &em) + &scale(&(&de * &em), -I))
    }

    fn cook(&mut self, order: usize, j: i64) -> Result<CMat> {
        let dp = self.dp(j)?;
        let p = self.p(j)?;
        let ht = self.dressed(order, j)?;
        Ok(&dp + &scale(&commutator(&p, &ht), I))
    }
}

/// Spectral norms of row annuli `2^j <= |n| < 2^{j+1}` of `X` in the Fourier
/// basis of the symmetric frame, for `j >= 1` and `2^{j+1} <= M/2`.  Returns
/// `(2^{j+1/2}, norm)`.
pub fn annulus_norms(x: &CMat, gram: &Gram, grid: &GridSpec) -> Vec<(f64, f64)> {
    let m = grid.points;
    let f = kron(&identity(2), &grid.fourier_matrix());
    let xh = &(&f * &gram.to_sym(x)) * f.adjoint();
    let mut out = Vec::new();
    let mut j = 1u32;
    while 2usize.pow(j + 1) <= m / 2 {
        let lo = 2i64.pow(j);
        let hi = 2i64.pow(j + 1);
        let rows: Vec<usize> = (0..2 * m)
            .filter(|&r| {
                let n = grid.mode_index(r % m).abs();
                n >= lo && n < hi
            })
            .collect();
        let sub = CMat::from_fn(rows.len(), 2 * m, |a, b| xh[(rows[a], b)]);
        out.push((2f64.powf(j as f64 + 0.5), op_norm(&sub)));
        j += 1;
    }
    out
}

/// Log-log slope of [`annulus_norms`]; `None` when fewer than two annuli are
/// nonzero (an identically vanishing operator has no finite slope).
pub fn frequency_slope(x: &CMat, gram: &Gram, grid: &GridSpec) -> Option<LineFit> {
    let pts: Vec<(f64, f64)> = annulus_norms(x, gram, grid).into_iter().filter(|p| p.1 > 1e-300).collect();
    if pts.len() < 2 {
        return None;
    }
    let (k, v): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    loglog_fit(&k, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::MatrixPath;
    use crate::geometry::FamilySpec;
    use crate::linalg::{diag_real, max_abs};
    use std::f64::consts::PI;

    fn problem(spec: FamilySpec, m: usize) -> Arc<Problem> {
        Arc::new(Problem::new(spec.build().unwrap(), GridSpec::new(m, 2.0 * PI).unwrap()).unwrap())
    }

    /// Spectrum {-2, -1.5, 1 - 2 exp(-t^2), 2.5} in a fixed non-trivial basis.
    fn dipping_path() -> Arc<dyn Generator> {
        let gram = Arc::new(Gram::from_diag(&[1.0, 2.0, 0.5, 1.5]).unwrap());
        let q = {
            let a = CMat::from_fn(4, 4, |i, j| c64::new(((i * 3 + j) as f64).sin(), ((i + 2 * j) as f64).cos()));
            let (_, v) = herm_eigen(&hermitize(&a)).unwrap();
            v
        };
        let g = gram.clone();
        Arc::new(MatrixPath::new(gram, move |t| {
            let d = diag_real(&[-2.0, -1.5, 1.0 - 2.0 * (-t * t).exp(), 2.5]);
            g.from_sym(&(&(&q * &d) * q.adjoint()))
        }))
    }

    #[test]
    fn rank_one_push_restores_the_gap() {
        let path = dipping_path();
        let past = path.matrix(-50.0).unwrap();
        let future = path.matrix(50.0).unwrap();
        let ad = Adiabatic::new(path, past, future).unwrap();
        assert_eq!(ad.modification.n_minus, 2);
        let times: Vec<f64> = (0..=80).map(|i| -4.0 + 0.1 * i as f64).collect();
        let scan = ad.scan(&times).unwrap();
        assert_eq!(*scan.ranks.iter().max().unwrap(), 1);
        let d = ad.modification.delta;
        assert!(scan.gaps_after.iter().all(|g| *g >= 0.5 * d - 1e-12));
        assert!(scan.gaps_before.iter().cloned().fold(f64::INFINITY, f64::min) < 0.1);
        let (a, b) = scan.support.unwrap();
        assert!(a > -2.0 && b < 2.0, "support {a} {b}");
        assert!(scan.max_selfadjoint_residual < 1e-12);
        // outside the support nothing is changed
        assert!(max_abs(&ad.gap_correction(3.0).unwrap()) == 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let m = GapModification { n_minus: 0, delta: 1.0, rank_budget: 2 };
        assert!(matches!(m.modify(&[0.1, 0.2, 0.3]), Err(Error::Modification { rank: 3, budget: 2 })));
        let (v, r) = m.modify(&[0.1, 0.75, 3.0]).unwrap();
        assert_eq!(r, 2);
        assert_eq!(v[0], 1.0);
        assert!(v[1] >= 0.75 && v[1] <= 1.0);
        assert_eq!(v[2], 3.0);
    }

    #[test]
    fn static_family_has_nothing_to_correct() {
        let ad = Adiabatic::for_problem(problem(FamilySpec::static_bump(), 16)).unwrap();
        let (pp, pm) = ad.projections(1.0).unwrap();
        assert!(max_abs(&(&(&pp + &pm) - identity(32))) < 1e-10);
        assert!(max_abs(&ad.dt_projection(0.3).unwrap()) == 0.0);
        let c = ad.cook_integrand(0.3, 1, CorrectionMode::PaperLeading).unwrap();
        assert_eq!(c.gram_norm, 0.0);
        let h = ad.generator().matrix(0.0).unwrap();
        let r0 = |_t: f64| -> Result<CMat> { Ok(zeros(32, 32)) };
        assert!(max_abs(&(&ad.dressed_with(0.0, &r0).unwrap() - &h)) < 1e-12);
    }

    #[test]
    fn dressing_is_unitary_and_selfadjoint() {
        let ad = Adiabatic::for_problem(problem(FamilySpec::bump(1.5), 16)).unwrap();
        let (_, r) = ad.first_correction(0.4, CorrectionMode::PaperLeading).unwrap();
        assert!(ad.gram().selfadjoint_residual(&r) < 1e-12);
        let e = exp_i(ad.gram(), &r, 1.0).unwrap();
        assert!(ad.gram().unitarity_residual(&e) < 1e-10);
        let ht = ad.dressed_hamiltonian(0.4, 1, CorrectionMode::PaperLeading).unwrap();
        assert!(ad.gram().selfadjoint_residual(&ht) < 1e-8);
        let (pt, _) = ad.corrected_projection(0.4, 1, CorrectionMode::PaperLeading).unwrap();
        assert!(max_abs(&(&(&pt * &pt) - &pt)) < 1e-10);
    }

    #[test]
    fn order_one_is_the_first_correction() {
        let ad = Adiabatic::for_problem(problem(FamilySpec::bump(1.5), 16)).unwrap();
        let (_, r) = ad.first_correction(0.2, CorrectionMode::PaperLeading).unwrap();
        let r1 = ad.correction(0.2, 1, CorrectionMode::PaperLeading).unwrap();
        assert_eq!(max_abs(&(&r - &r1)), 0.0);
        assert_eq!(max_abs(&ad.correction(0.2, 0, CorrectionMode::PaperLeading).unwrap()), 0.0);
    }

    #[test]
    fn sylvester_solves_the_linearised_equation() {
        let ad = Adiabatic::for_problem(problem(FamilySpec::bump(1.5), 16)).unwrap();
        let t = 0.3;
        let (s, _) = ad.first_correction(t, CorrectionMode::SylvesterExact).unwrap();
        let dp = ad.dt_projection(t).unwrap();
        let inst = ad.instant(t).unwrap();
        let h = inst.hamiltonian();
        let pp = inst.projection(Sign::Plus);
        let pm = inst.projection(Sign::Minus);
        // P+ (dP + H S - S H) P- = 0
        let lhs = &(&pp * &(&(&dp + &(&h * &s)) - &(&s * &h))) * &pm;
        assert!(op_norm(&lhs) < 1e-8 * op_norm(&dp));
        let (sp, _) = ad.first_correction(t, CorrectionMode::PaperLeading).unwrap();
        let rel = op_norm(&(&(&(&pp * &sp) * &pm) - &s)) / op_norm(&s);
        assert!(rel < 1.0, "relative difference {rel}");
    }

    #[test]
    fn correction_steepens_the_frequency_slope() {
        let ad = Adiabatic::for_problem(problem(FamilySpec::bump(1.5), 64)).unwrap();
        let t = 0.5;
        let raw = ad.cook_integrand(t, 0, CorrectionMode::SylvesterExact).unwrap();
        let cor = ad.cook_integrand(t, 1, CorrectionMode::SylvesterExact).unwrap();
        let s0 = raw.frequency_slope.unwrap().slope;
        let s1 = cor.frequency_slope.unwrap().slope;
        assert!((s0 + 1.0).abs() < 0.35, "uncorrected slope {s0}");
        assert!(s1 <= s0 - 0.8, "{s0} -> {s1}");
    }

    #[test]
    fn projection_decay_follows_mu() {
        let ad = Adiabatic::for_problem(problem(FamilySpec::bump(1.5), 16)).unwrap();
        let pinf = ad.asymptotic_projection(TimeEnd::Future, Sign::Plus).unwrap();
        let ts: Vec<f64> = (0..7).map(|i| 5.0 * 2f64.powi(i)).collect();
        let d: Vec<f64> = ts.iter().map(|&t| ad.gram().norm(&(&ad.projections(t).unwrap().0 - &pinf))).collect();
        let jt: Vec<f64> = ts.iter().map(|t| japanese(*t)).collect();
        let fit = loglog_fit(&jt, &d).unwrap();
        assert!((fit.slope + 1.5).abs() < 0.2, "slope {}", fit.slope);
    }

    #[test]
    fn annuli_of_a_smooth_multiplier() {
        let g = GridSpec::new(32, 2.0 * PI).unwrap();
        let gram = Gram::from_diag(&vec![1.0; 64]).unwrap();
        // X X* = cos^2 couples n to n +- 2; an annulus splits into chains of
        // length c with norm cos(pi / (2c + 2)).  The odd chain of the top
        // annulus wraps through the Nyquist mode.
        let c: Vec<f64> = g.nodes().iter().map(|x| x.cos()).collect();
        let x = kron(&identity(2), &diag_real(&c));
        let a = annulus_norms(&x, &gram, &g);
        assert_eq!(a.len(), 3);
        for ((_, v), r) in a.iter().zip([1.0, 2.0, 8.0]) {
            assert!((v - (PI / (2.0 * r + 2.0)).cos()).abs() < 1e-12, "{a:?}");
        }
    }
}
