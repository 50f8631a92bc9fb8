//! Closed-form scalar fields on `R x S^1` with exact first derivatives.

use crate::error::Result;
use crate::fit::japanese;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

/// Which temporal end an asymptotic quantity refers to.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum TimeEnd {
    Past,
    Future,
}

impl TimeEnd {
    pub fn sign(self) -> f64 {
        match self {
            TimeEnd::Past => -1.0,
            TimeEnd::Future => 1.0,
        }
    }
}

/// Time dependence of one separable term.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeProfile {
    #[default]
    Const,
    /// `<t>^{-p}`
    Power { p: f64 },
    /// `exp(-(t/width)^2)`
    Gaussian { width: f64 },
    /// `exp(rate t)`
    Exp { rate: f64 },
    /// `tanh(t/scale)`
    Tanh { scale: f64 },
    /// `(1 + t/<t>)/2`, a smooth step from 0 to 1 with `<t>^{-2}` tails
    Ramp,
    Product { factors: Vec<TimeProfile> },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Const => 1.0,
            TimeProfile::Power { p } => japanese(t).powf(-p),
            TimeProfile::Gaussian { width } => (-(t / width).powi(2)).exp(),
            TimeProfile::Exp { rate } => (rate * t).exp(),
            TimeProfile::Tanh { scale } => (t / scale).tanh(),
            TimeProfile::Ramp => 0.5 * (1.0 + t / japanese(t)),
            TimeProfile::Product { factors } => factors.iter().map(|f| f.value(t)).product(),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Const => 0.0,
            TimeProfile::Power { p } => -p * t * (1.0 + t * t).powf(-0.5 * p - 1.0),
            TimeProfile::Gaussian { width } => -2.0 * t / (width * width) * self.value(t),
            TimeProfile::Exp { rate } => rate * (rate * t).exp(),
            TimeProfile::Tanh { scale } => {
                let c = (t / scale).cosh();
                1.0 / (scale * c * c)
            }
            TimeProfile::Ramp => 0.5 * japanese(t).powi(-3),
            TimeProfile::Product { factors } => {
                let mut s = 0.0;
                for i in 0..factors.len() {
                    let mut p = factors[i].deriv(t);
                    for (j, f) in factors.iter().enumerate() {
                        if j != i {
                            p *= f.value(t);
                        }
                    }
                    s += p;
                }
                s
            }
        }
    }

    /// Limit as `t -> +-infinity`, if finite.
    pub fn limit(&self, end: TimeEnd) -> Option<f64> {
        let s = end.sign();
        match self {
            TimeProfile::Const => Some(1.0),
            TimeProfile::Power { p } => {
                if *p > 0.0 {
                    Some(0.0)
                } else if *p == 0.0 {
                    Some(1.0)
                } else {
                    None
                }
            }
            TimeProfile::Gaussian { .. } => Some(0.0),
            TimeProfile::Exp { rate } => {
                if rate * s < 0.0 {
                    Some(0.0)
                } else if *rate == 0.0 {
                    Some(1.0)
                } else {
                    None
                }
            }
            TimeProfile::Tanh { scale } => Some(s * scale.signum()),
            TimeProfile::Ramp => Some(if s > 0.0 { 1.0 } else { 0.0 }),
            TimeProfile::Product { factors } => {
                let mut v = 1.0;
                for f in factors {
                    v *= f.limit(end)?;
                }
                Some(v)
            }
        }
    }

    pub fn is_const(&self) -> bool {
        match self {
            TimeProfile::Const => true,
            TimeProfile::Power { p } => *p == 0.0,
            TimeProfile::Exp { rate } => *rate == 0.0,
            TimeProfile::Product { factors } => factors.iter().all(|f| f.is_const()),
            _ => false,
        }
    }
}

/// Truncated Fourier series `mean + sum_n cos[n-1] cos(n k1 x) + sin[n-1] sin(n k1 x)`
/// with `k1 = 2 pi / L`.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct FourierSeries {
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn constant(v: f64) -> Self {
        FourierSeries { mean: v, ..Default::default() }
    }

    pub fn bandwidth(&self) -> usize {
        let last = |v: &Vec<f64>| v.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
        last(&self.cos).max(last(&self.sin))
    }

    fn eval(&self, x: f64, l: f64) -> (f64, f64) {
        let k1 = 2.0 * PI / l;
        let mut v = self.mean;
        let mut d = 0.0;
        for (n, c) in self.cos.iter().enumerate() {
            let k = (n + 1) as f64 * k1;
            v += c * (k * x).cos();
            d -= c * k * (k * x).sin();
        }
        for (n, s) in self.sin.iter().enumerate() {
            let k = (n + 1) as f64 * k1;
            v += s * (k * x).sin();
            d += s * k * (k * x).cos();
        }
        (v, d)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Term {
    #[serde(default)]
    pub spatial: FourierSeries,
    #[serde(default)]
    pub time: TimeProfile,
}

/// Serializable description of a separable field `sum_i f_i(x) g_i(t)`.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct FieldSpec {
    pub terms: Vec<Term>,
}

impl FieldSpec {
    pub fn constant(v: f64) -> Self {
        FieldSpec { terms: vec![Term { spatial: FourierSeries::constant(v), time: TimeProfile::Const }] }
    }

    pub fn build(&self, circumference: f64) -> FieldRef {
        Arc::new(SeparableField { terms: self.terms.clone(), circumference })
    }
}

/// Samples of a field and its first partial derivatives at a list of points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldSamples {
    pub value: Vec<f64>,
    pub dt: Vec<f64>,
    pub dx: Vec<f64>,
}

pub type FieldRef = Arc<dyn ScalarField>;

pub trait ScalarField: Send + Sync + Debug {
    fn sample(&self, t: f64, xs: &[f64]) -> Result<FieldSamples>;

    /// Time-independent limit field at the given end, if it exists.
    fn asymptote(&self, end: TimeEnd) -> Option<FieldRef>;

    fn is_static(&self) -> bool;

    /// `Some(v)` when the field is identically `v`.
    fn constant(&self) -> Option<f64> {
        None
    }

    /// Highest spatial mode present, when known.
    fn bandwidth(&self) -> Option<usize> {
        None
    }

    fn value(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.sample(t, &[x])?.value[0])
    }
}

#[derive(Clone, Debug)]
pub struct SeparableField {
    pub terms: Vec<Term>,
    pub circumference: f64,
}

impl ScalarField for SeparableField {
    fn sample(&self, t: f64, xs: &[f64]) -> Result<FieldSamples> {
        let mut out = FieldSamples {
            value: vec![0.0; xs.len()],
            dt: vec![0.0; xs.len()],
            dx: vec![0.0; xs.len()],
        };
        for term in &self.terms {
            let g = term.time.value(t);
            let dg = term.time.deriv(t);
            for (i, &x) in xs.iter().enumerate() {
                let (f, df) = term.spatial.eval(x, self.circumference);
                out.value[i] += f * g;
                out.dt[i] += f * dg;
                out.dx[i] += df * g;
            }
        }
        Ok(out)
    }

    fn asymptote(&self, end: TimeEnd) -> Option<FieldRef> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let l = term.time.limit(end)?;
            if l != 0.0 {
                let s = &term.spatial;
                terms.push(Term {
                    spatial: FourierSeries {
                        mean: s.mean * l,
                        cos: s.cos.iter().map(|c| c * l).collect(),
                        sin: s.sin.iter().map(|c| c * l).collect(),
                    },
                    time: TimeProfile::Const,
                });
            }
        }
        Some(Arc::new(SeparableField { terms, circumference: self.circumference }))
    }

    fn is_static(&self) -> bool {
        self.terms.iter().all(|t| t.time.is_const())
    }

    fn constant(&self) -> Option<f64> {
        if self.is_static() && self.terms.iter().all(|t| t.spatial.bandwidth() == 0) {
            Some(self.terms.iter().map(|t| t.spatial.mean).sum())
        } else {
            None
        }
    }

    fn bandwidth(&self) -> Option<usize> {
        Some(self.terms.iter().map(|t| t.spatial.bandwidth()).max().unwrap_or(0))
    }
}

pub fn constant_field(v: f64, circumference: f64) -> FieldRef {
    FieldSpec::constant(v).build(circumference)
}

/// Pointwise product `a b`.
#[derive(Clone, Debug)]
pub struct ProductField(pub FieldRef, pub FieldRef);

impl ScalarField for ProductField {
    fn sample(&self, t: f64, xs: &[f64]) -> Result<FieldSamples> {
        let a = self.0.sample(t, xs)?;
        let b = self.1.sample(t, xs)?;
        let n = xs.len();
        Ok(FieldSamples {
            value: (0..n).map(|i| a.value[i] * b.value[i]).collect(),
            dt: (0..n).map(|i| a.dt[i] * b.value[i] + a.value[i] * b.dt[i]).collect(),
            dx: (0..n).map(|i| a.dx[i] * b.value[i] + a.value[i] * b.dx[i]).collect(),
        })
    }

    fn asymptote(&self, end: TimeEnd) -> Option<FieldRef> {
        Some(Arc::new(ProductField(self.0.asymptote(end)?, self.1.asymptote(end)?)))
    }

    fn is_static(&self) -> bool {
        self.0.is_static() && self.1.is_static()
    }

    fn constant(&self) -> Option<f64> {
        Some(self.0.constant()? * self.1.constant()?)
    }

    fn bandwidth(&self) -> Option<usize> {
        Some(self.0.bandwidth()? + self.1.bandwidth()?)
    }
}

/// Real power `a^p` of a positive field.
#[derive(Clone, Debug)]
pub struct PowerField(pub FieldRef, pub f64);

impl ScalarField for PowerField {
    fn sample(&self, t: f64, xs: &[f64]) -> Result<FieldSamples> {
        let a = self.0.sample(t, xs)?;
        let p = self.1;
        let n = xs.len();
        let dp: Vec<f64> = (0..n).map(|i| p * a.value[i].powf(p - 1.0)).collect();
        Ok(FieldSamples {
            value: (0..n).map(|i| a.value[i].powf(p)).collect(),
            dt: (0..n).map(|i| dp[i] * a.dt[i]).collect(),
            dx: (0..n).map(|i| dp[i] * a.dx[i]).collect(),
        })
    }

    fn asymptote(&self, end: TimeEnd) -> Option<FieldRef> {
        Some(Arc::new(PowerField(self.0.asymptote(end)?, self.1)))
    }

    fn is_static(&self) -> bool {
        self.0.is_static()
    }

    fn constant(&self) -> Option<f64> {
        Some(self.0.constant()?.powf(self.1))
    }
}

/// `x -> f(t0, x)`, a static field.
#[derive(Clone, Debug)]
pub struct FrozenField {
    pub inner: FieldRef,
    pub t0: f64,
}

impl ScalarField for FrozenField {
    fn sample(&self, _t: f64, xs: &[f64]) -> Result<FieldSamples> {
        let mut s = self.inner.sample(self.t0, xs)?;
        s.dt.iter_mut().for_each(|v| *v = 0.0);
        Ok(s)
    }

    fn asymptote(&self, _end: TimeEnd) -> Option<FieldRef> {
        Some(Arc::new(self.clone()))
    }

    fn is_static(&self) -> bool {
        true
    }

    fn constant(&self) -> Option<f64> {
        self.inner.constant()
    }

    fn bandwidth(&self) -> Option<usize> {
        self.inner.bandwidth()
    }
}
