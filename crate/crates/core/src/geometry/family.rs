use super::fields::{
    constant_field, FieldRef, FieldSpec, FourierSeries, Term, TimeEnd, TimeProfile,
};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Metric `g = -c^2 dt^2 + h (dx + b dt)^2` on `R x S^1` together with a mass
/// field and the declared decay exponent `mu`.
#[derive(Clone, Debug)]
pub struct MetricFamily {
    pub name: String,
    /// lapse `c`
    pub lapse: FieldRef,
    /// shift `b`
    pub shift: FieldRef,
    /// spatial metric `h`
    pub spatial: FieldRef,
    pub mass: FieldRef,
    pub mu: f64,
    pub circumference: f64,
}

impl MetricFamily {
    pub fn is_static(&self) -> bool {
        self.lapse.is_static() && self.shift.is_static() && self.spatial.is_static() && self.mass.is_static()
    }

    pub fn has_shift(&self) -> bool {
        self.shift.constant() != Some(0.0)
    }

    pub fn has_unit_lapse(&self) -> bool {
        self.lapse.constant() == Some(1.0)
    }

    /// Unit lapse and no shift: the form expected by the operator assembly.
    pub fn is_reduced(&self) -> bool {
        self.has_unit_lapse() && !self.has_shift()
    }

    /// Static family given by the limit fields at one end.
    pub fn asymptotic(&self, end: TimeEnd) -> Result<MetricFamily> {
        let lim = |f: &FieldRef, what: &str| {
            f.asymptote(end)
                .ok_or_else(|| Error::family(&self.name, format!("{what} has no limit at {end:?}")))
        };
        Ok(MetricFamily {
            name: format!("{}@{:?}", self.name, end),
            lapse: lim(&self.lapse, "lapse")?,
            shift: lim(&self.shift, "shift")?,
            spatial: lim(&self.spatial, "spatial metric")?,
            mass: lim(&self.mass, "mass")?,
            mu: self.mu,
            circumference: self.circumference,
        })
    }

    /// Largest known spatial bandwidth of the coefficient fields.
    pub fn bandwidth(&self) -> Option<usize> {
        [&self.lapse, &self.shift, &self.spatial, &self.mass]
            .iter()
            .map(|f| f.bandwidth())
            .try_fold(0usize, |acc, b| b.map(|b| acc.max(b)))
    }
}

fn default_mass() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    0.3
}
fn default_eps_m() -> f64 {
    0.2
}
fn default_asym() -> f64 {
    0.5
}
fn default_mu() -> f64 {
    1.0
}
fn default_beta() -> f64 {
    0.2
}
fn default_h_in() -> f64 {
    1.0
}
fn default_h_out() -> f64 {
    2.0
}
fn default_static_mu() -> f64 {
    2.0
}
fn default_l() -> f64 {
    2.0 * PI
}

/// Family catalogue as it appears in configuration files.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Minkowski cylinder with constant mass.
    Flat {
        #[serde(default = "default_mass")]
        mass: f64,
        #[serde(default = "default_l")]
        circumference: f64,
    },
    /// Static inhomogeneous metric and mass, `h = 1 + eps cos x`, `m = m0 (1 + eps_m sin x)`.
    Static {
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_eps_m")]
        eps_m: f64,
        #[serde(default = "default_mass")]
        mass: f64,
        #[serde(default = "default_l")]
        circumference: f64,
    },
    /// `h = 1 + eps cos x <t>^{-mu} (1 + asym tanh t)`, `m = m0 (1 + eps_m sin x <t>^{-mu})`.
    Bump {
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_eps_m")]
        eps_m: f64,
        #[serde(default = "default_asym")]
        asym: f64,
        #[serde(default = "default_mass")]
        mass: f64,
        #[serde(default = "default_l")]
        circumference: f64,
    },
    /// Homogeneous expansion `h = h_in + (h_out - h_in) (1 + t/<t>)/2`.
    CosmologicalRamp {
        #[serde(default = "default_h_in")]
        h_in: f64,
        #[serde(default = "default_h_out")]
        h_out: f64,
        #[serde(default = "default_mass")]
        mass: f64,
        #[serde(default = "default_l")]
        circumference: f64,
    },
    /// Bump metric with a decaying shift `b = beta sin x <t>^{-1-mu}`.
    Shifted {
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_mass")]
        mass: f64,
        #[serde(default = "default_l")]
        circumference: f64,
    },
    /// Arbitrary separable coefficient fields.
    Custom {
        #[serde(default = "default_static_mu")]
        mu: f64,
        #[serde(default)]
        lapse: Option<FieldSpec>,
        #[serde(default)]
        shift: Option<FieldSpec>,
        spatial: FieldSpec,
        mass: FieldSpec,
        #[serde(default = "default_l")]
        circumference: f64,
    },
}

fn series(mean: f64, cos: &[f64], sin: &[f64]) -> FourierSeries {
    FourierSeries { mean, cos: cos.to_vec(), sin: sin.to_vec() }
}

fn term(s: FourierSeries, time: TimeProfile) -> Term {
    Term { spatial: s, time }
}

impl FamilySpec {
    pub fn label(&self) -> &'static str {
        match self {
            FamilySpec::Flat { .. } => "flat",
            FamilySpec::Static { .. } => "static",
            FamilySpec::Bump { .. } => "bump",
            FamilySpec::CosmologicalRamp { .. } => "cosmological-ramp",
            FamilySpec::Shifted { .. } => "shifted",
            FamilySpec::Custom { .. } => "custom",
        }
    }

    pub fn circumference(&self) -> f64 {
        match self {
            FamilySpec::Flat { circumference, .. }
            | FamilySpec::Static { circumference, .. }
            | FamilySpec::Bump { circumference, .. }
            | FamilySpec::CosmologicalRamp { circumference, .. }
            | FamilySpec::Shifted { circumference, .. }
            | FamilySpec::Custom { circumference, .. } => *circumference,
        }
    }

    pub fn bump(mu: f64) -> Self {
        FamilySpec::Bump {
            mu,
            eps: default_eps(),
            eps_m: default_eps_m(),
            asym: default_asym(),
            mass: default_mass(),
            circumference: default_l(),
        }
    }

    pub fn flat(mass: f64) -> Self {
        FamilySpec::Flat { mass, circumference: default_l() }
    }

    pub fn static_bump() -> Self {
        FamilySpec::Static { eps: default_eps(), eps_m: default_eps_m(), mass: default_mass(), circumference: default_l() }
    }

    pub fn shifted(mu: f64) -> Self {
        FamilySpec::Shifted { mu, beta: default_beta(), eps: default_eps(), mass: default_mass(), circumference: default_l() }
    }

    /// Bump metric and mass under the static lapse `c = 1 + sin(x)/2`.
    pub fn lapsed(mu: f64) -> Self {
        let p = TimeProfile::Power { p: mu };
        FamilySpec::Custom {
            mu,
            lapse: Some(FieldSpec { terms: vec![term(series(1.0, &[], &[0.5]), TimeProfile::Const)] }),
            shift: None,
            spatial: FieldSpec {
                terms: vec![term(series(1.0, &[], &[]), TimeProfile::Const), term(series(0.0, &[default_eps()], &[]), p.clone())],
            },
            mass: FieldSpec {
                terms: vec![term(series(1.0, &[], &[]), TimeProfile::Const), term(series(0.0, &[], &[default_eps_m()]), p)],
            },
            circumference: default_l(),
        }
    }

    pub fn ramp() -> Self {
        FamilySpec::CosmologicalRamp { h_in: default_h_in(), h_out: default_h_out(), mass: default_mass(), circumference: default_l() }
    }

    /// Look up a catalogue entry by name with its default parameters.
    pub fn builtin(name: &str, mu: Option<f64>) -> Result<Self> {
        let mu = mu.unwrap_or(default_mu());
        Ok(match name {
            "flat" => Self::flat(default_mass()),
            "static" => Self::static_bump(),
            "bump" => Self::bump(mu),
            "cosmological-ramp" => Self::ramp(),
            "shifted" => Self::shifted(mu),
            other => return Err(Error::config("family.name", format!("unknown family `{other}`"))),
        })
    }

    /// Parses the body of a `[family]` table.
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: FamilySpec = toml::from_str(text).map_err(|e| Error::config("family", e.message()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.circumference();
        if !(l > 0.0) {
            return Err(Error::config("family.circumference", "must be positive"));
        }
        let check_mu = |mu: f64| {
            if mu > 0.0 && mu.is_finite() {
                Ok(())
            } else {
                Err(Error::config("family.mu", format!("decay exponent must be positive, got {mu}")))
            }
        };
        match self {
            FamilySpec::Bump { mu, eps, asym, .. } => {
                check_mu(*mu)?;
                if eps.abs() * (1.0 + asym.abs()) >= 1.0 {
                    return Err(Error::config("family.eps", "spatial metric would not stay positive"));
                }
            }
            FamilySpec::Static { eps, .. } | FamilySpec::Shifted { eps, .. } => {
                if eps.abs() >= 1.0 {
                    return Err(Error::config("family.eps", "spatial metric would not stay positive"));
                }
                if let FamilySpec::Shifted { mu, .. } = self {
                    check_mu(*mu)?;
                }
            }
            FamilySpec::CosmologicalRamp { h_in, h_out, .. } => {
                if !(*h_in > 0.0 && *h_out > 0.0) {
                    return Err(Error::config("family.h_in", "scale factors must be positive"));
                }
            }
            FamilySpec::Custom { mu, .. } => check_mu(*mu)?,
            FamilySpec::Flat { .. } => {}
        }
        Ok(())
    }

    pub fn build(&self) -> Result<MetricFamily> {
        self.validate()?;
        let l = self.circumference();
        let one = || constant_field(1.0, l);
        let zero = || constant_field(0.0, l);
        let fam = |name: &str, lapse, shift, spatial, mass, mu| MetricFamily {
            name: name.to_string(),
            lapse,
            shift,
            spatial,
            mass,
            mu,
            circumference: l,
        };
        Ok(match self {
            FamilySpec::Flat { mass, .. } => fam("flat", one(), zero(), one(), constant_field(*mass, l), default_static_mu()),
            FamilySpec::Static { eps, eps_m, mass, .. } => {
                let h = FieldSpec { terms: vec![term(series(1.0, &[*eps], &[]), TimeProfile::Const)] };
                let m = FieldSpec { terms: vec![term(series(*mass, &[], &[mass * eps_m]), TimeProfile::Const)] };
                fam("static", one(), zero(), h.build(l), m.build(l), default_static_mu())
            }
            FamilySpec::Bump { mu, eps, eps_m, asym, mass, .. } => {
                let p = TimeProfile::Power { p: *mu };
                let h = FieldSpec {
                    terms: vec![
                        term(series(1.0, &[], &[]), TimeProfile::Const),
                        term(series(0.0, &[*eps], &[]), p.clone()),
                        term(
                            series(0.0, &[eps * asym], &[]),
                            TimeProfile::Product { factors: vec![p.clone(), TimeProfile::Tanh { scale: 1.0 }] },
                        ),
                    ],
                };
                let m = FieldSpec {
                    terms: vec![
                        term(series(*mass, &[], &[]), TimeProfile::Const),
                        term(series(0.0, &[], &[mass * eps_m]), p),
                    ],
                };
                fam("bump", one(), zero(), h.build(l), m.build(l), *mu)
            }
            FamilySpec::CosmologicalRamp { h_in, h_out, mass, .. } => {
                let h = FieldSpec {
                    terms: vec![
                        term(series(*h_in, &[], &[]), TimeProfile::Const),
                        term(series(h_out - h_in, &[], &[]), TimeProfile::Ramp),
                    ],
                };
                fam("cosmological-ramp", one(), zero(), h.build(l), constant_field(*mass, l), 2.0)
            }
            FamilySpec::Shifted { mu, beta, eps, mass, .. } => {
                let b = FieldSpec { terms: vec![term(series(0.0, &[], &[*beta]), TimeProfile::Power { p: 1.0 + mu })] };
                let h = FieldSpec {
                    terms: vec![
                        term(series(1.0, &[], &[]), TimeProfile::Const),
                        term(series(0.0, &[*eps], &[]), TimeProfile::Power { p: *mu }),
                    ],
                };
                fam("shifted", one(), b.build(l), h.build(l), constant_field(*mass, l), *mu)
            }
            FamilySpec::Custom { mu, lapse, shift, spatial, mass, .. } => fam(
                "custom",
                lapse.as_ref().map_or_else(one, |f| f.build(l)),
                shift.as_ref().map_or_else(zero, |f| f.build(l)),
                spatial.build(l),
                mass.build(l),
                *mu,
            ),
        })
    }
}
