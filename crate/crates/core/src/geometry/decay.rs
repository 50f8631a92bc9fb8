use super::family::MetricFamily;
use super::fields::{FieldRef, TimeEnd};
use crate::error::{Error, Result};
use crate::fit::{japanese, line_fit};
use serde::{Deserialize, Serialize};

/// Spatial sample count used for the sup norms.
const SUP_POINTS: usize = 64;

/// Slack allowed between the fitted and the required exponent.
pub const DECAY_SLACK: f64 = 0.2;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldDecay {
    pub field: String,
    pub end: TimeEnd,
    /// Fitted `rho` in `sup_x |f - f_inf| ~ <t>^{-rho}` (or of `sup |d_t f|`);
    /// `f64::INFINITY` when the quantity vanishes identically.
    pub exponent: f64,
    /// Half-width of the 95% interval of the fitted exponent.
    pub ci95: f64,
    pub required: f64,
    pub compliant: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecayReport {
    pub order: usize,
    pub mu: f64,
    pub fields: Vec<FieldDecay>,
    pub compliant: bool,
}

impl DecayReport {
    pub fn exponent(&self, field: &str, end: TimeEnd) -> Option<f64> {
        self.fields.iter().find(|f| f.field == field && f.end == end).map(|f| f.exponent)
    }
}

fn sup_deviation(f: &FieldRef, lim: &FieldRef, t: f64, xs: &[f64], order: usize) -> Result<f64> {
    let s = f.sample(t, xs)?;
    Ok(if order == 0 {
        let l = lim.sample(0.0, xs)?;
        s.value.iter().zip(&l.value).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        s.dt.iter().map(|v| v.abs()).fold(0.0, f64::max)
    })
}

/// Fit decay exponents of `f - f_{+-inf}` (order 0) or `d_t f` (order 1) for
/// every coefficient field.  Positive samples probe the future end, negative
/// ones the past end; each end with at least four samples is fitted.
pub fn verify_decay(family: &MetricFamily, t_samples: &[f64], order: usize) -> Result<DecayReport> {
    if order > 1 {
        return Err(Error::config("order", "only orders 0 and 1 are supported"));
    }
    let l = family.circumference;
    let xs: Vec<f64> = (0..SUP_POINTS).map(|j| j as f64 * l / SUP_POINTS as f64).collect();
    let mut fields = Vec::new();
    let mut any = false;
    for end in [TimeEnd::Past, TimeEnd::Future] {
        let ts: Vec<f64> = t_samples.iter().copied().filter(|t| t * end.sign() > 0.0).collect();
        if ts.len() < 4 {
            continue;
        }
        let (lo, hi) = ts.iter().fold((f64::MAX, 0.0f64), |(a, b), t| (a.min(t.abs()), b.max(t.abs())));
        if hi < 10.0 * lo {
            return Err(Error::InsufficientData(format!(
                "samples at the {end:?} end span [{lo}, {hi}], less than a decade"
            )));
        }
        any = true;
        let list: [(&str, &FieldRef, f64); 4] = [
            ("lapse", &family.lapse, 0.0),
            ("shift", &family.shift, 1.0),
            ("spatial", &family.spatial, 0.0),
            ("mass", &family.mass, 0.0),
        ];
        for (name, f, extra) in list {
            let lim = f
                .asymptote(end)
                .ok_or_else(|| Error::family(&family.name, format!("{name} has no limit at {end:?}")))?;
            let mut lx = Vec::new();
            let mut ly = Vec::new();
            let mut scale = 0.0f64;
            for &t in &ts {
                let d = sup_deviation(f, &lim, t, &xs, order)?;
                scale = scale.max(d);
                if d > 0.0 {
                    lx.push(japanese(t).ln());
                    ly.push(d.ln());
                }
            }
            let required = family.mu + extra + order as f64;
            let (exponent, ci95) = if scale <= 1e-300 || lx.len() < 2 {
                (f64::INFINITY, 0.0)
            } else {
                let fit = line_fit(&lx, &ly).ok_or_else(|| Error::InsufficientData("degenerate samples".into()))?;
                (-fit.slope, 1.96 * fit.slope_stderr)
            };
            fields.push(FieldDecay {
                field: name.to_string(),
                end,
                exponent,
                ci95,
                required,
                compliant: exponent >= required - DECAY_SLACK,
            });
        }
    }
    if !any {
        return Err(Error::InsufficientData(format!(
            "need at least 4 samples at one end, got {}",
            t_samples.len()
        )));
    }
    let compliant = fields.iter().all(|f| f.compliant);
    Ok(DecayReport { order, mu: family.mu, fields, compliant })
}

/// Geometric sample times `+-t0 * ratio^j`, `j = 0..n`.
pub fn geometric_samples(t0: f64, ratio: f64, n: usize, both_ends: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|j| t0 * ratio.powi(j as i32)).collect();
    if both_ends {
        let neg: Vec<f64> = v.iter().map(|t| -t).collect();
        v.extend(neg);
    }
    v
}
