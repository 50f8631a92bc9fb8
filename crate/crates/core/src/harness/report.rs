//! Human-readable summary of a finished run, plus `checks.csv`
//! (`module, name, passed, value, threshold, detail`).

use super::run::{Manifest, RunResults};
use super::Check;
use crate::error::{Error, Result};
use serde::Deserialize;
use std::fmt::Write;
use std::path::Path;

#[derive(Debug, Deserialize)]
struct DiagnosticChecks {
    checks: Vec<Check>,
    max_drift: f64,
    steps: usize,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub text: String,
    pub checks: Vec<Check>,
    pub intact: bool,
}

impl Report {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4e}"))
}

pub fn report(dir: &Path) -> Result<Report> {
    let manifest = Manifest::load(dir).map_err(|e| e.at("manifest"))?;
    let intact = manifest.intact(dir);
    let results: RunResults = serde_json::from_slice(&std::fs::read(dir.join("results.json"))?)?;
    let diag: DiagnosticChecks = serde_json::from_slice(&std::fs::read(dir.join("diagnostics.json"))?)?;
    let mut t = String::new();
    let _ = writeln!(t, "run      {}", dir.display());
    let _ = writeln!(t, "family   {} (mu = {}, M = {}, static = {})", results.family, results.mu, results.points, results.is_static);
    let _ = writeln!(t, "config   {}", manifest.config_hash);
    let _ = writeln!(t, "results  {}{}", manifest.results_hash, if intact { "" } else { "  (FILES MODIFIED)" });
    let _ = writeln!(t, "steps    {}   max drift {:.3e}", diag.steps, diag.max_drift);
    for r in &results.scattering {
        let _ = writeln!(
            t,
            "{:<4} mu_hat {}  tail {:.3e}  extrapolated {}  residuals raw {:.2e} purified {:.2e}",
            format!("{:?}", r.direction).to_lowercase(),
            r.mu_hat.map_or("-".into(), |m| format!("{m:.3}")),
            r.tail_bound,
            r.extrapolated,
            r.raw.max(),
            r.purified.max()
        );
    }
    for c in &results.cook {
        let _ = writeln!(
            t,
            "cook {:?}: integrand exponent {}  |cook - moller| {:.3e} (tails {:.3e})  quadrature {:.2e}",
            c.direction,
            fmt_opt(c.report.integrand_exponent),
            c.moller_difference,
            c.combined_tail,
            c.report.quadrature_residual
        );
    }
    let _ = writeln!(t, "checks:");
    for c in &diag.checks {
        let _ = writeln!(
            t,
            "  [{}] {}.{} {} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.module,
            c.name,
            match (c.value, c.threshold) {
                (Some(v), Some(th)) => format!("{v:.3e} <= {th:.1e}"),
                _ => String::new(),
            },
            c.detail
        );
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Container(e.to_string());
    w.write_record(["module", "name", "passed", "value", "threshold", "detail"]).map_err(err)?;
    for c in &diag.checks {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        w.write_record([c.module.clone(), c.name.clone(), c.passed.to_string(), opt(c.value), opt(c.threshold), c.detail.clone()])
            .map_err(err)?;
    }
    std::fs::write(dir.join("checks.csv"), w.into_inner().map_err(|e| Error::Container(e.to_string()))?)?;
    Ok(Report { text: t, checks: diag.checks, intact })
}
