//! Configuration, orchestration, persistence and reporting.

pub mod config;
pub mod container;
pub mod report;
pub mod run;
pub mod sweep;
pub mod verify;

pub use config::{Config, Tolerances};
pub use run::{run, Manifest, RunOutcome};
pub use sweep::{sweep, SweepRow};
pub use verify::{verify, verify_with, VerifyReport};

use serde::{Deserialize, Serialize};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "DIRAC_LAB_OUT";

/// One pass/fail entry of a diagnostics or verification report.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub module: String,
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    /// `value <= threshold`
    pub fn below(module: &str, name: &str, value: f64, threshold: f64) -> Self {
        Check {
            module: module.into(),
            name: name.into(),
            passed: value <= threshold,
            value: Some(value),
            threshold: Some(threshold),
            detail: String::new(),
        }
    }

    pub fn flag(module: &str, name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { module: module.into(), name: name.into(), passed, value: None, threshold: None, detail: detail.into() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Output root from the flag, else the environment, else `./runs`.
pub fn output_root(flag: Option<&std::path::Path>) -> std::path::PathBuf {
    flag.map(|p| p.to_path_buf())
        .or_else(|| std::env::var_os(OUT_ENV).map(Into::into))
        .unwrap_or_else(|| "runs".into())
}
