//! Experiment configuration: `[family]`, `[grid]`, `[evolution]`,
//! `[scattering]`, `[diagnostics]` plus an optional `[sweep]` table.

use crate::error::{Error, Result};
use crate::evolution::StepperConfig;
use crate::geometry::{FamilySpec, GridSpec, SpinStructure};
use crate::moller_scattering::{Direction, Schedule};
use crate::tolerances as tol;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: usize,
    #[serde(default)]
    pub spin: SpinStructure,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScatteringSection {
    pub t0: f64,
    pub ratio: f64,
    pub t_max: f64,
    pub directions: Vec<Direction>,
    /// also run the Cook-accelerated limit for each direction
    pub cook: bool,
}

impl Default for ScatteringSection {
    fn default() -> Self {
        let s = Schedule::default();
        ScatteringSection { t0: s.t0, ratio: s.ratio, t_max: s.t_max, directions: vec![Direction::Out, Direction::In], cook: true }
    }
}

impl ScatteringSection {
    pub fn schedule(&self) -> Schedule {
        Schedule { t0: self.t0, ratio: self.ratio, t_max: self.t_max }
    }
}

/// Every numerical threshold used by the diagnostics, keyed for overrides.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub algebra: f64,
    pub flat_spectrum: f64,
    pub quadrature: f64,
    pub quadrature_max_nodes: usize,
    pub unitarity: f64,
    pub static_propagator: f64,
    pub exponent: f64,
    pub projection_identity: f64,
    pub static_projection: f64,
    pub sum_rule: f64,
    pub covariance: f64,
    pub symbol_slope: f64,
    pub smoothing_slope: f64,
    pub slope_failure: f64,
    pub slope_gain: f64,
    pub gap_relative: f64,
    pub fit_variance: f64,
    pub positivity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            algebra: tol::ALGEBRA,
            flat_spectrum: tol::FLAT_SPECTRUM,
            quadrature: tol::QUADRATURE,
            quadrature_max_nodes: tol::QUADRATURE_MAX_NODES,
            unitarity: tol::UNITARITY,
            static_propagator: tol::STATIC_PROPAGATOR,
            exponent: tol::EXPONENT,
            projection_identity: tol::PROJECTION_IDENTITY,
            static_projection: tol::STATIC_PROJECTION,
            sum_rule: tol::SUM_RULE,
            covariance: tol::COVARIANCE,
            symbol_slope: tol::SYMBOL_SLOPE,
            smoothing_slope: tol::SMOOTHING_SLOPE,
            slope_failure: tol::SLOPE_FAILURE,
            slope_gain: tol::SLOPE_GAIN,
            gap_relative: tol::GAP_RELATIVE,
            fit_variance: tol::FIT_VARIANCE,
            positivity: tol::POSITIVITY,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// `[lo, hi]` mode band of the symbol test; default `[8, M/4]`
    pub symbol_band: Option<[i64; 2]>,
    /// order of the corrected projection in the smoothing test
    pub smoothing_order: usize,
    /// `(t, s)` pairs for time consistency
    pub time_pairs: Vec<[f64; 2]>,
    /// `(t, s)` pairs for the two-point sum rule and the intertwining residual
    pub two_point: Vec<[f64; 2]>,
    pub intertwining_step: f64,
    /// random probe vectors for the unitarity spot check
    pub probes: usize,
    /// write `Lambda^+-(t,s)` for every `two_point` pair
    pub dump_kernels: bool,
    pub tolerances: Tolerances,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            symbol_band: None,
            smoothing_order: 1,
            time_pairs: vec![[1.0, 0.0]],
            two_point: vec![[2.0, -1.0]],
            intertwining_step: 1e-3,
            probes: 4,
            dump_kernels: false,
            tolerances: Tolerances::default(),
        }
    }
}

/// Parameter grid for `sweep`; empty lists fall back to the base config.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mu: Vec<f64>,
    pub points: Vec<usize>,
    pub t_max: Vec<f64>,
}

impl SweepSection {
    pub fn len(&self) -> usize {
        let n = |v: usize| v.max(1);
        if self.is_empty() {
            return 0;
        }
        n(self.mu.len()) * n(self.points.len()) * n(self.t_max.len())
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty() && self.points.is_empty() && self.t_max.is_empty()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub family: FamilySpec,
    pub grid: GridSection,
    #[serde(default)]
    pub evolution: StepperConfig,
    #[serde(default)]
    pub scattering: ScatteringSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default, skip_serializing_if = "SweepSection::is_empty")]
    pub sweep: SweepSection,
}

pub const MAX_SWEEP_POINTS: usize = 1000;

impl Config {
    pub fn new(family: FamilySpec, points: usize) -> Self {
        Config {
            seed: 0,
            family,
            grid: GridSection { points, spin: SpinStructure::default() },
            evolution: StepperConfig::default(),
            scattering: ScatteringSection::default(),
            diagnostics: DiagnosticsSection::default(),
            sweep: SweepSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path.is_empty() || path == "." { "<root>".to_string() } else { path }, e.inner().message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::with_spin(self.grid.points, self.family.circumference(), self.grid.spin)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        self.grid()?;
        self.evolution.validate()?;
        self.scattering.schedule().validate()?;
        if self.scattering.directions.is_empty() {
            return Err(Error::config("scattering.directions", "at least one direction is required"));
        }
        let d = &self.diagnostics;
        if let Some([lo, hi]) = d.symbol_band {
            if lo < 1 || hi < lo {
                return Err(Error::config("diagnostics.symbol_band", "need 1 <= lo <= hi"));
            }
        }
        if !(d.intertwining_step > 0.0) {
            return Err(Error::config("diagnostics.intertwining_step", "must be positive"));
        }
        if self.sweep.len() > MAX_SWEEP_POINTS {
            return Err(Error::config("sweep", format!("{} points exceed the limit of {MAX_SWEEP_POINTS}", self.sweep.len())));
        }
        if self.sweep.points.iter().any(|m| *m < 4 || m % 2 != 0) {
            return Err(Error::config("sweep.points", "every entry must be even and >= 4"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, lower-case hex.
    pub fn hash(&self) -> String {
        hex_digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn family_hash(&self) -> String {
        hex_digest(serde_json::to_string(&self.family).expect("family serializes").as_bytes())
    }

    /// Copy of this config with the sweep parameters substituted.
    pub fn with_point(&self, mu: Option<f64>, points: Option<usize>, t_max: Option<f64>) -> Result<Config> {
        let mut c = self.clone();
        c.sweep = SweepSection::default();
        if let Some(mu) = mu {
            set_mu(&mut c.family, mu)?;
        }
        if let Some(m) = points {
            c.grid.points = m;
        }
        if let Some(t) = t_max {
            c.scattering.t_max = t;
        }
        c.validate()?;
        Ok(c)
    }
}

fn set_mu(spec: &mut FamilySpec, value: f64) -> Result<()> {
    match spec {
        FamilySpec::Bump { mu, .. } | FamilySpec::Shifted { mu, .. } | FamilySpec::Custom { mu, .. } => {
            *mu = value;
            Ok(())
        }
        other => Err(Error::config("sweep.mu", format!("family `{}` has no decay exponent", other.label()))),
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUMP: &str = r#"
seed = 7

[family]
name = "bump"
mu = 1.5

[grid]
points = 16

[scattering]
t_max = 80.0
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = Config::parse(BUMP).unwrap();
        assert_eq!(c.family, FamilySpec::bump(1.5));
        assert_eq!(c.scattering.t_max, 80.0);
        assert_eq!(c.diagnostics.tolerances, Tolerances::default());
        let again = Config::parse(&c.to_toml()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
    }

    #[test]
    fn odd_grid_names_the_field() {
        let bad = BUMP.replace("points = 16", "points = 15");
        match Config::parse(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "grid.points"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let bad = BUMP.replace("t_max = 80.0", "t_max = \"long\"");
        match Config::parse(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "scattering.t_max"),
            other => panic!("{other:?}"),
        }
        let bad = BUMP.replace("[grid]", "[grid]\nresolution = 3");
        assert!(matches!(Config::parse(&bad), Err(Error::Config { .. })));
    }

    #[test]
    fn tolerance_overrides() {
        let text = format!("{BUMP}\n[diagnostics.tolerances]\nsum_rule = 1e-9\n");
        let c = Config::parse(&text).unwrap();
        assert_eq!(c.diagnostics.tolerances.sum_rule, 1e-9);
        assert_eq!(c.diagnostics.tolerances.unitarity, tol::UNITARITY);
    }

    #[test]
    fn sweep_points_substitute() {
        let c = Config::parse(BUMP).unwrap();
        let p = c.with_point(Some(0.5), Some(32), None).unwrap();
        assert_eq!(p.family, FamilySpec::bump(0.5));
        assert_eq!(p.grid.points, 32);
        let flat = Config::new(FamilySpec::flat(1.0), 8);
        assert!(flat.with_point(Some(1.0), None, None).is_err());
    }
}
