//! Parameter sweeps over `mu`, `M` and `T_max` into one CSV table.
//!
//! CSV columns, in order: `mu, points, t_max, mu_hat, idempotent,
//! completeness, selfadjoint, symbol_slope, smoothing_slope, status, reason`.
//! Empty cells mean "not available".  `status` is `ok` or `failed`.

use super::config::{hex_digest, Config};
use super::run::{run, RunResults};
use crate::error::{Error, Result};
use crate::moller_scattering::Direction;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub const COLUMNS: &[&str] = &[
    "mu",
    "points",
    "t_max",
    "mu_hat",
    "idempotent",
    "completeness",
    "selfadjoint",
    "symbol_slope",
    "smoothing_slope",
    "status",
    "reason",
];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub mu: Option<f64>,
    pub points: usize,
    pub t_max: f64,
    pub mu_hat: Option<f64>,
    pub idempotent: Option<f64>,
    pub completeness: Option<f64>,
    pub selfadjoint: Option<f64>,
    pub symbol_slope: Option<f64>,
    pub smoothing_slope: Option<f64>,
    pub status: String,
    pub reason: String,
}

impl SweepRow {
    pub fn failed(mu: impl Into<Option<f64>>, points: usize, t_max: f64, reason: &str) -> Self {
        SweepRow {
            mu: mu.into(),
            points,
            t_max,
            mu_hat: None,
            idempotent: None,
            completeness: None,
            selfadjoint: None,
            symbol_slope: None,
            smoothing_slope: None,
            status: "failed".into(),
            reason: reason.into(),
        }
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Vec<SweepRow>> {
        let mut r = csv::Reader::from_reader(bytes);
        r.deserialize().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| Error::Container(e.to_string()))
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let err = |e: csv::Error| Error::Container(e.to_string());
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(COLUMNS).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Container(e.to_string()))
}

/// `(mu, M, T_max)` for every point, in row order.
pub fn points(config: &Config) -> Vec<(Option<f64>, usize, f64)> {
    let s = &config.sweep;
    if s.is_empty() {
        return Vec::new();
    }
    let mus: Vec<Option<f64>> = if s.mu.is_empty() { vec![None] } else { s.mu.iter().map(|m| Some(*m)).collect() };
    let ms = if s.points.is_empty() { vec![config.grid.points] } else { s.points.clone() };
    let ts = if s.t_max.is_empty() { vec![config.scattering.t_max] } else { s.t_max.clone() };
    let mut out = Vec::new();
    for mu in &mus {
        for m in &ms {
            for t in &ts {
                out.push((*mu, *m, *t));
            }
        }
    }
    out
}

fn declared_mu(config: &Config) -> Option<f64> {
    config.family.build().ok().map(|f| f.mu)
}

fn evaluate(base: &Config, point: (Option<f64>, usize, f64), root: &Path) -> SweepRow {
    let (mu, m, t) = point;
    let cfg = match base.with_point(mu, Some(m), Some(t)) {
        Ok(c) => c,
        Err(e) => return SweepRow::failed(mu, m, t, &e.to_string()),
    };
    let mu = mu.or_else(|| declared_mu(&cfg));
    let outcome = match run(&cfg, root) {
        Ok(o) => o,
        Err(e) => return SweepRow::failed(mu, m, t, &e.to_string()),
    };
    let read = || -> Result<SweepRow> {
        let res: RunResults = serde_json::from_slice(&std::fs::read(outcome.dir.join("results.json"))?)?;
        let diag: serde_json::Value = serde_json::from_slice(&std::fs::read(outcome.dir.join("diagnostics.json"))?)?;
        let out = res.scattering.iter().find(|r| r.direction == Direction::Out).or(res.scattering.first());
        let symbol = diag["symbol"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|s| s["report"]["slope"].as_f64())
            .reduce(f64::max);
        Ok(SweepRow {
            mu,
            points: m,
            t_max: t,
            mu_hat: out.and_then(|r| r.mu_hat),
            idempotent: out.map(|r| r.purified.idempotent_plus.max(r.purified.idempotent_minus)),
            completeness: out.map(|r| r.purified.completeness),
            selfadjoint: out.map(|r| r.purified.selfadjoint),
            symbol_slope: symbol,
            smoothing_slope: diag["smoothing"]["slope"].as_f64(),
            status: "ok".into(),
            reason: String::new(),
        })
    };
    read().unwrap_or_else(|e| SweepRow::failed(mu, m, t, &e.to_string()))
}

/// Sweep directory: `<root>/sweep-<first 12 hex digits of the config hash>`.
pub fn sweep_dir(config: &Config, root: &Path) -> PathBuf {
    root.join(format!("sweep-{}", &config.hash()[..12]))
}

/// Runs every point on `workers` threads.  Each point writes `row.json` in
/// its own subdirectory; with `resume` those rows are reused.  The table goes
/// to `sweep.csv` in the sweep directory, which is returned with the rows.
pub fn sweep(config: &Config, root: &Path, workers: usize, resume: bool) -> Result<(PathBuf, Vec<SweepRow>)> {
    config.validate()?;
    let dir = sweep_dir(config, root);
    std::fs::create_dir_all(&dir)?;
    let pts = points(config);
    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; pts.len()]);
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= pts.len() {
            break;
        }
        let pdir = dir.join(format!("point-{i:04}"));
        let row_path = pdir.join("row.json");
        let cached = if resume { std::fs::read(&row_path).ok().and_then(|b| serde_json::from_slice::<SweepRow>(&b).ok()) } else { None };
        let row = cached.unwrap_or_else(|| {
            let row = evaluate(config, pts[i], &pdir);
            if std::fs::create_dir_all(&pdir).is_ok() {
                let _ = std::fs::write(&row_path, serde_json::to_vec_pretty(&row).unwrap_or_default());
            }
            row
        });
        rows.lock().unwrap()[i] = Some(row);
    };
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(pts.len().max(1)) {
            s.spawn(&worker);
        }
    });
    let rows: Vec<SweepRow> = rows.into_inner().unwrap().into_iter().map(|r| r.expect("every point visited")).collect();
    let csv = rows_to_csv(&rows)?;
    std::fs::write(dir.join("sweep.csv"), &csv)?;
    let manifest = serde_json::json!({
        "config_hash": config.hash(),
        "points": pts.len(),
        "csv_sha256": hex_digest(&csv),
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok((dir, rows))
}
