use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum SpinStructure {
    #[default]
    Periodic,
    Antiperiodic,
}

/// Uniform collocation grid on the circle of circumference `L`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub circumference: f64,
    #[serde(default)]
    pub spin: SpinStructure,
}

impl GridSpec {
    pub fn new(points: usize, circumference: f64) -> Result<Self> {
        Self::with_spin(points, circumference, SpinStructure::Periodic)
    }

    pub fn with_spin(points: usize, circumference: f64, spin: SpinStructure) -> Result<Self> {
        let g = GridSpec { points, circumference, spin };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 4 || self.points % 2 != 0 {
            return Err(Error::config(
                "grid.points",
                format!("need an even number of points >= 4, got {}", self.points),
            ));
        }
        if !(self.circumference > 0.0) || !self.circumference.is_finite() {
            return Err(Error::config("grid.circumference", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.circumference / self.points as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| j as f64 * self.spacing()).collect()
    }

    /// Mode index in FFT order: `0, 1, .., M/2-1, -M/2, .., -1`.
    pub fn mode_index(&self, n: usize) -> i64 {
        let m = self.points as i64;
        let n = n as i64;
        if n < m / 2 {
            n
        } else {
            n - m
        }
    }

    /// Wavenumbers in FFT order.  Antiperiodic spinors carry the half-integer shift.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let shift = match self.spin {
            SpinStructure::Periodic => 0.0,
            SpinStructure::Antiperiodic => 0.5,
        };
        (0..self.points)
            .map(|n| (self.mode_index(n) as f64 + shift) * 2.0 * PI / self.circumference)
            .collect()
    }

    /// Unitary DFT `F[n][j] = exp(-i k_n x_j) / sqrt(M)`.
    pub fn fourier_matrix(&self) -> CMat {
        let x = self.nodes();
        let k = self.wavenumbers();
        let s = 1.0 / (self.points as f64).sqrt();
        CMat::from_fn(self.points, self.points, |n, j| c64::from_polar(s, -k[n] * x[j]))
    }
}
