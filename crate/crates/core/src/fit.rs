//! Least-squares fits used for decay exponents and frequency slopes.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual variance `sum r^2 / (n - 2)`; zero for two points.
    pub residual_variance: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    pub n: usize,
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let (residual_variance, slope_stderr) = if n > 2 {
        let v = ss / (nf - 2.0);
        (v, (v / sxx).sqrt())
    } else {
        (0.0, 0.0)
    };
    Some(LineFit { slope, intercept, residual_variance, slope_stderr, n })
}

/// Fit `log y = a + s log x`, skipping non-positive samples.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    line_fit(&lx, &ly)
}

/// `<t> = sqrt(1 + t^2)`.
pub fn japanese(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let x: Vec<f64> = (0..6).map(|j| 10.0 * 2f64.powi(j)).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t.powf(-1.25)).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope + 1.25).abs() < 1e-12);
        assert!(f.residual_variance < 1e-20);
    }

    #[test]
    fn too_few_points() {
        assert!(line_fit(&[1.0], &[2.0]).is_none());
        assert!(line_fit(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }
}
