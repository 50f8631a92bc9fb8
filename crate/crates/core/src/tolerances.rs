//! Tolerances shared by the library checks and the test suites.

/// Clifford relations, adjointness of beta and positivity of the Gram form.
pub const ALGEBRA: f64 = 1e-12;

/// Flat static spectrum against `+-sqrt(k^2 + m^2)`.
pub const FLAT_SPECTRUM: f64 = 1e-10;

/// Quadrature functional calculus against the eigendecomposition.
pub const QUADRATURE: f64 = 1e-6;

/// Maximum number of quadrature nodes allowed for [`QUADRATURE`].
pub const QUADRATURE_MAX_NODES: usize = 400;

/// Gram-unitarity drift of a propagator over the default schedule.
pub const UNITARITY: f64 = 1e-8;

/// Static propagator against the matrix exponential.
pub const STATIC_PROPAGATOR: f64 = 1e-8;

/// Allowed error of a fitted decay exponent.
pub const EXPONENT: f64 = 0.3;

/// Projection identities `c+ + c- = 1`, `c^2 = c`, `c^dagger = c`.
pub const PROJECTION_IDENTITY: f64 = 1e-6;

/// Static family: Moller projection against the spectral projection.
pub const STATIC_PROJECTION: f64 = 1e-6;

/// Sum rules `lambda+ + lambda- = G`, `Lambda+ + Lambda- = G U`.
pub const SUM_RULE: f64 = 1e-7;

/// Time-consistency and conformal covariance residuals.
pub const COVARIANCE: f64 = 1e-6;

/// Symbol test: required log-log slope of the symbol deviation.
pub const SYMBOL_SLOPE: f64 = -0.8;

/// Smoothing test: required annulus slope of `c - P~(0)` at first order.
pub const SMOOTHING_SLOPE: f64 = -1.8;

/// A slope above this value is a definite microlocal failure.
pub const SLOPE_FAILURE: f64 = -0.5;

/// Required improvement of a frequency slope per correction order.
pub const SLOPE_GAIN: f64 = 0.8;

/// Relative spectral gap below which spectral projections are refused.
pub const GAP_RELATIVE: f64 = 1e-6;

/// Variance of the log-log fit above which Richardson extrapolation is skipped.
pub const FIT_VARIANCE: f64 = 0.3;

/// Positivity of covariances, relative to the Gram scale.
pub const POSITIVITY: f64 = 1e-8;
