use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("family `{family}`: {message}")]
    Family { family: String, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shift-flow integration failed at t = {t}: {message}")]
    FlowIntegration { t: f64, message: String },

    #[error("operator is not selfadjoint w.r.t. the Gram form (relative residual {residual:e})")]
    Adjoint { residual: f64 },

    #[error("spectral gap {gap:e} below threshold {threshold:e}")]
    SpectralGap { gap: f64, threshold: f64 },

    #[error("quadrature did not converge: error estimate {estimate:e} > {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("unitarity drift {residual:e} over [{t0}, {t1}] exceeds budget {budget:e}")]
    UnitarityDrift { t0: f64, t1: f64, residual: f64, budget: f64 },

    #[error("near-degenerate Sylvester denominator {denominator:e}")]
    Degeneracy { denominator: f64 },

    #[error("covariance `{which}` has eigenvalue {min_eig:e} below -{tolerance:e}")]
    Positivity { which: String, min_eig: f64, tolerance: f64 },

    #[error("gap modification needs rank {rank} > budget {budget}")]
    Modification { rank: usize, budget: usize },

    #[error("asymptotic Hamiltonians have {past} and {future} negative eigenvalues; no compactly supported modification can gap the path")]
    SpectralFlow { past: usize, future: usize },

    #[error("Moller sequence does not converge (fitted exponent {mu_hat:.3}); trajectory {trajectory:?}")]
    Convergence { mu_hat: f64, trajectory: Vec<(f64, f64)> },

    #[error("Hadamard diagnostic failed: {test} slope {slope:.3}")]
    HadamardDiagnostic { test: String, slope: f64 },

    #[error("family `{0}` is not static")]
    NotStatic(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("array container: {0}")]
    Container(String),

    #[error("stage `{stage}`: {source}")]
    Stage { stage: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    /// Attach the name of the run stage that produced the error.
    pub fn at(self, stage: &str) -> Self {
        Error::Stage { stage: stage.to_string(), source: Box::new(self) }
    }

    pub fn family(family: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Family { family: family.into(), message: message.into() }
    }
}
