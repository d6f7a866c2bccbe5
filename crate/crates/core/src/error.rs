use thiserror::Error;

/// Failures raised by the numerical laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("complex spectrum: 1 + 4N(N - lambda) = {discriminant} <= 0")]
    ComplexSpectrum { discriminant: f64 },
    #[error("divergent integral: weight exponent {s} cannot tame moment xi^{power}")]
    DivergentIntegral { s: f64, power: usize },
    #[error("measure {measure} is not defined for {integrand} integrands")]
    IncompatibleMeasure {
        measure: &'static str,
        integrand: &'static str,
    },
    #[error("adaptive quadrature did not converge (estimate {estimate}, error {error})")]
    NonConvergence { estimate: f64, error: f64 },
    #[error("ladder action is not a single exact state: {0}")]
    DecompositionFailure(String),
    #[error("least-squares system is inconsistent (residual {residual:e})")]
    InconsistentSystem { residual: f64 },
    #[error("degenerate unperturbed levels {0} and {1}")]
    DegenerateLevels(usize, usize),
    #[error("normalization convention mismatch at n = {n}: numeric {numeric}, closed form {closed_form}")]
    ConventionMismatch {
        n: usize,
        numeric: f64,
        closed_form: f64,
    },
}

pub type Result<T> = std::result::Result<T, LabError>;
