use thiserror::Error;

use crate::exponents::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structure constants outside the admissible class.
    #[error("inadmissible growth parameters: {}", format_violations(.0))]
    ParamDomain(Vec<Violation>),

    /// A point was passed outside the set where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("boundary frame error: {0}")]
    Frame(String),

    /// The right-hand side was evaluated at z >= 0.
    #[error("singular right-hand side: z = {0} is not negative")]
    Singularity(f64),

    #[error("point lies outside the barrier domain of definition: {0}")]
    OutsideBarrier(String),

    #[error("analytic determinant bound unavailable: tau1 = {tau1} (epsilon = {epsilon})")]
    BoundUnavailable { tau1: f64, epsilon: f64 },

    #[error("barrier search failed: {0}")]
    SearchFailure(String),

    #[error("grid resolution error: {0}")]
    Resolution(String),

    #[error("no convergence after {iterations} sweeps (last update {last_update:e})")]
    IterationLimit {
        iterations: usize,
        last_update: f64,
        history: Vec<f64>,
        residual: Vec<f64>,
    },

    #[error("insufficient data for fit: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
