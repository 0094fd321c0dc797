use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("singular input: {0}")]
    SingularInput(String),
    #[error("matrix is not diagonalizable (eigenvector condition number {condition:.3e})")]
    NonDiagonalizable { condition: f64 },
    #[error("step size underflow at t = {t}")]
    StepFailure { t: f64 },
    #[error("state norm exceeded blowup threshold at t = {t}")]
    Blowup { t: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudgetExceeded { t: f64, max_steps: usize },
    #[error("t = {t} outside trajectory span [{t0}, {t1}]")]
    OutOfRange { t: f64, t0: f64, t1: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("trajectory converged to a fixed point (amplitude {amplitude:.3e})")]
    FixedPointConvergence { amplitude: f64 },
    #[error("too few Poincare section crossings ({found})")]
    NoCrossings { found: usize },
    #[error("return map did not contract (distance {distance:.3e})")]
    NotPeriodic { distance: f64 },
    #[error("cycle state drifted {drift:.3e} from the anchor over one period")]
    ClosureDrift { drift: f64 },
    #[error("invalid adjacency matrix: {0}")]
    InvalidAdjacency(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("graph is disconnected (lambda_2 = {lambda2:.3e})")]
    DisconnectedGraph { lambda2: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
