use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("chain size must be a positive integer, got {0}")]
    NonPositiveSize(i64),
    #[error("reservoir temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("parameter m must be positive, got {0}")]
    NonPositiveM(String),
    #[error("the three-site rotor is defined only for L=3 with closed boundaries")]
    L3SizeMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation requires family {expected}, spec has {got}")]
    WrongFamily { expected: String, got: String },
    #[error("energy configuration contains a negative entry at site {0}")]
    NegativeEnergyInput(usize),
    #[error("configuration is fully absorbed, total rate is zero")]
    AbsorbedState,
    #[error("event budget of {0} exceeded before absorption")]
    EventBudgetExceeded(u64),
    #[error("walker count {got} exceeds the configured budget {max}")]
    WalkerBudgetExceeded { got: usize, max: usize },
    #[error("linear system is singular or failed to converge: {0}")]
    SingularSystem(String),
    #[error("series too short: {len} samples, need more than {required}")]
    SeriesTooShort { len: usize, required: usize },
    #[error("conductivity is undefined at equal reservoir temperatures")]
    EqualTemperaturesForKappa,
    #[error("covariance sites must satisfy 1 <= i < j <= L, got i={i}, j={j}")]
    SiteOrderViolation { i: usize, j: usize },
    #[error("total walker degree {got} exceeds budget {max}")]
    DegreeBudgetExceeded { got: u32, max: u32 },
    #[error("polynomial variable outside the operator's variable set: {0}")]
    VariableMismatch(String),
    #[error("dual configuration outside the duality function's domain: {0}")]
    DomainGap(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
