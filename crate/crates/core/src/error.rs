use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the stage that raises them:
/// graph construction, spectral decomposition, operator assembly, filter
/// solves, and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("weight matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("weight matrix is not symmetric at ({row},{col}): {a} vs {b}")]
    NonSymmetric { row: usize, col: usize, a: f64, b: f64 },

    #[error("negative weight {weight} at ({row},{col})")]
    NegativeWeight { row: usize, col: usize, weight: f64 },

    #[error("self-loop weight {weight} at vertex {vertex}")]
    SelfLoop { vertex: usize, weight: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("generator produced a disconnected graph in {attempts} seeded attempts")]
    DisconnectedAfterRetries { attempts: usize },

    #[error("eigensolver failed to converge")]
    ConvergenceFailure,

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("kernel {name} produced a non-finite value at index {index} (lambda = {lambda})")]
    NonFiniteKernelValue {
        name: String,
        index: usize,
        lambda: f64,
    },

    #[error("kernel {name} must be strictly positive, got {value} at lambda = {lambda}")]
    KernelNotPositive {
        name: String,
        lambda: f64,
        value: f64,
    },

    #[error("unknown kernel name: {0}")]
    UnknownKernel(String),

    #[error("vertex index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("duplicate vertex index {index} in sampling set")]
    DuplicateVertex { index: usize },

    #[error("sample size {k} exceeds vertex count {n}")]
    KExceedsN { k: usize, n: usize },

    #[error("spectrum length {n} is not divisible by fold ratio {m}")]
    NotDivisible { n: usize, m: usize },

    #[error("reduced basis is not orthonormal (residual {residual:.3e})")]
    NonUnitaryReduced { residual: f64 },

    #[error(
        "{factor} is numerically singular (condition {condition:.3e}); \
         for noiseless setups consider a small diagonal regularization"
    )]
    SingularGram { factor: &'static str, condition: f64 },

    #[error("cross matrix {factor} is numerically singular (condition {condition:.3e})")]
    SingularCrossGram { factor: &'static str, condition: f64 },

    #[error("zero denominator in spectral response at reduced index {index}")]
    ZeroDenominator { index: usize },

    #[error("empty sample batch")]
    EmptySampleSet,

    #[error("all {trials} trials failed for method {method}: {last_error}")]
    AllTrialsFailed {
        method: String,
        trials: usize,
        last_error: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
