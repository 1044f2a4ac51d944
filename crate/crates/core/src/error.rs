use thiserror::Error;

/// Errors raised by the laboratory's builders and checkers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("proposal probability T({x},{y}) is zero; acceptance ratio undefined")]
    ZeroProposal { x: usize, y: usize },

    #[error("chain is reducible: {classes} communicating classes")]
    Reducible { classes: usize },

    #[error("spectral gap vanishes (second eigenvalue modulus {modulus})")]
    ZeroGap { modulus: f64 },

    #[error("chain is not reversible: detailed-balance residual {residual:e}")]
    NonReversible { residual: f64 },

    #[error("perturbation size {eps} exceeds the lemma hypothesis 1/4")]
    EpsilonTooLarge { eps: f64 },

    #[error("matrix is numerically defective (eigenvector condition number {cond:e})")]
    Defective { cond: f64 },

    #[error("acceptance value {value} outside [0, 1]")]
    AcceptanceOutOfRange { value: f64 },

    #[error("proposal row {row} is not normalizable (sum {sum})")]
    NonNormalizable { row: usize, sum: f64 },

    #[error("subspace rank {found} differs from expected {expected}")]
    RankDeficient { expected: usize, found: usize },

    #[error("insufficient ancillas: requested accuracy needs {needed} qubits, limit is {limit}")]
    InsufficientAncillas { needed: u32, limit: u32 },

    #[error("faithful QMCI supports at most {max} terms, got {m}")]
    FaithfulTooLarge { m: usize, max: usize },

    #[error("register dimension {dim} exceeds the dense budget {budget}")]
    DimensionBudget { dim: usize, budget: usize },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
