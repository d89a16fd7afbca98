use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(f64),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("POVM elements do not sum to the identity (max deviation {0:e})")]
    Incomplete(f64),

    #[error("transition matrix row {row} is not a probability distribution (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("outcome probabilities for experiment (state {family}, unitary {setting}) sum to {sum}")]
    ProbabilitySum { family: usize, setting: usize, sum: f64 },

    #[error(
        "population matrix has rank {rank} but there are {subspaces} subspaces; \
         the known states must span the subspaces of the underlying measurement"
    )]
    RankDeficient { rank: usize, subspaces: usize },

    #[error("training fraction {0} selects no trials")]
    EmptyTraining(f64),

    #[error("{bins} bins requested for {outcomes} outcomes")]
    TooManyBins { bins: usize, outcomes: usize },

    #[error("bin rule is malformed: {0}")]
    BadBinRule(String),

    #[error("histogram shape does not match the experiment: {0}")]
    ShapeMismatch(String),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("bound solver failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
