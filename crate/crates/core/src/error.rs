use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ring length {0} is below the minimum of 3 sites")]
    RingTooShort(usize),

    #[error("invalid configuration string: {0}")]
    Parse(String),

    #[error("stack height {0} exceeds the supported maximum of 2^31-1")]
    HeightOverflow(u64),

    #[error("ring has {particles} particles on {sites} sites; the height profile does not close")]
    Unbalanced { sites: usize, particles: usize },

    #[error("region decomposition needs a height spread of at most 2, found {0}")]
    SpreadTooLarge(i64),

    #[error("residual block at site {start} (length {len}) is neither (10)^k nor (01)^k")]
    UnclassifiedBlock { start: usize, len: usize },

    #[error("membership class {class} does not apply to a {config} configuration")]
    ClassMismatch {
        class: &'static str,
        config: &'static str,
    },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("letter {0} has no replacement word in this substitution rule")]
    MissingLetter(u32),

    #[error("sequence is not a rotation of any image of the substitution")]
    NotInImage,

    #[error("coupled state invariant violated: {0}")]
    CouplingInvariant(String),

    #[error("observer counter overflowed")]
    CounterOverflow,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state space has {count} states, above the cap of {cap}")]
    StateCapExceeded { count: usize, cap: usize },

    #[error("transition graph is reducible ({components} strongly connected components)")]
    Reducible { components: usize },

    #[error("linear system is singular")]
    Singular,

    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("correlation fit failed: {0}")]
    FitFailure(String),

    #[error("run did not reach the target condition within {0} steps")]
    StepLimit(u64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
