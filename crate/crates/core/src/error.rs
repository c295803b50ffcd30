use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel has nonzero mean {mean:e}")]
    NonZeroMean { mean: f64 },

    #[error("kernel support does not generate the integers (gcd = {gcd})")]
    ReducibleKernel { gcd: i64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error(
        "no bracket for H^2 V(H) = 1 at lambda = {lambda:e}: f({lo:e}) = {f_lo:e}, f({hi:e}) = {f_hi:e}"
    )]
    ScaleBracket {
        lambda: f64,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("truncation M = {m} too small: {reason}")]
    TruncationTooSmall { m: usize, reason: String },

    #[error("row {row} of the operator is identically zero")]
    ZeroRow { row: usize },

    #[error("eigen-iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigenfunction entry {index} is not strictly positive ({value:e})")]
    NonPositiveEigenfunction { index: usize, value: f64 },

    #[error("row-sum deviation {deviation:e} at state {state} exceeds tolerance")]
    RowSumDeviation { state: usize, deviation: f64 },

    #[error("test function vanishes at state {state} inside the support of the measure")]
    ZeroTestFunction { state: usize },

    #[error("domain cutoff too small: q(R) = {q_at_cutoff} < e_(k-1) + 10 = {required}; increase R")]
    CutoffTooSmall { q_at_cutoff: f64, required: f64 },

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("simulation aborted: {escapes} escapes from [0, R] (time step too coarse)")]
    TooManyEscapes { escapes: u64 },

    #[error("partition function underflow: no admissible path from {from} to {to}")]
    EmptyPathSpace { from: usize, to: usize },

    #[error("dead end while sampling at step {step} from state {state}")]
    DeadEnd { step: usize, state: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("{0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown experiment `{tag}`; valid tags: {valid}")]
    UnknownExperiment { tag: String, valid: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
