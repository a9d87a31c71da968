use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("the {expected} sampler cannot draw from a {found} kernel")]
    WrongKernel {
        expected: &'static str,
        found: &'static str,
    },

    #[error("grid too coarse for the kernel: rate*dt = {0} exceeds 10")]
    GridTooCoarse(f64),

    #[error("coefficient pole near t = {t}: |N| reached {magnitude:.3e}")]
    PoleEncountered { t: f64, magnitude: f64 },

    #[error("non-finite value at {0}")]
    NonFiniteValue(String),

    #[error("slice storage needs {requested} bytes, above the cap of {cap}")]
    MemoryCap { requested: usize, cap: usize },

    #[error("trajectory norm {norm:.3e} at t = {t} exceeds the overflow limit")]
    Overflow { t: f64, norm: f64 },

    #[error("{rejected} of {total} trajectories overflowed (limit {limit})")]
    ExcessiveRejects {
        rejected: usize,
        total: usize,
        limit: usize,
    },

    #[error("Fock cutoff {cutoff} not converged: doubling it moved qubit observables by {deviation:.3e}")]
    CutoffNotConverged { cutoff: usize, deviation: f64 },

    #[error("matrix is not Hermitian: defect {0:.3e}")]
    NotHermitian(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed coefficient dump: {0}")]
    Dump(String),

    #[error("interrupted")]
    Cancelled,

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        match self {
            Error::Cancelled => Error::Cancelled,
            e => Error::Context {
                context: context.into(),
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, past any added context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit status the command-line runner reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Context { source, .. } => source.exit_code(),
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Cancelled => 130,
            Error::Io(_) | Error::Dump(_) => 1,
            _ => 3,
        }
    }
}
