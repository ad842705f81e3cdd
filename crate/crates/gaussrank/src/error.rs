use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Geometric errors (ambiguity, rank drops,
/// oracle disagreement) are kept distinct from usage and parse errors so
/// the CLI can map them onto its exit-code contract.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter index {index} out of range for {n} parameters")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("jet parameter counts differ: {left} vs {right}")]
    ParamMismatch { left: usize, right: usize },

    #[error("jet truncation orders differ: {left} vs {right}")]
    OrderMismatch { left: u8, right: u8 },

    #[error("unsupported jet order {order} (only 0..=3)")]
    UnsupportedOrder { order: u8 },

    #[error("ambient dimensions differ: {left} vs {right}")]
    AmbientMismatch { left: usize, right: usize },

    #[error("{what}: dimension mismatch (expected {expected}, got {got})")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("no generic sample found for {what} after {retries} retries")]
    NonGeneric { what: String, retries: usize },

    #[error("Jacobian rank drop at sample point ({detail})")]
    RankDrop { detail: String },

    #[error("frame vectors dependent on the tangent space at all retry samples")]
    FrameDependence,

    #[error("direction field undefined at all retry samples: {detail}")]
    FieldUndefined { detail: String },

    #[error("no nondegenerate quadric found in the pencil after {tries} random combinations")]
    NondegenerateQuadricNotFound { tries: usize },

    #[error("ambiguous eigen-directions (eigenvalue clustering at this sample)")]
    AmbiguousDirections,

    #[error("ambiguous sample for {what}; resample")]
    AmbiguousSample { what: String },

    #[error("no common asymptotic direction ({detail})")]
    NoAsymptoticDirection { detail: String },

    #[error("unsupported dimension for this operation: {detail}")]
    UnsupportedDimension { detail: String },

    #[error("rank oracles disagree at an accepted sample: Pluecker rank {pluecker_rank}, kernel-based rank {kernel_rank}")]
    OracleMismatch {
        pluecker_rank: usize,
        kernel_rank: usize,
    },

    #[error("all samples ambiguous ({ambiguous} of {attempts} attempts)")]
    AllSamplesAmbiguous { ambiguous: usize, attempts: usize },

    #[error("unsupported fiber dimension f = {f} (only f = 1 fibers are parametrized)")]
    UnsupportedFiberDimension { f: usize },

    #[error("fiber line verification failed: tangent spaces along the candidate line differ by {angle:.3e}")]
    FiberVerification { angle: f64 },

    #[error("focus polynomial fit residual {residual:.3e} above tolerance after {tries} projections")]
    FitResidual { residual: f64, tries: usize },

    #[error("zero focus polynomial (fiber dimension greater than one contaminates the determinant)")]
    ZeroPolynomial,

    #[error("focal root tracking ambiguous: two roots within the cluster tolerance during continuation")]
    TrackingAmbiguity,

    #[error("mixed classification evidence across fibers: {tally}")]
    MixedEvidence { tally: String },

    #[error("conjugate structure precondition failed: {detail}")]
    ConjugatePrecondition { detail: String },

    #[error("conjugate structure residual too large: {detail}")]
    ConjugateResidual { detail: String },

    #[error("eigenvalue iteration failed to converge")]
    EigenConvergence,

    #[error("variety input error: {0}")]
    Input(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Exit code for the CLI: 1 for usage/parse problems, 2 for geometric
    /// failures discovered during analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Parse(_) | Error::Io(_) | Error::Input(_) => 1,
            _ => 2,
        }
    }
}
