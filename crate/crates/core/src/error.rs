use thiserror::Error;

/// Errors raised by the counting-statistics engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FcsError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("all reservoir couplings vanish; the transfer rate is undefined")]
    DegenerateCouplings,

    #[error("argument outside the domain of {what}: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("no reservoir labelled `{0}` in this scenario")]
    UnknownReservoir(String),

    #[error("eigenvalue branch tracking became ambiguous at chi = {chi_re}{chi_im:+}i")]
    EigenvalueCrossing { chi_re: f64, chi_im: f64 },

    #[error("finite-difference step {step} is roundoff dominated (estimated error {estimate:e})")]
    StepTooSmall { step: f64, estimate: f64 },

    #[error("finite-difference step {step} is truncation dominated (Richardson table diverges)")]
    StepTooLarge { step: f64 },

    #[error("singular projected solve: {0}")]
    SingularSolve(String),

    #[error("generator has a non-unique stationary state")]
    NonUniqueStationaryState,

    #[error("count window grew past the cap of {cap} bins")]
    WindowOverflow { cap: usize },

    #[error("counting-field quadrature under-resolved: doubling nodes shifted the result by {shift:e}")]
    QuadratureUnderresolved { shift: f64 },

    #[error("{formula} used outside its validity range ({detail})")]
    BranchMisuse { formula: &'static str, detail: String },

    #[error("affinity diverges: both reservoirs need a strictly positive occupation")]
    AffinityDivergence,

    #[error("no probability above the floor {floor:e} to compare at n = {n}")]
    InsufficientStatistics { n: i64, floor: f64 },

    #[error("full-space generator limited to N <= {max}, got N = {got}")]
    SizeCap { max: usize, got: usize },

    #[error("validation failed for {quantity}: {detail}")]
    Validation { quantity: String, detail: String },
}

pub type Result<T> = std::result::Result<T, FcsError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> FcsError {
    FcsError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
