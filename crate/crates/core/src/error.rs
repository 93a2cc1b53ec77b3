use thiserror::Error;

/// Errors raised across the simulator and analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice configuration: {0}")]
    InvalidLattice(String),

    #[error("only {found} occupied sites, need {needed}; enlarge cell_extent")]
    InsufficientSites { found: usize, needed: usize },

    #[error("zero separation between spins")]
    ZeroSeparation,

    #[error("{ns} spins exceed the dense capacity of {max} spins")]
    CapacityExceeded { ns: usize, max: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("dephasing Hamiltonian has zero norm; cannot fix a finite norm ratio")]
    ZeroDephasingNorm,

    #[error("invalid timing: {0}")]
    InvalidTiming(String),

    #[error("unknown special case `{0}`")]
    UnknownCase(String),

    #[error("toggling phase step vanishes at theta = {theta} (recoupled)")]
    Recoupled { theta: f64 },

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error("initial state has zero norm")]
    ZeroInitialState,

    #[error("survival {survival} at or below the readout floor {floor}")]
    NonPositiveSurvival { survival: f64, floor: f64 },

    #[error("window [{start}, {end}] holds no samples")]
    EmptyWindow { start: f64, end: f64 },

    #[error("fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("only {found} envelope extrema, need at least 3")]
    TooFewExtrema { found: usize },

    #[error("no dip detected near {center} rad")]
    NoDipDetected { center: f64 },

    #[error("invalid inputs: {0}")]
    InvalidInputs(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
