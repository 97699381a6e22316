use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cone image aperture is infinite: first component of an image vector vanished")]
    ApertureInfinite,

    #[error("matrix determinant is {det}, expected 1")]
    NotVolumePreserving { det: f64 },

    #[error("matrix has an eigenvalue of modulus {modulus} (within 1e-9 of 1)")]
    NotHyperbolic { modulus: f64 },

    #[error("surgery local map disagrees with the base linearization: {0}")]
    SurgeryMismatch(String),

    #[error("bump bound {requested} infeasible; best achievable sup|psi psi''| is {achievable}")]
    BoundInfeasible { requested: f64, achievable: f64 },

    #[error("flow integration failed: achieved residual {achieved:e}")]
    IntegrationFailure { achieved: f64 },

    #[error("rescale too large: a*K = {a_k} is not below the profile support {support}")]
    ScaleTooLarge { a_k: f64, support: f64 },

    #[error("construction inconsistent: {0}")]
    ConstructionInconsistent(String),

    #[error("no admissible cone target: lower end {lower} is not below gamma {gamma}")]
    ConeGapInfeasible { lower: f64, gamma: f64 },

    #[error("rotation breaks the cone certificate: aperture {aperture} exceeds {target}")]
    RotationTooLarge { aperture: f64, target: f64 },

    #[error("orbit balls {i} and {j} intersect")]
    BallsNotDisjoint { i: usize, j: usize },

    #[error("index adjustment e^-sigma = {contracted} does not exceed the strong stable eigenvalue {strong_stable}")]
    AdjustmentBreaksOrder { contracted: f64, strong_stable: f64 },

    #[error("point is not periodic with the stated period (return distance {distance:e})")]
    NotPeriodic { distance: f64 },

    #[error("inverse solve did not converge: residual {residual:e}")]
    InverseDidNotConverge { residual: f64 },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("frame degeneracy: triangular diagonal entry {0:e} underflowed")]
    Underflow(f64),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
