use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("site {index} out of range for a lattice of {n_sites} sites")]
    InvalidSite { index: usize, n_sites: usize },

    #[error("lattice has {0} sites; configurations are limited to 64")]
    TooManySites(usize),

    #[error("constrained dimension exceeds cap ({cap})")]
    DimensionCap { cap: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("operation requires a {expected} lattice, got {found}")]
    WrongLattice { expected: String, found: String },

    #[error("graph is not bipartite")]
    NotBipartite,

    #[error("illegal configuration {0:#x}")]
    IllegalConfiguration(u64),

    #[error("operator is not hermitian")]
    NotHermitian,

    #[error("operators are not adjoint to each other (mismatch {mismatch:.3e})")]
    NotAdjoint { mismatch: f64 },

    #[error("state is not normalized (norm {norm:.12})")]
    NotNormalized { norm: f64 },

    #[error("Krylov propagation failed to converge (residual {residual:.3e})")]
    KrylovBreakdown { residual: f64 },

    #[error("dense cap exceeded: dimension {dim} > {cap}")]
    DenseCap { dim: usize, cap: usize },

    #[error("no revival structure: {0}")]
    NoRevival(String),

    #[error("FSA chain vanished at step {step}")]
    VanishingPrenorm { step: usize },

    #[error("connectivity is not uniform within sublattice {0}")]
    NonUniformConnectivity(char),

    #[error("equations of motion diverge at ({theta_a}, {theta_b})")]
    Divergence { theta_a: f64, theta_b: f64 },

    #[error("integration step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("no sign change of the classifier in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("empty spectrum")]
    EmptySpectrum,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
