use thiserror::Error;

/// Which factor of an estimator denominator vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    /// `⟨j|ρ_S|i⟩` for the Kraus and unitary estimators.
    StateOverlap,
    /// `⟨χ|0⟩⟨1|χ⟩` of the probe state.
    ProbeOverlap,
    /// `⟨ξ|k⟩` of the environment state in the pointer basis.
    EnvironmentOverlap,
    /// `⟨j|U¹†|i⟩` of the reference unitary in density characterization.
    ReferenceUnitary,
    /// `e^{-iθ} - 1` for a coupling angle that is a multiple of 2π.
    PhaseFactor,
    /// `θ₁ - θ₂` of the observable estimator.
    DeltaTheta,
}

impl std::fmt::Display for Factor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Factor::StateOverlap => "input-state overlap <j|rho|i>",
            Factor::ProbeOverlap => "probe overlap <chi|0><1|chi>",
            Factor::EnvironmentOverlap => "environment overlap <xi|k>",
            Factor::ReferenceUnitary => "reference-unitary element <j|U1^dag|i>",
            Factor::PhaseFactor => "phase factor e^{-i theta} - 1",
            Factor::DeltaTheta => "angle difference theta1 - theta2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max |h - h^dag| = {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not unitary (||U^dag U - I||_F = {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("columns are not orthonormal (||V^dag V - I||_F = {residual:.3e})")]
    NotIsometry { residual: f64 },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("Kraus completeness violated (||sum A^dag A - I||_F = {residual:.3e})")]
    Completeness { residual: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("state vector is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("environment state has vanishing overlap with pointer state {k}")]
    ZeroOverlap { k: usize },

    #[error("negative probability {0:.3e}: operator is not a valid POVM element")]
    NegativeProbability(f64),

    #[error("normalization {0:.3e} is too small to divide by")]
    VanishingNormalization(f64),

    #[error("vanishing denominator at (i={i}, j={j}, k={k:?}): {factor} = {value:.3e}")]
    VanishingDenominator {
        factor: Factor,
        value: f64,
        i: usize,
        j: usize,
        k: Option<usize>,
    },

    #[error("environment index {0}")]
    EnvironmentIndex(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
