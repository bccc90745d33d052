use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coupling J_{index} = {value} is not strictly positive")]
    NonPositiveCoupling { index: usize, value: f64 },
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch { what: &'static str, got: usize, expected: usize },
    #[error("resonance frequency omega = {0} is not strictly positive")]
    NonPositiveOmega(f64),
    #[error("detuning of the reference qubit must be 0, got {0}")]
    ReferenceDetuning(f64),
    #[error("theta = {0} is not finite")]
    NonFiniteTheta(f64),
    #[error("chain must contain at least one qubit")]
    EmptyChain,

    #[error("zero polynomial has no roots")]
    DegenerateInput,
    #[error("rational function is not proper: deg num {num} >= deg den {den}")]
    ImproperRational { num: usize, den: usize },
    #[error("pole {re}{im:+}i lies on the real axis; contour closure is ambiguous")]
    RealAxisPole { re: f64, im: f64 },

    #[error("delta_k = {0} hits the bare resonance of qubit {1}")]
    OnQubitResonancePole(f64, usize),
    #[error("transfer product T11 vanishes at delta_k = {0} (perfect reflection point)")]
    SingularTransferProduct(f64),

    #[error("truncated characteristic polynomial insufficient: {0}")]
    TruncationInsufficient(String),
    #[error("pole {0} approaches the carrier scale omega; expansion invalid")]
    ValidityViolated(f64),
    #[error("theta = {0} is not an integer multiple of pi")]
    NotAtBicPoint(f64),
    #[error("operation requires identical qubits")]
    NotIdentical,

    #[error("quadrature did not converge: estimated error {err:e} > tolerance {tol:e}")]
    QuadratureNotConverged { err: f64, tol: f64 },
    #[error("objective has no interior maximum on [{lo}, {hi}]")]
    NoInteriorMaximum { lo: f64, hi: f64 },
    #[error("delay integrator step too large: norm grew by {0:e}")]
    StepTooLarge(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
