use thiserror::Error;

/// Errors raised by the lift, solvers and I/O layers.
///
/// Each variant belongs to one of three families (configuration, numerical,
/// I/O); the family decides the CLI exit status.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not in su(2): trace {trace:.3e}, hermitian part {hermitian:.3e}")]
    NotInAlgebra { trace: f64, hermitian: f64 },

    #[error("invalid grid size {0}: need a power of two >= 16")]
    InvalidGrid(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point ({r1:.6}, {r2:.6}, {r3:.6}) is too close to (-1, 0, 0) for the eigenvector frame")]
    SingularPoint { r1: f64, r2: f64, r3: f64 },

    #[error("no rotation moves the curve at least {radius} away from (-1, 0, 0)")]
    NoSafeRotation { radius: f64 },

    #[error("gauge residual {0:.3e} exceeds tolerance")]
    GaugeResidual(f64),

    #[error("monodromy is not diagonal (off-diagonal size {0:.3e})")]
    NonDiagonalMonodromy(f64),

    #[error("fixed-point iteration did not converge (residual {0:.3e})")]
    FixedPointDiverged(f64),

    #[error("non-finite value encountered at t = {0}")]
    NonFinite(f64),

    #[error("frame lost unitarity ({deviation:.3e}) at t = {t}; reduce the time step")]
    UnitaryDrift { deviation: f64, t: f64 },

    #[error("pole hit: spectral parameter is within 1e-12 of alpha")]
    PoleHit,

    #[error("complex-parameter frame overflow (entry {0:.3e})")]
    Overflow(f64),

    #[error("degenerate line: |E(alpha)^-1 V| = {0:.3e}")]
    DegenerateLine(f64),

    #[error("filament speed {0:.3e} is degenerate")]
    DegenerateSpeed(f64),

    #[error("transported normal frame lost orthonormality ({0:.3e})")]
    FrameDegenerate(f64),

    #[error("lambda-derivative estimates disagree by {0:.3e}")]
    DerivativeNoise(f64),

    #[error("curve is not closed/smooth at this resolution (spectral tail {0:.3e})")]
    NotClosed(f64),

    #[error("curve samples are off the sphere (deviation {0:.3e})")]
    OffSphere(f64),

    #[error("bad input format at line {line}: {message}")]
    BadFormat { line: usize, message: String },

    #[error("unknown curve '{0}'")]
    UnknownCurve(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for the CLI: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidGrid(_)
            | Error::InvalidConfig(_)
            | Error::UnknownCurve(_)
            | Error::BadFormat { .. } => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }

    /// Short variant name, printed on the diagnostic stream by the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotInAlgebra { .. } => "NotInAlgebra",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::SingularPoint { .. } => "SingularPoint",
            Error::NoSafeRotation { .. } => "NoSafeRotation",
            Error::GaugeResidual(_) => "GaugeResidual",
            Error::NonDiagonalMonodromy(_) => "NonDiagonalMonodromy",
            Error::FixedPointDiverged(_) => "FixedPointDiverged",
            Error::NonFinite(_) => "NonFinite",
            Error::UnitaryDrift { .. } => "UnitaryDrift",
            Error::PoleHit => "PoleHit",
            Error::Overflow(_) => "Overflow",
            Error::DegenerateLine(_) => "DegenerateLine",
            Error::DegenerateSpeed(_) => "DegenerateSpeed",
            Error::FrameDegenerate(_) => "FrameDegenerate",
            Error::DerivativeNoise(_) => "DerivativeNoise",
            Error::NotClosed(_) => "NotClosed",
            Error::OffSphere(_) => "OffSphere",
            Error::BadFormat { .. } => "BadFormat",
            Error::UnknownCurve(_) => "UnknownCurve",
            Error::Io(_) => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
