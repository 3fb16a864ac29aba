use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("period group is not discrete (rational rank {rank})")]
    NotDiscrete { rank: usize },
    #[error("period group is trivial")]
    TrivialGroup,
    #[error("delta must lie in (0, 1/2], got {0}")]
    InvalidDelta(f64),
    #[error("no chart of the atlas contains the requested set")]
    NoCoveringChart,
    #[error("flow neighbourhood of size {eps} leaves every chart")]
    EpsilonTooLarge { eps: f64 },
    #[error("map is not a submersion: {0}")]
    NotSubmersion(String),
    #[error("quadrature did not converge: estimated error {estimate:.3e} exceeds {tolerance:.3e}")]
    QuadratureFailure { estimate: f64, tolerance: f64 },
    #[error("lattice fit residual {residual:.3e} exceeds {threshold:.3e}")]
    FitResidualTooLarge { residual: f64, threshold: f64 },
    #[error("arrows are not composable: source/range mismatch {distance:.3e}")]
    NotComposable { distance: f64 },
    #[error("Fourier mass beyond bandlimit {bandlimit} is {tail:.3e}")]
    BandlimitOverflow { bandlimit: i32, tail: f64 },
    #[error("support leaves the declared domain")]
    SupportEscape,
    #[error("fibered product is empty")]
    EmptyFiberedProduct,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("witness identity `{identity}` fails with deviation {deviation:.3e}")]
    WitnessInconsistent { identity: String, deviation: f64 },
    #[error("window of size {size} too small: boundary residual {residual:.3e}")]
    WindowTooSmall { size: usize, residual: f64 },
    #[error("projection residual {residual:.3e} exceeds {threshold:.3e}")]
    ProjectionResidualTooLarge { residual: f64, threshold: f64 },
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
