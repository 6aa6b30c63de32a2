use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("curve spec parse error: {0}")]
    Parse(String),

    #[error("degenerate parametrization: speed {speed:e} at t = {t}")]
    DegenerateParametrization { t: f64, speed: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("origin does not lie inside the bounded region enclosed by the curves")]
    OriginNotInterior,

    #[error("singular kernel evaluation at coincident points")]
    SingularEvaluation,

    #[error("evaluation point at distance {distance:e} from curve {curve} (minimum {minimum:e})")]
    NearBoundary {
        curve: usize,
        distance: f64,
        minimum: f64,
    },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("bordered system is singular (reciprocal condition {rcond:e})")]
    SingularBordered { rcond: f64 },

    #[error("near-degenerate scale: condition number {condition:e}")]
    DegenerateScale { condition: f64 },

    #[error("far-field fit failed: {0}")]
    FitFailure(String),
}
