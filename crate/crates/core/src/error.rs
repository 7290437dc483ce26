use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("step argument must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("scheme `{scheme}` is inadmissible at h = {h}: 4 det A - (tr A)^2 = {discriminant}")]
    Inadmissible {
        scheme: String,
        h: f64,
        discriminant: f64,
    },

    #[error("rotation at h = {h} is too ill-conditioned: sin(theta) = {sin_theta:e}")]
    IllConditioned { h: f64, sin_theta: f64 },

    #[error("scheme `{0}` is not symplectic")]
    NotSymplectic(String),

    #[error("scheme `{0}` is expansive (det A > 1); the LIL limit may not exist")]
    Expansive(String),

    #[error("no checkpoint beyond t = e^2 in the supplied series")]
    NoCheckpoint,

    #[error("insufficient paths: got {got}, need at least {need}")]
    InsufficientPaths { got: u64, need: u64 },

    #[error("quadratic form has no blocks")]
    EmptyForm,

    #[error("coefficient table has no row for h = {0}")]
    TableMiss(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
