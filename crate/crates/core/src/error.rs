use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pole point (theta = {theta}): tangent frame undefined")]
    Pole { theta: f64 },
    #[error("singular evaluation: {0}")]
    Singular(String),
    #[error("inadmissible input: {0}")]
    Inadmissible(String),
    #[error("series overflow: {0}")]
    Overflow(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("ill-posed: k = {k} lies within scaled margin {margin:.3e} of an interior eigenvalue ({detail})")]
    IllPosed { k: f64, margin: f64, detail: String },
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("inconsistent data: {0}")]
    Inconsistent(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
