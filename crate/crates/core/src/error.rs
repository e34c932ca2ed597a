use thiserror::Error;

#[derive(Debug, Error)]
pub enum VemError {
    #[error("mesh parse error: {0}")]
    MeshParse(String),

    #[error("cell {cell}: {reason}")]
    InvalidCell { cell: usize, reason: String },

    #[error("invalid mesh topology: {0}")]
    Topology(String),

    #[error("singular local system on element {element}: {what}")]
    SingularLocal { element: usize, what: String },

    #[error("singular local patch system at vertex {vertex}")]
    SingularPatch { vertex: usize },

    #[error("sparse solver failure: {0}")]
    Solver(String),

    #[error("inconsistent degree map: {0}")]
    DegreeMap(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, VemError>;
