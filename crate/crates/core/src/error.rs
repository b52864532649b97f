use thiserror::Error;

use crate::lattice::LatticePoint;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("domain rejected: {message} (offending vertices: {})", fmt_points(.vertices))]
    Domain {
        message: String,
        vertices: Vec<LatticePoint>,
    },

    #[error("invalid cover: {message} (offending vertices: {})", fmt_points(.vertices))]
    InvalidCover {
        message: String,
        vertices: Vec<LatticePoint>,
    },

    #[error("no dimer cover: {0}")]
    NoCover(String),

    #[error("Kasteleyn matrix is singular; the graph has no dimer cover")]
    NoDimerCover,

    #[error("Pfaffian of an odd-dimensional matrix (n = {0})")]
    OddDimension(usize),

    #[error("N = {n} is below the positivity threshold: {detail}")]
    NeedLargerN { n: usize, detail: String },

    #[error("walk started at state {0} never reaches the cemetery")]
    Divergence(usize),

    #[error("enumeration cap exceeded: {size} vertices > {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 for rejected input, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::Domain { .. }
            | Error::InvalidCover { .. }
            | Error::SizeCap { .. }
            | Error::Json(_) => 2,
            _ => 1,
        }
    }
}

fn fmt_points(points: &[LatticePoint]) -> String {
    if points.is_empty() {
        return "none".into();
    }
    let shown: Vec<String> = points.iter().take(12).map(|p| format!("({},{})", p.x, p.y)).collect();
    let more = points.len().saturating_sub(12);
    if more > 0 {
        format!("{} and {more} more", shown.join(" "))
    } else {
        shown.join(" ")
    }
}
