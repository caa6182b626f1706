use nalgebra::Complex;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix data has {got} entries, expected {rows}x{cols}")]
    DataLength {
        rows: usize,
        cols: usize,
        got: usize,
    },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("output matrix C must not be zero")]
    ZeroOutput,

    #[error("output matrix C is rank deficient: rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("matrix is singular at tolerance (smallest singular value {min_singular_value:e})")]
    Singular { min_singular_value: f64 },

    #[error("pair (A, C) is not detectable; unstable unobservable eigenvalues: {}", fmt_eigs(.offending))]
    Undetectable { offending: Vec<Complex<f64>> },

    #[error("pair (A, C) is not observable; pole placement needs every mode observable")]
    Unobservable,

    #[error("invalid pole set: {0}")]
    InvalidPoles(String),

    #[error("Schur iteration did not converge")]
    NoConvergence,

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("simulation trace is empty")]
    EmptyTrace,
}

fn fmt_eigs(eigs: &[Complex<f64>]) -> String {
    eigs.iter()
        .map(|l| crate::numkernel::format_complex(*l))
        .collect::<Vec<_>>()
        .join(", ")
}
