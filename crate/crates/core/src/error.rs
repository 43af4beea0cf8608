use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid geometry mismatch between operands")]
    GridMismatch,

    #[error("field has zero norm")]
    ZeroField,

    #[error("invalid beam specification: {0}")]
    InvalidBeam(String),

    #[error(
        "grid window too small: half-widths ({have_x:.3e}, {have_y:.3e}) m, \
         need at least ({need_x:.3e}, {need_y:.3e}) m"
    )]
    WindowTooSmall {
        have_x: f64,
        have_y: f64,
        need_x: f64,
        need_y: f64,
    },

    #[error("grid too coarse: Nyquist wavenumber {nyquist:.3e} 1/m, need {required:.3e} 1/m")]
    GridTooCoarse { nyquist: f64, required: f64 },

    #[error("operation requires a Gaussian beam")]
    NotGaussian,

    #[error("invalid generator moments: {0}")]
    InvalidMoments(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("basis is degenerate: effective rank {rank}")]
    RankDeficient { rank: usize },

    #[error("Fisher information matrix is zero")]
    ZeroInformation,

    #[error("linear algebra failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
