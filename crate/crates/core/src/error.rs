use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("field has non-zero mean {mean:e} (norm {norm:e})")]
    NonZeroMean { mean: f64, norm: f64 },

    #[error("non-cavitation violated: min H1 = {min_h1:e}, min H2 = {min_h2:e}, threshold {h_min:e}")]
    NonCavitation { min_h1: f64, min_h2: f64, h_min: f64 },

    #[error("conjugate gradient did not converge: {iterations} iterations, residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("bordered block is singular at grid point {index}")]
    SingularBlock { index: usize },

    #[error("stability margin {margin:e} below threshold {threshold:e} at t = {t}")]
    StabilityViolated { t: f64, margin: f64, threshold: f64 },

    #[error("momentum diagnostics require a flat bottom")]
    FlatBottomRequired,

    #[error("degenerate fit: error below {floor:e} over the scanned range")]
    DegenerateFit { floor: f64 },

    #[error("compatibility residual {residual:e} exceeds {bound:e}")]
    Incompatible { residual: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
