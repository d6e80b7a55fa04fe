use std::path::PathBuf;

/// Every failure the library can surface.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NonHermitian { asymmetry: f64 },
    #[error("input contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix columns are numerically dependent (column {column})")]
    RankDeficient { column: usize },
    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:.3e}, max {max_eigenvalue:.3e})")]
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },
    #[error("bracket [{lo}, {hi}] does not contain a sign change")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("root finding did not converge within {0} iterations")]
    MaxIterations(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("inner block U^H (R + s2 I)^-1 U is numerically singular")]
    SingularInnerBlock,
    #[error("clutter correlation has zero trace")]
    ZeroClutter,
    #[error("{trials} trials are too few for alpha = {alpha} (need at least {required})")]
    InsufficientTrials {
        trials: usize,
        alpha: f64,
        required: usize,
    },
    #[error("communication constraint infeasible: P_t |h1|^2 = {available:.6e} < gamma_th sigma^2 = {required:.6e}")]
    Infeasible { available: f64, required: f64 },
    #[error("infeasible precoder at sweep point {snr_db} dB: {source}")]
    SweepPoint {
        snr_db: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Short stable identifier, used in the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonHermitian { .. } => "non_hermitian",
            Error::NonFinite => "non_finite",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NotPsd { .. } => "not_psd",
            Error::NoSignChange { .. } => "no_sign_change",
            Error::MaxIterations(_) => "max_iterations",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::SingularInnerBlock => "singular_inner_block",
            Error::ZeroClutter => "zero_clutter",
            Error::InsufficientTrials { .. } => "insufficient_trials",
            Error::Infeasible { .. } => "infeasible",
            Error::SweepPoint { source, .. } => source.kind(),
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch(format!(
            "{what}: length {got}, expected {expected}"
        )));
    }
    Ok(())
}
