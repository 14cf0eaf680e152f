use thiserror::Error;

pub type Result<T> = std::result::Result<T, FnlsError>;

#[derive(Error, Debug)]
pub enum FnlsError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("field and multiplier live on different grids")]
    GridMismatch,

    #[error("fiber scaling t={t} exceeds the band limit t_max={t_max}")]
    BandLimit { t: f64, t_max: f64 },

    #[error("no sign change in bracket [{lo}, {hi}]: {what}")]
    BracketFailure { what: String, lo: f64, hi: f64 },

    #[error("criticality regime violation: {0}")]
    RegimeViolation(String),

    #[error("kinetic trust-region guard stayed active; mass too large for rho0={rho0}")]
    GuardActive { rho0: f64 },

    #[error("root finding failed: {what} (residual {residual:e})")]
    RootFind { what: String, residual: f64 },

    #[error("scan indicator constant over the whole range (all {}); one-sided bracket [{lo}, {hi}]",
            if *.all_true { "true" } else { "false" })]
    OneSidedScan { all_true: bool, lo: f64, hi: f64 },

    #[error("scan indicator is not monotone across samples near {value}")]
    NonMonotoneScan { value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
