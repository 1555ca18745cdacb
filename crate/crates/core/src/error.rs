use thiserror::Error;

/// Errors raised by the matrix model, the solvers and the verification suites.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("trace constant not calibrated (c_tau = {0})")]
    Uncalibrated(f64),

    #[error("truncation leakage {leakage:.3e} exceeds tolerance {tol:.3e}")]
    LeakageExceeded { leakage: f64, tol: f64 },

    #[error("trace calibration unstable: c_tau varies by {spread:.3e} (relative) across t")]
    CalibrationUnstable { spread: f64 },

    #[error("quadrature under-resolved: {0}")]
    QuadratureUnderresolved(String),

    #[error("invalid exponent {0} (need p >= 1 or p = inf)")]
    InvalidExponent(f64),

    #[error("exponents do not satisfy 1/r = 1/p + 1/q: p={p}, q={q}, r={r}")]
    ExponentMismatch { p: f64, q: f64, r: f64 },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("operator is not positive (min eigenvalue {min_eig:.3e}, norm {norm:.3e})")]
    NotPositive { min_eig: f64, norm: f64 },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("nonlinearity bound violated: ratio {ratio} > c_p {c_p}")]
    BoundViolated { ratio: f64, c_p: f64, record: String },

    #[error("operator Jensen inequality violated: gap {gap:.3e}")]
    JensenViolated { gap: f64, record: String },

    #[error("ill-conditioned block: min eigenvalue {0:.3e}")]
    IllConditioned(f64),

    #[error("Picard iteration not contracting (ratio {ratio:.3})")]
    NotContracting { ratio: f64 },

    #[error("no admissible auxiliary exponent q for d={d}, p={p} (need p > 1 + 2/d)")]
    NoAdmissibleQ { d: f64, p: f64 },

    #[error("periodic box too small: boundary mass fraction {boundary_mass:.3e}")]
    BoxTooSmall { boundary_mass: f64 },

    #[error("Tauberian grid too short: functional still rising at t_max = {t_max}")]
    GridTooShort { t_max: f64 },

    #[error("sup norm {norm:.3e} exceeded blow-up ceiling {ceiling:.3e} at t = {t}")]
    Overflow { t: f64, norm: f64, ceiling: f64 },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
