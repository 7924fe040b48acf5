use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site index out of range: {0}")]
    Index(String),

    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("gauge singularity: arg f(k) is undefined at a Dirac point (k = ({kx:.6}, {ky:.6}))")]
    GaugeSingularity { kx: f64, ky: f64 },

    #[error("Berry curvature is singular at q = 0 when the gap is closed")]
    Singular,

    #[error("spectrum is gapless: {0}")]
    Gapless(String),

    #[error("no valley-selective phase: the offset satisfies (dn - dm) = 0 mod 3")]
    NoSolution,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("population never fell below {threshold} before t = {t_final}")]
    TriggerMiss { threshold: f64, t_final: f64 },

    #[error("decay fit window: {0}")]
    FitWindow(String),

    #[error("chirality undefined: no field weight outside |y| > {0}")]
    UndefinedChirality(f64),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("formula outside its domain: {0}")]
    FormulaDomain(String),

    #[error("accuracy check failed: {0}")]
    Accuracy(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
