use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unsupported sphere dimension n = {0} (only 2 and 3 are supported)")]
    UnsupportedDimension(usize),

    #[error("invalid harmonic index (k = {k}, ell = {ell}) for n = {n}")]
    InvalidHarmonicIndex { n: usize, k: usize, ell: usize },

    #[error("invalid sphere direction: {0}")]
    InvalidDirection(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("evaluation point {0} is an atom of the measure")]
    Pole(Complex64),

    #[error("requested {requested} recurrence steps but the measure supports only {available}")]
    RankDeficient { requested: usize, available: usize },

    #[error("eigenvalue iteration did not converge ({0})")]
    NotConverged(&'static str),

    #[error("singular tridiagonal system at lambda = {0}")]
    SingularSystem(Complex64),

    #[error("continued fraction convergent of order {level} has a pole at lambda = {at}")]
    PoleOfConvergent { level: usize, at: Complex64 },

    #[error("floating-point overflow: {0}")]
    Overflow(String),

    #[error("positivity lost: a_{site} = {value} at t = {time}")]
    PositivityLoss { site: usize, value: f64, time: f64 },

    #[error("non-finite value encountered ({0})")]
    NonFinite(f64),

    #[error("kernel singularity: r(zeta theta - x)^2 vanishes")]
    KernelSingularity,

    #[error("|zeta| = {zeta_abs} is not outside the convergence radius {radius}")]
    DivergenceRegion { zeta_abs: f64, radius: f64 },

    #[error("quadrature degree {given} is below the {required} needed for exact projection")]
    InsufficientQuadrature { given: usize, required: usize },

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("closed-form Riccati flow blows up at t = {blow_up} (requested t = {requested})")]
    BlowUp { blow_up: f64, requested: f64 },

    #[error("normalization violated: deviation {0:e}")]
    Normalization(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of the numerics on valid input (as opposed to
    /// malformed or inconsistent input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Pole(_)
                | Error::RankDeficient { .. }
                | Error::NotConverged(_)
                | Error::SingularSystem(_)
                | Error::PoleOfConvergent { .. }
                | Error::Overflow(_)
                | Error::PositivityLoss { .. }
                | Error::NonFinite(_)
                | Error::KernelSingularity
                | Error::DivergenceRegion { .. }
                | Error::BlowUp { .. }
        )
    }
}
