use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate triangle {triangle} at t = {time}: area {area:e}")]
    DegenerateTriangle {
        triangle: usize,
        time: f64,
        area: f64,
    },

    #[error("time {time} outside of [0, {horizon}]")]
    TimeOutOfRange { time: f64, horizon: f64 },

    #[error("non-finite field value {value} at quadrature point {point:?} (triangle {triangle})")]
    QuadratureSingularity {
        triangle: usize,
        point: [f64; 3],
        value: f64,
    },

    #[error("factorization failed at slab {slab}: pivot {pivot} has value {value:e}")]
    Factorization {
        slab: usize,
        pivot: usize,
        value: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{method} did not converge within {iterations} iterations (residual {residual:e}, target {target:e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("Krylov breakdown in {method} at iteration {iteration}")]
    KrylovBreakdown {
        method: &'static str,
        iteration: usize,
    },

    #[error("point transfer failed: {0}")]
    ProjectionFailure(String),

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_level(self, level: usize) -> Self {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
