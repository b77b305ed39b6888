use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two jets expanded at different points were combined.
    #[error("jet expansion points differ: ({0}, {1}) vs ({2}, {3})")]
    PointMismatch(f64, f64, f64, f64),

    #[error("singular jet: constant term {value:e} is below the division guard")]
    SingularJet { value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("jet order exhausted: cannot differentiate further in {0}")]
    OrderExhausted(&'static str),

    #[error("strong convexity violated at r = {r}: {detail}")]
    ConvexityViolation { r: f64, detail: String },

    #[error("degenerate metric: {which} = {value:e}")]
    Degenerate { which: &'static str, value: f64 },

    #[error("quadrature did not converge on [{a}, {b}] (last change {delta:e})")]
    Quadrature { a: f64, b: f64, delta: f64 },

    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("finite-difference step failed: {0}")]
    Step(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}
