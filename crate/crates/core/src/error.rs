use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid slice parameters: {0}")]
    InvalidSlice(String),

    #[error("invalid pricing input: {0}")]
    InvalidInput(String),

    #[error("price {price} outside no-arbitrage bounds [{lower}, {upper}]")]
    PriceOutOfBounds { price: f64, lower: f64, upper: f64 },

    #[error("solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("quadratic factor is degenerate (leading coefficient vanishes)")]
    DegenerateQuadratic,

    #[error("invalid slice pair: {0}")]
    InvalidPair(String),

    #[error("x = {x} is not a root of Q (residual {residual:e})")]
    NotARoot { x: f64, residual: f64 },

    #[error("no put-call pairs at maturity {maturity}")]
    NoPairs { maturity: f64 },

    #[error("no maturity survived filtering")]
    EmptyChain,

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("psi interval is empty (L = {lower}, U = {upper})")]
    Infeasible { lower: f64, upper: f64 },

    #[error("theta* - rho*psi*k* = {theta} is not positive")]
    NonPositiveTheta { theta: f64 },

    #[error("every rho on the grid is infeasible at maturity index {0}")]
    AllRhoInfeasible(usize),

    #[error("anchor at maturity index {0} lies below the previous slice at k* = 0")]
    AnchorInconsistent(usize),

    #[error("parameter box is empty at maturity index {0}")]
    EmptyBox(usize),

    #[error("slices are outside the rectangular parameter box: {0}")]
    NotInBox(String),

    #[error("initial parameter vector is infeasible: {0}")]
    InitInfeasible(String),

    #[error("no anchors to evaluate")]
    EmptySurface,

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Malformed(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Malformed(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
