use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HerzError {
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),

    #[error("region outside grid domain: {0}")]
    Region(String),

    #[error("grid functions live on different grids")]
    GridMismatch,

    #[error("sample count {got} does not match grid size {expected}")]
    SampleCount { expected: usize, got: usize },

    #[error("non-finite sample at node {0}")]
    NonFinite(usize),

    #[error("invalid exponent: {0}")]
    Exponent(String),

    #[error("r = {r} violates the window 1/p_-<r<1 (p_- = {p_minus})")]
    ScaleWindow { r: f64, p_minus: f64 },

    #[error("p_infinity was not supplied")]
    MissingPInfinity,

    #[error("invalid weight: {0}")]
    Weight(String),

    #[error("empty region")]
    EmptyRegion,

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("only {survived} of {requested} kernels passed C_beta validation")]
    Dictionary { requested: usize, survived: usize },

    #[error("scale t = {t} outside cone ladder [{min}, {max}]")]
    ScaleOutOfRange { t: f64, min: f64, max: f64 },

    #[error("insufficient shells: need at least {need}, grid has {have}")]
    InsufficientShells { need: usize, have: usize },

    #[error("value range overflow: {0}")]
    Overflow(String),

    #[error("parameter window rejected: {0}")]
    WindowRejected(String),

    #[error("unknown or malformed preset `{0}`")]
    Preset(String),
}

pub type Result<T> = std::result::Result<T, HerzError>;
