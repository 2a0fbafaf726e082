use thiserror::Error;

pub type Result<T> = std::result::Result<T, HtvError>;

#[derive(Debug, Error)]
pub enum HtvError {
    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not symmetric: |m12 - m21| = {gap:e} exceeds tolerance {tol:e}")]
    Asymmetric { gap: f64, tol: f64 },

    #[error("triangle {index} is degenerate or clockwise (twice signed area {twice_area})")]
    DegenerateTriangle { index: usize, twice_area: f64 },

    #[error("non-conforming mesh: {0}")]
    Nonconforming(String),

    #[error("mesh does not cover the closed unit square: {0}")]
    NotCovering(String),

    #[error("malformed mesh file: {0}")]
    MalformedFile(String),

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("evaluation point ({x}, {y}) lies outside the extended domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("boundary spacing {spacing:e} underflows 2^-40; offending q product/lcm = {factor}")]
    SpacingUnderflow { spacing: f64, factor: String },

    #[error("plan does not match frame {square}: {reason}")]
    PlanMismatch { square: usize, reason: String },

    #[error("vertex mismatch on shared square boundary: {0}")]
    VertexMismatch(String),

    #[error("function is zero modulo affine maps")]
    ZeroFunction,

    #[error("function is already extremal; no support reduction exists")]
    AlreadyExtremal,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("decomposition stalled with residual {residual:e} (tolerance {tol:e})")]
    DecompositionFailed { residual: f64, tol: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
