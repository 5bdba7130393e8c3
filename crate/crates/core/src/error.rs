use thiserror::Error;

/// Errors shared across the crate. Numerical routines return these instead of
/// silently producing garbage: a caller can always distinguish "the answer is x"
/// from "the requested accuracy/domain is out of reach".
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate basis: Gram determinant {gram_det:e} below tolerance")]
    DegenerateBasis { gram_det: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("transform is singular or not invertible")]
    SingularTransform,

    #[error("vectors do not lie in the lattice (non-integer coefficients)")]
    NotASublattice,

    #[error("sublattice is not primitive (saturation is strictly larger)")]
    NotPrimitive,

    #[error("enumeration budget exhausted: visited {visited} nodes (cap {cap})")]
    EnumerationBudget { visited: u64, cap: u64 },

    #[error("sum diverges: s = {s} requires s > rank/2 = {limit}")]
    Divergence { s: f64, limit: f64 },

    #[error("requested tolerance {rel_tol:e} unreachable within budget (best bound {best:e})")]
    ToleranceUnreachable { rel_tol: f64, best: f64 },

    #[error("argument out of supported range: {0}")]
    Range(String),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("search radius {radius} too small: found {found} independent vectors, need {needed}")]
    InsufficientRadius {
        radius: f64,
        found: usize,
        needed: usize,
    },

    #[error("lattice is not semi-stable: rank-{rank} sublattice with determinant {det} < 1")]
    NotSemiStable { rank: usize, det: f64 },

    #[error("stabilization did not converge: {0}")]
    StabilizationFailed(String),

    #[error("could not parse lattice file: {0}")]
    Parse(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
