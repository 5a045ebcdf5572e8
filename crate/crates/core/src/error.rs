use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("mesh dimensions must be positive, got {nx}x{ny}")]
    InvalidMeshSize { nx: usize, ny: usize },

    #[error("constitutive matrix is not symmetric (entry ({row},{col}) differs by {difference:e})")]
    NonSymmetric { row: usize, col: usize, difference: f64 },

    #[error("non-physical Poisson coupling: 1 - nu_xy*nu_yx = {denominator} <= 0")]
    PoissonCoupling { denominator: f64 },

    #[error("material constant `{name}` must be positive, got {value}")]
    NonPositiveModulus { name: &'static str, value: f64 },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("{what}: expected length {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("element index {index} out of range ({count} elements)")]
    ElementOutOfRange { index: usize, count: usize },

    #[error("node index {index} out of range ({count} nodes)")]
    NodeOutOfRange { index: usize, count: usize },

    #[error("boundary conditions: {0}")]
    BoundaryConditions(String),

    #[error(
        "stiffness matrix is singular at dof {dof} (node {node}, {axis}): pivot {pivot:e}; \
         the structure has an unconstrained rigid-body mode or a mechanism"
    )]
    Singular {
        dof: usize,
        node: usize,
        axis: char,
        pivot: f64,
    },

    #[error("design value {value} at index {index} is outside [0, 1]")]
    OutOfUnitInterval { index: usize, value: f64 },

    #[error("volume constraint infeasible: needs {required}, smallest attainable is {attainable}")]
    Infeasible { required: f64, attainable: f64 },

    #[error("multiplier bisection could not bracket the volume target {target} (range {low}..{high})")]
    Bracketing { target: f64, low: f64, high: f64 },

    #[error("need at least {needed} history entries, have {have}")]
    InsufficientHistory { needed: usize, have: usize },

    #[error("invalid configuration: `{key}` {reason}")]
    Config { key: String, reason: String },

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("benchmark `{name}` has no case `{case}`")]
    UnknownCase { name: String, case: char },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
