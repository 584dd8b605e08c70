use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("algebra needs at least one block")]
    EmptyBlocks,
    #[error("block sizes must be positive (got {0})")]
    NonPositiveBlock(usize),
    #[error("algebra mismatch: {0}")]
    AlgebraMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("action is not a *-homomorphism (residual {0:.3e})")]
    NotStarHom(f64),
    #[error("action image is not central (residual {0:.3e})")]
    NotCentral(f64),
    #[error("action flagged unital but rho(1) != 1 (residual {0:.3e})")]
    NotUnital(f64),
    #[error("actions do not share a source algebra")]
    SourceMismatch,
    #[error("representation on Hilbert space is invalid: {0}")]
    InvalidRepresentation(String),

    #[error("map is not Hermitian-preserving (residual {0:.3e})")]
    NotHermitianPreserving(f64),
    #[error("map is not completely positive (min Choi eigenvalue {0:.3e})")]
    NotCP(f64),
    #[error("map is not unital completely positive: {0}")]
    NotUCP(String),
    #[error("map is not contractive completely positive: {0}")]
    NotCCP(String),
    #[error("map is not a module map (residual {0:.3e})")]
    NotModuleMap(f64),
    #[error("map is not a bimodule map (residual {0:.3e})")]
    NotBimoduleMap(f64),
    #[error("basis does not span a unital *-subalgebra: {0}")]
    NotSubalgebra(String),
    #[error("basis does not span an operator system: {0}")]
    NotOperatorSystem(String),
    #[error("intertwiner space between the actions is empty")]
    EmptyIntertwinerSpace,

    #[error("affine constraints are inconsistent (least-squares residual {0:.3e})")]
    InconsistentConstraints(f64),
    #[error("feasibility solver stalled after {iters} iterations (gap {gap:.3e})")]
    Stalled { iters: usize, gap: f64 },
    #[error("upper end of bisection bracket is not feasible")]
    UpperBoundInfeasible,

    #[error("action must be unital")]
    NonUnitalAction,
    #[error("acting algebra must be commutative to act on itself centrally")]
    NonCommutativeActing,
    #[error("unit is not in the multiplicative domain (defect {0:.3e})")]
    UnitNotInMultiplicativeDomain(f64),
    #[error("factorization stage {stage} is not a c.c.p. module map: {reason}")]
    StageNotCCP { stage: usize, reason: String },

    #[error("dilation is not minimal (span rank {rank} < {dim})")]
    NotMinimal { rank: usize, dim: usize },
    #[error("operator is not in the commutant of the range (residual {0:.3e})")]
    NotInCommutant(f64),
    #[error("commutant lift is ill-defined (least-squares residual {0:.3e})")]
    IllDefined(f64),
    #[error("map does not extend the partial map (residual {0:.3e})")]
    NotExtension(f64),

    #[error("unknown verification suite '{0}'")]
    UnknownSuite(String),
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
}
