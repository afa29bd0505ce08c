use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid modulus {d}: {reason}")]
    InvalidModulus { d: u64, reason: String },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("field order {p}^{s} exceeds the supported bound {bound}")]
    FieldTooLarge { p: u64, s: u32, bound: u64 },

    #[error("elements belong to different fields")]
    FieldMismatch,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("modulus mismatch: Z_{0} vs Z_{1}")]
    ModulusMismatch(u64, u64),

    #[error("operators do not commute (‖[A,B]‖ = {0:e})")]
    NonCommuting(f64),

    #[error("operator is not unitary (‖U*U − I‖ = {0:e})")]
    NonUnitary(f64),

    #[error("operator is not Hermitian (‖A − A*‖ = {0:e})")]
    NonHermitian(f64),

    #[error("point set is not a subgroup: {0}")]
    NotSubgroup(String),

    #[error("subgroup is not Lagrangian: {0}")]
    NotLagrangian(String),

    #[error("the origin lies on every line")]
    OriginPoint,

    #[error("candidate sets do not cover the target ({0} elements uncovered)")]
    CoverIncomplete(usize),

    #[error("masses share no common operator")]
    EmptyOverlap,

    #[error("overlap subgroup of order {0} is not cyclic")]
    NonCyclicOverlap(usize),

    #[error("joint spectrum is degenerate: eigenprojection of rank {0}")]
    DegenerateSpectrum(usize),

    #[error("projections do not resolve the identity (defect {0:e})")]
    NotResolution(f64),

    #[error("measurement is not constrained by the given family")]
    NotConstrained,

    #[error("reduction hypotheses violated: {0}")]
    ReductionHypothesis(String),

    #[error("recovered projection residual {0:e} exceeds tolerance")]
    RecoveryResidual(f64),

    #[error("design is not informationally complete (rank {rank} < {needed})")]
    IncompleteDesign { rank: usize, needed: usize },

    #[error("probabilities are inconsistent with the design (residual {0:e})")]
    InconsistentProbabilities(f64),

    #[error("missing probability for {0}")]
    MissingProbability(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
