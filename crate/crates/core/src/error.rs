use thiserror::Error;

use crate::algebra::MapKind;

/// Structural errors. Failed numerical verifications are reported through
/// [`crate::VerificationReport`] instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("algebra basis is empty")]
    EmptyBasis,

    #[error("basis is linearly dependent: numerical rank {rank} < {len} elements")]
    LinearlyDependent { rank: usize, len: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("element is not in the algebra (projection residual {residual:.3e})")]
    NotInAlgebra { residual: f64 },

    #[error("codomain is not contained in the domain (residual {residual:.3e})")]
    CodomainNotContained { residual: f64 },

    #[error("{kind} failed verification (worst residual {residual:.3e}): {detail}")]
    UnverifiedMap {
        kind: MapKind,
        residual: f64,
        detail: String,
    },

    #[error("map is not unital (residual {residual:.3e})")]
    NonUnital { residual: f64 },

    #[error("wrong map kind: expected {expected}, found {found}")]
    WrongKind { expected: &'static str, found: MapKind },

    #[error("algebra is not commutative (commutator residual {residual:.3e}); the amalgamated product carries no multiplication in the noncommutative case")]
    NonCommutative { residual: f64 },

    #[error("module mismatch: {0}")]
    ModuleMismatch(String),

    #[error("module has no left action of {0}")]
    MissingAction(&'static str),

    #[error("missing distinguished vector `{0}`")]
    MissingVector(String),

    #[error("distinguished vector is not a unit vector: |<x,x> - 1| = {residual:.3e}")]
    NotUnitVector { residual: f64 },

    #[error("operator does not commute with the left action of the base algebra (residual {residual:.3e})")]
    NotBimoduleMap { residual: f64 },

    #[error("GNS construction collapsed to the zero module")]
    ZeroModule,

    #[error("step count {requested} exceeds the available horizon {horizon}")]
    HorizonExceeded { requested: usize, horizon: usize },

    #[error("fiber dimension {dimension} exceeds the budget {budget}")]
    BudgetExceeded { dimension: usize, budget: usize },

    #[error("not a stochastic matrix: {0}")]
    NotStochastic(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
