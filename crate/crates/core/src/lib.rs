//! Operator-valued independence and discrete product-system dilations over
//! finite-dimensional matrix algebras.
//!
//! * [`algebra`]: matrix *-algebras, states, conditional expectations and CP
//!   maps with numerical certificates.
//! * [`module`]: Hilbert modules, the GNS construction and the module
//!   tensor product.
//! * [`independence`]: tensor, monotone, conditional tensor and conditional
//!   monotone realizations together with their moment formulas.
//! * [`dilation`]: product systems `E_n = E_1^{⊙n}`, the shift
//!   endomorphisms and the white-noise and Markov checks.
//! * [`io`]: JSON encoding shared with the command-line tool.

pub mod algebra;
pub mod dilation;
pub mod error;
pub mod independence;
pub mod io;
pub mod linalg;
pub mod module;
pub mod random;

pub use algebra::{
    subalgebra_project, verify_algebra, verify_positive_map, MapKind, MatrixStarAlgebra,
    PositiveMap, VerificationReport,
};
pub use error::{Error, Result};
pub use linalg::CMat;
pub use module::{
    gns_construct, quotient_null_space, rank_one, tensor_over_b, AdjointableOperator,
    HilbertModule, LeftAction, ModuleTensor,
};
