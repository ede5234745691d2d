//! Averages over Euclidean balls of integer points and their dyadic maximal
//! functions, for scalar and hermitian-matrix valued data.
//!
//! * [`lattice`] counts and enumerates lattice balls exactly.
//! * [`multiplier`] evaluates the Fourier multiplier of a ball average and
//!   checks it against its heat-kernel approximants.
//! * [`field`] holds matrix-valued fields on `Z_M^d` with transforms, ball
//!   averages and the discrete heat semigroup.
//! * [`ncmax`] computes Schatten-norm maximal norms of matrix families with
//!   two-sided certificates.
//! * [`maxop`] splits dyadic radii into scale regimes and runs the ratio and
//!   domination experiments.
//! * [`ergodic`] covers shift systems, transference and almost-uniform
//!   convergence certificates.
//!
//! The guide in `book/` walks through each module with runnable examples.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod ergodic;
pub mod error;
pub mod field;
pub mod lattice;
pub mod linalg;
pub mod maxop;
pub mod multiplier;
pub mod ncmax;
pub mod sampling;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
