//! The guide in `book/src`, one module per chapter, so that `cargo test`
//! runs every snippet against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/lattice-balls.md")]
pub mod lattice_balls {}
#[doc = include_str!("../../../book/src/multipliers.md")]
pub mod multipliers {}
#[doc = include_str!("../../../book/src/torus-fields.md")]
pub mod torus_fields {}
#[doc = include_str!("../../../book/src/maximal-norms.md")]
pub mod maximal_norms {}
#[doc = include_str!("../../../book/src/regimes.md")]
pub mod regimes {}
#[doc = include_str!("../../../book/src/ergodic.md")]
pub mod ergodic {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
