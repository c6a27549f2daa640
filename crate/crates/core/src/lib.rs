//! General J-flows on a symmetry-reduced flat complex torus.
//!
//! The crate simulates `∂u/∂t = c - χ_u^l∧ω^{n-l} / χ_u^k∧ω^{n-k}` (and its
//! weighted variant) on a periodic grid, certifies the cone condition for
//! representatives of the class of χ, evaluates the J_m functionals and checks
//! the structural properties of the flow along each run.

// `!(x > 0.0)` rejects NaN on purpose; index loops read better in the kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod conecheck;
pub mod error;
pub mod exec;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod oracle;
pub mod quadrature;
pub mod scenario;
pub mod symfunc;

pub use error::{Error, Result};
