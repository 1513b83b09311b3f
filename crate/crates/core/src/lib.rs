//! Numerical laboratory for weighted Herz spaces with variable exponent.
//!
//! Functions, exponents and weights are sampled on a truncated uniform grid of R or R^2. On top
//! of that sit Luxemburg and Herz norms, Muckenhoupt-type class constants, the maximal and
//! Rubio de Francia operators, a computable intrinsic square function, and a harness that turns
//! the inequalities of the theory into envelope fits and refinement-stable ratio checks.

// `!(x > 0.0)` is how parameter checks reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod conv;
pub mod error;
pub mod exponent;
pub mod fit;
pub mod grid;
pub mod norms;
pub mod sqfn;
pub mod verify;
pub mod weights;

pub use error::{HerzError, Result};
