//! Numerical core for the Schrödinger–Poisson solver: dense symmetric linear
//! algebra, operator inequalities, P1 finite elements, Schrödinger spectra,
//! quantum densities, monotone operator iteration and the coupled system.


#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod assembly;
pub mod density;
pub mod error;
pub mod inequalities;
pub mod linalg;
pub mod monotone;
pub mod random;
pub mod schrodinger;
pub mod sp;

pub use error::{Error, Result};
