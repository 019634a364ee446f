//! Dense symmetric linear algebra.

mod cholesky;
mod jacobi;
mod matrix;
mod spectral;
mod tridiagonal;

pub use cholesky::{solve_spd, Cholesky};
pub use jacobi::JacobiOptions;
pub use matrix::{dot, norm2, Matrix, SymMatrix};
pub use spectral::{
    generalized_eig, hs_norm, matrix_function, schatten_norm, spectral_decompose,
    spectral_decompose_auto, spectral_decompose_tridiagonal, spectral_decompose_with,
    GeneralizedEigen, SpectralDecomposition,
};

#[cfg(test)]
mod tests;
