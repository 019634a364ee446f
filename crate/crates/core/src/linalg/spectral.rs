use super::cholesky::Cholesky;
use super::jacobi::{jacobi_eigen, JacobiOptions};
use super::matrix::{Matrix, SymMatrix};
use super::tridiagonal::tridiagonal_eigen;
use crate::error::{Error, Result};

/// Eigenvalues in ascending order with an orthogonal matrix whose column `k`
/// is the eigenvector of eigenvalue `k`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `max |QᵀQ − I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let q = &self.eigenvectors;
        q.transpose()
            .matmul(q)
            .map(|g| g.max_abs_diff(&Matrix::identity(self.dim())))
            .unwrap_or(f64::INFINITY)
    }

    /// `max |Q Λ Qᵀ − A|`.
    pub fn reconstruction_error(&self, a: &SymMatrix) -> f64 {
        match matrix_function(self, |x| x) {
            Ok(r) => r.as_matrix().max_abs_diff(a.as_matrix()),
            Err(_) => f64::INFINITY,
        }
    }

    /// Builds from unsorted eigenpairs (eigenvectors as rows): sorts ascending
    /// and fixes the sign so that the first entry with magnitude above `1e-8`
    /// is positive.
    fn from_rows(values: Vec<f64>, vectors_as_rows: Matrix) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
        let eigenvalues = order.iter().map(|&i| values[i]).collect();
        let mut eigenvectors = Matrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            let row = vectors_as_rows.row(src);
            let sign = match row.iter().find(|v| v.abs() > 1e-8) {
                Some(v) if *v < 0.0 => -1.0,
                _ => 1.0,
            };
            for (i, v) in row.iter().enumerate() {
                eigenvectors[(i, col)] = sign * v;
            }
        }
        Self {
            eigenvalues,
            eigenvectors,
        }
    }
}

/// Eigendecomposition by cyclic Jacobi rotations.
pub fn spectral_decompose(a: &SymMatrix) -> Result<SpectralDecomposition> {
    spectral_decompose_with(a, JacobiOptions::default())
}

pub fn spectral_decompose_with(a: &SymMatrix, opts: JacobiOptions) -> Result<SpectralDecomposition> {
    a.check_finite()?;
    let (values, vt) = jacobi_eigen(a, opts)?;
    Ok(SpectralDecomposition::from_rows(values, vt))
}

/// Eigendecomposition of a tridiagonal matrix by implicit QL. Entries outside
/// the band are ignored.
pub fn spectral_decompose_tridiagonal(a: &SymMatrix) -> Result<SpectralDecomposition> {
    a.check_finite()?;
    let (values, zt) = tridiagonal_eigen(a)?;
    Ok(SpectralDecomposition::from_rows(values, zt))
}

/// QL for tridiagonal input, Jacobi otherwise.
pub fn spectral_decompose_auto(a: &SymMatrix) -> Result<SpectralDecomposition> {
    if a.is_tridiagonal() {
        spectral_decompose_tridiagonal(a)
    } else {
        spectral_decompose(a)
    }
}

/// `Q diag(f(λ)) Qᵀ`.
pub fn matrix_function(dec: &SpectralDecomposition, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
    let values = dec
        .eigenvalues
        .iter()
        .map(|&x| {
            let y = f(x);
            if y.is_finite() {
                Ok(y)
            } else {
                Err(Error::NonFiniteValue { at: x })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(weighted_outer(&dec.eigenvectors, &values))
}

/// `Σ_k w_k q_k q_kᵀ` over the columns `q_k` of `q`.
pub(crate) fn weighted_outer(q: &Matrix, w: &[f64]) -> SymMatrix {
    let n = q.nrows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let qi = q.row(i);
        for j in i..n {
            let qj = q.row(j);
            let s: f64 = qi.iter().zip(qj).zip(w).map(|((a, b), c)| a * b * c).sum();
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    SymMatrix::new(out).expect("square by construction")
}

/// Frobenius norm.
pub fn hs_norm(a: &SymMatrix) -> Result<f64> {
    a.check_finite()?;
    Ok(a.as_matrix().frobenius_norm())
}

/// Schatten `p`-norm from the spectrum; `p = f64::INFINITY` gives the
/// operator norm.
pub fn schatten_norm(dec: &SpectralDecomposition, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    let abs = dec.eigenvalues.iter().map(|v| v.abs());
    if p.is_infinite() {
        return Ok(abs.fold(0.0, f64::max));
    }
    // scale by the largest magnitude to avoid overflow in |λ|^p
    let scale = dec.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = abs.map(|v| (v / scale).powf(p)).sum();
    Ok(scale * s.powf(1.0 / p))
}

/// Solution of `K ψ = λ M ψ` with `M` positive definite.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    eigenvalues: Vec<f64>,
    /// `Ψ` with `Ψᵀ M Ψ = I`.
    vectors: Matrix,
    /// Eigendecomposition of `L⁻¹ K L⁻ᵀ`; its eigenvectors are `Lᵀ Ψ`.
    reduced: SpectralDecomposition,
}

impl GeneralizedEigen {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    pub fn reduced(&self) -> &SpectralDecomposition {
        &self.reduced
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `max |Ψᵀ M Ψ − I|`.
    pub fn mass_orthonormality_defect(&self, m: &SymMatrix) -> Result<f64> {
        let mpsi = m.as_matrix().matmul(&self.vectors)?;
        let g = self.vectors.transpose().matmul(&mpsi)?;
        Ok(g.max_abs_diff(&Matrix::identity(self.dim())))
    }

    /// `max_k ‖K ψ_k − λ_k M ψ_k‖ / (‖K ψ_k‖ + |λ_k| ‖M ψ_k‖)`.
    pub fn relative_residual(&self, k_mat: &SymMatrix, m: &SymMatrix) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..self.dim() {
            let psi = self.vector(k);
            let kp = k_mat.mul_vec(&psi)?;
            let mp = m.mul_vec(&psi)?;
            let lam = self.eigenvalues[k];
            let r: f64 = kp.iter().zip(&mp).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
            let scale = super::norm2(&kp) + lam.abs() * super::norm2(&mp);
            if scale > 0.0 {
                worst = worst.max(r / scale);
            }
        }
        Ok(worst)
    }
}

/// Reduces `K ψ = λ M ψ` to the standard problem `L⁻¹ K L⁻ᵀ y = λ y` with
/// `M = L Lᵀ`. A diagonal `M` gives a diagonal `L`, which keeps a tridiagonal
/// `K` tridiagonal.
pub fn generalized_eig(k_mat: &SymMatrix, m: &SymMatrix) -> Result<GeneralizedEigen> {
    if k_mat.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: k_mat.dim(),
            found: m.dim(),
        });
    }
    k_mat.check_finite()?;
    let n = k_mat.dim();

    if m.is_diagonal() {
        let d = m.diag();
        if let Some((index, &pivot)) = d.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NotPositiveDefinite { index, pivot });
        }
        let inv_sqrt: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
        let reduced_mat = k_mat.congruence_diag(&inv_sqrt)?;
        let reduced = spectral_decompose_auto(&reduced_mat)?;
        let y = reduced.eigenvectors();
        let vectors = Matrix::from_fn(n, n, |i, j| inv_sqrt[i] * y[(i, j)]);
        return Ok(GeneralizedEigen {
            eigenvalues: reduced.eigenvalues().to_vec(),
            vectors,
            reduced,
        });
    }

    let chol = Cholesky::new(m)?;
    // X = L⁻¹ K, then C = L⁻¹ Xᵀ = L⁻¹ K L⁻ᵀ
    let mut x = Matrix::zeros(n, n);
    for j in 0..n {
        let col = chol.forward(&k_mat.as_matrix().column(j))?;
        for i in 0..n {
            x[(i, j)] = col[i];
        }
    }
    let xt = x.transpose();
    let mut c = Matrix::zeros(n, n);
    for j in 0..n {
        let col = chol.forward(&xt.column(j))?;
        for i in 0..n {
            c[(i, j)] = col[i];
        }
    }
    let reduced = spectral_decompose_auto(&SymMatrix::new(c)?)?;
    let y = reduced.eigenvectors();
    let mut vectors = Matrix::zeros(n, n);
    for j in 0..n {
        let psi = chol.backward(&y.column(j))?;
        for i in 0..n {
            vectors[(i, j)] = psi[i];
        }
    }
    Ok(GeneralizedEigen {
        eigenvalues: reduced.eigenvalues().to_vec(),
        vectors,
        reduced,
    })
}
