//! Cyclic Jacobi rotations for dense symmetric matrices.

use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct JacobiOptions {
    pub max_sweeps: usize,
    /// Convergence when the off-diagonal Frobenius norm drops below
    /// `tol · ‖A‖_F`.
    pub tol: f64,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            tol: 1e-15,
        }
    }
}

/// Unsorted eigenvalues and the matching eigenvectors stored as rows.
pub(crate) fn jacobi_eigen(a: &SymMatrix, opts: JacobiOptions) -> Result<(Vec<f64>, Matrix)> {
    let n = a.dim();
    let mut w = a.as_matrix().clone();
    let mut vt = Matrix::identity(n);
    let frob = w.frobenius_norm();
    if n == 1 || frob == 0.0 {
        return Ok((a.diag(), vt));
    }

    for sweep in 0..opts.max_sweeps {
        if off_norm(&w) <= opts.tol * frob {
            return Ok(((0..n).map(|i| w[(i, i)]).collect(), vt));
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                // negligible against both diagonal entries: drop it
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    w[(p, q)] = 0.0;
                    w[(q, p)] = 0.0;
                    continue;
                }
                rotate(&mut w, &mut vt, p, q);
            }
        }
    }

    let off = off_norm(&w);
    if off <= opts.tol * frob {
        Ok(((0..n).map(|i| w[(i, i)]).collect(), vt))
    } else {
        Err(Error::NoConvergence {
            sweeps: opts.max_sweeps,
            off_norm: off,
        })
    }
}

fn off_norm(w: &Matrix) -> f64 {
    let n = w.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * w[(i, j)] * w[(i, j)];
        }
    }
    s.sqrt()
}

fn rotate(w: &mut Matrix, vt: &mut Matrix, p: usize, q: usize) {
    let n = w.nrows();
    let apq = w[(p, q)];
    let theta = 0.5 * (w[(q, q)] - w[(p, p)]) / apq;
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta < 0.0 { -1.0 } else { 1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    w[(p, p)] -= t * apq;
    w[(q, q)] += t * apq;
    w[(p, q)] = 0.0;
    w[(q, p)] = 0.0;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = w[(p, k)];
        let akq = w[(q, k)];
        let new_p = akp - s * (akq + akp * tau);
        let new_q = akq + s * (akp - akq * tau);
        w[(p, k)] = new_p;
        w[(k, p)] = new_p;
        w[(q, k)] = new_q;
        w[(k, q)] = new_q;
    }
    for k in 0..n {
        let vp = vt[(p, k)];
        let vq = vt[(q, k)];
        vt[(p, k)] = vp - s * (vq + vp * tau);
        vt[(q, k)] = vq + s * (vp - vq * tau);
    }
}
