//! Implicit-shift QL iteration for symmetric tridiagonal matrices.

use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

const MAX_QL_ITERATIONS: usize = 60;

/// Unsorted eigenvalues and eigenvectors (as rows) of a symmetric
/// tridiagonal matrix. Entries outside the band are ignored.
pub(crate) fn tridiagonal_eigen(a: &SymMatrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.dim();
    let mut d = a.diag();
    // e[i] couples i and i+1; e[n-1] is scratch
    let mut e: Vec<f64> = (0..n)
        .map(|i| if i + 1 < n { a.get(i, i + 1) } else { 0.0 })
        .collect();
    let mut zt = Matrix::identity(n);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::NoConvergence {
                    sweeps: iter,
                    off_norm: e[l].abs(),
                });
            }

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                rotate_rows(&mut zt, i, s, c);
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, zt))
}

fn rotate_rows(zt: &mut Matrix, i: usize, s: f64, c: f64) {
    let n = zt.ncols();
    for k in 0..n {
        let zi = zt[(i, k)];
        let zj = zt[(i + 1, k)];
        zt[(i + 1, k)] = s * zi + c * zj;
        zt[(i, k)] = c * zi - s * zj;
    }
}
