//! Brute-force reference for the 1D Schrödinger–Poisson system on `(0, 1)`
//! with Dirichlet conditions at both ends. Shares no numerics with the crate.

#![allow(dead_code, clippy::needless_range_loop)]

pub struct OracleProblem {
    pub n_cells: usize,
    /// Per-cell permittivity.
    pub eps: Vec<f64>,
    /// Per-cell effective mass `𝔪`.
    pub mass_coeff: Vec<f64>,
    pub fermi_dirac: bool,
    pub n_particles: f64,
    pub v0: Vec<f64>,
    pub q: Vec<f64>,
}

fn occupation(fermi_dirac: bool, r: f64) -> f64 {
    if fermi_dirac {
        1.0 / (1.0 + r.exp())
    } else {
        (-r).exp()
    }
}

/// Free-node stiffness of `∫ c u′ v′` for per-cell `c`.
pub fn stiffness(n_cells: usize, c: &[f64]) -> Vec<Vec<f64>> {
    let h = 1.0 / n_cells as f64;
    let n = n_cells - 1;
    let mut k = vec![vec![0.0; n]; n];
    for e in 0..n_cells {
        let w = c[e] / h;
        // element between nodes e and e+1; free index = node − 1
        let (a, b) = (e as isize - 1, e as isize);
        for (i, j, s) in [(a, a, w), (b, b, w), (a, b, -w), (b, a, -w)] {
            if i >= 0 && j >= 0 && (i as usize) < n && (j as usize) < n {
                k[i as usize][j as usize] += s;
            }
        }
    }
    k
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, v)| {
        let mut row = r.clone();
        row.push(*v);
        row
    }).collect();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, p);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Cyclic Jacobi; returns eigenvalues and eigenvectors as columns of `v`.
pub fn jacobi(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

impl OracleProblem {
    fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    /// Nodal density `𝒩(V₀ + V)`.
    pub fn density(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n_cells - 1;
        let h = self.h();
        let inv_m: Vec<f64> = self.mass_coeff.iter().map(|m| 1.0 / m).collect();
        let k = stiffness(self.n_cells, &inv_m);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| k[i][j] / h + if i == j { self.v0[i] + v[i] } else { 0.0 })
                    .collect()
            })
            .collect();
        let (lam, vecs) = jacobi(&a);
        let trace = |t: f64| lam.iter().map(|l| occupation(self.fermi_dirac, l - t)).sum::<f64>();
        let lo_l = lam.iter().copied().fold(f64::INFINITY, f64::min);
        let hi_l = lam.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut lo, mut hi) = (lo_l - 60.0, hi_l + 60.0);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if trace(mid) < self.n_particles {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| occupation(self.fermi_dirac, lam[k] - t) * vecs[i][k] * vecs[i][k])
                    .sum::<f64>()
                    / h
            })
            .collect()
    }

    /// Damped Picard `V ← (1−ω)V + ω K_ε⁻¹(q + M_L 𝒩(V₀ + V))` until the
    /// update falls below `tol` in the max norm.
    pub fn solve(&self, tol: f64) -> Vec<f64> {
        let n = self.n_cells - 1;
        let h = self.h();
        let k = stiffness(self.n_cells, &self.eps);
        let picard = |v: &[f64]| -> Vec<f64> {
            let rho = self.density(v);
            let rhs: Vec<f64> = (0..n).map(|i| self.q[i] + h * rho[i]).collect();
            solve_dense(&k, &rhs)
        };
        let mut v = vec![0.0; n];
        let mut omega = 0.5;
        let mut prev = f64::INFINITY;
        for _ in 0..200_000 {
            let t = picard(&v);
            let step: f64 = t.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if step < tol {
                return t;
            }
            if step > prev {
                omega *= 0.5;
            }
            prev = step;
            v = v.iter().zip(&t).map(|(a, b)| (1.0 - omega) * a + omega * b).collect();
        }
        panic!("oracle did not converge");
    }
}
