//! Seeded generators for test operators and grid functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Matrix, SymMatrix};

/// Independent stream for case `index` of a suite seeded with `seed`.
pub fn case_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Symmetric matrix with independent standard normal entries on and above the
/// diagonal, scaled by `scale`.
pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize, scale: f64) -> SymMatrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.sample(StandardNormal);
            m[(i, j)] = scale * v;
            m[(j, i)] = scale * v;
        }
    }
    SymMatrix::new(m).expect("square")
}

/// Haar-like orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v = gaussian_vec(rng, n);
        for _ in 0..2 {
            for c in &cols {
                let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            cols.push(v);
        }
    }
    Matrix::from_fn(n, n, |i, j| cols[j][i])
}

/// `Q diag(values) Qᵀ` for a random orthogonal `Q`.
pub fn random_with_spectrum<R: Rng>(rng: &mut R, values: &[f64]) -> SymMatrix {
    let q = random_orthogonal(rng, values.len());
    let d = SymMatrix::diagonal(values).expect("nonempty spectrum");
    d.conjugate(&q).expect("square")
}

/// Random symmetric positive definite matrix with spectrum in `[lo, hi]`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> SymMatrix {
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    random_with_spectrum(rng, &values)
}
