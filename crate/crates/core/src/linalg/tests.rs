use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::error::Error;
use crate::random::{case_rng, random_spd, random_symmetric};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn tridiag(diag: &[f64], off: &[f64]) -> SymMatrix {
    SymMatrix::from_fn(diag.len(), |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            off[i]
        } else if j + 1 == i {
            off[j]
        } else {
            0.0
        }
    })
    .unwrap()
}

#[test]
fn diagonal_input_is_already_decomposed() {
    let dec = spectral_decompose(&SymMatrix::diagonal(&[2.0, 3.0]).unwrap()).unwrap();
    assert_eq!(dec.eigenvalues(), &[2.0, 3.0]);
    assert_eq!(dec.eigenvectors(), &Matrix::identity(2));
}

#[test]
fn swap_matrix_eigenpairs() {
    let a = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    for dec in [
        spectral_decompose(&a).unwrap(),
        spectral_decompose_tridiagonal(&a).unwrap(),
    ] {
        assert_abs_diff_eq!(dec.eigenvalues()[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.eigenvalues()[1], 1.0, epsilon = 1e-14);
        let v0 = dec.eigenvector(0);
        let v1 = dec.eigenvector(1);
        assert_abs_diff_eq!(v0[0], SQRT_HALF, epsilon = 1e-14);
        assert_abs_diff_eq!(v0[1], -SQRT_HALF, epsilon = 1e-14);
        assert_abs_diff_eq!(v1[0], SQRT_HALF, epsilon = 1e-14);
        assert_abs_diff_eq!(v1[1], SQRT_HALF, epsilon = 1e-14);
        assert!(dec.reconstruction_error(&a) < 1e-14);
    }
}

#[test]
fn zero_matrix_has_zero_spectrum() {
    let dec = spectral_decompose(&SymMatrix::zeros(4).unwrap()).unwrap();
    assert_eq!(dec.eigenvalues(), &[0.0; 4]);
}

#[test]
fn non_finite_entry_is_rejected() {
    let a = SymMatrix::from_rows(&[vec![1.0, f64::NAN], vec![f64::NAN, 1.0]]).unwrap();
    assert!(matches!(
        spectral_decompose(&a),
        Err(Error::NonFiniteEntry { row: 0, col: 1 })
    ));
    assert!(matches!(hs_norm(&a), Err(Error::NonFiniteEntry { .. })));
}

#[test]
fn sweep_budget_exhaustion_reports_no_convergence() {
    let a = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
    let opts = JacobiOptions {
        max_sweeps: 0,
        ..JacobiOptions::default()
    };
    assert!(matches!(
        spectral_decompose_with(&a, opts),
        Err(Error::NoConvergence { .. })
    ));
}

#[test]
fn matrix_function_identity_constant_and_exp() {
    let mut rng = case_rng(11, 0);
    let a = random_symmetric(&mut rng, 6, 1.0);
    let dec = spectral_decompose(&a).unwrap();
    let id = matrix_function(&dec, |x| x).unwrap();
    assert!(id.as_matrix().max_abs_diff(a.as_matrix()) < 1e-9);
    let c = matrix_function(&dec, |_| 2.5).unwrap();
    assert!(c.as_matrix().max_abs_diff(&SymMatrix::identity(6).unwrap().scale(2.5).into_matrix()) < 1e-12);

    let swap = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let e = matrix_function(&spectral_decompose(&swap).unwrap(), f64::exp).unwrap();
    let (ch, sh) = (1f64.cosh(), 1f64.sinh());
    assert_abs_diff_eq!(e.get(0, 0), ch, epsilon = 1e-14);
    assert_abs_diff_eq!(e.get(0, 1), sh, epsilon = 1e-14);
    assert_abs_diff_eq!(e.get(1, 1), ch, epsilon = 1e-14);
}

#[test]
fn matrix_function_rejects_non_finite_values() {
    let dec = spectral_decompose(&SymMatrix::diagonal(&[0.0, 1.0]).unwrap()).unwrap();
    assert!(matches!(
        matrix_function(&dec, |x| 1.0 / x),
        Err(Error::NonFiniteValue { at }) if at == 0.0
    ));
}

#[test]
fn hs_norm_examples() {
    assert_eq!(hs_norm(&SymMatrix::zeros(3).unwrap()).unwrap(), 0.0);
    assert_abs_diff_eq!(hs_norm(&SymMatrix::identity(3).unwrap()).unwrap(), 3f64.sqrt());
    let a = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    assert_abs_diff_eq!(hs_norm(&a).unwrap(), 10f64.sqrt(), epsilon = 1e-15);
}

#[test]
fn schatten_examples() {
    let id = spectral_decompose(&SymMatrix::identity(4).unwrap()).unwrap();
    assert_abs_diff_eq!(schatten_norm(&id, 1.0).unwrap(), 4.0, epsilon = 1e-14);
    let d = spectral_decompose(&SymMatrix::diagonal(&[3.0, -4.0]).unwrap()).unwrap();
    assert_eq!(schatten_norm(&d, f64::INFINITY).unwrap(), 4.0);
    let d = spectral_decompose(&SymMatrix::diagonal(&[1.0, 2.0, 2.0]).unwrap()).unwrap();
    assert_abs_diff_eq!(schatten_norm(&d, 4.0).unwrap(), 33f64.powf(0.25), epsilon = 1e-14);
    assert!(matches!(schatten_norm(&d, 0.5), Err(Error::InvalidExponent(_))));
    assert!(matches!(schatten_norm(&d, f64::NAN), Err(Error::InvalidExponent(_))));
}

#[test]
fn schatten_two_is_hs() {
    let mut rng = case_rng(3, 1);
    for n in 1..8 {
        let a = random_symmetric(&mut rng, n, 2.0);
        let dec = spectral_decompose(&a).unwrap();
        assert_abs_diff_eq!(
            schatten_norm(&dec, 2.0).unwrap(),
            hs_norm(&a).unwrap(),
            epsilon = 1e-10
        );
    }
}

#[test]
fn solve_spd_examples() {
    let b = [1.0, -2.0, 3.0];
    assert_eq!(solve_spd(&SymMatrix::identity(3).unwrap(), &b).unwrap(), b.to_vec());
    let x = solve_spd(&SymMatrix::diagonal(&[2.0, 4.0]).unwrap(), &[2.0, 8.0]).unwrap();
    assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-15);

    let mut rng = case_rng(5, 0);
    let a = random_spd(&mut rng, 5, 0.5, 4.0);
    let b = crate::random::gaussian_vec(&mut rng, 5);
    let x = solve_spd(&a, &b).unwrap();
    let r: Vec<f64> = a.mul_vec(&x).unwrap().iter().zip(&b).map(|(p, q)| p - q).collect();
    assert!(norm2(&r) <= 1e-10 * (1.0 + norm2(&b)));
}

#[test]
fn indefinite_matrix_fails_factorization() {
    let a = SymMatrix::diagonal(&[1.0, -1.0]).unwrap();
    assert!(matches!(
        solve_spd(&a, &[1.0, 1.0]),
        Err(Error::NotPositiveDefinite { index: 1, .. })
    ));
}

#[test]
fn generalized_identity_mass_matches_standard() {
    let mut rng = case_rng(8, 0);
    let k = random_symmetric(&mut rng, 6, 1.0);
    let ge = generalized_eig(&k, &SymMatrix::identity(6).unwrap()).unwrap();
    let dec = spectral_decompose(&k).unwrap();
    for (a, b) in ge.eigenvalues().iter().zip(dec.eigenvalues()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn generalized_proportional_pencil() {
    let mut rng = case_rng(8, 1);
    let m = random_spd(&mut rng, 5, 0.5, 2.0);
    let ge = generalized_eig(&m.scale(2.0), &m).unwrap();
    for v in ge.eigenvalues() {
        assert_abs_diff_eq!(*v, 2.0, epsilon = 1e-12);
    }
}

#[test]
fn generalized_decoupled_pencil() {
    let k = SymMatrix::diagonal(&[1.0, 3.0]).unwrap();
    let m = SymMatrix::diagonal(&[1.0, 2.0]).unwrap();
    let ge = generalized_eig(&k, &m).unwrap();
    assert_abs_diff_eq!(ge.eigenvalues()[0], 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(ge.eigenvalues()[1], 1.5, epsilon = 1e-15);
}

#[test]
fn generalized_dense_mass_is_orthonormal() {
    let mut rng = case_rng(8, 2);
    let k = random_symmetric(&mut rng, 9, 1.0);
    let m = random_spd(&mut rng, 9, 0.3, 3.0);
    let ge = generalized_eig(&k, &m).unwrap();
    assert!(ge.mass_orthonormality_defect(&m).unwrap() <= 1e-9);
    assert!(ge.relative_residual(&k, &m).unwrap() <= 1e-8);
}

#[test]
fn generalized_rejects_indefinite_mass() {
    let k = SymMatrix::identity(2).unwrap();
    assert!(matches!(
        generalized_eig(&k, &SymMatrix::diagonal(&[1.0, 0.0]).unwrap()),
        Err(Error::NotPositiveDefinite { .. })
    ));
    let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    assert!(matches!(generalized_eig(&k, &m), Err(Error::NotPositiveDefinite { .. })));
}

#[test]
fn ql_matches_closed_form_laplacian() {
    // tridiag(-1, 2, -1) has eigenvalues 2 - 2 cos(kπ/(n+1))
    let n = 50;
    let a = tridiag(&vec![2.0; n], &vec![-1.0; n - 1]);
    let dec = spectral_decompose_tridiagonal(&a).unwrap();
    for (k, v) in dec.eigenvalues().iter().enumerate() {
        let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
        assert_abs_diff_eq!(*v, exact, epsilon = 1e-13);
    }
    assert!(dec.orthonormality_defect() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobi_invariants(seed in any::<u64>(), n in 1usize..14, scale in 0.01f64..100.0) {
        let mut rng = case_rng(seed, 0);
        let a = random_symmetric(&mut rng, n, scale);
        let dec = spectral_decompose(&a).unwrap();
        prop_assert!(dec.orthonormality_defect() <= 1e-10);
        prop_assert!(dec.reconstruction_error(&a) <= 1e-9 * (1.0 + a.max_abs()));
        prop_assert!(dec.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ql_agrees_with_jacobi(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = case_rng(seed, 1);
        let d = crate::random::gaussian_vec(&mut rng, n);
        let e = crate::random::gaussian_vec(&mut rng, n.saturating_sub(1));
        let a = tridiag(&d, &e);
        let ql = spectral_decompose_tridiagonal(&a).unwrap();
        let jac = spectral_decompose(&a).unwrap();
        for (x, y) in ql.eigenvalues().iter().zip(jac.eigenvalues()) {
            prop_assert!((x - y).abs() <= 1e-11 * (1.0 + a.max_abs()));
        }
        prop_assert!(ql.orthonormality_defect() <= 1e-10);
        prop_assert!(ql.reconstruction_error(&a) <= 1e-9 * (1.0 + a.max_abs()));
    }

    #[test]
    fn composition_law(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = case_rng(seed, 2);
        let a = random_symmetric(&mut rng, n, 1.0);
        let dec = spectral_decompose(&a).unwrap();
        let g = |x: f64| x.atan();
        let f = |x: f64| x * x * x - x;
        let direct = matrix_function(&dec, |x| f(g(x))).unwrap();
        let inner = matrix_function(&dec, g).unwrap();
        let nested = matrix_function(&spectral_decompose(&inner).unwrap(), f).unwrap();
        prop_assert!(direct.as_matrix().max_abs_diff(nested.as_matrix()) <= 1e-8);
    }

    #[test]
    fn schatten_monotone_in_exponent(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = case_rng(seed, 3);
        let a = random_symmetric(&mut rng, n, 1.0);
        let dec = spectral_decompose(&a).unwrap();
        let op = schatten_norm(&dec, f64::INFINITY).unwrap();
        let contracted = spectral_decompose(&a.scale(1.0 / (op + 1e-12))).unwrap();
        let ps = [1.0, 1.5, 2.0, 3.0, 4.0, 8.0, f64::INFINITY];
        let norms: Vec<f64> = ps.iter().map(|&p| schatten_norm(&contracted, p).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        for &p in &ps {
            prop_assert!(schatten_norm(&dec, p).unwrap() >= op * (1.0 - 1e-12));
        }
    }
}
