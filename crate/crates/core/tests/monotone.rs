use approx::assert_abs_diff_eq;
use specfun_core::assembly::{build_domain, dual_norm, AssembledSpace, Dirichlet};
use specfun_core::linalg::solve_spd;
use specfun_core::monotone::{perturbation_bound, required_radius, solve, MonotoneProblem};
use specfun_core::random::{case_rng, gaussian_vec};
use specfun_core::{Error, Result};

fn space(n_cells: usize) -> AssembledSpace {
    AssembledSpace::new(build_domain(1, n_cells, Dirichlet::BothEnds).unwrap()).unwrap()
}

fn jv(s: &AssembledSpace, u: &[f64]) -> Vec<f64> {
    s.duality_matrix().mul_vec(u).unwrap()
}

#[test]
fn identity_map_converges_in_one_step() {
    let s = space(8);
    let mut rng = case_rng(1, 0);
    let y = gaussian_vec(&mut rng, s.n_free());
    let q = jv(&s, &y);
    let apply = |u: &[f64]| -> Result<Vec<f64>> { Ok(jv(&s, u)) };
    let mut p = MonotoneProblem {
        space: &s,
        apply: &apply,
        m: 1.0,
        big_m: 1.0,
        radius: 1.0,
        q,
    };
    p.radius = required_radius(&p).unwrap();
    let trace = solve(&p, 1e-12, 10).unwrap();
    assert_eq!(trace.iterations(), 1);
    for (a, b) in trace.u.iter().zip(&y) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn fixed_point_at_start_needs_no_iterations() {
    let s = space(6);
    let apply = |u: &[f64]| -> Result<Vec<f64>> {
        Ok(jv(&s, u).into_iter().map(|v| v + 1.0).collect())
    };
    let q = apply(&vec![0.0; s.n_free()]).unwrap();
    let p = MonotoneProblem {
        space: &s,
        apply: &apply,
        m: 1.0,
        big_m: 1.0,
        radius: 1.0,
        q,
    };
    assert_eq!(required_radius(&p).unwrap(), 0.0);
    let trace = solve(&p, 1e-12, 10).unwrap();
    assert_eq!(trace.iterations(), 0);
    assert!(trace.u.iter().all(|v| *v == 0.0));
}

#[test]
fn required_radius_is_homogeneous() {
    let s = space(7);
    let apply = |u: &[f64]| -> Result<Vec<f64>> { Ok(jv(&s, u)) };
    let mut rng = case_rng(2, 0);
    let g = gaussian_vec(&mut rng, s.n_free());
    let make = |scale: f64| MonotoneProblem {
        space: &s,
        apply: &apply,
        m: 0.5,
        big_m: 1.0,
        radius: 1.0,
        q: g.iter().map(|v| v * scale).collect(),
    };
    let r1 = required_radius(&make(1.0)).unwrap();
    let r3 = required_radius(&make(3.0)).unwrap();
    assert_abs_diff_eq!(r3, 3.0 * r1, epsilon = 1e-12 * r3);
    assert_abs_diff_eq!(r1, 4.0 * dual_norm(&s, &g).unwrap(), epsilon = 1e-12 * r1);
}

#[test]
fn too_small_radius_is_rejected() {
    let s = space(5);
    let apply = |u: &[f64]| -> Result<Vec<f64>> { Ok(jv(&s, u)) };
    let p = MonotoneProblem {
        space: &s,
        apply: &apply,
        m: 1.0,
        big_m: 1.0,
        radius: 1e-3,
        q: vec![1.0; s.n_free()],
    };
    assert!(matches!(solve(&p, 1e-10, 100), Err(Error::RadiusTooSmall { .. })));
}

#[test]
fn understated_lipschitz_constant_is_detected() {
    // A = 5J has m = M = 5; declaring M = 1 makes the step overshoot
    let s = space(6);
    let apply = |u: &[f64]| -> Result<Vec<f64>> { Ok(jv(&s, u).into_iter().map(|v| 5.0 * v).collect()) };
    let q = jv(&s, &vec![1.0; s.n_free()]);
    let p = MonotoneProblem {
        space: &s,
        apply: &apply,
        m: 1.0,
        big_m: 1.0,
        radius: 1e3,
        q,
    };
    let err = solve(&p, 1e-10, 100).unwrap_err();
    assert!(err.is_contraction_failure(), "{err:?}");
}

#[test]
fn overstated_monotonicity_constant_is_detected() {
    // A = 0.5J is only 0.5-monotone
    let s = space(6);
    let apply = |u: &[f64]| -> Result<Vec<f64>> { Ok(jv(&s, u).into_iter().map(|v| 0.5 * v).collect()) };
    let q = jv(&s, &vec![1.0; s.n_free()]);
    let p = MonotoneProblem {
        space: &s,
        apply: &apply,
        m: 0.9,
        big_m: 1.0,
        radius: 1e3,
        q,
    };
    assert!(matches!(
        solve(&p, 1e-10, 1000),
        Err(Error::MonotonicityViolated { .. })
    ));
}

/// `A(u) = J u + 0.1 J arctan(u)` componentwise.
fn arctan_map(s: &AssembledSpace, u: &[f64]) -> Vec<f64> {
    let at: Vec<f64> = u.iter().map(|v| v.atan()).collect();
    jv(s, u).iter().zip(jv(s, &at)).map(|(a, b)| a + 0.1 * b).collect()
}

/// Damped Picard on `J u = q − 0.1 J arctan(u)`, i.e. `u = J⁻¹q − 0.1 arctan(u)`.
fn picard_oracle(s: &AssembledSpace, q: &[f64]) -> Vec<f64> {
    let base = solve_spd(s.duality_matrix(), q).unwrap();
    let mut u = vec![0.0; q.len()];
    for _ in 0..10_000 {
        let next: Vec<f64> = base.iter().zip(&u).map(|(b, v): (&f64, &f64)| b - 0.1 * v.atan()).collect();
        let diff = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        u = next.iter().zip(&u).map(|(a, b)| 0.7 * a + 0.3 * b).collect();
        if diff < 1e-15 {
            break;
        }
    }
    u
}

#[test]
fn nonlinear_map_matches_picard_oracle() {
    for (case, n_cells) in [4usize, 7, 11].into_iter().enumerate() {
        let s = space(n_cells);
        let mut rng = case_rng(3, case as u64);
        let y = gaussian_vec(&mut rng, s.n_free());
        let q = jv(&s, &y);
        let apply = |u: &[f64]| -> Result<Vec<f64>> { Ok(arctan_map(&s, u)) };
        let mut p = MonotoneProblem {
            space: &s,
            apply: &apply,
            m: 1.0,
            big_m: 1.1,
            radius: 1.0,
            q: q.clone(),
        };
        p.radius = required_radius(&p).unwrap();
        let trace = solve(&p, 1e-12, 10_000).unwrap();
        assert!(trace.max_ratio() <= trace.contraction_bound + 0.02);
        assert!(trace.max_h_norm() <= p.radius * (1.0 + 1e-9));
        let oracle = picard_oracle(&s, &q);
        let diff: Vec<f64> = trace.u.iter().zip(&oracle).map(|(a, b)| a - b).collect();
        assert!(s.h_norm(&diff).unwrap() <= 1e-8, "case {case}");
    }
}

#[test]
fn linear_perturbation_bound_is_exact() {
    let s = space(9);
    let c = 2.5;
    let apply = |u: &[f64]| -> Result<Vec<f64>> { Ok(jv(&s, u).into_iter().map(|v| c * v).collect()) };
    let mut rng = case_rng(4, 0);
    let q = gaussian_vec(&mut rng, s.n_free());
    let qt = gaussian_vec(&mut rng, s.n_free());
    let solve_for = |q: &[f64]| {
        let mut p = MonotoneProblem {
            space: &s,
            apply: &apply,
            m: c,
            big_m: c,
            radius: 1.0,
            q: q.to_vec(),
        };
        p.radius = required_radius(&p).unwrap().max(1e-300);
        solve(&p, 1e-13, 100).unwrap().u
    };
    let (u, ut) = (solve_for(&q), solve_for(&qt));
    let pb = perturbation_bound(&s, c, &q, &qt, &u, &ut).unwrap();
    assert_abs_diff_eq!(pb.lhs, pb.rhs, epsilon = 1e-11);
}

#[test]
fn nonlinear_perturbation_suite() {
    let s = space(8);
    let tol = 1e-12;
    let apply = |u: &[f64]| -> Result<Vec<f64>> { Ok(arctan_map(&s, u)) };
    let solve_for = |q: &[f64]| {
        let mut p = MonotoneProblem {
            space: &s,
            apply: &apply,
            m: 1.0,
            big_m: 1.1,
            radius: 1.0,
            q: q.to_vec(),
        };
        p.radius = required_radius(&p).unwrap().max(1e-300);
        solve(&p, tol, 10_000).unwrap().u
    };
    for case in 0..50 {
        let mut rng = case_rng(5, case);
        let q = gaussian_vec(&mut rng, s.n_free());
        let qt: Vec<f64> = q
            .iter()
            .zip(gaussian_vec(&mut rng, s.n_free()))
            .map(|(a, b)| a + 0.3 * b)
            .collect();
        let pb = perturbation_bound(&s, 1.0, &q, &qt, &solve_for(&q), &solve_for(&qt)).unwrap();
        assert!(pb.lhs <= pb.rhs * (1.0 + 10.0 * tol / pb.rhs), "case {case}: {pb:?}");
    }
    let q = vec![0.5; s.n_free()];
    let pb = perturbation_bound(&s, 1.0, &q, &q, &solve_for(&q), &solve_for(&q)).unwrap();
    assert!(pb.lhs <= 2.0 * tol);
}

#[test]
fn trace_csv_has_header_and_rows() {
    let s = space(5);
    let apply = |u: &[f64]| -> Result<Vec<f64>> { Ok(arctan_map(&s, u)) };
    let q = vec![1.0; s.n_free()];
    let mut p = MonotoneProblem {
        space: &s,
        apply: &apply,
        m: 1.0,
        big_m: 1.1,
        radius: 1.0,
        q,
    };
    p.radius = required_radius(&p).unwrap();
    let trace = solve(&p, 1e-10, 1000).unwrap();
    let mut out = Vec::new();
    trace.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,h_norm,residual,ratio"));
    assert_eq!(lines.count(), trace.iterations() + 1);
}
