mod common;

use approx::assert_abs_diff_eq;
use rand::Rng;
use specfun_core::assembly::{
    build_domain, dual_norm, duality_solve, poincare_constant, AssembledSpace, CoefficientField, Dirichlet,
    GridFunction,
};
use specfun_core::density::Distribution;
use specfun_core::linalg::{dot, generalized_eig, solve_spd};
use specfun_core::random::{case_rng, gaussian_vec};
use specfun_core::sp::{
    apply_a0, data_lipschitz_check, estimate_constants, solve_sp, SPProblem, LIPSCHITZ_INFLATION,
};
use specfun_core::Error;

use common::OracleProblem;

struct Case {
    eps: Vec<f64>,
    mass: Vec<f64>,
    dist: Distribution,
    n: f64,
    v0: Vec<f64>,
    q: Vec<f64>,
}

fn random_case(seed: u64, index: u64, n_cells: usize) -> Case {
    let mut rng = case_rng(seed, index);
    let nf = n_cells - 1;
    Case {
        eps: (0..n_cells).map(|_| rng.random_range(0.5..2.0)).collect(),
        mass: (0..n_cells).map(|_| rng.random_range(0.5..2.0)).collect(),
        dist: if rng.random_bool(0.5) { Distribution::Boltzmann } else { Distribution::FermiDirac },
        n: rng.random_range(0.3..0.95) * (nf as f64).min(2.0),
        v0: gaussian_vec(&mut rng, nf).into_iter().map(|x| 3.0 * x).collect(),
        q: gaussian_vec(&mut rng, nf).into_iter().map(|x| 0.2 * x).collect(),
    }
}

fn problem(n_cells: usize, c: &Case) -> SPProblem {
    let space = AssembledSpace::new(build_domain(1, n_cells, Dirichlet::BothEnds).unwrap()).unwrap();
    SPProblem::new(
        space,
        CoefficientField::from_values(c.eps.clone()).unwrap(),
        CoefficientField::from_values(c.mass.clone()).unwrap(),
        c.dist,
        c.n,
        GridFunction::new(c.v0.clone()).unwrap(),
        c.q.clone(),
    )
    .unwrap()
}

fn simple(n_cells: usize) -> SPProblem {
    let space = AssembledSpace::new(build_domain(1, n_cells, Dirichlet::BothEnds).unwrap()).unwrap();
    let d = space.domain().clone();
    let v0 = GridFunction::from_fn(&d, |x| 3.0 * (-(x - 0.5).powi(2) / 0.02).exp()).unwrap();
    let q: Vec<f64> = space.lumped().iter().zip(d.free_coordinates()).map(|(m, x)| m * (4.0 * x).sin()).collect();
    SPProblem::new(
        space,
        CoefficientField::constant(&d, 1.0).unwrap(),
        CoefficientField::constant(&d, 1.0).unwrap(),
        Distribution::Boltzmann,
        1.0,
        v0,
        q,
    )
    .unwrap()
}

#[test]
fn zero_maps_to_negative_embedded_density() {
    let p = simple(12);
    let a0 = apply_a0(&p, &vec![0.0; p.space().n_free()]).unwrap();
    assert_eq!(a0, p.fixed_point_data().unwrap());
    let rho = p.density(&vec![0.0; p.space().n_free()]).unwrap().rho;
    for ((a, m), r) in a0.iter().zip(p.space().lumped()).zip(rho.values()) {
        assert_abs_diff_eq!(*a, -m * r, epsilon = 1e-15);
    }
}

#[test]
fn constructed_fixed_point_is_zero() {
    for case in 0..5 {
        let c = random_case(20, case, 15);
        let p = problem(15, &c);
        let p = p.with_q(p.fixed_point_data().unwrap()).unwrap();
        let sol = solve_sp(&p, 1e-10).unwrap();
        assert!(sol.h_norm <= 1e-8);
        assert_eq!(sol.trace.iterations(), 0);
    }
}

#[test]
fn a0_is_strongly_monotone() {
    for case in 0..20 {
        let c = random_case(21, case, 12);
        let p = problem(12, &c);
        let s = p.space();
        let m = p.eps().lower_bound() / (1.0 + poincare_constant(s).unwrap());
        let mut rng = case_rng(22, case);
        let u = gaussian_vec(&mut rng, s.n_free());
        let v: Vec<f64> = gaussian_vec(&mut rng, s.n_free()).into_iter().map(|x| 0.5 * x).collect();
        let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let da: Vec<f64> = apply_a0(&p, &u).unwrap().iter().zip(apply_a0(&p, &v).unwrap()).map(|(a, b)| a - b).collect();
        let lhs = dot(&da, &diff);
        let rhs = m * s.h_norm(&diff).unwrap().powi(2);
        assert!(lhs >= rhs * (1.0 - 1e-6), "case {case}: {lhs} < {rhs}");
    }
}

#[test]
fn permittivity_scaling_scales_stiffness_term() {
    let base = simple(10).with_frozen_density();
    let s = base.space().clone();
    let scaled = SPProblem::new(
        s.clone(),
        base.eps().scaled(3.0).unwrap(),
        base.m_coeff().clone(),
        base.dist(),
        base.n_particles(),
        base.v0().clone(),
        base.q().to_vec(),
    )
    .unwrap()
    .with_frozen_density();
    let v = gaussian_vec(&mut case_rng(23, 0), s.n_free());
    let zero = vec![0.0; s.n_free()];
    let stiff = |p: &SPProblem| -> Vec<f64> {
        apply_a0(p, &v).unwrap().iter().zip(apply_a0(p, &zero).unwrap()).map(|(a, b)| a - b).collect()
    };
    for (a, b) in stiff(&base).iter().zip(stiff(&scaled)) {
        assert!((b - 3.0 * a).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn frozen_density_constants_and_solution() {
    let p = simple(20).with_frozen_density();
    let s = p.space();
    let k = estimate_constants(&p, 1.0).unwrap();
    assert_eq!(k.big_m, p.eps().upper_bound().max(k.m));
    assert_eq!(k.density_lipschitz_probe, 0.0);
    let lam = generalized_eig(s.k1(), s.mass()).unwrap().eigenvalues()[0];
    assert_abs_diff_eq!(k.c_p, 1.0 / lam, epsilon = 1e-14);
    assert_abs_diff_eq!(k.m, k.mu / (1.0 + k.c_p), epsilon = 1e-15);

    // K₁ V = q + ι𝒩(V₀)
    let sol = solve_sp(&p, 1e-12).unwrap();
    let rhs: Vec<f64> = p.q().iter().zip(p.fixed_point_data().unwrap()).map(|(a, b)| a - b).collect();
    let exact = solve_spd(s.k1(), &rhs).unwrap();
    let err: Vec<f64> = exact.iter().zip(sol.v.values()).map(|(a, b)| a - b).collect();
    assert!(s.h_norm(&err).unwrap() <= 1e-10);
}

#[test]
fn lipschitz_term_scales_with_probe() {
    let p = simple(14);
    let k = estimate_constants(&p, 0.5).unwrap();
    assert_abs_diff_eq!(k.density_lipschitz(), LIPSCHITZ_INFLATION * k.density_lipschitz_probe, epsilon = 0.0);
    let nonlinear = k.big_m - k.eps_sup;
    assert_abs_diff_eq!(nonlinear, k.embedding_norm.powi(2) * k.density_lipschitz(), epsilon = 1e-12);
    assert!(k.big_m >= k.m && k.contraction < 1.0);
}

#[test]
fn tiny_grid_matches_oracle() {
    for case in 0..4 {
        let n_cells = 4;
        let c = random_case(24, case, n_cells);
        let sol = solve_sp(&problem(n_cells, &c), 1e-12).unwrap();
        let oracle = OracleProblem {
            n_cells,
            eps: c.eps.clone(),
            mass_coeff: c.mass.clone(),
            fermi_dirac: c.dist == Distribution::FermiDirac,
            n_particles: c.n,
            v0: c.v0.clone(),
            q: c.q.clone(),
        }
        .solve(1e-13);
        let p = problem(n_cells, &c);
        let diff: Vec<f64> = oracle.iter().zip(sol.v.values()).map(|(a, b)| a - b).collect();
        let err = p.space().h_norm(&diff).unwrap();
        assert!(err <= 1e-7, "case {case}: {err}");
    }
}

#[test]
fn solution_invariants_on_random_cases() {
    for case in 0..20 {
        let n_cells = 6 + (case as usize % 10);
        let c = random_case(25, case, n_cells);
        let p = problem(n_cells, &c);
        let tol = 1e-10;
        let sol = solve_sp(&p, tol).unwrap();
        let s = p.space();
        let r: Vec<f64> = apply_a0(&p, sol.v.values()).unwrap().iter().zip(p.q()).map(|(a, b)| a - b).collect();
        assert!(dual_norm(s, &r).unwrap() <= tol);
        let data: Vec<f64> = p.q().iter().zip(p.fixed_point_data().unwrap()).map(|(a, b)| a - b).collect();
        let bound = (1.0 + sol.constants.c_p) / sol.constants.mu * dual_norm(s, &data).unwrap();
        assert!(sol.h_norm <= bound * (1.0 + 1e-6) + tol / sol.constants.m);
        let mass: f64 = s.lumped().iter().zip(sol.density.values()).map(|(m, r)| m * r).sum();
        assert!((mass - c.n).abs() <= 1e-9 * c.n);
        assert!(sol.trace.max_ratio() <= sol.constants.contraction + 0.02);
        assert!(sol.trace.max_h_norm() <= sol.trace.required_radius * (1.0 + 1e-9));
    }
}

#[test]
fn data_lipschitz_trivial_and_random() {
    let p = simple(10);
    let tol = 1e-11;
    let same = data_lipschitz_check(&p, p.q(), p.v0(), tol).unwrap();
    assert!(same.dq_lhs <= 2.0 * tol && same.dv0_lhs <= 2.0 * tol);
    for case in 0..8 {
        let c = random_case(26, case, 9);
        let p = problem(9, &c);
        let mut rng = case_rng(27, case);
        let qt: Vec<f64> = p.q().iter().map(|x| x + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let vt = GridFunction::new(p.v0().values().iter().map(|x| x + rng.random_range(-0.5..0.5)).collect()).unwrap();
        let rep = data_lipschitz_check(&p, &qt, &vt, tol).unwrap();
        assert!(rep.dq_lhs <= rep.dq_constant * rep.dq_rhs * (1.0 + 10.0 * tol / rep.dq_rhs));
        assert!(rep.observed_constant <= rep.v0_bound + 1e-6, "{rep:?}");
    }
}

#[test]
fn frozen_linear_q_sensitivity() {
    let p = simple(16).with_frozen_density();
    let s = p.space();
    let dq = gaussian_vec(&mut case_rng(28, 0), s.n_free());
    let qt: Vec<f64> = p.q().iter().zip(&dq).map(|(a, b)| a + b).collect();
    let rep = data_lipschitz_check(&p, &qt, p.v0(), 1e-12).unwrap();
    // closed form: ΔV = K₁⁻¹ Δq
    let dv = solve_spd(s.k1(), &dq).unwrap();
    assert_abs_diff_eq!(rep.dq_lhs, s.h_norm(&dv).unwrap(), epsilon = 1e-9);
    assert!(rep.dq_lhs <= rep.dq_constant * rep.dq_rhs);
    let j_inv = duality_solve(s, &dq).unwrap();
    assert!(rep.dq_rhs > 0.0 && (rep.dq_rhs - dot(&dq, &j_inv).sqrt()).abs() <= 1e-12);
}

#[test]
fn invalid_problems_are_rejected() {
    let space = AssembledSpace::new(build_domain(1, 8, Dirichlet::None).unwrap()).unwrap();
    let d = space.domain().clone();
    let unit = CoefficientField::constant(&d, 1.0).unwrap();
    let nf = space.n_free();
    let err = SPProblem::new(
        space.clone(),
        unit.clone(),
        unit.clone(),
        Distribution::Boltzmann,
        1.0,
        GridFunction::zeros(nf),
        vec![0.0; nf],
    )
    .unwrap_err();
    assert!(matches!(err, Error::NoPoincare));
    let space = AssembledSpace::new(build_domain(1, 8, Dirichlet::LeftOnly).unwrap()).unwrap();
    let nf = space.n_free();
    for n in [0.0, -1.0, f64::NAN] {
        assert!(SPProblem::new(
            space.clone(),
            unit.clone(),
            unit.clone(),
            Distribution::Boltzmann,
            n,
            GridFunction::zeros(nf),
            vec![0.0; nf]
        )
        .is_err());
    }
    assert!(SPProblem::new(space, unit.clone(), unit, Distribution::Boltzmann, 1.0, GridFunction::zeros(3), vec![0.0; nf]).is_err());
    assert!(solve_sp(&simple(6), 0.0).is_err());
}

#[test]
fn solution_csv_outputs() {
    let p = simple(6);
    let sol = solve_sp(&p, 1e-10).unwrap();
    let mut dens = Vec::new();
    sol.write_csv(&mut dens, p.space()).unwrap();
    let mut pot = Vec::new();
    sol.write_potential_csv(&mut pot, p.space()).unwrap();
    let dens = String::from_utf8(dens).unwrap();
    let pot = String::from_utf8(pot).unwrap();
    assert_eq!(dens.lines().next(), Some("x,m,rho"));
    assert_eq!(pot.lines().next(), Some("x,V"));
    assert_eq!(pot.lines().count(), p.space().n_free() + 1);
    let json = serde_json::to_value(&sol).unwrap();
    assert!(json["constants"]["m"].as_f64().unwrap() > 0.0);
}
