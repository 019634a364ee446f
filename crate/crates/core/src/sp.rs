//! The Schrödinger–Poisson map
//! `⟨A₀V, W⟩ = ∫ ε∇V·∇W − (𝒩(V₀ + V), W)_{L₂}` and its solution `Ψ(V₀, q)`
//! by the monotone contraction scheme with adaptive Lipschitz constant.

use std::io::{self, Write};

use serde::Serialize;

use crate::assembly::{
    dual_norm, embed_l2_functional, poincare_constant, AssembledSpace, CoefficientField,
    GridFunction,
};
use crate::density::{density_of, write_density_csv, DensityResult, Distribution};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::monotone::{solve, IterationTrace, MonotoneProblem};
use crate::random::{case_rng, gaussian_vec};
use crate::schrodinger::Hamiltonian;

/// Fermi tolerance used inside `A₀`, relative to `N`.
pub const SP_FERMI_TOL: f64 = 1e-14;
/// Safety factor on the probed density Lipschitz constant.
pub const LIPSCHITZ_INFLATION: f64 = 2.0;
pub const MAX_M_DOUBLINGS: usize = 20;
pub const DEFAULT_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone)]
pub struct SPProblem {
    space: AssembledSpace,
    eps: CoefficientField,
    m_coeff: CoefficientField,
    dist: Distribution,
    n_particles: f64,
    v0: GridFunction,
    q: Vec<f64>,
    k_eps: SymMatrix,
    k_m: SymMatrix,
    frozen_density: bool,
}

impl SPProblem {
    pub fn new(
        space: AssembledSpace,
        eps: CoefficientField,
        m_coeff: CoefficientField,
        dist: Distribution,
        n_particles: f64,
        v0: GridFunction,
        q: Vec<f64>,
    ) -> Result<Self> {
        if !(n_particles > 0.0 && n_particles.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "particle number {n_particles} must be positive"
            )));
        }
        poincare_constant(&space)?;
        space.check(v0.values())?;
        space.check(&q)?;
        let k_eps = space.stiffness(&eps)?;
        let k_m = space.stiffness(&m_coeff.reciprocal())?;
        Ok(Self {
            space,
            eps,
            m_coeff,
            dist,
            n_particles,
            v0,
            q,
            k_eps,
            k_m,
            frozen_density: false,
        })
    }

    /// Replaces `𝒩(V₀ + V)` by the constant `𝒩(V₀)`, making `A₀` affine.
    pub fn with_frozen_density(mut self) -> Self {
        self.frozen_density = true;
        self
    }

    pub fn with_q(&self, q: Vec<f64>) -> Result<Self> {
        self.space.check(&q)?;
        Ok(Self { q, ..self.clone() })
    }

    pub fn with_v0(&self, v0: GridFunction) -> Result<Self> {
        self.space.check(v0.values())?;
        Ok(Self { v0, ..self.clone() })
    }

    pub fn space(&self) -> &AssembledSpace {
        &self.space
    }

    pub fn eps(&self) -> &CoefficientField {
        &self.eps
    }

    pub fn m_coeff(&self) -> &CoefficientField {
        &self.m_coeff
    }

    pub fn dist(&self) -> Distribution {
        self.dist
    }

    pub fn n_particles(&self) -> f64 {
        self.n_particles
    }

    pub fn v0(&self) -> &GridFunction {
        &self.v0
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen_density
    }

    /// `𝒩(V₀ + V)` with its Fermi level.
    pub fn density(&self, v: &[f64]) -> Result<DensityResult> {
        self.space.check(v)?;
        let total: Vec<f64> = if self.frozen_density {
            self.v0.values().to_vec()
        } else {
            self.v0.values().iter().zip(v).map(|(a, b)| a + b).collect()
        };
        let h = Hamiltonian::from_parts(self.space.lumped(), self.k_m.clone(), &total)?;
        density_of(&h, self.dist, self.n_particles, SP_FERMI_TOL)
    }

    /// `q₀ = −ι(𝒩(V₀))`, the data for which `Ψ(V₀, q₀) = 0`.
    pub fn fixed_point_data(&self) -> Result<Vec<f64>> {
        let rho = self.density(&vec![0.0; self.space.n_free()])?.rho;
        Ok(embed_l2_functional(&self.space, rho.values())?
            .into_iter()
            .map(|v| -v)
            .collect())
    }
}

/// `A₀V = K_ε V − ι(𝒩(V₀ + V))`.
pub fn apply_a0(problem: &SPProblem, v: &[f64]) -> Result<Vec<f64>> {
    let rho = problem.density(v)?.rho;
    let stiff = problem.k_eps.mul_vec(v)?;
    let iota = embed_l2_functional(&problem.space, rho.values())?;
    Ok(stiff.iter().zip(&iota).map(|(a, b)| a - b).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SPConstants {
    /// `μ / (1 + c_P)`.
    pub m: f64,
    /// Lipschitz constant used by the accepted run.
    pub big_m: f64,
    pub c_p: f64,
    pub mu: f64,
    pub eps_sup: f64,
    /// `‖ι‖_{L₂→𝓗*}`.
    pub embedding_norm: f64,
    /// Largest probed `L₂` Lipschitz constant of `𝒩` on the ball.
    pub density_lipschitz_probe: f64,
    /// `√(1 − m²/M²)`.
    pub contraction: f64,
}

impl SPConstants {
    fn with_big_m(mut self, big_m: f64) -> Self {
        self.big_m = big_m;
        self.contraction = (1.0 - (self.m / big_m).powi(2)).max(0.0).sqrt();
        self
    }

    /// Inflated density Lipschitz constant entering `M`.
    pub fn density_lipschitz(&self) -> f64 {
        LIPSCHITZ_INFLATION * self.density_lipschitz_probe
    }

    /// `(1 − √(1 − m²/M²))⁻¹ (m/M²) ‖ι‖ c` with `c` the density Lipschitz
    /// constant: the `V₀`-sensitivity bound of the solution map.
    pub fn v0_sensitivity_bound(&self) -> f64 {
        (self.m / self.big_m.powi(2)) * self.embedding_norm * self.density_lipschitz()
            / (1.0 - self.contraction)
    }
}

/// Number of power-iteration steps per base point.
const POWER_STEPS: usize = 12;

/// Largest `‖D𝒩(V₀ + V)‖_{L₂→L₂}` over a few base points `V` in the
/// `𝓗`-ball, by power iteration on central differences.
pub fn density_lipschitz_estimate(problem: &SPProblem, radius: f64) -> Result<f64> {
    if problem.frozen_density {
        return Ok(0.0);
    }
    let space = &problem.space;
    let n = space.n_free();
    let mut rng = case_rng(0x5eed_0f5f_u64, n as u64);
    let mut bases = vec![vec![0.0; n]];
    for frac in [0.5, 1.0] {
        if radius > 0.0 {
            let g = gaussian_vec(&mut rng, n);
            let s = frac * radius / space.h_norm(&g)?;
            bases.push(g.into_iter().map(|x| x * s).collect());
        }
    }
    let mut worst: f64 = 0.0;
    for base in &bases {
        let scale = 1.0 + space.l2_norm(base)? + space.l2_norm(problem.v0.values())?;
        let delta = 1e-5 * scale;
        let mut dir = gaussian_vec(&mut rng, n);
        let mut estimate = 0.0;
        for _ in 0..POWER_STEPS {
            let norm = space.l2_norm(&dir)?;
            if !(norm > 0.0) {
                break;
            }
            dir.iter_mut().for_each(|d| *d /= norm);
            let plus: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + delta * d).collect();
            let minus: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b - delta * d).collect();
            let rp = problem.density(&plus)?.rho;
            let rm = problem.density(&minus)?.rho;
            dir = rp
                .values()
                .iter()
                .zip(rm.values())
                .map(|(a, b)| (a - b) / (2.0 * delta))
                .collect();
            estimate = space.l2_norm(&dir)?;
        }
        worst = worst.max(estimate);
    }
    Ok(worst)
}

/// `m = μ/(1 + c_P)` and `M = ‖ε‖_∞ + ‖ι‖² · 2 L_probe`, with `M ≥ m`.
pub fn estimate_constants(problem: &SPProblem, radius: f64) -> Result<SPConstants> {
    let c_p = poincare_constant(&problem.space)?;
    let mu = problem.eps.lower_bound();
    let m = mu / (1.0 + c_p);
    let kappa = problem.space.embedding_norm();
    let probe = density_lipschitz_estimate(problem, radius)?;
    let eps_sup = problem.eps.upper_bound();
    let big_m = (eps_sup + kappa * kappa * LIPSCHITZ_INFLATION * probe).max(m);
    Ok(SPConstants {
        m,
        big_m,
        c_p,
        mu,
        eps_sup,
        embedding_norm: kappa,
        density_lipschitz_probe: probe,
        contraction: 0.0,
    }
    .with_big_m(big_m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SPSolution {
    /// `Ψ(V₀, q)`.
    pub v: GridFunction,
    pub fermi_level: f64,
    /// `𝒩(V₀ + V)`.
    pub density: GridFunction,
    pub constants: SPConstants,
    pub trace: IterationTrace,
    /// `‖K_ε V − ι(𝒩(V₀ + V)) − q‖_*`.
    pub residual: f64,
    pub h_norm: f64,
    /// `(1 + c_P)/μ · ‖q + ι(𝒩(V₀))‖_*`.
    pub norm_bound: f64,
    pub m_doublings: usize,
}

impl SPSolution {
    pub fn write_csv<W: Write>(&self, w: W, space: &AssembledSpace) -> io::Result<()> {
        write_density_csv(
            w,
            &space.domain().free_coordinates(),
            space.lumped(),
            self.density.values(),
        )
    }

    /// CSV with header `x,V`.
    pub fn write_potential_csv<W: Write>(&self, mut w: W, space: &AssembledSpace) -> io::Result<()> {
        writeln!(w, "x,V")?;
        for (x, v) in space.domain().free_coordinates().iter().zip(self.v.values()) {
            writeln!(w, "{x:e},{v:e}")?;
        }
        Ok(())
    }
}

/// Solves `A₀V = q` from `V = 0`, doubling `M` whenever the contraction
/// certificate fails.
pub fn solve_sp(problem: &SPProblem, tol: f64) -> Result<SPSolution> {
    solve_sp_with(problem, tol, DEFAULT_MAX_ITER)
}

pub fn solve_sp_with(problem: &SPProblem, tol: f64, max_iter: usize) -> Result<SPSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let space = &problem.space;
    let apply = |v: &[f64]| apply_a0(problem, v);
    let zero = vec![0.0; space.n_free()];
    let r0: Vec<f64> = apply(&zero)?.iter().zip(&problem.q).map(|(a, b)| a - b).collect();
    let r0_norm = dual_norm(space, &r0)?;

    let c_p = poincare_constant(space)?;
    let m = problem.eps.lower_bound() / (1.0 + c_p);
    let required = 2.0 / m * r0_norm;
    let radius = required.max(f64::MIN_POSITIVE);
    let mut constants = if r0_norm <= tol {
        // already solved; skip the Lipschitz probe
        SPConstants {
            m,
            big_m: problem.eps.upper_bound().max(m),
            c_p,
            mu: problem.eps.lower_bound(),
            eps_sup: problem.eps.upper_bound(),
            embedding_norm: space.embedding_norm(),
            density_lipschitz_probe: 0.0,
            contraction: 0.0,
        }
        .with_big_m(problem.eps.upper_bound().max(m))
    } else {
        estimate_constants(problem, radius)?
    };

    let mut doublings = 0;
    let trace = loop {
        let mp = MonotoneProblem {
            space,
            apply: &apply,
            m: constants.m,
            big_m: constants.big_m,
            radius,
            q: problem.q.clone(),
        };
        match solve(&mp, tol, max_iter) {
            Ok(trace) => break trace,
            Err(e) if e.is_contraction_failure() => {
                if doublings == MAX_M_DOUBLINGS {
                    return Err(Error::AdaptiveLimit { doublings });
                }
                doublings += 1;
                constants = constants.with_big_m(2.0 * constants.big_m);
            }
            Err(e) => return Err(e),
        }
    };

    let v = GridFunction::new(trace.u.clone())?;
    let dens = problem.density(v.values())?;
    let h_norm = space.h_norm(v.values())?;
    let norm_bound = r0_norm / m;
    let residual = trace.final_residual();
    if residual > tol {
        return Err(Error::MaxIterExceeded {
            iterations: trace.iterations(),
            residual,
        });
    }
    if h_norm > norm_bound * (1.0 + 1e-6) + tol / m {
        return Err(Error::SolutionBoundViolated {
            norm: h_norm,
            bound: norm_bound,
        });
    }
    Ok(SPSolution {
        v,
        fermi_level: dens.fermi_level,
        density: dens.rho,
        constants,
        trace,
        residual,
        h_norm,
        norm_bound,
        m_doublings: doublings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataLipschitzReport {
    /// `‖Ψ(V₀, q) − Ψ(V₀, q̃)‖_𝓗`.
    pub dq_lhs: f64,
    /// `‖q − q̃‖_*`.
    pub dq_rhs: f64,
    /// `(1 + c_P)/μ`.
    pub dq_constant: f64,
    /// `‖Ψ(V₀, q) − Ψ(Ṽ₀, q)‖_𝓗`.
    pub dv0_lhs: f64,
    /// `‖V₀ − Ṽ₀‖_{L₂}`.
    pub dv0_rhs: f64,
    /// `dv0_lhs / dv0_rhs`.
    pub observed_constant: f64,
    /// Assembled `V₀`-sensitivity bound.
    pub v0_bound: f64,
}

/// Solves the base problem and the two perturbed ones and checks the
/// `q`-Lipschitz bound and the `V₀`-sensitivity bound.
pub fn data_lipschitz_check(
    problem: &SPProblem,
    q_tilde: &[f64],
    v0_tilde: &GridFunction,
    tol: f64,
) -> Result<DataLipschitzReport> {
    let space = &problem.space;
    let base = solve_sp(problem, tol)?;
    let alt_q = solve_sp(&problem.with_q(q_tilde.to_vec())?, tol)?;
    let alt_v0 = solve_sp(&problem.with_v0(v0_tilde.clone())?, tol)?;

    let dq: Vec<f64> = problem.q.iter().zip(q_tilde).map(|(a, b)| a - b).collect();
    let dq_rhs = dual_norm(space, &dq)?;
    let dq_lhs = space.h_norm(base.v.sub(&alt_q.v).values())?;
    let dq_constant = (1.0 + base.constants.c_p) / base.constants.mu;
    let slack = 10.0 * tol / base.constants.m;
    if dq_lhs > dq_constant * dq_rhs + slack {
        return Err(Error::BoundViolated {
            check: "q-Lipschitz".into(),
            probe: 0,
            margin: dq_constant * dq_rhs + slack - dq_lhs,
        });
    }

    let dv0_rhs = space.l2_norm(problem.v0.sub(v0_tilde).values())?;
    let dv0_lhs = space.h_norm(base.v.sub(&alt_v0.v).values())?;
    let consts = if alt_v0.constants.big_m > base.constants.big_m {
        alt_v0.constants
    } else {
        base.constants
    };
    let consts = SPConstants {
        density_lipschitz_probe: base
            .constants
            .density_lipschitz_probe
            .max(alt_v0.constants.density_lipschitz_probe),
        ..consts
    };
    let v0_bound = consts.v0_sensitivity_bound();
    let observed = if dv0_rhs > 0.0 { dv0_lhs / dv0_rhs } else { 0.0 };
    if dv0_lhs > v0_bound * dv0_rhs + slack {
        return Err(Error::BoundViolated {
            check: "V0-sensitivity".into(),
            probe: 0,
            margin: v0_bound * dv0_rhs + slack - dv0_lhs,
        });
    }
    Ok(DataLipschitzReport {
        dq_lhs,
        dq_rhs,
        dq_constant,
        dv0_lhs,
        dv0_rhs,
        observed_constant: observed,
        v0_bound,
    })
}
