//! Command execution. Every command renders its artifacts in memory; the
//! caller decides whether and where to write them.

use serde::Serialize;
use specfun_core::assembly::{
    build_domain, embed_l2_functional, AssembledSpace, CoefficientField, Dirichlet, Domain, GridFunction,
};
use specfun_core::density::{
    density_of, fermi_level, lipschitz_probe, write_density_csv, FermiReport, LipschitzReport,
};
use specfun_core::inequalities::{random_pair_suite, SuiteReport};
use specfun_core::schrodinger::{
    build_hamiltonian, certify_form_bounds, estimate_gamma, weyl_check, FormBoundCertificate, GammaEstimate,
    Hamiltonian, WeylReport,
};
use specfun_core::sp::{estimate_constants, solve_sp_with, SPConstants, SPProblem};

use crate::config::{ChargeSource, CoefficientSpec, Command, RunConfig};
use crate::error::{CliError, Result};
use crate::grid::load_grid_function;

/// Largest accepted `M_L`-orthonormality defect of the eigenvectors.
pub const ORTHONORMALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Artifacts plus a human-readable summary. `violation` is set when a
/// reported check failed; the artifacts then document the failure.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Vec<String>,
    pub violation: Option<String>,
}

impl Outcome {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
        bytes.push(b'\n');
        self.artifacts.push(Artifact {
            name: name.into(),
            bytes,
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut bytes = Vec::new();
        write(&mut bytes)?;
        self.artifacts.push(Artifact {
            name: name.into(),
            bytes,
        });
        Ok(())
    }

    fn fail_if(&mut self, failed: bool, msg: impl FnOnce() -> String) {
        if failed && self.violation.is_none() {
            self.violation = Some(msg());
        }
    }
}

fn coefficient(spec: &CoefficientSpec, domain: &Domain, name: &str) -> Result<CoefficientField> {
    let values = match &spec.values {
        Some(v) => {
            if v.len() != domain.n_cells() {
                return Err(CliError::CountMismatch {
                    origin: format!("{name}_values"),
                    expected: domain.n_cells(),
                    found: v.len(),
                });
            }
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(CliError::NonFiniteValue {
                    origin: format!("{name}_values"),
                    index,
                });
            }
            v.clone()
        }
        None => vec![spec.constant; domain.n_cells()],
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CoefficientField::new(values, spec.lower.unwrap_or(lo), spec.upper.unwrap_or(hi))?)
}

/// Mesh, coefficients and external potential shared by the PDE commands.
struct Setup {
    space: AssembledSpace,
    eps: CoefficientField,
    m: CoefficientField,
    v0: GridFunction,
}

impl Setup {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let domain = build_domain(cfg.d, cfg.n_cells, cfg.dirichlet)?;
        let eps = coefficient(&cfg.eps, &domain, "eps")?;
        let m = coefficient(&cfg.m, &domain, "m")?;
        let v0 = load_grid_function(&cfg.v0, &domain)?;
        Ok(Self {
            space: AssembledSpace::new(domain)?,
            eps,
            m,
            v0,
        })
    }

    fn hamiltonian(&self) -> Result<Hamiltonian> {
        Ok(build_hamiltonian(&self.space, &self.m, &self.v0)?)
    }

    fn v0_norm(&self) -> Result<f64> {
        Ok(self.space.l2_norm(self.v0.values())?)
    }

    fn problem(&self, cfg: &RunConfig) -> Result<SPProblem> {
        let base = SPProblem::new(
            self.space.clone(),
            self.eps.clone(),
            self.m.clone(),
            cfg.distribution,
            cfg.n_particles,
            self.v0.clone(),
            vec![0.0; self.space.n_free()],
        )?;
        let q = match &cfg.q {
            ChargeSource::FixedPoint => base.fixed_point_data()?,
            ChargeSource::Function(src) => {
                let w = load_grid_function(src, self.space.domain())?;
                embed_l2_functional(&self.space, w.values())?
            }
        };
        Ok(base.with_q(q)?)
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::VerifyBs => verify_bs(cfg),
        Command::Spectrum => spectrum(cfg),
        Command::Fermi => fermi(cfg),
        Command::Density => density(cfg),
        Command::SolveSp => solve_sp(cfg),
        Command::ProbeConstants => probe_constants(cfg),
    }
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    n_max: usize,
    cases: usize,
    worst_ratio: f64,
    passed: bool,
    suites: Vec<SuiteReport>,
}

fn verify_bs(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut suites = Vec::new();
    for &family in &cfg.families {
        let rep = random_pair_suite(cfg.n_max, cfg.cases, family, cfg.seed)?;
        out.summary.push(format!(
            "{:<17} cases={} worst_ratio={:.12} {}",
            rep.family,
            rep.cases,
            rep.worst_ratio,
            if rep.passed() { "ok" } else { "FAILED" }
        ));
        out.fail_if(!rep.passed(), || {
            format!("{}: worst ratio {} at case {}", rep.family, rep.worst_ratio, rep.worst_seed)
        });
        suites.push(rep);
    }
    let report = VerifyReport {
        seed: cfg.seed,
        n_max: cfg.n_max,
        cases: cfg.cases,
        worst_ratio: suites.iter().map(|s| s.worst_ratio).fold(f64::NEG_INFINITY, f64::max),
        passed: out.violation.is_none(),
        suites,
    };
    out.json("verify-bs.json", &report)?;
    Ok(out)
}

#[derive(Serialize)]
struct SpectrumReport {
    n_free: usize,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    orthonormality_defect: f64,
    v0_l2_norm: f64,
    weyl: Option<WeylReport>,
    gamma: GammaEstimate,
    form_bounds: FormBoundCertificate,
}

fn spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let setup = Setup::new(cfg)?;
    let h = setup.hamiltonian()?;
    let defect = h.mass_orthonormality_defect();
    let h0 = build_hamiltonian(&setup.space, &setup.m, &GridFunction::zeros(setup.space.n_free()))?;
    let weyl = weyl_check(&h0).ok();
    let gamma = estimate_gamma(&setup.space, &setup.m)?;
    let norm = setup.v0_norm()?;
    let radius = cfg.radius.unwrap_or(norm).max(norm);
    let form_bounds = certify_form_bounds(&h, gamma.gamma, radius, cfg.seed)?;

    let mut out = Outcome::default();
    out.fail_if(defect > ORTHONORMALITY_TOL, || format!("eigenvector orthonormality defect {defect:e}"));
    let lam = h.eigenvalues();
    out.summary.push(format!(
        "n_free={} lambda_1={:.10e} lambda_max={:.10e} defect={defect:.2e}",
        lam.len(),
        lam[0],
        lam[lam.len() - 1]
    ));
    out.csv("spectrum.csv", |w| h.write_spectrum_csv(w))?;
    out.json(
        "spectrum.json",
        &SpectrumReport {
            n_free: lam.len(),
            min_eigenvalue: lam[0],
            max_eigenvalue: lam[lam.len() - 1],
            orthonormality_defect: defect,
            v0_l2_norm: norm,
            weyl,
            gamma,
            form_bounds,
        },
    )?;
    Ok(out)
}

fn normalization_failed(rep: &FermiReport) -> bool {
    (rep.trace - rep.n_particles).abs() > rep.tol * rep.n_particles
}

fn fermi(cfg: &RunConfig) -> Result<Outcome> {
    let setup = Setup::new(cfg)?;
    let h = setup.hamiltonian()?;
    let rep = fermi_level(&h, cfg.distribution, cfg.n_particles, cfg.fermi_tol)?;
    let mut out = Outcome::default();
    out.fail_if(normalization_failed(&rep), || {
        format!("trace {} misses N = {} at tolerance {:e}", rep.trace, rep.n_particles, rep.tol)
    });
    out.summary.push(format!(
        "fermi_level={:.12e} trace={:.12e} iterations={}",
        rep.fermi_level, rep.trace, rep.iterations
    ));
    out.json("fermi.json", &rep)?;
    Ok(out)
}

#[derive(Serialize)]
struct DensityReport {
    fermi: FermiReport,
    /// `|Σ m_i ρ_i − N| / N`.
    normalization_defect: f64,
    min_rho: f64,
    max_rho: f64,
}

fn density(cfg: &RunConfig) -> Result<Outcome> {
    let setup = Setup::new(cfg)?;
    let h = setup.hamiltonian()?;
    let d = density_of(&h, cfg.distribution, cfg.n_particles, cfg.fermi_tol)?;
    let lumped = setup.space.lumped();
    let mass: f64 = lumped.iter().zip(d.rho.values()).map(|(m, r)| m * r).sum();
    let defect = (mass - cfg.n_particles).abs() / cfg.n_particles;
    let min_rho = d.rho.values().iter().copied().fold(f64::INFINITY, f64::min);
    let max_rho = d.rho.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut out = Outcome::default();
    out.fail_if(min_rho < 0.0, || format!("negative density {min_rho:e}"));
    // nodal masses differ from the spectral trace only by round-off
    out.fail_if(defect > cfg.fermi_tol + 1e-12, || format!("normalization defect {defect:e}"));
    out.summary.push(format!(
        "fermi_level={:.12e} mass={mass:.12e} min_rho={min_rho:.4e} max_rho={max_rho:.4e}",
        d.fermi_level
    ));
    let x = setup.space.domain().free_coordinates();
    out.csv("density.csv", |w| write_density_csv(w, &x, lumped, d.rho.values()))?;
    out.json(
        "density.json",
        &DensityReport {
            fermi: d.fermi,
            normalization_defect: defect,
            min_rho,
            max_rho,
        },
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct SolveReport {
    n_free: usize,
    iterations: usize,
    residual: f64,
    h_norm: f64,
    norm_bound: f64,
    fermi_level: f64,
    max_step_ratio: f64,
    m_doublings: usize,
    constants: SPConstants,
}

fn solve_sp(cfg: &RunConfig) -> Result<Outcome> {
    let setup = Setup::new(cfg)?;
    let problem = setup.problem(cfg)?;
    let sol = solve_sp_with(&problem, cfg.tol, cfg.max_iter)?;
    let space = &setup.space;

    let mut out = Outcome::default();
    out.summary.push(format!(
        "iterations={} residual={:.3e} |V|_H={:.10e} bound={:.10e} fermi_level={:.10e}",
        sol.trace.iterations(),
        sol.residual,
        sol.h_norm,
        sol.norm_bound,
        sol.fermi_level
    ));
    out.json(
        "solution.json",
        &SolveReport {
            n_free: space.n_free(),
            iterations: sol.trace.iterations(),
            residual: sol.residual,
            h_norm: sol.h_norm,
            norm_bound: sol.norm_bound,
            fermi_level: sol.fermi_level,
            max_step_ratio: sol.trace.max_ratio(),
            m_doublings: sol.m_doublings,
            constants: sol.constants,
        },
    )?;
    out.csv("potential.csv", |w| sol.write_potential_csv(w, space))?;
    out.csv("density.csv", |w| sol.write_csv(w, space))?;
    out.csv("trace.csv", |w| sol.trace.write_csv(w))?;
    Ok(out)
}

#[derive(Serialize)]
struct ConstantsReport {
    radius: f64,
    gamma: GammaEstimate,
    density: LipschitzReport,
    /// Absent without a Dirichlet boundary.
    sp: Option<SPConstants>,
}

fn probe_constants(cfg: &RunConfig) -> Result<Outcome> {
    let setup = Setup::new(cfg)?;
    let radius = match cfg.radius {
        Some(r) => r,
        None => setup.v0_norm()? + 1.0,
    };
    let gamma = estimate_gamma(&setup.space, &setup.m)?;
    let density = lipschitz_probe(
        &setup.space,
        &setup.m,
        cfg.distribution,
        cfg.n_particles,
        radius,
        cfg.cases,
        cfg.seed,
    )?;
    let sp = if cfg.dirichlet == Dirichlet::None {
        None
    } else {
        Some(estimate_constants(&setup.problem(cfg)?, radius)?)
    };

    let mut out = Outcome::default();
    out.fail_if(!density.all_finite(), || "non-finite Lipschitz estimate".into());
    out.fail_if(!density.fermi_in_bracket, || "Fermi level outside the eigenvalue bracket".into());
    out.fail_if(!density.stable, || "Lipschitz ratios unstable under halving".into());
    out.summary.push(format!(
        "gamma={:.6e} L_N={:.6e} L_M={:.6e} L_fermi={:.6e}",
        gamma.gamma, density.worst_ratio_n, density.worst_ratio_m, density.fermi_lipschitz
    ));
    if let Some(c) = &sp {
        out.summary.push(format!("m={:.6e} M={:.6e} contraction={:.6}", c.m, c.big_m, c.contraction));
    }
    out.json(
        "constants.json",
        &ConstantsReport {
            radius,
            gamma,
            density,
            sp,
        },
    )?;
    Ok(out)
}
