//! Occupation functions, traces, the Fermi level and particle densities.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{AssembledSpace, CoefficientField, GridFunction};
use crate::error::{Error, Result};
use crate::random::{case_rng, gaussian_vec};
use crate::schrodinger::{build_hamiltonian, estimate_gamma, Hamiltonian};

/// Occupation function `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    /// `f(r) = e^{−r}`.
    Boltzmann,
    /// `f(r) = 1 / (1 + e^{r})`.
    FermiDirac,
}

pub fn builtin_distributions() -> [Distribution; 2] {
    [Distribution::Boltzmann, Distribution::FermiDirac]
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Distribution {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "boltzmann" => Ok(Self::Boltzmann),
            "fermi-dirac" | "fermi_dirac" => Ok(Self::FermiDirac),
            other => Err(Error::InvalidParameter(format!("unknown distribution `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Boltzmann => "boltzmann",
            Self::FermiDirac => "fermi-dirac",
        }
    }

    pub fn ln_f(self, r: f64) -> f64 {
        match self {
            Self::Boltzmann => -r,
            Self::FermiDirac => -softplus(r),
        }
    }

    pub fn f(self, r: f64) -> f64 {
        self.ln_f(r).exp()
    }

    pub fn f_prime(self, r: f64) -> f64 {
        match self {
            Self::Boltzmann => -(-r).exp(),
            // f′ = −f(r) f(−r)
            Self::FermiDirac => -(self.ln_f(r) + self.ln_f(-r)).exp(),
        }
    }

    /// Inverse on the range of `f`.
    pub fn f_inverse(self, y: f64) -> Result<f64> {
        match self {
            Self::Boltzmann if y > 0.0 => Ok(-y.ln()),
            Self::FermiDirac if y > 0.0 && y < 1.0 => Ok(((1.0 - y) / y).ln()),
            _ => Err(Error::InvalidParameter(format!(
                "{y} is outside the range of {}",
                self.name()
            ))),
        }
    }

    /// `sup_{r ≥ −λ} (r + λ)^k f(r)`.
    pub fn c_bound(self, k: u32, lambda: f64) -> f64 {
        if k == 0 {
            return self.f(-lambda);
        }
        let kf = f64::from(k);
        match self {
            Self::Boltzmann => (kf * kf.ln() + lambda - kf).exp(),
            Self::FermiDirac => {
                // x = r + λ; k ln x − softplus(x − λ) is concave with its
                // maximizer in (0, max(2k, λ)]
                let h = |x: f64| kf * x.ln() - softplus(x - lambda);
                let (mut a, mut b) = (0.0f64, (2.0 * kf).max(lambda) + 1.0);
                let phi = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..200 {
                    let c = b - phi * (b - a);
                    let d = a + phi * (b - a);
                    if h(c) < h(d) {
                        a = c;
                    } else {
                        b = d;
                    }
                }
                h(0.5 * (a + b)).exp()
            }
        }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln Σ_n f(λ_n − t)`, finite even where the trace itself overflows.
pub fn ln_trace_of(eigenvalues: &[f64], dist: Distribution, t: f64) -> f64 {
    log_sum_exp(eigenvalues.iter().map(|l| dist.ln_f(l - t)))
}

/// `Σ_n f(λ_n − t)` for an explicit spectrum.
pub fn trace_of(eigenvalues: &[f64], dist: Distribution, t: f64) -> Result<f64> {
    let tr = ln_trace_of(eigenvalues, dist, t).exp();
    if tr.is_finite() {
        Ok(tr)
    } else {
        Err(Error::Overflow)
    }
}

/// `tr f(H ∔ V − t)`.
pub fn trace_f(h: &Hamiltonian, dist: Distribution, t: f64) -> Result<f64> {
    trace_of(h.eigenvalues(), dist, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermiReport {
    pub fermi_level: f64,
    pub trace: f64,
    #[serde(rename = "N")]
    pub n_particles: f64,
    pub tol: f64,
    pub iterations: usize,
}

pub const DEFAULT_FERMI_TOL: f64 = 1e-10;
pub const MAX_BISECTION_STEPS: usize = 200;
pub const MAX_BRACKET_DOUBLINGS: usize = 1000;

/// Fermi level for an explicit spectrum: geometric bracket expansion around
/// the median eigenvalue, then bisection until `|trace − N| ≤ tol·N`.
///
/// Bisection also stops when the bracket cannot be split further in floating
/// point; the closest iterate is returned.
pub fn fermi_level_of(eigenvalues: &[f64], dist: Distribution, n: f64, tol: f64) -> Result<FermiReport> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidParameter(format!("particle number {n} must be positive")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let mut sorted = eigenvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let t0 = sorted[sorted.len() / 2];
    let ln_n = n.ln();
    // comparisons run on ln(trace) so that far-off trial shifts cannot overflow
    let excess = |t: f64| ln_trace_of(eigenvalues, dist, t) - ln_n;

    let expand = |dir: f64, want_above: bool| -> Result<f64> {
        let mut step = 1.0;
        for _ in 0..MAX_BRACKET_DOUBLINGS {
            let t = t0 + dir * step;
            if (excess(t) > 0.0) == want_above {
                return Ok(t);
            }
            step *= 2.0;
        }
        Err(Error::BracketFailure {
            doublings: MAX_BRACKET_DOUBLINGS,
        })
    };
    let mut lo = expand(-1.0, false)?;
    let mut hi = expand(1.0, true)?;

    let mut best = (f64::INFINITY, lo, 0.0);
    let mut iterations = 0;
    while iterations < MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let e = excess(mid);
        let value = n * e.exp();
        let err = (value - n).abs();
        if err < best.0 {
            best = (err, mid, value);
        }
        if err <= tol * n {
            break;
        }
        if e < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(FermiReport {
        fermi_level: best.1,
        trace: best.2,
        n_particles: n,
        tol,
        iterations,
    })
}

/// `𝓔(V)`: the unique `t` with `tr f(H ∔ V − t) = N`.
pub fn fermi_level(h: &Hamiltonian, dist: Distribution, n: f64, tol: f64) -> Result<FermiReport> {
    fermi_level_of(h.eigenvalues(), dist, n, tol)
}

/// Nodal density `ρ_i = Σ_n f(λ_n − t) ψ_n(i)²`, i.e. `𝓜(V − t)`.
pub fn density_m(h: &Hamiltonian, dist: Distribution, t: f64) -> GridFunction {
    let weights: Vec<f64> = h.eigenvalues().iter().map(|l| dist.f(l - t)).collect();
    nodal_density(h, &weights)
}

fn nodal_density(h: &Hamiltonian, weights: &[f64]) -> GridFunction {
    let y = h.reduced().eigenvectors();
    let active = weights.iter().rposition(|w| *w > 0.0).map_or(0, |k| k + 1);
    let rho = h
        .lumped()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let row = &y.row(i)[..active];
            row.iter().zip(weights).map(|(v, w)| w * v * v).sum::<f64>() / m
        })
        .collect();
    GridFunction::new(rho).expect("finite weights")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityResult {
    pub rho: GridFunction,
    pub fermi_level: f64,
    pub trace: f64,
    pub occupations: Vec<f64>,
    pub fermi: FermiReport,
}

/// `𝒩(V)` for an already built Hamiltonian.
pub fn density_of(h: &Hamiltonian, dist: Distribution, n: f64, tol: f64) -> Result<DensityResult> {
    let fermi = fermi_level(h, dist, n, tol)?;
    let occupations: Vec<f64> = h
        .eigenvalues()
        .iter()
        .map(|l| dist.f(l - fermi.fermi_level))
        .collect();
    let rho = nodal_density(h, &occupations);
    Ok(DensityResult {
        rho,
        fermi_level: fermi.fermi_level,
        trace: fermi.trace,
        occupations,
        fermi,
    })
}

/// `𝒩(V)`: builds `H ∔ V`, solves for the Fermi level and extracts the
/// density.
pub fn density_n(
    space: &AssembledSpace,
    m_coeff: &CoefficientField,
    dist: Distribution,
    v: &GridFunction,
    n: f64,
    tol: f64,
) -> Result<DensityResult> {
    density_of(&build_hamiltonian(space, m_coeff, v)?, dist, n, tol)
}

/// `(𝒩(U) − 𝒩(V), U − V)_{L₂}`; nonpositive by antimonotonicity.
#[allow(clippy::too_many_arguments)]
pub fn monotonicity_probe(
    space: &AssembledSpace,
    m_coeff: &CoefficientField,
    dist: Distribution,
    u: &GridFunction,
    v: &GridFunction,
    n: f64,
    tol: f64,
) -> Result<f64> {
    let nu = density_n(space, m_coeff, dist, u, n, tol)?.rho;
    let nv = density_n(space, m_coeff, dist, v, n, tol)?.rho;
    space.l2_inner(nu.sub(&nv).values(), u.sub(v).values())
}

/// `(𝓜(U) − 𝓜(V), U − V)_{L₂}`.
pub fn monotonicity_probe_m(
    space: &AssembledSpace,
    m_coeff: &CoefficientField,
    dist: Distribution,
    u: &GridFunction,
    v: &GridFunction,
) -> Result<f64> {
    let mu = density_m(&build_hamiltonian(space, m_coeff, u)?, dist, 0.0);
    let mv = density_m(&build_hamiltonian(space, m_coeff, v)?, dist, 0.0);
    space.l2_inner(mu.sub(&mv).values(), u.sub(v).values())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub cases: usize,
    /// `max ‖𝓜(U) − 𝓜(V)‖ / ‖U − V‖`.
    pub worst_ratio_m: f64,
    /// `max ‖𝒩(U) − 𝒩(V)‖ / ‖U − V‖`.
    pub worst_ratio_n: f64,
    /// `max |𝓔(U) − 𝓔(V)| / ‖U − V‖`.
    pub fermi_lipschitz: f64,
    /// `max |𝓔(V)|` over the sampled potentials.
    pub max_abs_fermi: f64,
    /// Bounds `T̃ ≤ 𝓔(V) ≤ T` from the eigenvalue sandwich.
    pub fermi_bracket: (f64, f64),
    pub fermi_in_bracket: bool,
    /// Ratios at half the perturbation size stay within twice the full-size
    /// ratios.
    pub stable: bool,
    pub gamma: f64,
}

impl LipschitzReport {
    pub fn all_finite(&self) -> bool {
        [
            self.worst_ratio_m,
            self.worst_ratio_n,
            self.fermi_lipschitz,
            self.max_abs_fermi,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

struct CaseProbe {
    ratio_m: f64,
    ratio_n: f64,
    fermi_ratio: f64,
    abs_fermi: f64,
    fermi: [f64; 2],
    stable: bool,
}

/// Random-pair probe of the density Lipschitz constants inside the `L₂` ball
/// of radius `radius`.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_probe(
    space: &AssembledSpace,
    m_coeff: &CoefficientField,
    dist: Distribution,
    n: f64,
    radius: f64,
    cases: usize,
    seed: u64,
) -> Result<LipschitzReport> {
    if !(radius > 0.0) || cases == 0 {
        return Err(Error::InvalidParameter("radius and cases must be positive".into()));
    }
    let tol = 1e-13;
    let nf = space.n_free();
    let gamma = estimate_gamma(space, m_coeff)?.gamma;
    let lam = 1.0 + gamma * radius.powi(4);
    let h0 = build_hamiltonian(space, m_coeff, &GridFunction::zeros(nf))?;
    let low: Vec<f64> = h0.eigenvalues().iter().map(|l| 0.25 * l - lam).collect();
    let high: Vec<f64> = h0.eigenvalues().iter().map(|l| 1.75 * l + lam).collect();
    let bracket = (
        fermi_level_of(&low, dist, n, tol)?.fermi_level,
        fermi_level_of(&high, dist, n, tol)?.fermi_level,
    );

    let sample = |rng: &mut rand_chacha::ChaCha8Rng, r: f64| -> Result<GridFunction> {
        let g = GridFunction::new(gaussian_vec(rng, nf))?;
        let norm = space.l2_norm(g.values())?;
        Ok(g.scale(r / norm))
    };

    let probes: Vec<CaseProbe> = (0..cases)
        .into_par_iter()
        .map(|c| -> Result<CaseProbe> {
            let mut rng = case_rng(seed, c as u64);
            let r: f64 = radius * rng.random_range(0.0..0.9);
            let u = sample(&mut rng, r)?;
            let delta = radius * 0.1 * rng.random_range(0.01..1.0);
            let dir = sample(&mut rng, 1.0)?;
            let v = u.add(&dir.scale(delta));
            let half = u.add(&dir.scale(0.5 * delta));

            let hu = build_hamiltonian(space, m_coeff, &u)?;
            let hv = build_hamiltonian(space, m_coeff, &v)?;
            let hh = build_hamiltonian(space, m_coeff, &half)?;
            let (du, dv, dh) = (
                density_of(&hu, dist, n, tol)?,
                density_of(&hv, dist, n, tol)?,
                density_of(&hh, dist, n, tol)?,
            );
            let (mu, mv, mh) = (
                density_m(&hu, dist, 0.0),
                density_m(&hv, dist, 0.0),
                density_m(&hh, dist, 0.0),
            );
            let rm = space.l2_norm(mu.sub(&mv).values())? / delta;
            let rn = space.l2_norm(du.rho.sub(&dv.rho).values())? / delta;
            let rm_half = space.l2_norm(mu.sub(&mh).values())? / (0.5 * delta);
            let rn_half = space.l2_norm(du.rho.sub(&dh.rho).values())? / (0.5 * delta);
            Ok(CaseProbe {
                ratio_m: rm,
                ratio_n: rn,
                fermi_ratio: (du.fermi_level - dv.fermi_level).abs() / delta,
                abs_fermi: du.fermi_level.abs().max(dv.fermi_level.abs()),
                fermi: [du.fermi_level, dv.fermi_level],
                stable: rm_half <= 2.0 * rm + 1e-12 && rn_half <= 2.0 * rn + 1e-12,
            })
        })
        .collect::<Result<_>>()?;

    let slack = 1e-9 * (1.0 + bracket.0.abs().max(bracket.1.abs()));
    Ok(LipschitzReport {
        cases,
        worst_ratio_m: probes.iter().map(|p| p.ratio_m).fold(0.0, f64::max),
        worst_ratio_n: probes.iter().map(|p| p.ratio_n).fold(0.0, f64::max),
        fermi_lipschitz: probes.iter().map(|p| p.fermi_ratio).fold(0.0, f64::max),
        max_abs_fermi: probes.iter().map(|p| p.abs_fermi).fold(0.0, f64::max),
        fermi_bracket: bracket,
        fermi_in_bracket: probes
            .iter()
            .flat_map(|p| p.fermi)
            .all(|e| e >= bracket.0 - slack && e <= bracket.1 + slack),
        stable: probes.iter().all(|p| p.stable),
        gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuclearityCheck {
    pub k: u32,
    /// `Σ_n (λ_n + λ)^k f(λ_n)`.
    pub lhs: f64,
    /// `(Σ_n (λ_n + λ)⁻²) · sup_{r ≥ −λ} (r + λ)^{k+2} f(r)`.
    pub rhs: f64,
}

/// Nuclearity chain `Σ (λ_n+λ)^k f(λ_n) ≤ ‖(H ∔ V + λ)⁻²‖_{𝒮₁} c_{k+2}`.
pub fn nuclearity_check(h: &Hamiltonian, dist: Distribution, lambda: f64, k: u32) -> Result<NuclearityCheck> {
    let lowest = h.min_eigenvalue();
    if !(lowest + lambda > 0.0) {
        return Err(Error::ShiftInsideSpectrum { shift: lambda, lowest });
    }
    let lhs = h
        .eigenvalues()
        .iter()
        .map(|l| (l + lambda).powi(k as i32) * dist.f(*l))
        .sum();
    let s1: f64 = h.eigenvalues().iter().map(|l| (l + lambda).powi(-2)).sum();
    Ok(NuclearityCheck {
        k,
        lhs,
        rhs: s1 * dist.c_bound(k + 2, lambda),
    })
}

/// Writes `x,m,rho` rows for the free nodes.
pub fn write_density_csv<W: Write>(
    mut w: W,
    coordinates: &[f64],
    lumped: &[f64],
    rho: &[f64],
) -> io::Result<()> {
    writeln!(w, "x,m,rho")?;
    for ((x, m), r) in coordinates.iter().zip(lumped).zip(rho) {
        writeln!(w, "{x:e},{m:e},{r:e}")?;
    }
    Ok(())
}
