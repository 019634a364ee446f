//! `H ∔ V` on the discrete space.
//!
//! The Hamiltonian is the pencil `(K_m + M_L diag(V), M_L)` where `K_m` is the
//! stiffness of `𝔪⁻¹`. It is diagonalized in the `M_L`-orthonormal nodal basis
//! `e_i / √m_i`, where the operator becomes the tridiagonal matrix
//! `A = M_L^{-1/2} K_m M_L^{-1/2} + diag(V)` and multiplication by `W` is
//! `diag(W)`. Resolvents are returned in that basis, so their Frobenius norm is
//! the Hilbert–Schmidt norm on the discrete `L₂`.

use std::io::{self, Write};

use rand::Rng;
use serde::Serialize;

use crate::assembly::{check_len, AssembledSpace, CoefficientField, GridFunction};
use crate::error::{Error, Result};
use crate::linalg::{
    matrix_function, spectral_decompose_auto, Cholesky, Matrix, SpectralDecomposition,
    SymMatrix,
};
use crate::random::{case_rng, gaussian_vec};

#[derive(Debug, Clone)]
pub struct Hamiltonian {
    lumped: Vec<f64>,
    inv_sqrt: Vec<f64>,
    k_m: SymMatrix,
    potential: Vec<f64>,
    spectrum: SpectralDecomposition,
}

/// Builds `H ∔ V` with kinetic coefficient `𝔪⁻¹` and caches its spectrum.
pub fn build_hamiltonian(
    space: &AssembledSpace,
    m_coeff: &CoefficientField,
    v: &GridFunction,
) -> Result<Hamiltonian> {
    let k_m = space.stiffness(&m_coeff.reciprocal())?;
    Hamiltonian::from_parts(space.lumped(), k_m, v.values())
}

impl Hamiltonian {
    /// `K_m` is the kinetic stiffness on the free nodes and `lumped` the nodal
    /// weights.
    pub fn from_parts(lumped: &[f64], k_m: SymMatrix, v: &[f64]) -> Result<Self> {
        check_len(lumped.len(), k_m.dim())?;
        check_len(lumped.len(), v.len())?;
        if let Some(at) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue { at: at as f64 });
        }
        let inv_sqrt: Vec<f64> = lumped.iter().map(|m| 1.0 / m.sqrt()).collect();
        let mut a = k_m.congruence_diag(&inv_sqrt)?.into_matrix();
        for (i, vi) in v.iter().enumerate() {
            a[(i, i)] += vi;
        }
        let spectrum = spectral_decompose_auto(&SymMatrix::new(a)?)?;
        Ok(Self {
            lumped: lumped.to_vec(),
            inv_sqrt,
            k_m,
            potential: v.to_vec(),
            spectrum,
        })
    }

    pub fn dim(&self) -> usize {
        self.lumped.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.eigenvalues()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum.min_eigenvalue()
    }

    /// Spectrum in the orthonormal nodal basis.
    pub fn reduced(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn lumped(&self) -> &[f64] {
        &self.lumped
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn kinetic_stiffness(&self) -> &SymMatrix {
        &self.k_m
    }

    /// Nodal eigenfunction `ψ_k` with `Σ m_i ψ_k(i)² = 1`.
    pub fn eigenfunction(&self, k: usize) -> Vec<f64> {
        let y = self.spectrum.eigenvectors();
        (0..self.dim()).map(|i| self.inv_sqrt[i] * y[(i, k)]).collect()
    }

    /// `max |Ψᵀ M_L Ψ − I|`.
    pub fn mass_orthonormality_defect(&self) -> f64 {
        let n = self.dim();
        let psi: Vec<Vec<f64>> = (0..n).map(|k| self.eigenfunction(k)).collect();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                let g: f64 = (0..n).map(|i| self.lumped[i] * psi[a][i] * psi[b][i]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// `𝔱[ψ] = ψᵀ K_m ψ`.
    pub fn kinetic_form(&self, psi: &[f64]) -> Result<f64> {
        self.k_m.quadratic_form(psi)
    }

    /// `𝔱_V[ψ] = 𝔱[ψ] + Σ m_i V_i ψ_i²`.
    pub fn form(&self, psi: &[f64]) -> Result<f64> {
        let pot: f64 = (0..self.dim())
            .map(|i| self.lumped[i] * self.potential[i] * psi[i] * psi[i])
            .sum();
        Ok(self.kinetic_form(psi)? + pot)
    }

    /// `‖ψ‖²_{L₂}` in the lumped geometry.
    pub fn l2_sq(&self, psi: &[f64]) -> f64 {
        self.lumped.iter().zip(psi).map(|(m, p)| m * p * p).sum()
    }

    /// `(H ∔ V + shift)⁻¹` in the orthonormal nodal basis.
    pub fn resolvent(&self, shift: f64) -> Result<SymMatrix> {
        let lowest = self.min_eigenvalue();
        if !(lowest + shift > 0.0) {
            return Err(Error::ShiftInsideSpectrum { shift, lowest });
        }
        matrix_function(&self.spectrum, |x| 1.0 / (x + shift))
    }

    /// `f(H ∔ V)` in the orthonormal nodal basis.
    pub fn function(&self, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
        matrix_function(&self.spectrum, f)
    }

    /// Writes the spectrum as CSV with header `n,lambda_n`, `n` starting at 1.
    pub fn write_spectrum_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,lambda_n")?;
        for (k, v) in self.eigenvalues().iter().enumerate() {
            writeln!(w, "{},{v:e}", k + 1)?;
        }
        Ok(())
    }
}

/// Multiplication by `W` in the orthonormal nodal basis.
pub fn multiplication_operator(w: &[f64]) -> Result<SymMatrix> {
    SymMatrix::diagonal(w)
}

/// `‖(R_U − R_V) + R_U M_{U−V} R_V‖_HS` at the given shift.
pub fn resolvent_identity_residual(hu: &Hamiltonian, hv: &Hamiltonian, shift: f64) -> Result<f64> {
    check_len(hu.dim(), hv.dim())?;
    let ru = hu.resolvent(shift)?;
    let rv = hv.resolvent(shift)?;
    let diff: Vec<f64> = hu.potential.iter().zip(&hv.potential).map(|(a, b)| a - b).collect();
    let middle = ru.as_matrix().matmul(multiplication_operator(&diff)?.as_matrix())?;
    let product = middle.matmul(rv.as_matrix())?;
    let lhs = ru.sub(&rv)?;
    let n = hu.dim();
    let sq: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (lhs.get(i, j) + product[(i, j)]).powi(2))
        .sum();
    Ok(sq.sqrt())
}

/// Estimate of the relative form-bound constant
/// `γ = c₁⁶ (‖𝔪‖_∞ + 1)³ / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaEstimate {
    /// Largest observed `‖ψ‖_{L₆} / ‖ψ‖_{W^{1,2}}` over the probes.
    pub c1_probe: f64,
    /// Probe value times the safety factor.
    pub c1: f64,
    /// `(max_i (K₁ + M_L)⁻¹_ii)^{1/3}`, an upper bound for the discrete
    /// embedding constant.
    pub c1_upper: f64,
    pub m_sup: f64,
    pub gamma: f64,
}

pub const GAMMA_SAFETY: f64 = 2.0;

pub fn gamma_from_c1(c1: f64, m_sup: f64) -> f64 {
    c1.powi(6) * (m_sup + 1.0).powi(3) / 4.0
}

/// Probe maximization of the discrete `W^{1,2}_D ↪ L₆` constant.
///
/// Probes are Green's functions of `K₁ + M_L`, followed by the fixed-point
/// ascent `ψ ← (K₁ + M_L)⁻¹ M_L ψ⁵` from the best of them.
pub fn estimate_gamma(space: &AssembledSpace, m_coeff: &CoefficientField) -> Result<GammaEstimate> {
    let n = space.n_free();
    let lumped = space.lumped();
    let g = space.k1().add(&SymMatrix::diagonal(lumped)?)?;
    let chol = Cholesky::new(&g)?;
    let ratio = |psi: &[f64]| -> Result<f64> {
        let l6: f64 = lumped.iter().zip(psi).map(|(m, p)| m * p.powi(6)).sum();
        Ok(l6.powf(1.0 / 6.0) / g.quadratic_form(psi)?.sqrt())
    };

    let mut best = 0.0;
    let mut best_psi = vec![1.0; n];
    let mut diag_max: f64 = 0.0;
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let col = chol.solve(&e)?;
        diag_max = diag_max.max(col[i]);
        let r = ratio(&col)?;
        if r > best {
            best = r;
            best_psi = col;
        }
    }
    let mut psi = best_psi;
    for _ in 0..100 {
        let rhs: Vec<f64> = lumped.iter().zip(&psi).map(|(m, p)| m * p.powi(5)).collect();
        let next = chol.solve(&rhs)?;
        let scale = next.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(scale > 0.0 && scale.is_finite()) {
            break;
        }
        psi = next.into_iter().map(|v| v / scale).collect();
        let r = ratio(&psi)?;
        if r <= best * (1.0 + 1e-12) {
            best = best.max(r);
            break;
        }
        best = r;
    }

    let m_sup = m_coeff.upper_bound();
    let c1 = GAMMA_SAFETY * best;
    Ok(GammaEstimate {
        c1_probe: best,
        c1,
        c1_upper: diag_max.cbrt(),
        m_sup,
        gamma: gamma_from_c1(c1, m_sup),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    /// Smallest observed slack of the inequality.
    pub margin: f64,
}

/// Form-bound certificate for potentials in the `L₂` ball of radius `R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormBoundCertificate {
    pub gamma: f64,
    pub radius: f64,
    pub lambda: f64,
    pub checks: Vec<BoundCheck>,
}

impl FormBoundCertificate {
    pub fn new(gamma: f64, radius: f64) -> Self {
        Self {
            gamma,
            radius,
            lambda: 1.0 + gamma * radius.powi(4),
            checks: Vec::new(),
        }
    }

    pub fn min_margin(&self) -> f64 {
        self.checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }
}

/// Number of random probes used by [`verify_form_bounds`].
pub const FORM_PROBES: usize = 200;

/// Verifies the form sandwich, the eigenvalue sandwich against `V = 0`, the
/// comparability `¼(𝔱 + 1) ≤ 𝔱_V + λ` and the resolvent bound
/// `‖(H ∔ V + λ)⁻¹‖ ≤ 4`. Margins are relative to `𝔱[ψ] + ‖ψ‖²`.
pub fn verify_form_bounds(
    hv: &Hamiltonian,
    cert: &FormBoundCertificate,
    seed: u64,
) -> Result<FormBoundCertificate> {
    let r = hv.l2_sq(hv.potential()).sqrt();
    if r > cert.radius * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "potential norm {r} exceeds certificate radius {}",
            cert.radius
        )));
    }
    let lam = cert.lambda;
    let n = hv.dim();
    let h0 = Hamiltonian::from_parts(hv.lumped(), hv.kinetic_stiffness().clone(), &vec![0.0; n])?;

    let mut probes: Vec<Vec<f64>> = (0..n).map(|k| hv.eigenfunction(k)).collect();
    let mut rng = case_rng(seed, 0);
    for p in 0..FORM_PROBES {
        // alternate rough and smooth probes
        let mut psi = gaussian_vec(&mut rng, n);
        if p % 2 == 1 {
            for _ in 0..4 {
                psi = smooth(&psi);
            }
        }
        probes.push(psi);
    }

    let mut lower = f64::INFINITY;
    let mut upper = f64::INFINITY;
    let mut comparable = f64::INFINITY;
    for (idx, psi) in probes.iter().enumerate() {
        let t = hv.kinetic_form(psi)?;
        let tv = hv.form(psi)?;
        let l2 = hv.l2_sq(psi);
        let scale = t + l2;
        if scale == 0.0 {
            continue;
        }
        let checks = [
            ("form lower", (tv - (0.25 * t - lam * l2)) / scale),
            ("form upper", (1.75 * t + lam * l2 - tv) / scale),
            ("comparability", (tv + lam * l2 - 0.25 * (t + l2)) / scale),
        ];
        for (name, m) in checks {
            if m < -1e-12 {
                return Err(Error::BoundViolated {
                    check: name.into(),
                    probe: idx,
                    margin: m,
                });
            }
        }
        lower = lower.min(checks[0].1);
        upper = upper.min(checks[1].1);
        comparable = comparable.min(checks[2].1);
    }

    let mut eig_lower = f64::INFINITY;
    let mut eig_upper = f64::INFINITY;
    for (k, (&l0, &lv)) in h0.eigenvalues().iter().zip(hv.eigenvalues()).enumerate() {
        let scale = 1.0 + l0.abs();
        let lo = (lv - (0.25 * l0 - lam)) / scale;
        let hi = (1.75 * l0 + lam - lv) / scale;
        for (name, m) in [("eigenvalue lower", lo), ("eigenvalue upper", hi)] {
            if m < -1e-12 {
                return Err(Error::BoundViolated {
                    check: name.into(),
                    probe: k,
                    margin: m,
                });
            }
        }
        eig_lower = eig_lower.min(lo);
        eig_upper = eig_upper.min(hi);
    }

    let lowest = hv.min_eigenvalue();
    let resolvent = 4.0 - 1.0 / (lowest + lam);
    if !(lowest + lam > 0.0) || resolvent < -1e-12 {
        return Err(Error::BoundViolated {
            check: "resolvent norm".into(),
            probe: 0,
            margin: resolvent,
        });
    }

    let mut out = cert.clone();
    out.checks = [
        ("form lower", lower),
        ("form upper", upper),
        ("comparability", comparable),
        ("eigenvalue lower", eig_lower),
        ("eigenvalue upper", eig_upper),
        ("resolvent norm", resolvent),
    ]
    .into_iter()
    .map(|(name, margin)| BoundCheck {
        name: name.into(),
        margin,
    })
    .collect();
    Ok(out)
}

fn smooth(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let l = if i > 0 { v[i - 1] } else { 0.0 };
            let r = if i + 1 < n { v[i + 1] } else { 0.0 };
            0.25 * l + 0.5 * v[i] + 0.25 * r
        })
        .collect()
}

/// Certificate for a potential of norm at most `radius`, doubling `γ` until
/// [`verify_form_bounds`] passes (at most 20 times).
pub fn certify_form_bounds(
    hv: &Hamiltonian,
    gamma: f64,
    radius: f64,
    seed: u64,
) -> Result<FormBoundCertificate> {
    let mut gamma = gamma;
    for _ in 0..=20 {
        match verify_form_bounds(hv, &FormBoundCertificate::new(gamma, radius), seed) {
            Err(Error::BoundViolated { .. }) => gamma *= 2.0,
            other => return other,
        }
    }
    Err(Error::AdaptiveLimit { doublings: 20 })
}

/// Largest `|Σ m_i V_i ψ_i²| − ¾(𝔱 + 1)[ψ] − γ‖V‖⁴‖ψ‖²` over random pairs,
/// relative to `(𝔱 + 1)[ψ]`. Nonpositive when the relative form bound holds.
pub fn relative_form_bound_excess(
    space: &AssembledSpace,
    m_coeff: &CoefficientField,
    gamma: f64,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    let k_m = space.stiffness(&m_coeff.reciprocal())?;
    let lumped = space.lumped();
    let n = space.n_free();
    let mut worst = f64::NEG_INFINITY;
    for p in 0..probes {
        let mut rng = case_rng(seed, p as u64);
        let scale_v: f64 = rng.random_range(0.1..20.0);
        let v: Vec<f64> = gaussian_vec(&mut rng, n).into_iter().map(|x| scale_v * x).collect();
        let mut psi = gaussian_vec(&mut rng, n);
        for _ in 0..(p % 6) {
            psi = smooth(&psi);
        }
        let l2 = |u: &[f64]| -> f64 { lumped.iter().zip(u).map(|(m, a)| m * a * a).sum() };
        let lhs: f64 = (0..n).map(|i| lumped[i] * v[i] * psi[i] * psi[i]).sum::<f64>().abs();
        let t1 = k_m.quadratic_form(&psi)? + l2(&psi);
        let rhs = 0.75 * t1 + gamma * l2(&v).powi(2) * l2(&psi);
        worst = worst.max((lhs - rhs) / t1);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylReport {
    /// Least-squares slope of `ln λ_n` against `ln n` for `n ≤ n_free/4`.
    pub exponent: f64,
    /// `min λ_n / n^{2/d}` over `n ≤ n_free/2`.
    pub c_prime: f64,
    /// `Σ_n (λ_n + 1)⁻²` over the whole discrete spectrum.
    pub s4_sum: f64,
    pub fit_count: usize,
    /// `λ_n ≥ c′ n^{2/d}` for all `n ≤ n_free/2`.
    pub lower_bound_holds: bool,
}

/// Weyl-type growth of the `V = 0` spectrum.
pub fn weyl_check(h0: &Hamiltonian) -> Result<WeylReport> {
    let lam = h0.eigenvalues();
    let n = lam.len();
    let power = 2.0;
    let fit: Vec<(f64, f64)> = (1..=(n / 4).max(2).min(n))
        .filter(|&k| lam[k - 1] > 0.0)
        .map(|k| ((k as f64).ln(), lam[k - 1].ln()))
        .collect();
    if fit.len() < 2 {
        return Err(Error::InvalidParameter("too few positive eigenvalues for a fit".into()));
    }
    let m = fit.len() as f64;
    let mx = fit.iter().map(|p| p.0).sum::<f64>() / m;
    let my = fit.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();

    let half = (n / 2).max(1);
    let c_prime = (1..=half)
        .map(|k| lam[k - 1] / (k as f64).powf(power))
        .fold(f64::INFINITY, f64::min);
    let lower_bound_holds = (1..=half).all(|k| lam[k - 1] >= c_prime * (k as f64).powf(power));
    Ok(WeylReport {
        exponent: sxy / sxx,
        c_prime,
        s4_sum: lam.iter().map(|l| (l + 1.0).powi(-2)).sum(),
        fit_count: fit.len(),
        lower_bound_holds,
    })
}

/// `‖(H ∔ V + shift)⁻¹‖_{L₂→L_∞}` on nodal values: the largest `L₂` norm of a
/// row of the nodal resolvent kernel. Empirical only, no continuum claim.
pub fn resolvent_sup_constant(hv: &Hamiltonian, shift: f64) -> Result<f64> {
    let r = hv.resolvent(shift)?;
    let n = hv.dim();
    let inv_sqrt: Vec<f64> = hv.lumped.iter().map(|m| 1.0 / m.sqrt()).collect();
    // nodal kernel G(x_i, x_j) = R_ij / sqrt(m_i m_j)
    let g = Matrix::from_fn(n, n, |i, j| r.get(i, j) * inv_sqrt[i] * inv_sqrt[j]);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let row = g.row(i);
        let l2: f64 = row.iter().zip(&hv.lumped).map(|(v, m)| m * v * v).sum::<f64>().sqrt();
        worst = worst.max(l2);
    }
    Ok(worst)
}

/// Eigenvalues of `(K_m + M_L diag(V), M_L)` through `generalized_eig`, a
/// cross-check for the reduced tridiagonal route.
pub fn pencil_eigenvalues(h: &Hamiltonian) -> Result<Vec<f64>> {
    let k = h.kinetic_stiffness().clone();
    let mut a = k.into_matrix();
    for i in 0..h.dim() {
        a[(i, i)] += h.lumped[i] * h.potential[i];
    }
    let ge = crate::linalg::generalized_eig(&SymMatrix::new(a)?, &SymMatrix::diagonal(&h.lumped)?)?;
    Ok(ge.eigenvalues().to_vec())
}
