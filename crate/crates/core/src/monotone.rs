//! Fixed-step contraction scheme `Qu = u − (m/M²) J⁻¹(Au − q)` for strongly
//! monotone maps on `𝓗 = W^{1,2}_D`.

use std::io::{self, Write};

use serde::Serialize;

use crate::assembly::{dual_norm, duality_solve, AssembledSpace};
use crate::error::{Error, Result};
use crate::linalg::dot;

/// The map `A: 𝓗 → 𝓗*`, nodal values to functional coefficients.
pub type OperatorFn<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync + 'a;

/// `J = K₁ + M` as the duality map of `𝓗`.
#[derive(Clone, Copy)]
pub struct DualityMap<'a> {
    space: &'a AssembledSpace,
}

impl<'a> DualityMap<'a> {
    pub fn new(space: &'a AssembledSpace) -> Self {
        Self { space }
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.space.duality_matrix().mul_vec(u)
    }

    pub fn inverse(&self, g: &[f64]) -> Result<Vec<f64>> {
        duality_solve(self.space, g)
    }
}

pub struct MonotoneProblem<'a> {
    pub space: &'a AssembledSpace,
    pub apply: &'a OperatorFn<'a>,
    /// Monotonicity constant `m`.
    pub m: f64,
    /// Lipschitz constant `M` on the ball.
    pub big_m: f64,
    /// Ball radius `R`.
    pub radius: f64,
    pub q: Vec<f64>,
}

impl MonotoneProblem<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m <= self.big_m && self.big_m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < m <= M, got m = {}, M = {}",
                self.m, self.big_m
            )));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius {} must be positive", self.radius)));
        }
        self.space.check(&self.q)
    }

    /// `√(1 − m²/M²)`.
    pub fn contraction_bound(&self) -> f64 {
        (1.0 - (self.m / self.big_m).powi(2)).max(0.0).sqrt()
    }

    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let au = (self.apply)(u)?;
        self.space.check(&au)?;
        Ok(au.iter().zip(&self.q).map(|(a, b)| a - b).collect())
    }
}

/// `(2/m) ‖A(0) − q‖_*`.
pub fn required_radius(problem: &MonotoneProblem) -> Result<f64> {
    let r0 = problem.residual(&vec![0.0; problem.space.n_free()])?;
    Ok(2.0 / problem.m * dual_norm(problem.space, &r0)?)
}

/// Slack on observed step ratios over the theoretical contraction bound.
pub const RATIO_SLACK: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    /// `‖u_k‖_𝓗`, starting with `u₁ = 0`.
    pub h_norms: Vec<f64>,
    /// `‖A u_k − q‖_*`.
    pub residuals: Vec<f64>,
    /// `‖u_k − u_{k−1}‖ / ‖u_{k−1} − u_{k−2}‖`, aligned with `h_norms`;
    /// `None` for the first two iterates and for round-off sized steps.
    pub ratios: Vec<Option<f64>>,
    pub u: Vec<f64>,
    pub contraction_bound: f64,
    pub required_radius: f64,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.residuals.len() - 1
    }

    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("at least the initial residual")
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn max_h_norm(&self) -> f64 {
        self.h_norms.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with header `k,h_norm,residual,ratio`; the ratio is empty where
    /// undefined.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,h_norm,residual,ratio")?;
        for k in 0..self.residuals.len() {
            let ratio = self.ratios[k].map(|r| format!("{r:e}")).unwrap_or_default();
            writeln!(w, "{},{:e},{:e},{ratio}", k + 1, self.h_norms[k], self.residuals[k])?;
        }
        Ok(())
    }
}

/// Steps below this `𝓗`-norm are round-off and excluded from ratio checks.
const STEP_FLOOR: f64 = 1e-11;

/// Runs the scheme from `u₁ = 0` until `‖Au − q‖_* ≤ tol`.
///
/// Checks every iterate against the ball, every step ratio against
/// `√(1 − m²/M²) + 0.02`, monotonicity of `A` on consecutive iterates and the
/// a priori bound `‖u‖_𝓗 ≤ (1/m) ‖A0 − q‖_*`.
pub fn solve(problem: &MonotoneProblem, tol: f64, max_iter: usize) -> Result<IterationTrace> {
    problem.validate()?;
    let space = problem.space;
    let n = space.n_free();
    let mut u = vec![0.0; n];
    let mut au = (problem.apply)(&u)?;
    space.check(&au)?;
    let mut r: Vec<f64> = au.iter().zip(&problem.q).map(|(a, b)| a - b).collect();
    let r0_norm = dual_norm(space, &r)?;
    let required = 2.0 / problem.m * r0_norm;
    if problem.radius < required {
        return Err(Error::RadiusTooSmall {
            radius: problem.radius,
            required,
        });
    }
    let bound = problem.contraction_bound();
    let step = problem.m / problem.big_m.powi(2);
    let mut trace = IterationTrace {
        h_norms: vec![0.0],
        residuals: vec![r0_norm],
        ratios: vec![None],
        u: Vec::new(),
        contraction_bound: bound,
        required_radius: required,
    };
    let mut prev_step: Option<f64> = None;
    let mut residual = r0_norm;

    while residual > tol {
        let k = trace.residuals.len();
        if k > max_iter {
            return Err(Error::MaxIterExceeded {
                iterations: max_iter,
                residual,
            });
        }
        let dir = duality_solve(space, &r)?;
        let delta: Vec<f64> = dir.iter().map(|d| -step * d).collect();
        let next: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let norm = space.h_norm(&next)?;
        if norm > problem.radius * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::BallEscape {
                iteration: k,
                norm,
                radius: problem.radius,
            });
        }
        let step_norm = space.h_norm(&delta)?;
        let ratio = prev_step
            .filter(|prev| *prev > STEP_FLOOR * (1.0 + norm))
            .map(|prev| step_norm / prev);
        if let Some(ratio) = ratio {
            if ratio > bound + RATIO_SLACK {
                return Err(Error::NonContraction {
                    iteration: k,
                    observed: ratio,
                    bound,
                });
            }
        }
        let a_next = (problem.apply)(&next)?;
        space.check(&a_next)?;
        // ⟨Au − Av, u − v⟩ ≥ m ‖u − v‖²; pairing noise dominates tiny steps
        if step_norm > 1e-6 * (1.0 + norm) {
            let diff: Vec<f64> = a_next.iter().zip(&au).map(|(a, b)| a - b).collect();
            let ratio = dot(&diff, &delta) / (problem.m * step_norm * step_norm);
            if ratio < 1.0 - 1e-6 {
                return Err(Error::MonotonicityViolated { iteration: k, ratio });
            }
        }
        r = a_next.iter().zip(&problem.q).map(|(a, b)| a - b).collect();
        residual = dual_norm(space, &r)?;
        trace.h_norms.push(norm);
        trace.residuals.push(residual);
        trace.ratios.push(ratio);
        prev_step = Some(step_norm);
        u = next;
        au = a_next;
    }

    // the exact solution obeys the bound; the returned iterate is within
    // tol/m of it
    let norm = space.h_norm(&u)?;
    let a_priori = r0_norm / problem.m * (1.0 + 1e-6) + tol / problem.m;
    if norm > a_priori {
        return Err(Error::SolutionBoundViolated { norm, bound: a_priori });
    }
    trace.u = u;
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationBound {
    /// `‖u − ũ‖_𝓗`.
    pub lhs: f64,
    /// `(1/m) ‖q − q̃‖_*`.
    pub rhs: f64,
}

pub fn perturbation_bound(
    space: &AssembledSpace,
    m: f64,
    q: &[f64],
    q_tilde: &[f64],
    u: &[f64],
    u_tilde: &[f64],
) -> Result<PerturbationBound> {
    let dq: Vec<f64> = q.iter().zip(q_tilde).map(|(a, b)| a - b).collect();
    let du: Vec<f64> = u.iter().zip(u_tilde).map(|(a, b)| a - b).collect();
    Ok(PerturbationBound {
        lhs: space.h_norm(&du)?,
        rhs: dual_norm(space, &dq)? / m,
    })
}
