//! Hilbert–Schmidt Lipschitz estimates for functions of symmetric matrices.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hs_norm, matrix_function, spectral_decompose, SpectralDecomposition, SymMatrix};
use crate::random::{case_rng, random_symmetric, random_with_spectrum};

/// Tolerance on `lhs / rhs` for all inequality checks.
pub const RATIO_TOL: f64 = 1e-9;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A function together with a declared Lipschitz constant.
#[derive(Clone)]
pub struct LipschitzFunction {
    name: String,
    lipschitz: f64,
    f: RealFn,
}

impl fmt::Debug for LipschitzFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzFunction")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl LipschitzFunction {
    pub fn new(name: impl Into<String>, lipschitz: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            lipschitz,
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn linear(c: f64) -> Self {
        Self::new(format!("{c}*x"), c.abs(), move |x| c * x)
    }

    pub fn abs() -> Self {
        Self::new("abs", 1.0, f64::abs)
    }

    /// Clamp to `[−1, 1]`.
    pub fn clamp() -> Self {
        Self::new("clamp", 1.0, |x| x.clamp(-1.0, 1.0))
    }

    pub fn soft_threshold(tau: f64) -> Self {
        Self::new(format!("soft-threshold({tau})"), 1.0, move |x| {
            x.signum() * (x.abs() - tau).max(0.0)
        })
    }

    /// Linear interpolation through `(xs[i], ys[i])`, extended with the end
    /// slopes. `L` is the largest absolute slope.
    pub fn piecewise_linear(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() || xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "piecewise-linear needs at least two strictly increasing breakpoints".into(),
            ));
        }
        let slopes: Vec<f64> = (0..xs.len() - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let l = slopes.iter().fold(0.0f64, |a, s| a.max(s.abs()));
        Ok(Self::new("piecewise-linear", l, move |x| {
            let i = xs.partition_point(|b| *b <= x).clamp(1, xs.len() - 1) - 1;
            ys[i] + slopes[i] * (x - xs[i])
        }))
    }

    /// Sampled check of `|f(x) − f(y)| ≤ L|x − y| + 1e−12` on `[lo, hi]`.
    pub fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        let samples = 256;
        let xs: Vec<f64> = (0..=samples)
            .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
            .collect();
        let fx: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        let mut observed: f64 = 0.0;
        let mut violated = false;
        for i in 0..xs.len() {
            for j in (i + 1)..xs.len() {
                let dx = xs[j] - xs[i];
                let df = (fx[j] - fx[i]).abs();
                if df > self.lipschitz * dx * (1.0 + 1e-12) + 1e-12 {
                    violated = true;
                }
                if dx > 0.0 {
                    observed = observed.max(df / dx);
                }
            }
        }
        if violated || fx.iter().any(|v| !v.is_finite()) {
            return Err(Error::LipschitzViolated {
                name: self.name.clone(),
                declared: self.lipschitz,
                observed,
            });
        }
        Ok(())
    }
}

/// `g` on `[ρ, ∞)` with `L_res = sup (x + λ)² |g′(x)|`.
#[derive(Clone)]
pub struct ResolventTestFunction {
    name: String,
    g: RealFn,
    g_prime: RealFn,
    rho: f64,
    lambda: f64,
    l_res: f64,
}

impl fmt::Debug for ResolventTestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResolventTestFunction")
            .field("name", &self.name)
            .field("rho", &self.rho)
            .field("lambda", &self.lambda)
            .field("l_res", &self.l_res)
            .finish()
    }
}

impl ResolventTestFunction {
    pub fn new(
        name: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rho: f64,
        lambda: f64,
        l_res: f64,
    ) -> Result<Self> {
        if !(lambda + rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need lambda + rho > 0, got lambda = {lambda}, rho = {rho}"
            )));
        }
        let t = Self {
            name: name.into(),
            g: Arc::new(g),
            g_prime: Arc::new(g_prime),
            rho,
            lambda,
            l_res,
        };
        t.validate()?;
        Ok(t)
    }

    /// `g(x) = e^{−x}`.
    pub fn exp_decay(rho: f64, lambda: f64) -> Result<Self> {
        let peak = 2.0 - lambda;
        let l_res = if peak >= rho {
            4.0 * (lambda - 2.0).exp()
        } else {
            (rho + lambda).powi(2) * (-rho).exp()
        };
        Self::new("exp(-x)", |x| (-x).exp(), |x| -(-x).exp(), rho, lambda, l_res)
    }

    /// `g(x) = 1/(x + λ)`, the resolvent itself.
    pub fn resolvent(rho: f64, lambda: f64) -> Result<Self> {
        Self::new(
            "1/(x+lambda)",
            move |x| 1.0 / (x + lambda),
            move |x| -1.0 / (x + lambda).powi(2),
            rho,
            lambda,
            1.0,
        )
    }

    /// `g(x) = x e^{−x}`.
    pub fn x_exp(rho: f64, lambda: f64) -> Result<Self> {
        // critical points of (x+λ)²|1−x|e^{−x} solve x² − (4−λ)x − (2λ−2) = 0
        let h = |x: f64| (x + lambda).powi(2) * (1.0 - x).abs() * (-x).exp();
        let b = 4.0 - lambda;
        let disc = b * b + 4.0 * (2.0 * lambda - 2.0);
        let mut candidates = vec![rho];
        if disc >= 0.0 {
            candidates.push(0.5 * (b + disc.sqrt()));
            candidates.push(0.5 * (b - disc.sqrt()));
        }
        let l_res = candidates
            .into_iter()
            .filter(|x| *x >= rho)
            .map(h)
            .fold(0.0, f64::max);
        Self::new(
            "x*exp(-x)",
            |x| x * (-x).exp(),
            |x| (1.0 - x) * (-x).exp(),
            rho,
            lambda,
            l_res,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn l_res(&self) -> f64 {
        self.l_res
    }

    pub fn g(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    /// Sampled check of `(x + λ)² |g′(x)| ≤ L_res + 1e−12` on a geometric
    /// grid over `[ρ, ρ + 10⁶]`.
    pub fn validate(&self) -> Result<()> {
        let mut observed: f64 = 0.0;
        for i in 0..=4000 {
            let x = self.rho + (10f64.powf(-6.0 + 12.0 * i as f64 / 4000.0) - 1e-6);
            let v = (x + self.lambda).powi(2) * (self.g_prime)(x).abs();
            observed = observed.max(v);
        }
        if observed > self.l_res + 1e-12 {
            return Err(Error::LipschitzViolated {
                name: self.name.clone(),
                declared: self.l_res,
                observed,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRecord {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, or 0 when `rhs = 0`.
    pub ratio: f64,
}

impl GapRecord {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
        }
    }
}

fn check_dims(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        })
    }
}

fn spectral_range(da: &SpectralDecomposition, db: &SpectralDecomposition) -> (f64, f64) {
    (
        da.min_eigenvalue().min(db.min_eigenvalue()),
        da.max_eigenvalue().max(db.max_eigenvalue()),
    )
}

fn hs_diff(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    hs_norm(&a.sub(b)?)
}

/// `‖f(A) − f(B)‖_HS` against `L ‖A − B‖_HS`, with `L` checked on the joint
/// spectral range widened by 1.
pub fn bs_gap(a: &SymMatrix, b: &SymMatrix, f: &LipschitzFunction) -> Result<GapRecord> {
    check_dims(a, b)?;
    let da = spectral_decompose(a)?;
    let db = spectral_decompose(b)?;
    let (lo, hi) = spectral_range(&da, &db);
    f.validate(lo - 1.0, hi + 1.0)?;
    bs_gap_from(a, b, &da, &db, f)
}

fn bs_gap_from(
    a: &SymMatrix,
    b: &SymMatrix,
    da: &SpectralDecomposition,
    db: &SpectralDecomposition,
    f: &LipschitzFunction,
) -> Result<GapRecord> {
    let fa = matrix_function(da, |x| f.eval(x))?;
    let fb = matrix_function(db, |x| f.eval(x))?;
    Ok(GapRecord::new(hs_diff(&fa, &fb)?, f.lipschitz() * hs_diff(a, b)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParsevalRecord {
    /// `Σ_{α,β} (f(λ_α) − f(μ_β))² (u_α · v_β)²`.
    pub sum: f64,
    /// `‖f(A) − f(B)‖²_HS`.
    pub hs_sq: f64,
}

impl ParsevalRecord {
    /// `|sum − hs_sq| / (1 + hs_sq)`.
    pub fn relative_residual(&self) -> f64 {
        (self.sum - self.hs_sq).abs() / (1.0 + self.hs_sq)
    }
}

pub fn parseval_double_sum(a: &SymMatrix, b: &SymMatrix, f: &LipschitzFunction) -> Result<ParsevalRecord> {
    check_dims(a, b)?;
    let da = spectral_decompose(a)?;
    let db = spectral_decompose(b)?;
    parseval_from(&da, &db, f)
}

fn parseval_from(
    da: &SpectralDecomposition,
    db: &SpectralDecomposition,
    f: &LipschitzFunction,
) -> Result<ParsevalRecord> {
    let overlap = da.eigenvectors().transpose().matmul(db.eigenvectors())?;
    let fa: Vec<f64> = da.eigenvalues().iter().map(|&x| f.eval(x)).collect();
    let fb: Vec<f64> = db.eigenvalues().iter().map(|&x| f.eval(x)).collect();
    let mut sum = 0.0;
    for (alpha, fa_alpha) in fa.iter().enumerate() {
        for (beta, fb_beta) in fb.iter().enumerate() {
            sum += (fa_alpha - fb_beta).powi(2) * overlap[(alpha, beta)].powi(2);
        }
    }
    let fam = matrix_function(da, |x| f.eval(x))?;
    let fbm = matrix_function(db, |x| f.eval(x))?;
    Ok(ParsevalRecord {
        sum,
        hs_sq: hs_diff(&fam, &fbm)?.powi(2),
    })
}

fn check_lower_bound(d: &SpectralDecomposition, rho: f64) -> Result<()> {
    let lowest = d.min_eigenvalue();
    if lowest < rho - 1e-12 {
        Err(Error::LowerBoundViolated { eigenvalue: lowest, rho })
    } else {
        Ok(())
    }
}

fn resolvent_difference(da: &SpectralDecomposition, db: &SpectralDecomposition, lambda: f64) -> Result<f64> {
    let ra = matrix_function(da, |x| 1.0 / (x + lambda))?;
    let rb = matrix_function(db, |x| 1.0 / (x + lambda))?;
    hs_diff(&ra, &rb)
}

/// `‖g(A) − g(B)‖_HS` against `L_res ‖(A + λ)⁻¹ − (B + λ)⁻¹‖_HS`.
pub fn resolvent_gap(a: &SymMatrix, b: &SymMatrix, t: &ResolventTestFunction) -> Result<GapRecord> {
    check_dims(a, b)?;
    let da = spectral_decompose(a)?;
    let db = spectral_decompose(b)?;
    check_lower_bound(&da, t.rho)?;
    check_lower_bound(&db, t.rho)?;
    let ga = matrix_function(&da, |x| t.g(x))?;
    let gb = matrix_function(&db, |x| t.g(x))?;
    let lhs = hs_diff(&ga, &gb)?;
    Ok(GapRecord::new(lhs, t.l_res * resolvent_difference(&da, &db, t.lambda)?))
}

/// `g(x) = f(1/(x + λ))` with `f` Lipschitz on `(0, 1/(ρ + λ)]`:
/// `‖g(A) − g(B)‖_HS` against `L ‖(A + λ)⁻¹ − (B + λ)⁻¹‖_HS`.
pub fn resolvent_lipschitz_gap(
    a: &SymMatrix,
    b: &SymMatrix,
    rho: f64,
    lambda: f64,
    f: &LipschitzFunction,
) -> Result<GapRecord> {
    check_dims(a, b)?;
    if !(lambda + rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need lambda + rho > 0, got lambda = {lambda}, rho = {rho}"
        )));
    }
    let da = spectral_decompose(a)?;
    let db = spectral_decompose(b)?;
    check_lower_bound(&da, rho)?;
    check_lower_bound(&db, rho)?;
    f.validate(0.0, 1.0 / (rho + lambda))?;
    let g = |x: f64| f.eval(1.0 / (x + lambda));
    let lhs = hs_diff(&matrix_function(&da, g)?, &matrix_function(&db, g)?)?;
    Ok(GapRecord::new(lhs, f.lipschitz() * resolvent_difference(&da, &db, lambda)?))
}

/// Function families for [`random_pair_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Abs,
    Clamp,
    SoftThreshold,
    PiecewiseLinear,
    /// `f(x) = c x`, which saturates the inequality.
    Linear,
    /// Resolvent corollary with `g(x) = e^{−x}`.
    ExpDecay,
    /// Resolvent corollary with `g(x) = 1/(x + λ)`.
    Resolvent,
    /// Resolvent corollary with `g(x) = x e^{−x}`.
    XExp,
    /// Resolvent theorem with `f(t) = t²`.
    Square,
}

impl Family {
    pub const BIRMAN_SOLOMYAK: [Family; 4] =
        [Family::Abs, Family::Clamp, Family::SoftThreshold, Family::PiecewiseLinear];
    pub const RESOLVENT: [Family; 3] = [Family::ExpDecay, Family::Resolvent, Family::XExp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Abs => "abs",
            Self::Clamp => "clamp",
            Self::SoftThreshold => "soft-threshold",
            Self::PiecewiseLinear => "piecewise-linear",
            Self::Linear => "linear",
            Self::ExpDecay => "exp-decay",
            Self::Resolvent => "resolvent",
            Self::XExp => "x-exp",
            Self::Square => "square",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            Self::Abs,
            Self::Clamp,
            Self::SoftThreshold,
            Self::PiecewiseLinear,
            Self::Linear,
            Self::ExpDecay,
            Self::Resolvent,
            Self::XExp,
            Self::Square,
        ]
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown function family `{s}`")))
    }

    fn is_resolvent(self) -> bool {
        matches!(self, Self::ExpDecay | Self::Resolvent | Self::XExp | Self::Square)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub family: String,
    pub cases: usize,
    pub worst_ratio: f64,
    /// Case index whose stream produced the worst ratio.
    pub worst_seed: u64,
    pub tolerance: f64,
    /// Largest relative Parseval residual (Birman–Solomyak families only).
    pub worst_parseval_residual: f64,
    /// Smallest ratio over cases with `rhs > 0`.
    pub min_ratio: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.worst_ratio <= 1.0 + self.tolerance
    }
}

struct CaseOutcome {
    ratio: f64,
    rhs: f64,
    parseval: f64,
}

fn random_pair<R: Rng>(rng: &mut R, n: usize) -> (SymMatrix, SymMatrix) {
    let scale: f64 = 10f64.powf(rng.random_range(-1.0..1.0));
    let a = random_symmetric(rng, n, scale);
    let b = match rng.random_range(0..3) {
        0 => random_symmetric(rng, n, scale),
        1 => {
            let eps: f64 = 10f64.powf(rng.random_range(-4.0..0.0));
            a.add(&random_symmetric(rng, n, scale * eps)).expect("same dimension")
        }
        _ => {
            // shared eigenbasis
            let da = spectral_decompose(&a).expect("finite");
            let shifts: Vec<f64> = (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
            let values: Vec<f64> = da.eigenvalues().iter().zip(&shifts).map(|(l, s)| l + s).collect();
            let q = da.eigenvectors();
            crate::linalg::SymMatrix::diagonal(&values)
                .and_then(|d| d.conjugate(q))
                .expect("square")
        }
    };
    (a, b)
}

fn random_piecewise<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> LipschitzFunction {
    let k = rng.random_range(2..8);
    let gaps: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = gaps.iter().sum();
    let width = (hi - lo).max(1e-3);
    let xs: Vec<f64> = gaps
        .iter()
        .scan(lo, |x, g| {
            let at = *x;
            *x += width * g / total;
            Some(at)
        })
        .collect();
    let ys: Vec<f64> = xs.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
    LipschitzFunction::piecewise_linear(xs, ys).expect("sorted breakpoints")
}

fn lower_bounded<R: Rng>(rng: &mut R, n: usize, rho: f64) -> SymMatrix {
    let width: f64 = rng.random_range(0.5..6.0);
    let values: Vec<f64> = (0..n).map(|_| rho + rng.random_range(0.0..width)).collect();
    random_with_spectrum(rng, &values)
}

fn run_case(family: Family, n_max: usize, seed: u64, index: u64) -> Result<CaseOutcome> {
    let mut rng = case_rng(seed, index);
    let n = rng.random_range(1..=n_max);
    if family.is_resolvent() {
        let rho: f64 = rng.random_range(-2.0..2.0);
        let lambda = -rho + rng.random_range(0.1..3.0);
        let a = lower_bounded(&mut rng, n, rho);
        let b = if rng.random_bool(0.5) {
            lower_bounded(&mut rng, n, rho)
        } else {
            // nearby pair, kept above ρ
            let eps: f64 = 10f64.powf(rng.random_range(-4.0..-1.0));
            let p = lower_bounded(&mut rng, n, 0.0);
            a.add(&p.scale(eps)).expect("same dimension")
        };
        let rec = match family {
            Family::ExpDecay => resolvent_gap(&a, &b, &ResolventTestFunction::exp_decay(rho, lambda)?)?,
            Family::Resolvent => resolvent_gap(&a, &b, &ResolventTestFunction::resolvent(rho, lambda)?)?,
            Family::XExp => resolvent_gap(&a, &b, &ResolventTestFunction::x_exp(rho, lambda)?)?,
            _ => {
                let l = 2.0 / (rho + lambda);
                resolvent_lipschitz_gap(&a, &b, rho, lambda, &LipschitzFunction::new("t^2", l, |t| t * t))?
            }
        };
        return Ok(CaseOutcome {
            ratio: rec.ratio,
            rhs: rec.rhs,
            parseval: 0.0,
        });
    }

    let (a, b) = if family == Family::Linear {
        // independent pairs: reconstruction round-off is relative to ‖A‖
        (random_symmetric(&mut rng, n, 1.0), random_symmetric(&mut rng, n, 1.0))
    } else {
        random_pair(&mut rng, n)
    };
    let da = spectral_decompose(&a)?;
    let db = spectral_decompose(&b)?;
    let (lo, hi) = spectral_range(&da, &db);
    let f = match family {
        Family::Abs => LipschitzFunction::abs(),
        Family::Clamp => LipschitzFunction::clamp(),
        Family::SoftThreshold => LipschitzFunction::soft_threshold(rng.random_range(0.0..1.0)),
        Family::PiecewiseLinear => random_piecewise(&mut rng, lo, hi),
        _ => LipschitzFunction::linear(rng.random_range(-3.0..3.0)),
    };
    f.validate(lo - 1.0, hi + 1.0)?;
    let rec = bs_gap_from(&a, &b, &da, &db, &f)?;
    let parseval = parseval_from(&da, &db, &f)?.relative_residual();
    Ok(CaseOutcome {
        ratio: rec.ratio,
        rhs: rec.rhs,
        parseval,
    })
}

/// Runs `cases` random pairs of dimension `1..=n_max`. Case `i` draws from
/// its own stream, so the report depends only on the arguments.
pub fn random_pair_suite(n_max: usize, cases: usize, family: Family, seed: u64) -> Result<SuiteReport> {
    if cases == 0 || n_max == 0 {
        return Err(Error::InvalidParameter("cases and n_max must be positive".into()));
    }
    let outcomes: Vec<CaseOutcome> = (0..cases as u64)
        .into_par_iter()
        .map(|i| run_case(family, n_max, seed, i))
        .collect::<Result<_>>()?;
    let mut worst = (f64::NEG_INFINITY, 0u64);
    let mut min_ratio = f64::INFINITY;
    for (i, o) in outcomes.iter().enumerate() {
        if o.ratio > worst.0 {
            worst = (o.ratio, i as u64);
        }
        if o.rhs > 0.0 {
            min_ratio = min_ratio.min(o.ratio);
        }
    }
    Ok(SuiteReport {
        family: family.name().into(),
        cases,
        worst_ratio: worst.0,
        worst_seed: worst.1,
        tolerance: RATIO_TOL,
        worst_parseval_residual: outcomes.iter().map(|o| o.parseval).fold(0.0, f64::max),
        min_ratio,
    })
}
