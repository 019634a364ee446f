//! P1 finite elements on a uniform 1D mesh with mixed boundary conditions.
//!
//! Two mass matrices are kept. The consistent mass `M` defines the
//! `W^{1,2}_D` inner product `J = K₁ + M` and the Poincaré constant. The lumped
//! mass `M_L = diag(m_i)` defines the nodal `L₂` geometry used for potentials,
//! densities and the embedding `ι(w) = M_L w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, generalized_eig, Cholesky, SymMatrix};

/// Nodes carrying a homogeneous Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dirichlet {
    BothEnds,
    LeftOnly,
    RightOnly,
    None,
}

impl Dirichlet {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "both-ends" => Ok(Self::BothEnds),
            "left-only" => Ok(Self::LeftOnly),
            "right-only" => Ok(Self::RightOnly),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidParameter(format!("unknown dirichlet spec `{other}`"))),
        }
    }

    fn left(self) -> bool {
        matches!(self, Self::BothEnds | Self::LeftOnly)
    }

    fn right(self) -> bool {
        matches!(self, Self::BothEnds | Self::RightOnly)
    }
}

/// Uniform mesh of an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    nodes: Vec<f64>,
    dirichlet: Dirichlet,
    free: Vec<usize>,
    h: f64,
}

/// Uniform mesh of `(0, 1)` with `n_cells` elements. Only `d = 1` is
/// supported.
pub fn build_domain(d: usize, n_cells: usize, dirichlet: Dirichlet) -> Result<Domain> {
    if d != 1 {
        return Err(Error::UnsupportedDimension(d));
    }
    Domain::interval(0.0, 1.0, n_cells, dirichlet)
}

impl Domain {
    pub fn interval(a: f64, b: f64, n_cells: usize, dirichlet: Dirichlet) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::InvalidParameter(format!("n_cells = {n_cells} < 2")));
        }
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidParameter(format!("bad interval ({a}, {b})")));
        }
        let h = (b - a) / n_cells as f64;
        let nodes: Vec<f64> = (0..=n_cells).map(|i| a + i as f64 * h).collect();
        let first = usize::from(dirichlet.left());
        let last = if dirichlet.right() { n_cells - 1 } else { n_cells };
        Ok(Self {
            nodes,
            dirichlet,
            free: (first..=last).collect(),
            h,
        })
    }

    pub fn dim(&self) -> usize {
        1
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Global node indices of the free nodes, ascending.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    /// Coordinates of the free nodes.
    pub fn free_coordinates(&self) -> Vec<f64> {
        self.free.iter().map(|&i| self.nodes[i]).collect()
    }

    pub fn dirichlet(&self) -> Dirichlet {
        self.dirichlet
    }

    pub fn has_dirichlet(&self) -> bool {
        self.dirichlet != Dirichlet::None
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.nodes[self.n_cells()] - self.nodes[0]
    }

    /// Free-node position of global node `g`.
    fn local(&self, g: usize) -> Option<usize> {
        let first = self.free[0];
        (g >= first && g - first < self.free.len()).then(|| g - first)
    }

    /// Scatters an element matrix with entries `local[a][b]` for every element
    /// `e` into a free-node matrix.
    fn scatter(&self, element: impl Fn(usize) -> [[f64; 2]; 2]) -> SymMatrix {
        let n = self.n_free();
        let mut out = crate::linalg::Matrix::zeros(n, n);
        for e in 0..self.n_cells() {
            let loc = element(e);
            let idx = [self.local(e), self.local(e + 1)];
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (idx[a], idx[b]) {
                        out[(i, j)] += loc[a][b];
                    }
                }
            }
        }
        SymMatrix::new(out).expect("square")
    }
}

/// Positive scalar coefficient, constant on each element.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    values: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl CoefficientField {
    pub fn constant(domain: &Domain, c: f64) -> Result<Self> {
        Self::new(vec![c; domain.n_cells()], c, c)
    }

    /// Element values with tight bounds.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(values, lower, upper)
    }

    pub fn new(values: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty coefficient field".into()));
        }
        if !(lower > 0.0 && lower.is_finite() && upper.is_finite() && lower <= upper) {
            return Err(Error::InvalidParameter(format!(
                "coefficient bounds [{lower}, {upper}] must be positive and ordered"
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= lower && **v <= upper)) {
            return Err(Error::InvalidParameter(format!(
                "coefficient value {v} outside [{lower}, {upper}]"
            )));
        }
        Ok(Self { values, lower, upper })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    /// Elementwise reciprocal, with bounds swapped accordingly.
    pub fn reciprocal(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| 1.0 / v).collect(),
            lower: 1.0 / self.upper,
            upper: 1.0 / self.lower,
        }
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.values.iter().map(|v| v * s).collect(),
            self.lower * s,
            self.upper * s,
        )
    }
}

/// Nodal values on the free nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridFunction(Vec<f64>);

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(at) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { at: at as f64 });
        }
        Ok(Self(values))
    }

    /// Checks the length against the free-node count of `domain`.
    pub fn on(domain: &Domain, values: Vec<f64>) -> Result<Self> {
        check_len(domain.n_free(), values.len())?;
        Self::new(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn from_fn(domain: &Domain, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(domain.free_coordinates().into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.iter().map(|a| a * s).collect())
    }

    pub fn shift(&self, c: f64) -> Self {
        Self(self.0.iter().map(|a| a + c).collect())
    }
}

impl AsRef<[f64]> for GridFunction {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "expected {expected} free-node values, found {found}"
        )))
    }
}

/// Stiffness matrix of `∫ c u′ v′` on the free nodes.
pub fn assemble(domain: &Domain, coeff: &CoefficientField) -> Result<SymMatrix> {
    if coeff.values.len() != domain.n_cells() {
        return Err(Error::ShapeMismatch(format!(
            "coefficient has {} values for {} elements",
            coeff.values.len(),
            domain.n_cells()
        )));
    }
    let h = domain.h();
    Ok(domain.scatter(|e| {
        let c = coeff.values[e] / h;
        [[c, -c], [-c, c]]
    }))
}

/// Consistent P1 mass matrix on the free nodes.
pub fn mass_matrix(domain: &Domain) -> SymMatrix {
    let d = domain.h() / 3.0;
    let o = domain.h() / 6.0;
    domain.scatter(|_| [[d, o], [o, d]])
}

/// Row-sum lumped mass weights on the free nodes.
pub fn lumped_mass(domain: &Domain) -> Vec<f64> {
    lumped_mass_all(domain)
        .into_iter()
        .enumerate()
        .filter_map(|(g, w)| domain.local(g).map(|_| w))
        .collect()
}

/// Lumped weights on every node, summing to `|Ω|`.
pub fn lumped_mass_all(domain: &Domain) -> Vec<f64> {
    let mut w = vec![0.0; domain.n_nodes()];
    for e in 0..domain.n_cells() {
        w[e] += domain.h() / 2.0;
        w[e + 1] += domain.h() / 2.0;
    }
    w
}

/// Assembled forms of `𝓗 = W^{1,2}_D` together with the nodal `L₂` geometry.
#[derive(Debug, Clone)]
pub struct AssembledSpace {
    domain: Domain,
    mass: SymMatrix,
    lumped: Vec<f64>,
    k1: SymMatrix,
    j: SymMatrix,
    j_chol: Cholesky,
    c_p: Option<f64>,
    embedding_norm: f64,
}

impl AssembledSpace {
    pub fn new(domain: Domain) -> Result<Self> {
        let mass = mass_matrix(&domain);
        let lumped = lumped_mass(&domain);
        let k1 = assemble(&domain, &CoefficientField::constant(&domain, 1.0)?)?;
        let j = k1.add(&mass)?;
        let j_chol = Cholesky::new(&j)?;
        let c_p = if domain.has_dirichlet() {
            let lam = generalized_eig(&k1, &mass)?.eigenvalues()[0];
            (lam > 0.0).then(|| 1.0 / lam)
        } else {
            None
        };
        // ‖ι‖² = max wᵀM_L J⁻¹ M_L w / wᵀM_L w = 1 / λ_min(J, M_L)
        let lam = generalized_eig(&j, &SymMatrix::diagonal(&lumped)?)?.eigenvalues()[0];
        Ok(Self {
            domain,
            mass,
            lumped,
            k1,
            j,
            j_chol,
            c_p,
            embedding_norm: (1.0 / lam).sqrt(),
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn n_free(&self) -> usize {
        self.domain.n_free()
    }

    pub fn mass(&self) -> &SymMatrix {
        &self.mass
    }

    pub fn lumped(&self) -> &[f64] {
        &self.lumped
    }

    pub fn k1(&self) -> &SymMatrix {
        &self.k1
    }

    /// `J = K₁ + M`.
    pub fn duality_matrix(&self) -> &SymMatrix {
        &self.j
    }

    pub fn stiffness(&self, coeff: &CoefficientField) -> Result<SymMatrix> {
        assemble(&self.domain, coeff)
    }

    /// `‖ι‖_{L₂→𝓗*}` for `ι(w) = M_L w`.
    pub fn embedding_norm(&self) -> f64 {
        self.embedding_norm
    }

    pub fn check(&self, v: &[f64]) -> Result<()> {
        check_len(self.n_free(), v.len())
    }

    /// `uᵀ J v`.
    pub fn h_inner(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check(u)?;
        Ok(dot(&self.j.mul_vec(v)?, u))
    }

    pub fn h_norm(&self, u: &[f64]) -> Result<f64> {
        Ok(self.h_inner(u, u)?.max(0.0).sqrt())
    }

    /// Lumped `L₂` inner product `Σ m_i u_i v_i`.
    pub fn l2_inner(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.lumped.iter().zip(u).zip(v).map(|((m, a), b)| m * a * b).sum())
    }

    pub fn l2_norm(&self, u: &[f64]) -> Result<f64> {
        Ok(self.l2_inner(u, u)?.sqrt())
    }

    /// `‖u‖²_M` with the consistent mass.
    pub fn consistent_l2_sq(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        self.mass.quadratic_form(u)
    }
}

/// `c_P = 1 / λ_min(K₁, M)`.
pub fn poincare_constant(space: &AssembledSpace) -> Result<f64> {
    space.c_p.ok_or(Error::NoPoincare)
}

/// `J⁻¹ g`.
pub fn duality_solve(space: &AssembledSpace, g: &[f64]) -> Result<Vec<f64>> {
    space.check(g)?;
    space.j_chol.solve(g)
}

/// `sqrt(gᵀ J⁻¹ g)`.
pub fn dual_norm(space: &AssembledSpace, g: &[f64]) -> Result<f64> {
    space.check(g)?;
    let y = space.j_chol.forward(g)?;
    Ok(dot(&y, &y).sqrt())
}

/// `ι(w) = M_L w`, so that `⟨ι(w), u⟩ = (w, u)_{L₂}`.
pub fn embed_l2_functional(space: &AssembledSpace, w: &[f64]) -> Result<Vec<f64>> {
    space.check(w)?;
    Ok(space.lumped.iter().zip(w).map(|(m, v)| m * v).collect())
}
