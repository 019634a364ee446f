//! Flat TOML run configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use specfun_core::assembly::Dirichlet;
use specfun_core::density::Distribution;
use specfun_core::inequalities::Family;

use crate::error::{CliError, Result};
use crate::grid::{GridSource, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    VerifyBs,
    Spectrum,
    Fermi,
    Density,
    SolveSp,
    ProbeConstants,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Self::VerifyBs,
        Self::Spectrum,
        Self::Fermi,
        Self::Density,
        Self::SolveSp,
        Self::ProbeConstants,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::VerifyBs => "verify-bs",
            Self::Spectrum => "spectrum",
            Self::Fermi => "fermi",
            Self::Density => "density",
            Self::SolveSp => "solve-sp",
            Self::ProbeConstants => "probe-constants",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::ConfigParse(format!("unknown command `{s}`")))
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn tenth() -> f64 {
    0.1
}
fn default_d() -> usize {
    1
}
fn default_cells() -> usize {
    64
}
fn default_dirichlet() -> String {
    "both-ends".into()
}
fn default_distribution() -> String {
    "boltzmann".into()
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    20_000
}
fn default_cases() -> usize {
    100
}
fn default_n_max() -> usize {
    10
}
fn zero_profile() -> String {
    "zero".into()
}

/// Raw file contents. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub command: String,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,

    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_cells")]
    pub n_cells: usize,
    #[serde(default = "default_dirichlet")]
    pub dirichlet: String,

    #[serde(default = "one")]
    pub eps: f64,
    pub eps_values: Option<Vec<f64>>,
    pub eps_lower: Option<f64>,
    pub eps_upper: Option<f64>,
    #[serde(default = "one")]
    pub m: f64,
    pub m_values: Option<Vec<f64>>,
    pub m_lower: Option<f64>,
    pub m_upper: Option<f64>,

    #[serde(default = "default_distribution")]
    pub distribution: String,
    #[serde(default = "one", rename = "N")]
    pub n_particles: f64,

    pub v0_values: Option<Vec<f64>>,
    pub v0_file: Option<PathBuf>,
    #[serde(default = "zero_profile")]
    pub v0_profile: String,
    #[serde(default = "one")]
    pub v0_amplitude: f64,
    #[serde(default = "half")]
    pub v0_center: f64,
    #[serde(default = "tenth")]
    pub v0_width: f64,
    #[serde(default = "one")]
    pub v0_frequency: f64,

    pub q_values: Option<Vec<f64>>,
    pub q_file: Option<PathBuf>,
    #[serde(default = "zero_profile")]
    pub q_profile: String,
    #[serde(default = "one")]
    pub q_amplitude: f64,
    #[serde(default = "half")]
    pub q_center: f64,
    #[serde(default = "tenth")]
    pub q_width: f64,
    #[serde(default = "one")]
    pub q_frequency: f64,

    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_tol")]
    pub fermi_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,

    #[serde(default = "default_cases")]
    pub cases: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    pub families: Option<Vec<String>>,
    pub radius: Option<f64>,
}

/// Element-wise coefficient: constant or per-cell values, with optional
/// declared bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSpec {
    pub constant: f64,
    pub values: Option<Vec<f64>>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Source of the fixed charge `q`.
#[derive(Debug, Clone, PartialEq)]
pub enum ChargeSource {
    /// An `L₂` function embedded as `ι(w)`.
    Function(GridSource),
    /// `q = −ι𝒩(V₀)`, whose solution is `V = 0`.
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub out: PathBuf,
    pub d: usize,
    pub n_cells: usize,
    pub dirichlet: Dirichlet,
    pub eps: CoefficientSpec,
    pub m: CoefficientSpec,
    pub distribution: Distribution,
    pub n_particles: f64,
    pub v0: GridSource,
    pub q: ChargeSource,
    pub tol: f64,
    pub fermi_tol: f64,
    pub max_iter: usize,
    pub cases: usize,
    pub n_max: usize,
    pub families: Vec<Family>,
    pub radius: Option<f64>,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::ConfigParse(format!("`{name}` must be positive and finite, got {x}")))
    }
}

fn resolve(base: &Path, p: &Path) -> Result<PathBuf> {
    let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    if full.is_file() {
        Ok(full)
    } else {
        Err(CliError::MissingFile(full))
    }
}

#[allow(clippy::too_many_arguments)]
fn grid_source(
    base: &Path,
    key: &str,
    values: Option<Vec<f64>>,
    file: Option<PathBuf>,
    profile: &str,
    amplitude: f64,
    center: f64,
    width: f64,
    frequency: f64,
) -> Result<Option<GridSource>> {
    match (values, file) {
        (Some(_), Some(_)) => Err(CliError::ConfigParse(format!(
            "`{key}_values` and `{key}_file` are mutually exclusive"
        ))),
        (Some(v), None) => Ok(Some(GridSource::Inline(v))),
        (None, Some(f)) => Ok(Some(GridSource::File(resolve(base, &f)?))),
        (None, None) => {
            if profile == "fixed-point" {
                return Ok(None);
            }
            let p = match profile {
                "zero" => Profile::Zero,
                "constant" => Profile::Constant { amplitude },
                "gaussian" => Profile::Gaussian { amplitude, center, width },
                "well" => Profile::Well { amplitude, center, width },
                "sine" => Profile::Sine { amplitude, frequency },
                other => return Err(CliError::ConfigParse(format!("unknown `{key}_profile` `{other}`"))),
            };
            if matches!(p, Profile::Gaussian { .. } | Profile::Well { .. }) {
                positive(&format!("{key}_width"), width)?;
            }
            Ok(Some(GridSource::Profile(p)))
        }
    }
}

impl RunConfig {
    /// Parses and validates a configuration. Relative input paths resolve
    /// against `base`; the output directory stays relative to the working
    /// directory.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))?;
        Self::from_raw(raw, base)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(CliError::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_raw(raw: RawConfig, base: &Path) -> Result<Self> {
        let command = Command::parse(&raw.command)?;
        if raw.d != 1 {
            return Err(CliError::ConfigParse(format!("dimension d = {} is not supported; use d = 1", raw.d)));
        }
        if raw.n_cells < 2 {
            return Err(CliError::ConfigParse("`n_cells` must be at least 2".into()));
        }
        let dirichlet = Dirichlet::parse(&raw.dirichlet).map_err(|e| CliError::ConfigParse(e.to_string()))?;
        let distribution =
            Distribution::parse(&raw.distribution).map_err(|e| CliError::ConfigParse(e.to_string()))?;
        positive("N", raw.n_particles)?;
        positive("tol", raw.tol)?;
        positive("fermi_tol", raw.fermi_tol)?;
        positive("eps", raw.eps)?;
        positive("m", raw.m)?;
        if let Some(r) = raw.radius {
            positive("radius", r)?;
        }
        if raw.max_iter == 0 || raw.cases == 0 || raw.n_max == 0 {
            return Err(CliError::ConfigParse("`max_iter`, `cases` and `n_max` must be positive".into()));
        }
        let families = match raw.families {
            Some(names) => names
                .iter()
                .map(|n| Family::parse(n).map_err(|e| CliError::ConfigParse(e.to_string())))
                .collect::<Result<Vec<_>>>()?,
            None => Family::BIRMAN_SOLOMYAK.iter().chain(&Family::RESOLVENT).copied().collect(),
        };
        if families.is_empty() {
            return Err(CliError::ConfigParse("`families` must not be empty".into()));
        }

        let v0 = grid_source(
            base,
            "v0",
            raw.v0_values,
            raw.v0_file,
            &raw.v0_profile,
            raw.v0_amplitude,
            raw.v0_center,
            raw.v0_width,
            raw.v0_frequency,
        )?
        .ok_or_else(|| CliError::ConfigParse("`fixed-point` is only valid for `q_profile`".into()))?;
        let q = grid_source(
            base,
            "q",
            raw.q_values,
            raw.q_file,
            &raw.q_profile,
            raw.q_amplitude,
            raw.q_center,
            raw.q_width,
            raw.q_frequency,
        )?
        .map_or(ChargeSource::FixedPoint, ChargeSource::Function);

        Ok(Self {
            command,
            seed: raw.seed,
            out: raw.out.unwrap_or_else(|| PathBuf::from("out")),
            d: raw.d,
            n_cells: raw.n_cells,
            dirichlet,
            eps: CoefficientSpec {
                constant: raw.eps,
                values: raw.eps_values,
                lower: raw.eps_lower,
                upper: raw.eps_upper,
            },
            m: CoefficientSpec {
                constant: raw.m,
                values: raw.m_values,
                lower: raw.m_lower,
                upper: raw.m_upper,
            },
            distribution,
            n_particles: raw.n_particles,
            v0,
            q,
            tol: raw.tol,
            fermi_tol: raw.fermi_tol,
            max_iter: raw.max_iter,
            cases: raw.cases,
            n_max: raw.n_max,
            families,
            radius: raw.radius,
        })
    }
}
