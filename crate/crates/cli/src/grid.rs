//! Grid functions from inline values, CSV files or named profiles.

use std::io::Write;
use std::path::{Path, PathBuf};

use specfun_core::assembly::{Domain, GridFunction};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Zero,
    Constant { amplitude: f64 },
    /// `a exp(−(x − c)²/(2w²))`.
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// `a` on `|x − c| < w`, zero elsewhere.
    Well { amplitude: f64, center: f64, width: f64 },
    /// `a sin(k π x)`.
    Sine { amplitude: f64, frequency: f64 },
}

impl Profile {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { amplitude } => amplitude,
            Self::Gaussian { amplitude, center, width } => {
                amplitude * (-(x - center).powi(2) / (2.0 * width * width)).exp()
            }
            Self::Well { amplitude, center, width } => {
                if (x - center).abs() < width {
                    amplitude
                } else {
                    0.0
                }
            }
            Self::Sine { amplitude, frequency } => amplitude * (frequency * std::f64::consts::PI * x).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridSource {
    Inline(Vec<f64>),
    /// CSV whose last column holds the free-node values; a header row is
    /// optional.
    File(PathBuf),
    Profile(Profile),
}

fn checked(values: Vec<f64>, expected: usize, origin: &str) -> Result<GridFunction> {
    if values.len() != expected {
        return Err(CliError::CountMismatch {
            origin: origin.to_string(),
            expected,
            found: values.len(),
        });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(CliError::NonFiniteValue {
            origin: origin.to_string(),
            index,
        });
    }
    Ok(GridFunction::new(values)?)
}

fn read_csv(path: &Path) -> Result<Vec<f64>> {
    if !path.is_file() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::ConfigParse(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::ConfigParse(format!("{}: {e}", path.display())))?;
        let Some(field) = record.iter().next_back().filter(|f| !f.is_empty()) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if row == 0 => {}
            Err(_) => {
                return Err(CliError::ConfigParse(format!(
                    "{}: row {} is not a number: `{field}`",
                    path.display(),
                    row + 1
                )))
            }
        }
    }
    Ok(values)
}

/// Values on the free nodes of `domain`.
pub fn load_grid_function(source: &GridSource, domain: &Domain) -> Result<GridFunction> {
    let n = domain.n_free();
    match source {
        GridSource::Inline(values) => checked(values.clone(), n, "inline values"),
        GridSource::File(path) => checked(read_csv(path)?, n, &path.display().to_string()),
        GridSource::Profile(p) => {
            let values: Vec<f64> = domain.free_coordinates().into_iter().map(|x| p.eval(x)).collect();
            checked(values, n, "profile")
        }
    }
}

/// CSV with header `x,value`, readable by [`load_grid_function`].
pub fn write_grid_function<W: Write>(mut w: W, domain: &Domain, f: &GridFunction) -> Result<()> {
    writeln!(w, "x,value")?;
    for (x, v) in domain.free_coordinates().iter().zip(f.values()) {
        writeln!(w, "{x:e},{v:e}")?;
    }
    Ok(())
}
