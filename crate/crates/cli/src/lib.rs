//! Command-line front end for the Schrödinger–Poisson toolkit.

pub mod commands;
pub mod config;
pub mod error;
pub mod grid;

use std::io::Write;
use std::path::Path;

pub use commands::{run, Artifact, Outcome};
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use grid::{load_grid_function, write_grid_function, GridSource, Profile};

/// Writes every artifact into `dir` through a temporary file and an atomic
/// rename, so readers never observe a half-written file.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&a.bytes)?;
        tmp.flush()?;
        tmp.persist(dir.join(&a.name)).map_err(|e| e.error)?;
    }
    Ok(())
}

/// Caps the global rayon pool from `SPECFUN_SP_THREADS`.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("SPECFUN_SP_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::ConfigParse(format!("SPECFUN_SP_THREADS must be a positive integer, got `{value}`")))?;
    // a pool built earlier in the process wins; that is harmless here
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
