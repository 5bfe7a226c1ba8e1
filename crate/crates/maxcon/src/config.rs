//! JSON run configuration: grid, boundary assignment, permittivity source,
//! solver options, and output paths.
//!
//! Unknown keys are rejected everywhere so that a typo cannot silently fall
//! back to a default.  Every optional field has a documented default; the
//! parsed configuration materializes into the concrete domain types.

use crate::constants::SolverOptions;
use crate::error::{Error, Result};
use crate::grid::{BoundarySpec, Grid3, MaterialField};
use serde::Deserialize;
use std::path::Path;

/// Default relative eigenvalue tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default iteration cap for inner conjugate-gradient solves.
pub const DEFAULT_MAXIT: usize = 10_000;
/// Default dimension cap for dense verification paths.
pub const DEFAULT_DENSE_CAP: usize = crate::dense::DENSE_CAP;

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_maxit() -> usize {
    DEFAULT_MAXIT
}

fn default_seed() -> u64 {
    crate::dual_pair::DEFAULT_SEED
}

fn default_dense_cap() -> usize {
    DEFAULT_DENSE_CAP
}

/// A full run configuration as read from a JSON file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub bc: BcConfig,
    /// Permittivity; identity when omitted.
    #[serde(default)]
    pub eps: EpsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

/// Cells per axis and box side lengths.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: [usize; 3],
    #[serde(rename = "L")]
    pub lengths: [f64; 3],
}

/// Boundary assignment: either one shorthand for the two unmixed cases or
/// six per-face labels.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BcConfig {
    /// `"dirichlet"` (all faces tangential) or `"neumann"` (all normal).
    Shorthand(String),
    /// Labels `"tangential"` / `"normal"` in the face order
    /// `x_lo, x_hi, y_lo, y_hi, z_lo, z_hi`.
    Faces([String; 6]),
}

/// Permittivity source.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsConfig {
    /// One isotropic value for every cell.
    Scalar(f64),
    /// One diagonal tensor for every cell.
    Diag([f64; 3]),
    /// Per-cell diagonal tensors from a CSV file
    /// (`i,j,k,eps_x,eps_y,eps_z`, one complete row per cell).
    File(String),
}

impl Default for EpsConfig {
    fn default() -> Self {
        EpsConfig::Scalar(1.0)
    }
}

/// Solver options; every field falls back to its default independently.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_maxit")]
    pub maxit: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_dense_cap")]
    pub dense_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: default_tol(),
            maxit: default_maxit(),
            seed: default_seed(),
            dense_cap: default_dense_cap(),
        }
    }
}

/// Optional file outputs; reports always go to standard output as well.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default)]
    pub json: Option<String>,
    #[serde(default)]
    pub csv: Option<String>,
}

impl RunConfig {
    /// Parses a configuration from JSON text.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("configuration: {e}")))
    }

    /// Reads and parses a configuration file.
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        RunConfig::from_json(&text)
    }

    pub fn grid(&self) -> Result<Grid3> {
        Grid3::new(self.grid.n, self.grid.lengths)
    }

    pub fn boundary(&self) -> Result<BoundarySpec> {
        match &self.bc {
            BcConfig::Shorthand(s) => match s.as_str() {
                "dirichlet" => Ok(BoundarySpec::dirichlet()),
                "neumann" => Ok(BoundarySpec::neumann()),
                other => Err(Error::InvalidConfig(format!(
                    "bc shorthand must be \"dirichlet\" or \"neumann\", got \"{other}\""
                ))),
            },
            BcConfig::Faces(labels) => BoundarySpec::from_labels(labels),
        }
    }

    pub fn material(&self) -> Result<MaterialField> {
        let n = self.grid.n;
        match &self.eps {
            EpsConfig::Scalar(v) => MaterialField::isotropic(n, *v),
            EpsConfig::Diag(d) => MaterialField::constant_diagonal(n, *d),
            EpsConfig::File(path) => MaterialField::from_csv(Path::new(path), n),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            maxit: self.solver.maxit,
            seed: self.solver.seed,
            dense_cap: self.solver.dense_cap,
        }
    }

    /// Builds every domain object the commands need.
    pub fn materialize(&self) -> Result<(Grid3, BoundarySpec, MaterialField, SolverOptions)> {
        let grid = self.grid()?;
        let bc = self.boundary()?;
        let material = self.material()?;
        Ok((grid, bc, material, self.solver_options()))
    }
}
