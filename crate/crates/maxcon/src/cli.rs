//! Command-line front end: argument parsing, command orchestration, and the
//! stable exit-code contract.
//!
//! Exit codes: `0` success, `1` a verification check or suite failed, `2`
//! configuration error (parsing, invalid values, unreadable files, dense-cap
//! overflow), `3` solver failure (non-convergence, indefinite forms).

use crate::config::{EpsConfig, RunConfig};
use crate::constants::{verify_all, SolverOptions};
use crate::derham::build_complex;
use crate::error::Error;
use crate::grid::Grid3;
use crate::helmholtz::{decompose, harmonic_dimension, orthogonality_report, random_edge_field};
use crate::selftest;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;
pub const EXIT_SOLVER_ERROR: i32 = 3;

/// Relative bound on the pairwise orthogonality deviations of a splitting.
const DECOMPOSITION_ORTHO_TOL: f64 = 1e-9;
/// Relative bound on the re-summation error of a splitting.
const DECOMPOSITION_RECON_TOL: f64 = 1e-12;

const DEFAULTS_HELP: &str = "Configuration defaults:
  eps               identity (scalar 1.0)
  solver.tol        1e-8
  solver.maxit      10000
  solver.seed       3735928559
  solver.dense_cap  2000
  outputs           none (reports go to standard output)";

#[derive(Parser)]
#[command(
    name = "maxcon",
    version,
    about = "Poincare and Maxwell constants on 3D boxes via a staggered-grid de Rham complex",
    after_help = DEFAULTS_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute every constant, verify all relations, and emit a JSON report.
    Constants(CommonArgs),
    /// Recompute the main constants over a list of refinement levels and
    /// emit a CSV table with Richardson-extrapolated limits.
    Converge {
        #[command(flatten)]
        common: CommonArgs,
        /// Ascending cells-per-axis levels, comma separated (e.g. 4,8,16).
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
    },
    /// Split a seeded random edge field and report the decomposition quality.
    Helmholtz(CommonArgs),
    /// Run the randomized property suites; one line per suite.
    Selftest {
        /// Base seed of the suites.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `solver.seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the report to this file (overrides the config outputs).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_)
        | Error::InvalidGrid(_)
        | Error::InvalidMaterial(_)
        | Error::NonUniformSpacing(_)
        | Error::DenseCapExceeded { .. }
        | Error::Io { .. } => EXIT_CONFIG_ERROR,
        Error::CgNoConvergence { .. }
        | Error::EigNoConvergence { .. }
        | Error::NoPositiveSpectrum
        | Error::NotPositiveDefinite
        | Error::DenseEigFailed
        | Error::DimensionMismatch { .. } => EXIT_SOLVER_ERROR,
    }
}

fn fail(err: &Error) -> i32 {
    eprintln!("error: {err}");
    exit_code_for(err)
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.solver.seed = seed;
    }
    Ok(cfg)
}

fn write_out(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Report destination: `--out` wins over the config `outputs` entry.
fn out_path<'a>(common: &'a CommonArgs, config_path: &'a Option<String>) -> Option<PathBuf> {
    common
        .out
        .clone()
        .or_else(|| config_path.as_ref().map(PathBuf::from))
}

fn cmd_constants(common: &CommonArgs) -> i32 {
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let (grid, bc, material, solver) = match cfg.materialize() {
        Ok(parts) => parts,
        Err(e) => return fail(&e),
    };
    let report = match verify_all(&grid, &bc, &material, &solver) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let json = report.to_json();
    print!("{json}");
    if let Some(path) = out_path(common, &cfg.outputs.json) {
        if let Err(e) = write_out(&path, &json) {
            return fail(&e);
        }
    }
    if report.all_pass() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILURE
    }
}

/// One refinement level of the convergence table.
struct LevelRow {
    n: usize,
    h: f64,
    c_p: f64,
    c_m_rot: f64,
    c_m_full: f64,
}

fn converge_rows(
    cfg: &RunConfig,
    levels: &[usize],
    solver: &SolverOptions,
) -> Result<Vec<LevelRow>, Error> {
    if levels.is_empty() {
        return Err(Error::InvalidConfig("levels must not be empty".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!(
            "levels must be strictly ascending, got {levels:?}"
        )));
    }
    if matches!(cfg.eps, EpsConfig::File(_)) {
        return Err(Error::InvalidConfig(
            "a per-cell eps file is tied to one grid and cannot be used across levels".into(),
        ));
    }
    let bc = cfg.boundary()?;
    let mut rows = Vec::new();
    for &m in levels {
        let grid = Grid3::new([m, m, m], cfg.grid.lengths)?;
        let scaled = RunConfig {
            grid: crate::config::GridConfig {
                n: [m, m, m],
                lengths: cfg.grid.lengths,
            },
            ..cfg.clone()
        };
        let material = scaled.material()?;
        let ops = build_complex(&grid, &bc, &material)?;
        let c_p = crate::constants::poincare_constant(&ops, solver)?;
        let c_m_rot = crate::constants::maxwell_rot_constant(&ops, false, solver)?;
        let c_rot_plain = if material.is_identity() {
            c_m_rot
        } else {
            crate::constants::maxwell_rot_constant(&ops, true, solver)?
        };
        rows.push(LevelRow {
            n: m,
            h: grid.spacing().iter().cloned().fold(0.0f64, f64::max),
            c_p,
            c_m_rot,
            c_m_full: c_p.max(c_rot_plain),
        });
    }
    Ok(rows)
}

/// `c_fine + (c_fine - c_prev) / (r - 1)` with `r = (h_prev / h_fine)^2`:
/// the limit of second-order refinement through the last two levels.
fn richardson(prev: &LevelRow, fine: &LevelRow, value: impl Fn(&LevelRow) -> f64) -> f64 {
    let r = (prev.h / fine.h).powi(2);
    value(fine) + (value(fine) - value(prev)) / (r - 1.0)
}

fn converge_csv(rows: &[LevelRow]) -> String {
    let mut text = String::from("n,h,c_p,c_m_rot,c_m_full\n");
    for row in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            row.n, row.h, row.c_p, row.c_m_rot, row.c_m_full
        ));
    }
    if rows.len() >= 2 {
        let prev = &rows[rows.len() - 2];
        let fine = &rows[rows.len() - 1];
        text.push_str(&format!(
            "richardson,0,{},{},{}\n",
            richardson(prev, fine, |r| r.c_p),
            richardson(prev, fine, |r| r.c_m_rot),
            richardson(prev, fine, |r| r.c_m_full),
        ));
    }
    text
}

fn cmd_converge(common: &CommonArgs, levels: &[usize]) -> i32 {
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let solver = cfg.solver_options();
    let rows = match converge_rows(&cfg, levels, &solver) {
        Ok(rows) => rows,
        Err(e) => return fail(&e),
    };
    let csv = converge_csv(&rows);
    print!("{csv}");
    if let Some(path) = out_path(common, &cfg.outputs.csv) {
        if let Err(e) = write_out(&path, &csv) {
            return fail(&e);
        }
    }
    EXIT_OK
}

/// JSON report of one seeded decomposition.
#[derive(Serialize)]
struct HelmholtzReport {
    timestamp: String,
    grid: crate::constants::GridSummary,
    bc: [String; 6],
    seed: u64,
    norms: HelmholtzNorms,
    /// `[<g,r>, <g,h>, <r,h>]` relative to the squared field norm.
    orthogonality: [f64; 3],
    /// Relative deviation of the re-summed parts from the field.
    reconstruction_error: f64,
    /// Dense nullity of the stacked pencil; absent above the dense cap.
    harmonic_dimension: Option<usize>,
    pass: bool,
}

#[derive(Serialize)]
struct HelmholtzNorms {
    field: f64,
    gradient: f64,
    rotational: f64,
    harmonic: f64,
}

fn cmd_helmholtz(common: &CommonArgs) -> i32 {
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let (grid, bc, material, solver) = match cfg.materialize() {
        Ok(parts) => parts,
        Err(e) => return fail(&e),
    };
    let ops = match build_complex(&grid, &bc, &material) {
        Ok(ops) => ops,
        Err(e) => return fail(&e),
    };
    let field = random_edge_field(&ops, solver.seed);
    let rtol = (solver.tol * 1e-4).max(1e-14);
    let parts = match decompose(&ops, &field, rtol, solver.maxit) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };

    let w_e = &ops.grad_pair.codomain.weight;
    let field_norm = w_e.norm(&field);
    let orthogonality = orthogonality_report(&ops, &parts);
    let mut residual = field.clone();
    for part in [&parts.gradient, &parts.rotational, &parts.harmonic] {
        for (r, p) in residual.iter_mut().zip(part) {
            *r -= p;
        }
    }
    let reconstruction_error = if field_norm > 0.0 {
        w_e.norm(&residual) / field_norm
    } else {
        0.0
    };
    let harmonic_dim = if ops.edge_map.reduced_dim() <= solver.dense_cap {
        match harmonic_dimension(&ops, solver.dense_cap) {
            Ok(d) => Some(d),
            Err(e) => return fail(&e),
        }
    } else {
        None
    };
    let pass = reconstruction_error <= DECOMPOSITION_RECON_TOL
        && orthogonality.iter().all(|&d| d <= DECOMPOSITION_ORTHO_TOL);

    let report = HelmholtzReport {
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        grid: crate::constants::GridSummary {
            n: grid.n(),
            lengths: grid.lengths(),
            spacing: grid.spacing(),
            diameter: grid.diameter(),
        },
        bc: bc.labels(),
        seed: solver.seed,
        norms: HelmholtzNorms {
            field: field_norm,
            gradient: w_e.norm(&parts.gradient),
            rotational: w_e.norm(&parts.rotational),
            harmonic: w_e.norm(&parts.harmonic),
        },
        orthogonality,
        reconstruction_error,
        harmonic_dimension: harmonic_dim,
        pass,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    print!("{json}");
    if let Some(path) = out_path(common, &cfg.outputs.json) {
        if let Err(e) = write_out(&path, &json) {
            return fail(&e);
        }
    }
    if pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILURE
    }
}

fn cmd_selftest(seed: Option<u64>) -> i32 {
    let outcomes = selftest::run_all(seed.unwrap_or(crate::dual_pair::DEFAULT_SEED));
    let mut all_pass = true;
    for outcome in &outcomes {
        println!("{}", outcome.line());
        all_pass &= outcome.pass();
    }
    if all_pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILURE
    }
}

/// Parses the arguments and runs the selected command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // `--help`/`--version` arrive here too and are not errors.
            let code = if e.exit_code() == 0 {
                EXIT_OK
            } else {
                EXIT_CONFIG_ERROR
            };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Constants(common) => cmd_constants(common),
        Command::Converge { common, levels } => cmd_converge(common, levels),
        Command::Helmholtz(common) => cmd_helmholtz(common),
        Command::Selftest { seed } => cmd_selftest(*seed),
    }
}
