//! Config parsing, run orchestration, and serialization for the `granular`
//! binary.
//!
//! Configs are TOML with a `version = 1` sentinel; unknown keys are
//! rejected so typos fail loudly. Trajectories stream to `series.csv`
//! (flushed row by row, so long runs can be watched), fields serialize to a
//! small binary snapshot format, and the fast method's tables can be cached
//! to disk and reloaded on a fingerprint match.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read as _, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::collision::{self, CollisionQuadrature, DEFAULT_MEMORY_BUDGET};
use crate::diagnostics;
use crate::error::{GranularError, Result};
use crate::fft::MultiFft;
use crate::grid::{DistributionField, GridSpec, ALIASING_FACTOR};
use crate::integrator::{self, CollisionTables, Method, RunEvent, SolverConfig};
use crate::physics::{build_initial, InitialCondition, KernelSpec, RestitutionModel};

/// Snapshot file magic ("granular gas snapshot", format 1).
const SNAPSHOT_MAGIC: &[u8; 4] = b"GGS1";
const SNAPSHOT_VERSION: u32 = 1;
/// File name of the precomputed-table cache inside an output directory.
pub const CACHE_FILE: &str = "tables.ggw";
/// File name of the trajectory table inside an output directory.
pub const SERIES_FILE: &str = "series.csv";

// ---------------------------------------------------------------------------
// Configuration schema (raw serde mirror, then validated domain types)
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    grid: RawGrid,
    kernel: RawKernel,
    restitution: RawRestitution,
    initial: RawInitial,
    solver: RawSolver,
    output: Option<RawOutput>,
    compare: Option<RawCompare>,
    diagnose: Option<RawDiagnose>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: usize,
    n: usize,
    support_radius: f64,
    half_width: Option<f64>,
    truncation_radius: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    model: String,
    lambda: Option<f64>,
    gamma: Option<f64>,
    c_lambda: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRestitution {
    model: String,
    e: Option<f64>,
    e0: Option<f64>,
    c: Option<f64>,
    gamma_t: Option<f64>,
    a: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    profile: String,
    rho0: Option<f64>,
    u0: Option<Vec<f64>>,
    t0: Option<f64>,
    w0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tau: f64,
    t_final: f64,
    dt: Option<f64>,
    method: Option<String>,
    output_every: Option<u64>,
    snapshot_every: Option<u64>,
    n_rho: Option<usize>,
    m_angular: Option<usize>,
    memory_budget: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    fields: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagnose {
    what: String,
    snapshot: Option<String>,
    reference: Option<String>,
    series: Option<String>,
    window: Option<[f64; 2]>,
    slice_speed: Option<f64>,
}

/// Settings for [`command_compare`].
#[derive(Debug, Clone, Copy)]
pub struct CompareConfig {
    /// Number of random nonnegative trial fields.
    pub fields: usize,
    /// RNG seed; fixed so reports are reproducible byte for byte.
    pub seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            fields: 10,
            seed: 0x6772616e,
        }
    }
}

/// Which diagnostic [`command_diagnose`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnoseKind {
    Tail,
    Haff,
    Entropy,
}

/// Settings for [`command_diagnose`].
#[derive(Debug, Clone)]
pub struct DiagnoseConfig {
    pub what: DiagnoseKind,
    /// Snapshot to analyze (`tail`, `entropy`).
    pub snapshot: Option<PathBuf>,
    /// Reference snapshot; its presence switches `entropy` to relative
    /// entropy against it.
    pub reference: Option<PathBuf>,
    /// Trajectory table to analyze (`haff`).
    pub series: Option<PathBuf>,
    /// Time window for the cooling-slope fit.
    pub window: (f64, f64),
    /// Slice coordinate for the tail fit (2-D: the fixed `v2`).
    pub slice_speed: f64,
}

/// A fully validated experiment description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub kernel: KernelSpec,
    pub restitution: RestitutionModel,
    pub initial: InitialCondition,
    pub solver: SolverConfig,
    /// Output directory from the config file; a CLI `--out` overrides it.
    pub output_dir: Option<PathBuf>,
    pub compare: CompareConfig,
    pub diagnose: Option<DiagnoseConfig>,
}

fn schema_error(message: impl Into<String>) -> GranularError {
    GranularError::SchemaError {
        message: message.into(),
    }
}

fn constraint_error(message: impl Into<String>) -> GranularError {
    GranularError::ConstraintError {
        message: message.into(),
    }
}

/// Requires `section.key` to be present.
fn require<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| schema_error(format!("missing required key `{key}`")))
}

/// Rejects `section.key` when present (wrong model/profile for it).
fn forbid<T>(value: &Option<T>, key: &str, context: &str) -> Result<()> {
    if value.is_some() {
        return Err(schema_error(format!("key `{key}` does not apply to {context}")));
    }
    Ok(())
}

/// Parses and fully validates a TOML experiment config.
///
/// Structural problems (malformed TOML, unknown or missing keys, bad
/// enumeration values) come back as [`GranularError::SchemaError`] naming
/// the offending key; values that violate a component invariant come back
/// as [`GranularError::ConstraintError`] citing it.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|err| schema_error(err.to_string()))?;
    if raw.version != 1 {
        return Err(schema_error(format!(
            "unsupported config version {} (this build reads version 1)",
            raw.version
        )));
    }

    let grid = GridSpec::with_overrides(
        raw.grid.dim,
        raw.grid.n,
        raw.grid.support_radius,
        raw.grid.truncation_radius,
        raw.grid.half_width,
    )
    .map_err(|err| constraint_error(format!("grid: {err}")))?;

    let kernel = build_kernel(&raw.kernel, grid.dim())?;
    let restitution = build_restitution(&raw.restitution)?;
    restitution
        .validate()
        .map_err(|err| constraint_error(format!("restitution: {err}")))?;
    let initial = build_initial_condition(&raw.initial, grid.dim())?;
    initial
        .validate()
        .map_err(|err| constraint_error(format!("initial: {err}")))?;

    let method = match raw.solver.method.as_deref() {
        None | Some("fast") => Method::Fast,
        Some("direct") => Method::Direct,
        Some(other) => {
            return Err(schema_error(format!(
                "solver.method `{other}` is not one of fast, direct"
            )))
        }
    };
    let solver = SolverConfig {
        tau: raw.solver.tau,
        dt: raw.solver.dt.unwrap_or(0.01),
        t_final: raw.solver.t_final,
        method,
        output_every: raw.solver.output_every.unwrap_or(1),
        n_rho: raw.solver.n_rho,
        m_angular: raw.solver.m_angular,
        memory_budget: raw.solver.memory_budget,
        snapshot_every: raw.solver.snapshot_every,
    };
    solver
        .validate()
        .map_err(|err| constraint_error(format!("solver: {err}")))?;

    let compare = match raw.compare {
        Some(raw) => CompareConfig {
            fields: raw.fields.unwrap_or(CompareConfig::default().fields),
            seed: raw.seed.unwrap_or(CompareConfig::default().seed),
        },
        None => CompareConfig::default(),
    };
    if compare.fields == 0 {
        return Err(constraint_error(
            "compare.fields: must compare at least one field",
        ));
    }

    let diagnose = raw.diagnose.map(build_diagnose).transpose()?;
    let output_dir = raw
        .output
        .and_then(|o| o.dir)
        .map(PathBuf::from);

    Ok(RunConfig {
        grid,
        kernel,
        restitution,
        initial,
        solver,
        output_dir,
        compare,
        diagnose,
    })
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn build_kernel(raw: &RawKernel, dim: usize) -> Result<KernelSpec> {
    // 1/|S^{d-1}|: the conventional normalization of the collision kernel.
    let inverse_surface = 1.0 / diagnostics::sphere_surface(dim);
    match raw.model.as_str() {
        "maxwell" => {
            forbid(&raw.lambda, "kernel.lambda", "the maxwell model")?;
            forbid(&raw.gamma, "kernel.gamma", "the maxwell model")?;
            forbid(&raw.c_lambda, "kernel.c_lambda", "the maxwell model")?;
            KernelSpec::new(0.0, inverse_surface, 0.0)
        }
        "hard_spheres" => {
            forbid(&raw.lambda, "kernel.lambda", "the hard_spheres model")?;
            forbid(&raw.gamma, "kernel.gamma", "the hard_spheres model")?;
            forbid(&raw.c_lambda, "kernel.c_lambda", "the hard_spheres model")?;
            KernelSpec::new(1.0, inverse_surface, 0.0)
        }
        "vhs" => KernelSpec::new(
            require(raw.lambda, "kernel.lambda")?,
            raw.c_lambda.unwrap_or(inverse_surface),
            raw.gamma.unwrap_or(0.0),
        ),
        other => Err(schema_error(format!(
            "kernel.model `{other}` is not one of maxwell, hard_spheres, vhs"
        ))),
    }
    .map_err(|err| match err {
        GranularError::SchemaError { .. } => err,
        other => constraint_error(format!("kernel: {other}")),
    })
}

fn build_restitution(raw: &RawRestitution) -> Result<RestitutionModel> {
    match raw.model.as_str() {
        "constant" => {
            forbid(&raw.e0, "restitution.e0", "the constant model")?;
            forbid(&raw.c, "restitution.c", "the constant model")?;
            forbid(&raw.gamma_t, "restitution.gamma_t", "the constant model")?;
            forbid(&raw.a, "restitution.a", "the constant model")?;
            Ok(RestitutionModel::Constant {
                e: require(raw.e, "restitution.e")?,
            })
        }
        "tanh" => {
            forbid(&raw.e, "restitution.e", "the tanh model")?;
            forbid(&raw.c, "restitution.c", "the tanh model")?;
            forbid(&raw.gamma_t, "restitution.gamma_t", "the tanh model")?;
            forbid(&raw.a, "restitution.a", "the tanh model")?;
            Ok(RestitutionModel::Tanh {
                e0: require(raw.e0, "restitution.e0")?,
            })
        }
        "toscani" => {
            forbid(&raw.e, "restitution.e", "the toscani model")?;
            forbid(&raw.e0, "restitution.e0", "the toscani model")?;
            forbid(&raw.a, "restitution.a", "the toscani model")?;
            Ok(RestitutionModel::Toscani {
                c: require(raw.c, "restitution.c")?,
                gamma_t: require(raw.gamma_t, "restitution.gamma_t")?,
            })
        }
        "viscoelastic" => {
            forbid(&raw.e, "restitution.e", "the viscoelastic model")?;
            forbid(&raw.e0, "restitution.e0", "the viscoelastic model")?;
            forbid(&raw.c, "restitution.c", "the viscoelastic model")?;
            forbid(&raw.gamma_t, "restitution.gamma_t", "the viscoelastic model")?;
            Ok(RestitutionModel::Viscoelastic {
                a: require(raw.a, "restitution.a")?,
            })
        }
        other => Err(schema_error(format!(
            "restitution.model `{other}` is not one of constant, tanh, toscani, viscoelastic"
        ))),
    }
}

fn build_initial_condition(raw: &RawInitial, dim: usize) -> Result<InitialCondition> {
    match raw.profile.as_str() {
        "maxwellian" => {
            forbid(&raw.w0, "initial.w0", "the maxwellian profile")?;
            let rho0 = require(raw.rho0, "initial.rho0")?;
            let t0 = require(raw.t0, "initial.t0")?;
            let u0 = raw.u0.clone().unwrap_or_else(|| vec![0.0; dim]);
            if u0.len() != dim {
                return Err(constraint_error(format!(
                    "initial.u0: has {} components but the grid is {dim}-dimensional",
                    u0.len()
                )));
            }
            Ok(if dim == 3 {
                InitialCondition::Maxwellian3D {
                    rho0,
                    u0: [u0[0], u0[1], u0[2]],
                    t0,
                }
            } else {
                InitialCondition::Maxwellian2D {
                    rho0,
                    u0: [u0[0], u0[1]],
                    t0,
                }
            })
        }
        "flat" => {
            forbid(&raw.rho0, "initial.rho0", "the flat profile")?;
            forbid(&raw.u0, "initial.u0", "the flat profile")?;
            forbid(&raw.t0, "initial.t0", "the flat profile")?;
            if dim != 2 {
                return Err(constraint_error(
                    "initial.profile: the flat profile is two-dimensional",
                ));
            }
            Ok(InitialCondition::Flat2D {
                w0: require(raw.w0, "initial.w0")?,
            })
        }
        other => Err(schema_error(format!(
            "initial.profile `{other}` is not one of maxwellian, flat"
        ))),
    }
}

fn build_diagnose(raw: RawDiagnose) -> Result<DiagnoseConfig> {
    let what = match raw.what.as_str() {
        "tail" => DiagnoseKind::Tail,
        "haff" => DiagnoseKind::Haff,
        "entropy" => DiagnoseKind::Entropy,
        other => {
            return Err(schema_error(format!(
                "diagnose.what `{other}` is not one of tail, haff, entropy"
            )))
        }
    };
    let window = raw.window.unwrap_or([10.0, 50.0]);
    if !(window[0] < window[1]) {
        return Err(constraint_error(
            "diagnose.window: lower edge must be below the upper edge",
        ));
    }
    Ok(DiagnoseConfig {
        what,
        snapshot: raw.snapshot.map(PathBuf::from),
        reference: raw.reference.map(PathBuf::from),
        series: raw.series.map(PathBuf::from),
        window: (window[0], window[1]),
        slice_speed: raw.slice_speed.unwrap_or(0.17),
    })
}

// ---------------------------------------------------------------------------
// Snapshot format
// ---------------------------------------------------------------------------

fn corrupt_snapshot(message: impl Into<String>) -> GranularError {
    GranularError::CorruptSnapshot {
        message: message.into(),
    }
}

/// Writes a field to a binary snapshot: magic, format version, dimension,
/// resolution, box half-width, then the physical values row-major in
/// little-endian `f64`. Round-trips bit-exactly.
pub fn write_snapshot(path: &Path, field: &DistributionField) -> Result<()> {
    let grid = field.grid();
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    out.write_all(&(grid.dim() as u32).to_le_bytes())?;
    out.write_all(&(grid.n() as u32).to_le_bytes())?;
    out.write_all(&grid.half_width().to_le_bytes())?;
    for &value in field.values() {
        out.write_all(&value.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a snapshot back into a field.
///
/// The header stores only what the payload needs (`d`, `N`, `L`); the
/// returned grid carries the conventional support radius `S = L/c` and
/// truncation radius `2S` implied by the aliasing bound, which is all the
/// diagnostics consume.
pub fn read_snapshot(path: &Path) -> Result<DistributionField> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    reader
        .read_exact(&mut magic)
        .map_err(|_| corrupt_snapshot("file too short for the snapshot header"))?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(corrupt_snapshot("bad magic (not a snapshot file)"));
    }
    let version = read_u32(&mut reader)?;
    if version != SNAPSHOT_VERSION {
        return Err(corrupt_snapshot(format!(
            "snapshot format version {version} (this build reads version {SNAPSHOT_VERSION})"
        )));
    }
    let dim = read_u32(&mut reader)? as usize;
    let n = read_u32(&mut reader)? as usize;
    let mut bytes = [0u8; 8];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| corrupt_snapshot("file too short for the snapshot header"))?;
    let half_width = f64::from_le_bytes(bytes);
    let grid = GridSpec::with_overrides(
        dim,
        n,
        half_width / ALIASING_FACTOR,
        None,
        Some(half_width),
    )
    .map_err(|err| corrupt_snapshot(format!("snapshot header: {err}")))?;

    let total = grid.total();
    let mut values = vec![0.0f64; total];
    for value in values.iter_mut() {
        reader
            .read_exact(&mut bytes)
            .map_err(|_| corrupt_snapshot("payload shorter than N^d values"))?;
        *value = f64::from_le_bytes(bytes);
    }
    if reader.read(&mut [0u8; 1])? != 0 {
        return Err(corrupt_snapshot("payload longer than N^d values"));
    }
    DistributionField::from_values(grid, values)
}

fn read_u32(reader: &mut impl std::io::Read) -> Result<u32> {
    let mut bytes = [0u8; 4];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| corrupt_snapshot("file too short for the snapshot header"))?;
    Ok(u32::from_le_bytes(bytes))
}

// ---------------------------------------------------------------------------
// Trajectory table
// ---------------------------------------------------------------------------

fn series_header(dim: usize) -> &'static str {
    if dim == 3 {
        "t,rho,ux,uy,uz,T,E,entropy,step_l2_diff,min_f"
    } else {
        "t,rho,ux,uy,T,E,entropy,step_l2_diff,min_f"
    }
}

fn write_series_row(
    out: &mut impl Write,
    dim: usize,
    record: &diagnostics::TimeSeriesRecord,
) -> std::io::Result<()> {
    // 17 significant digits: the shortest form that round-trips f64, so
    // downstream fits see exactly what the solver computed.
    write!(out, "{:.16e},{:.16e}", record.time, record.moments.rho)?;
    for ax in 0..dim {
        write!(out, ",{:.16e}", record.moments.u[ax])?;
    }
    writeln!(
        out,
        ",{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        record.moments.temperature,
        record.moments.energy,
        record.entropy,
        record.step_l2_diff,
        record.min_value,
    )
}

/// A parsed `series.csv`: the time axis plus named columns.
pub struct SeriesTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    /// Extracts a column by header name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| constraint_error(format!("series has no `{name}` column")))?;
        Ok(self.rows.iter().map(|row| row[idx]).collect())
    }
}

/// Reads a trajectory table written by [`command_run`].
pub fn read_series(path: &Path) -> Result<SeriesTable> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| constraint_error("series file is empty"))?;
    let columns: Vec<String> = header.split(',').map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (number, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.parse::<f64>().map_err(|_| {
                    constraint_error(format!(
                        "series row {}: `{cell}` is not a number",
                        number + 2
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != columns.len() {
            return Err(constraint_error(format!(
                "series row {}: {} cells under a {}-column header",
                number + 2,
                row.len(),
                columns.len()
            )));
        }
        rows.push(row);
    }
    Ok(SeriesTable { columns, rows })
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Builds the fast method's tables and writes them to `tables.ggw` in the
/// output directory, so later runs skip the precomputation.
pub fn command_precompute(
    config: &RunConfig,
    out_dir: &Path,
    sink: &mut impl Write,
) -> Result<()> {
    if config.solver.method != Method::Fast {
        return Err(constraint_error(
            "precompute caches the fast method's tables; set solver.method = \"fast\"",
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    let grid = config.grid;
    let (n_rho, m_angular) = quadrature_sizes(grid, &config.solver);
    let quadrature = CollisionQuadrature::new(grid, n_rho, m_angular)?;
    let budget = config.solver.memory_budget.unwrap_or(DEFAULT_MEMORY_BUDGET);
    let start = std::time::Instant::now();
    let gain = collision::precompute_gain(grid, &config.kernel, &config.restitution, &quadrature, budget)?;
    let loss = collision::precompute_loss(grid, &config.kernel, &quadrature);
    let seconds = start.elapsed().as_secs_f64();
    let fingerprint =
        collision::cache_fingerprint(grid, &config.kernel, &config.restitution, n_rho, m_angular);
    let path = out_dir.join(CACHE_FILE);
    collision::write_cache(&path, fingerprint, &gain, &loss)?;
    let bytes = std::fs::metadata(&path)?.len();
    writeln!(sink, "cache={}", path.display())?;
    writeln!(sink, "fingerprint={fingerprint:016x}")?;
    writeln!(sink, "bytes={bytes}")?;
    writeln!(sink, "precompute_seconds={seconds:.3}")?;
    Ok(())
}

fn quadrature_sizes(grid: GridSpec, solver: &SolverConfig) -> (usize, usize) {
    (
        solver.n_rho.unwrap_or(grid.n()),
        solver
            .m_angular
            .unwrap_or(collision::default_m_angular(grid.dim())),
    )
}

/// Builds collision tables for a run, loading the cache file when one with
/// a matching fingerprint sits in the output directory.
fn tables_for_run(config: &RunConfig, out_dir: &Path, sink: &mut impl Write) -> Result<CollisionTables> {
    if config.solver.method == Method::Fast {
        let (n_rho, m_angular) = quadrature_sizes(config.grid, &config.solver);
        let fingerprint = collision::cache_fingerprint(
            config.grid,
            &config.kernel,
            &config.restitution,
            n_rho,
            m_angular,
        );
        let path = out_dir.join(CACHE_FILE);
        if path.exists() {
            if let Some((gain, loss)) = collision::read_cache(
                &path,
                fingerprint,
                config.grid,
                &config.kernel,
                n_rho,
                m_angular,
            )? {
                writeln!(sink, "cache_loaded={}", path.display())?;
                return Ok(CollisionTables::Fast { gain, loss });
            }
            writeln!(sink, "cache_skipped=fingerprint_mismatch")?;
        }
    }
    CollisionTables::precompute(config.grid, &config.kernel, &config.restitution, &config.solver)
}

/// Runs the configured experiment: streams diagnostics to `series.csv`,
/// writes snapshots at the configured stride plus the final state, and
/// prints closing statistics as `key=value` lines.
pub fn command_run(config: &RunConfig, out_dir: &Path, sink: &mut impl Write) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let series_path = out_dir.join(SERIES_FILE);
    // Opened before the heavy work so an unwritable destination fails fast.
    let mut series = BufWriter::new(File::create(&series_path)?);
    writeln!(series, "{}", series_header(config.grid.dim()))?;
    series.flush()?;

    let mut tables = tables_for_run(config, out_dir, sink)?;
    let mut rows = 0u64;
    let mut snapshots = 0u64;
    let dim = config.grid.dim();
    let summary = integrator::run_streaming(
        config.grid,
        &config.kernel,
        &config.initial,
        &config.solver,
        &mut tables,
        &mut |event| {
            match event {
                RunEvent::Record(record) => {
                    write_series_row(&mut series, dim, record)?;
                    series.flush()?;
                    rows += 1;
                }
                RunEvent::Snapshot { step, field, .. } => {
                    write_snapshot(&out_dir.join(format!("snapshot_{step:08}.ggs")), field)?;
                    snapshots += 1;
                }
            }
            Ok(())
        },
    )?;

    let final_path = out_dir.join("f_final.ggs");
    write_snapshot(&final_path, &summary.final_field)?;
    let final_moments = diagnostics::moments(&summary.final_field)?;
    writeln!(sink, "series={}", series_path.display())?;
    writeln!(sink, "final_snapshot={}", final_path.display())?;
    writeln!(sink, "rows={rows}")?;
    writeln!(sink, "snapshots={snapshots}")?;
    match summary.steady_state_time {
        Some(t) => writeln!(sink, "steady_state_time={t:.16e}")?,
        None => writeln!(sink, "steady_state_time=none")?,
    }
    writeln!(sink, "max_mass_mode={:.16e}", summary.max_mass_mode)?;
    writeln!(sink, "final_temperature={:.16e}", final_moments.temperature)?;
    Ok(())
}

/// Evaluates the collision operator with both methods on the configured
/// initial state and on a batch of seeded random nonnegative fields, and
/// reports the largest relative ℓ² discrepancy.
pub fn command_compare(config: &RunConfig, sink: &mut impl Write) -> Result<()> {
    use rand::{RngExt, SeedableRng};

    let grid = config.grid;
    let (n_rho, m_angular) = quadrature_sizes(grid, &config.solver);
    let quadrature = CollisionQuadrature::new(grid, n_rho, m_angular)?;
    let budget = config.solver.memory_budget.unwrap_or(DEFAULT_MEMORY_BUDGET);
    let direct =
        collision::precompute_direct(grid, &config.kernel, &config.restitution, &quadrature, budget)?;
    let gain =
        collision::precompute_gain(grid, &config.kernel, &config.restitution, &quadrature, budget)?;
    let loss = collision::precompute_loss(grid, &config.kernel, &quadrature);
    let mut workspace = collision::FastWorkspace::new(grid);
    let mut fft = MultiFft::new(grid.dim(), grid.n());

    let mut discrepancy = |field: &mut DistributionField| -> Result<f64> {
        let energy = if config.kernel.gamma != 0.0 {
            Some(diagnostics::moments(field)?.energy)
        } else {
            None
        };
        let coeffs = field.coeffs(&mut fft).to_vec();
        let q_direct = collision::eval_direct(&direct, &coeffs, energy)?;
        let q_fast = collision::eval_fast(&gain, &loss, &coeffs, energy, &mut workspace)?;
        let norm: f64 = q_direct.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let diff: f64 = q_direct
            .iter()
            .zip(&q_fast)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        Ok(if norm == 0.0 { diff } else { diff / norm })
    };

    let mut max_discrepancy = 0.0f64;
    let mut initial = build_initial(&config.initial, grid)?;
    let on_initial = discrepancy(&mut initial)?;
    writeln!(sink, "initial_discrepancy={on_initial:.16e}")?;
    max_discrepancy = max_discrepancy.max(on_initial);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.compare.seed);
    for trial in 0..config.compare.fields {
        let values: Vec<f64> = (0..grid.total()).map(|_| rng.random::<f64>()).collect();
        let mut field = DistributionField::from_values(grid, values)?;
        let on_random = discrepancy(&mut field)?;
        writeln!(sink, "random_discrepancy_{trial}={on_random:.16e}")?;
        max_discrepancy = max_discrepancy.max(on_random);
    }
    writeln!(sink, "max_discrepancy={max_discrepancy:.16e}")?;
    Ok(())
}

/// Resolves a config-file path against the output directory (absolute
/// paths and paths to existing files pass through untouched).
fn resolve_input(path: &Path, out_dir: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        path.to_owned()
    } else {
        out_dir.join(path)
    }
}

/// Runs the configured diagnostic over previously written outputs and
/// prints the findings as `key=value` lines.
pub fn command_diagnose(config: &RunConfig, out_dir: &Path, sink: &mut impl Write) -> Result<()> {
    let diagnose = config
        .diagnose
        .as_ref()
        .ok_or_else(|| schema_error("diagnose needs a [diagnose] section in the config"))?;
    match diagnose.what {
        DiagnoseKind::Tail => {
            let path = diagnose
                .snapshot
                .as_ref()
                .ok_or_else(|| schema_error("missing required key `diagnose.snapshot`"))?;
            let field = read_snapshot(&resolve_input(path, out_dir))?;
            let slice_bin = diagnostics::nearest_bin(field.grid(), diagnose.slice_speed);
            let fit = diagnostics::tail_exponent(&field, slice_bin)?;
            writeln!(sink, "slice_bin={slice_bin}")?;
            writeln!(
                sink,
                "slice_coordinate={:.16e}",
                field.grid().node(slice_bin)
            )?;
            writeln!(sink, "window_nodes={}", fit.window.len())?;
            for (alpha, residual) in &fit.residuals {
                writeln!(sink, "residual_alpha_{alpha}={residual:.16e}")?;
            }
            writeln!(sink, "alpha={}", fit.alpha)?;
        }
        DiagnoseKind::Haff => {
            let path = diagnose
                .series
                .as_ref()
                .ok_or_else(|| schema_error("missing required key `diagnose.series`"))?;
            let table = read_series(&resolve_input(path, out_dir))?;
            let times = table.column("t")?;
            let temperatures = table.column("T")?;
            let slope = diagnostics::haff_slope(&times, &temperatures, diagnose.window)?;
            writeln!(sink, "window=[{},{}]", diagnose.window.0, diagnose.window.1)?;
            writeln!(sink, "slope={slope:.16e}")?;
        }
        DiagnoseKind::Entropy => {
            let path = diagnose
                .snapshot
                .as_ref()
                .ok_or_else(|| schema_error("missing required key `diagnose.snapshot`"))?;
            let field = read_snapshot(&resolve_input(path, out_dir))?;
            match &diagnose.reference {
                Some(reference) => {
                    let reference = read_snapshot(&resolve_input(reference, out_dir))?;
                    let (value, skipped) = diagnostics::relative_entropy(&field, &reference)?;
                    writeln!(sink, "relative_entropy={value:.16e}")?;
                    writeln!(sink, "skipped={skipped}")?;
                }
                None => {
                    let (value, skipped) = diagnostics::entropy(&field);
                    writeln!(sink, "entropy={value:.16e}")?;
                    writeln!(sink, "skipped={skipped}")?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const TEST1_PRESET: &str = r#"
version = 1

[grid]
dim = 2
n = 64
support_radius = 10.0
half_width = 22.0710678118654755
truncation_radius = 20.0

[kernel]
model = "maxwell"

[restitution]
model = "constant"
e = 0.95

[initial]
profile = "maxwellian"
rho0 = 1.0
u0 = [0.0, 0.0]
t0 = 8.0

[solver]
tau = 0.05
t_final = 100.0
output_every = 10
n_rho = 32
m_angular = 16
"#;

    #[test]
    fn parses_equilibration_preset() {
        let config = parse_config(TEST1_PRESET).unwrap();
        assert_eq!(config.grid.n(), 64);
        assert_eq!(config.grid.dim(), 2);
        assert_abs_diff_eq!(config.grid.truncation_radius(), 20.0);
        assert!(matches!(
            config.restitution,
            RestitutionModel::Constant { e } if e == 0.95
        ));
        assert_abs_diff_eq!(config.solver.tau, 0.05);
        // Defaults: dt, method.
        assert_abs_diff_eq!(config.solver.dt, 0.01);
        assert_eq!(config.solver.method, Method::Fast);
        assert_eq!(config.solver.n_rho, Some(32));
        assert_eq!(config.solver.m_angular, Some(16));
        assert!(config.diagnose.is_none());
    }

    #[test]
    fn unknown_key_is_a_schema_error() {
        let text = TEST1_PRESET.replace("tau = 0.05", "tau = 0.05\nfoo = 1");
        match parse_config(&text).unwrap_err() {
            GranularError::SchemaError { message } => {
                assert!(message.contains("foo"), "message: {message}")
            }
            other => panic!("expected SchemaError, got {other:?}"),
        }
    }

    #[test]
    fn odd_resolution_is_a_constraint_error() {
        let text = TEST1_PRESET.replace("n = 64", "n = 63");
        match parse_config(&text).unwrap_err() {
            GranularError::ConstraintError { message } => {
                assert!(message.contains("grid"), "message: {message}")
            }
            other => panic!("expected ConstraintError, got {other:?}"),
        }
    }

    #[test]
    fn wrong_velocity_arity_is_rejected() {
        let text = TEST1_PRESET.replace("u0 = [0.0, 0.0]", "u0 = [0.0, 0.0, 0.0]");
        assert!(matches!(
            parse_config(&text).unwrap_err(),
            GranularError::ConstraintError { .. }
        ));
    }

    #[test]
    fn misplaced_model_key_is_rejected() {
        let text = TEST1_PRESET.replace("e = 0.95", "e = 0.95\ne0 = 0.8");
        assert!(matches!(
            parse_config(&text).unwrap_err(),
            GranularError::SchemaError { .. }
        ));
    }

    #[test]
    fn version_gate() {
        let text = TEST1_PRESET.replace("version = 1", "version = 2");
        assert!(matches!(
            parse_config(&text).unwrap_err(),
            GranularError::SchemaError { .. }
        ));
    }

    #[test]
    fn shipped_presets_parse() {
        let presets = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
        let mut seen = 0;
        for entry in std::fs::read_dir(presets).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "cfg") {
                let config = load_config(&path).unwrap_or_else(|err| {
                    panic!("{} failed to parse: {err}", path.display())
                });
                assert!(config.output_dir.is_some(), "{} sets no output dir", path.display());
                seen += 1;
            }
        }
        assert_eq!(seen, 5, "expected the five shipped presets");
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        use rand::{RngExt, SeedableRng};
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new(2, 16, 7.5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..grid.total())
            .map(|_| rng.random::<f64>() * 1e-3)
            .collect();
        let field = DistributionField::from_values(grid, values.clone()).unwrap();
        let path = dir.path().join("field.ggs");
        write_snapshot(&path, &field).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert_eq!(back.grid().n(), 16);
        assert_eq!(back.grid().dim(), 2);
        assert_eq!(back.grid().half_width(), grid.half_width());
        // Bitwise, not approximate.
        assert!(back
            .values()
            .iter()
            .zip(&values)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn snapshot_corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new(2, 8, 5.0).unwrap();
        let field = DistributionField::from_values(grid, vec![1.0; grid.total()]).unwrap();
        let path = dir.path().join("field.ggs");
        write_snapshot(&path, &field).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let truncated = dir.path().join("truncated.ggs");
        std::fs::write(&truncated, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(
            read_snapshot(&truncated).unwrap_err(),
            GranularError::CorruptSnapshot { .. }
        ));

        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        let bad_magic = dir.path().join("bad_magic.ggs");
        std::fs::write(&bad_magic, &wrong).unwrap();
        assert!(matches!(
            read_snapshot(&bad_magic).unwrap_err(),
            GranularError::CorruptSnapshot { .. }
        ));

        let mut long = bytes;
        long.extend_from_slice(&[0u8; 8]);
        let too_long = dir.path().join("too_long.ggs");
        std::fs::write(&too_long, &long).unwrap();
        assert!(matches!(
            read_snapshot(&too_long).unwrap_err(),
            GranularError::CorruptSnapshot { .. }
        ));
    }

    fn small_run_config() -> RunConfig {
        parse_config(
            r#"
version = 1

[grid]
dim = 2
n = 16
support_radius = 4.0

[kernel]
model = "maxwell"

[restitution]
model = "constant"
e = 0.8

[initial]
profile = "maxwellian"
rho0 = 1.0
u0 = [0.0, 0.0]
t0 = 1.0

[solver]
tau = 0.05
t_final = 0.05
output_every = 2
snapshot_every = 5
n_rho = 8
m_angular = 8
"#,
        )
        .unwrap()
    }

    #[test]
    fn run_command_writes_series_and_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_run_config();
        let mut sink = Vec::new();
        command_run(&config, dir.path(), &mut sink).unwrap();

        let table = read_series(&dir.path().join(SERIES_FILE)).unwrap();
        assert_eq!(
            table.columns,
            vec!["t", "rho", "ux", "uy", "T", "E", "entropy", "step_l2_diff", "min_f"]
        );
        // Steps 0, 2, 4 and the final step 5.
        assert_eq!(table.rows.len(), 4);
        let times = table.column("t").unwrap();
        assert_abs_diff_eq!(times[1], 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(*times.last().unwrap(), 0.05, epsilon = 1e-15);
        assert!(dir.path().join("snapshot_00000005.ggs").exists());
        assert!(dir.path().join("f_final.ggs").exists());

        let report = String::from_utf8(sink).unwrap();
        assert!(report.contains("rows=4"), "report: {report}");
        assert!(report.contains("snapshots=1"), "report: {report}");
    }

    #[test]
    fn identical_configs_produce_identical_bytes() {
        let config = small_run_config();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        command_run(&config, dir_a.path(), &mut Vec::new()).unwrap();
        command_run(&config, dir_b.path(), &mut Vec::new()).unwrap();
        let series_a = std::fs::read(dir_a.path().join(SERIES_FILE)).unwrap();
        let series_b = std::fs::read(dir_b.path().join(SERIES_FILE)).unwrap();
        assert_eq!(series_a, series_b);
        let final_a = std::fs::read(dir_a.path().join("f_final.ggs")).unwrap();
        let final_b = std::fs::read(dir_b.path().join("f_final.ggs")).unwrap();
        assert_eq!(final_a, final_b);
    }

    #[test]
    fn precompute_then_run_uses_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_run_config();
        let mut sink = Vec::new();
        command_precompute(&config, dir.path(), &mut sink).unwrap();
        assert!(dir.path().join(CACHE_FILE).exists());

        let mut run_sink = Vec::new();
        command_run(&config, dir.path(), &mut run_sink).unwrap();
        let report = String::from_utf8(run_sink).unwrap();
        assert!(report.contains("cache_loaded="), "report: {report}");

        // A different restitution must not reuse the cache.
        let mut other = config;
        other.restitution = RestitutionModel::Constant { e: 0.5 };
        let mut other_sink = Vec::new();
        command_run(&other, dir.path(), &mut other_sink).unwrap();
        let report = String::from_utf8(other_sink).unwrap();
        assert!(
            report.contains("cache_skipped=fingerprint_mismatch"),
            "report: {report}"
        );
    }

    #[test]
    fn compare_command_reports_tiny_discrepancy() {
        let config = small_run_config();
        let mut sink = Vec::new();
        command_compare(&config, &mut sink).unwrap();
        let report = String::from_utf8(sink).unwrap();
        let max_line = report
            .lines()
            .find(|line| line.starts_with("max_discrepancy="))
            .expect("max_discrepancy line");
        let value: f64 = max_line.split('=').nth(1).unwrap().parse().unwrap();
        assert!(value <= 1e-8, "discrepancy {value}");
        assert_eq!(
            report.lines().filter(|l| l.starts_with("random_discrepancy_")).count(),
            10
        );
    }

    #[test]
    fn diagnose_haff_recovers_quadratic_slope() {
        let dir = tempfile::tempdir().unwrap();
        let series_path = dir.path().join("series.csv");
        let mut out = String::from("t,rho,ux,uy,T,E,entropy,step_l2_diff,min_f\n");
        for i in 1..=600 {
            let t = 0.1 * i as f64;
            let temperature = t.powi(-2);
            out.push_str(&format!(
                "{t:.16e},1.0,0.0,0.0,{temperature:.16e},0.0,0.0,0.0,0.0\n"
            ));
        }
        std::fs::write(&series_path, out).unwrap();

        let text = r#"
version = 1

[grid]
dim = 2
n = 16
support_radius = 4.0

[kernel]
model = "maxwell"

[restitution]
model = "constant"
e = 0.5

[initial]
profile = "maxwellian"
rho0 = 1.0
t0 = 1.0

[solver]
tau = 0.0
t_final = 1.0

[diagnose]
what = "haff"
series = "series.csv"
window = [10.0, 50.0]
"#;
        let config = parse_config(text).unwrap();
        let mut sink = Vec::new();
        command_diagnose(&config, dir.path(), &mut sink).unwrap();
        let report = String::from_utf8(sink).unwrap();
        let slope_line = report
            .lines()
            .find(|line| line.starts_with("slope="))
            .expect("slope line");
        let slope: f64 = slope_line.split('=').nth(1).unwrap().parse().unwrap();
        assert_abs_diff_eq!(slope, -2.0, epsilon = 1e-9);
    }

    #[test]
    fn diagnose_entropy_of_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new(2, 32, 8.0).unwrap();
        let field = build_initial(
            &InitialCondition::Maxwellian2D {
                rho0: 1.0,
                u0: [0.0, 0.0],
                t0: 2.0,
            },
            grid,
        )
        .unwrap();
        write_snapshot(&dir.path().join("f.ggs"), &field).unwrap();

        let text = r#"
version = 1

[grid]
dim = 2
n = 32
support_radius = 8.0

[kernel]
model = "maxwell"

[restitution]
model = "constant"
e = 0.5

[initial]
profile = "maxwellian"
rho0 = 1.0
t0 = 2.0

[solver]
tau = 0.0
t_final = 1.0

[diagnose]
what = "entropy"
snapshot = "f.ggs"
reference = "f.ggs"
"#;
        let config = parse_config(text).unwrap();
        let mut sink = Vec::new();
        command_diagnose(&config, dir.path(), &mut sink).unwrap();
        let report = String::from_utf8(sink).unwrap();
        assert!(
            report.contains("relative_entropy=0.0000000000000000e0"),
            "report: {report}"
        );
    }
}
