//! Configuration-driven grid runner: parses the TOML run configuration,
//! evaluates the approximation and the Monte Carlo benchmark over the
//! (maturity, rho, gamma) grid, reproduces the Hurst sensitivity sweep,
//! and writes CSV tables plus a JSON run-meta file.
//!
//! Correlation grid points that fail the admissibility bound are skipped
//! and reported, not fatal: rectangular grids stay convenient. CSV floats
//! are written with 17 significant digits so a parsed table reproduces
//! every value bit-exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::affine_intensity::CirParams;
use crate::cva_engine::{cva, ContractState, CorrelationStructure, CvaError};
use crate::mc_bench::{
    simulate_diffusion_cva, simulate_paths, time_grid, JointCovarianceBuilder, McConfig, McError,
};
use crate::rough_kernels::RBergomiParams;
use crate::vol_models::{HestonParams, SabrParams, VolModelParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("empty grid: {0} must contain at least one value")]
    EmptyGrid(&'static str),
    #[error("unit violation: {0}")]
    Unit(String),
    #[error("Feller violation in [{section}]: c^2 = {c2} >= 2 q mu = {bound} (set allow_feller_violation = true to price anyway)")]
    Feller {
        section: &'static str,
        c2: f64,
        bound: f64,
    },
    #[error("correlation inadmissibility: no (eta, rho, gamma) grid point satisfies the admissibility bound")]
    NoAdmissiblePoint,
    #[error("invalid model parameters: {0}")]
    Model(String),
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("hurst sweep requires a rough Bergomi model")]
    NotRBergomi,
    #[error("invalid Hurst grid: {0}")]
    BadHurstGrid(String),
    #[error("approximation failed at (T={maturity}, rho={rho}, gamma={gamma}): {source}")]
    Approximation {
        maturity: f64,
        rho: f64,
        gamma: f64,
        source: CvaError,
    },
    #[error("Monte Carlo failed at (T={maturity}, rho={rho}, gamma={gamma}): {source}")]
    MonteCarlo {
        maturity: f64,
        rho: f64,
        gamma: f64,
        source: McError,
    },
}

// ---------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawModel {
    Heston {
        sigma2_0: f64,
        k: f64,
        theta: f64,
        nu: f64,
    },
    Sabr {
        sigma0: f64,
        alpha: f64,
        beta: f64,
    },
    #[serde(rename = "rbergomi")]
    RBergomi {
        sigma0: f64,
        nu: f64,
        hurst: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntensity {
    lambda0: f64,
    q: f64,
    mu: f64,
    c: f64,
    #[serde(default)]
    allow_feller_violation: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorrelations {
    eta: f64,
    rho_grid: Vec<f64>,
    gamma_grid: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContract {
    spot: f64,
    strike: f64,
    maturities: Vec<f64>,
    #[serde(default)]
    recovery: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMc {
    n_paths: usize,
    #[serde(default = "default_steps")]
    n_steps: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_chunk")]
    chunk_size: usize,
    #[serde(default = "default_ci")]
    ci_level: f64,
}

fn default_steps() -> usize {
    100
}
fn default_seed() -> u64 {
    42
}
fn default_chunk() -> usize {
    4096
}
fn default_ci() -> f64 {
    0.95
}

impl Default for RawMc {
    fn default() -> Self {
        Self {
            n_paths: 0,
            n_steps: default_steps(),
            seed: default_seed(),
            chunk_size: default_chunk(),
            ci_level: default_ci(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    intensity: RawIntensity,
    correlations: RawCorrelations,
    contract: RawContract,
    #[serde(default)]
    mc: RawMc,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: VolModelParams,
    pub intensity: CirParams,
    pub eta: f64,
    pub rho_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub maturities: Vec<f64>,
    pub spot: f64,
    pub strike: f64,
    pub recovery: f64,
    pub mc: McConfig,
    pub output_dir: Option<PathBuf>,
}

/// Parses and validates a TOML run configuration.
///
/// Defaults: `n_steps = 100`, `ci_level = 0.95`, `seed = 42`. Every
/// violated invariant maps to a dedicated error: missing fields and type
/// mismatches surface from the parser with location info, unit violations,
/// Feller violations and correlation inadmissibility each get a specific
/// message.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;

    let model = match raw.model {
        RawModel::Heston {
            sigma2_0,
            k,
            theta,
            nu,
        } => VolModelParams::Heston(
            HestonParams::new(sigma2_0, k, theta, nu)
                .map_err(|e| ConfigError::Model(e.to_string()))?,
        ),
        RawModel::Sabr {
            sigma0,
            alpha,
            beta,
        } => VolModelParams::Sabr(
            SabrParams::new(sigma0, alpha, beta).map_err(|e| ConfigError::Model(e.to_string()))?,
        ),
        RawModel::RBergomi { sigma0, nu, hurst } => VolModelParams::RBergomi(
            RBergomiParams::new(sigma0, nu, hurst)
                .map_err(|e| ConfigError::Model(e.to_string()))?,
        ),
    };

    let ri = &raw.intensity;
    let intensity = CirParams::new_without_feller_check(ri.lambda0, ri.q, ri.mu, ri.c)
        .map_err(|e| ConfigError::Unit(e.to_string()))?;
    if !intensity.feller_satisfied() && !ri.allow_feller_violation {
        return Err(ConfigError::Feller {
            section: "intensity",
            c2: ri.c * ri.c,
            bound: 2.0 * ri.q * ri.mu,
        });
    }

    if raw.correlations.rho_grid.is_empty() {
        return Err(ConfigError::EmptyGrid("rho_grid"));
    }
    if raw.correlations.gamma_grid.is_empty() {
        return Err(ConfigError::EmptyGrid("gamma_grid"));
    }
    if raw.contract.maturities.is_empty() {
        return Err(ConfigError::EmptyGrid("maturities"));
    }

    let eta = raw.correlations.eta;
    if eta * eta >= 1.0 {
        return Err(ConfigError::Unit(format!(
            "eta must lie in (-1, 1), got {eta}"
        )));
    }
    for &r in &raw.correlations.rho_grid {
        if r * r >= 1.0 {
            return Err(ConfigError::Unit(format!(
                "rho must lie in (-1, 1), got {r}"
            )));
        }
    }
    for &g in &raw.correlations.gamma_grid {
        if g * g >= 1.0 {
            return Err(ConfigError::Unit(format!(
                "gamma must lie in (-1, 1), got {g}"
            )));
        }
    }
    let any_admissible = raw.correlations.rho_grid.iter().any(|&r| {
        raw.correlations
            .gamma_grid
            .iter()
            .any(|&g| CorrelationStructure::admissible(eta, r, g))
    });
    if !any_admissible {
        return Err(ConfigError::NoAdmissiblePoint);
    }

    if raw.contract.spot <= 0.0 || raw.contract.strike <= 0.0 {
        return Err(ConfigError::Unit(format!(
            "spot and strike must be positive prices, got spot={}, strike={}",
            raw.contract.spot, raw.contract.strike
        )));
    }
    if !(0.0..1.0).contains(&raw.contract.recovery) {
        return Err(ConfigError::Unit(format!(
            "recovery must lie in [0, 1), got {}",
            raw.contract.recovery
        )));
    }
    for &m in &raw.contract.maturities {
        if m <= 0.0 {
            return Err(ConfigError::Unit(format!(
                "maturities must be positive years, got {m}"
            )));
        }
    }
    if raw.mc.n_steps < 2 {
        return Err(ConfigError::Unit(format!(
            "n_steps must be at least 2, got {}",
            raw.mc.n_steps
        )));
    }
    if !(raw.mc.ci_level > 0.0 && raw.mc.ci_level < 1.0) {
        return Err(ConfigError::Unit(format!(
            "ci_level must lie in (0, 1), got {}",
            raw.mc.ci_level
        )));
    }
    if raw.mc.chunk_size == 0 {
        return Err(ConfigError::Unit("chunk_size must be at least 1".into()));
    }

    Ok(RunConfig {
        model,
        intensity,
        eta,
        rho_grid: raw.correlations.rho_grid,
        gamma_grid: raw.correlations.gamma_grid,
        maturities: raw.contract.maturities,
        spot: raw.contract.spot,
        strike: raw.contract.strike,
        recovery: raw.contract.recovery,
        mc: McConfig {
            n_paths: raw.mc.n_paths,
            n_steps: raw.mc.n_steps,
            seed: raw.mc.seed,
            chunk_size: raw.mc.chunk_size,
            ci_level: raw.mc.ci_level,
        },
        output_dir: raw.output_dir,
    })
}

// ---------------------------------------------------------------------
// grid evaluation
// ---------------------------------------------------------------------

/// One evaluated grid point. The Monte Carlo columns are absent when the
/// run was configured with `n_paths = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub maturity: f64,
    pub rho: f64,
    pub gamma: f64,
    pub cva_approx: f64,
    pub base: f64,
    pub qvar_mm: f64,
    pub skew_mx: f64,
    pub volint_nm: f64,
    pub wwr_nx: f64,
    pub cva_mc: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub abs_error: Option<f64>,
}

/// A grid point that could not be evaluated, with its diagnostic.
#[derive(Debug, Clone)]
pub struct SkippedPoint {
    pub maturity: f64,
    pub rho: f64,
    pub gamma: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct GridTable {
    pub rows: Vec<GridRow>,
    pub skipped: Vec<SkippedPoint>,
}

fn evaluate_point(
    cfg: &RunConfig,
    cov_builder: Option<&JointCovarianceBuilder>,
    maturity: f64,
    rho: f64,
    gamma: f64,
) -> Result<GridRow, ReportError> {
    let corr = CorrelationStructure::new(cfg.eta, rho, gamma).map_err(|source| {
        ReportError::Approximation {
            maturity,
            rho,
            gamma,
            source,
        }
    })?;
    let contract = ContractState::from_prices(cfg.spot, cfg.strike, 0.0, maturity, cfg.recovery)
        .map_err(|source| ReportError::Approximation {
            maturity,
            rho,
            gamma,
            source,
        })?;

    let breakdown = cva(&cfg.model, &cfg.intensity, &corr, &contract).map_err(|source| {
        ReportError::Approximation {
            maturity,
            rho,
            gamma,
            source,
        }
    })?;

    let mut row = GridRow {
        maturity,
        rho,
        gamma,
        cva_approx: breakdown.total,
        base: breakdown.base,
        qvar_mm: breakdown.qvar_mm,
        skew_mx: breakdown.skew_mx,
        volint_nm: breakdown.volint_nm,
        wwr_nx: breakdown.wwr_nx,
        cva_mc: None,
        mc_stderr: None,
        abs_error: None,
    };

    if cfg.mc.n_paths > 0 {
        let mc = match (&cfg.model, cov_builder) {
            (VolModelParams::RBergomi(r), Some(builder)) => {
                let cov = builder.assemble(&corr);
                simulate_paths(&cfg.mc, &cov, r, Some(&cfg.intensity), &contract)
            }
            (VolModelParams::RBergomi(r), None) => {
                let grid = time_grid(maturity, cfg.mc.n_steps);
                let cov = JointCovarianceBuilder::new(r.hurst, &grid).assemble(&corr);
                simulate_paths(&cfg.mc, &cov, r, Some(&cfg.intensity), &contract)
            }
            (model, _) => {
                simulate_diffusion_cva(&cfg.mc, model, Some(&cfg.intensity), &corr, &contract)
            }
        }
        .map_err(|source| ReportError::MonteCarlo {
            maturity,
            rho,
            gamma,
            source,
        })?;
        row.cva_mc = Some(mc.cva.estimate);
        row.mc_stderr = Some(mc.cva.std_error);
        row.abs_error = Some((breakdown.total - mc.cva.estimate).abs());
    }
    Ok(row)
}

/// Runs the full (maturity, rho, gamma) grid: approximation always, Monte
/// Carlo benchmark when `mc.n_paths > 0`. Inadmissible correlation points
/// are skipped and recorded; rows keep grid order regardless of the thread
/// count.
pub fn run_grid(cfg: &RunConfig) -> GridTable {
    let mut table = GridTable::default();
    for &maturity in &cfg.maturities {
        let cov_builder = match &cfg.model {
            VolModelParams::RBergomi(r) if cfg.mc.n_paths > 0 => Some(JointCovarianceBuilder::new(
                r.hurst,
                &time_grid(maturity, cfg.mc.n_steps),
            )),
            _ => None,
        };
        let points: Vec<(f64, f64)> = cfg
            .rho_grid
            .iter()
            .flat_map(|&r| cfg.gamma_grid.iter().map(move |&g| (r, g)))
            .collect();
        let results: Vec<Result<GridRow, ReportError>> = points
            .par_iter()
            .map(|&(rho, gamma)| evaluate_point(cfg, cov_builder.as_ref(), maturity, rho, gamma))
            .collect();
        for ((rho, gamma), result) in points.into_iter().zip(results) {
            match result {
                Ok(row) => table.rows.push(row),
                Err(err) => table.skipped.push(SkippedPoint {
                    maturity,
                    rho,
                    gamma,
                    reason: err.to_string(),
                }),
            }
        }
    }
    table
}

/// Hurst sensitivity sweep at gamma = 0: one row per (H, rho) with the
/// approximation, the benchmark and their absolute gap.
pub fn hurst_sweep(cfg: &RunConfig, h_grid: &[f64]) -> Result<GridTable, ReportError> {
    let VolModelParams::RBergomi(base) = &cfg.model else {
        return Err(ReportError::NotRBergomi);
    };
    if h_grid.is_empty() {
        return Err(ReportError::BadHurstGrid("empty Hurst grid".into()));
    }
    let mut table = GridTable::default();
    for &h in h_grid {
        let model = RBergomiParams::new(base.sigma0, base.nu, h)
            .map_err(|e| ReportError::BadHurstGrid(e.to_string()))?;
        let sweep_cfg = RunConfig {
            model: VolModelParams::RBergomi(model),
            gamma_grid: vec![0.0],
            maturities: cfg.maturities.clone(),
            ..cfg.clone()
        };
        let sub = run_grid(&sweep_cfg);
        for mut row in sub.rows {
            // reuse the gamma column to carry H in the sweep table
            row.gamma = h;
            table.rows.push(row);
        }
        table.skipped.extend(sub.skipped);
    }
    Ok(table)
}

// ---------------------------------------------------------------------
// CSV and metadata output
// ---------------------------------------------------------------------

/// 17-significant-digit decimal, enough to round-trip any f64 bit-exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub const GRID_CSV_HEADER: &str =
    "T,rho,gamma,cva_approx,base,qvar_mm,skew_mx,volint_nm,wwr_nx,cva_mc,mc_stderr,abs_error";

/// Renders the grid table as CSV (the sweep table uses the header's gamma
/// column for H; see [`SWEEP_CSV_HEADER`]).
pub fn grid_to_csv(rows: &[GridRow], header: &str) -> String {
    let mut out = String::with_capacity(128 * (rows.len() + 1));
    out.push_str(header);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.maturity),
            fmt_f64(r.rho),
            fmt_f64(r.gamma),
            fmt_f64(r.cva_approx),
            fmt_f64(r.base),
            fmt_f64(r.qvar_mm),
            fmt_f64(r.skew_mx),
            fmt_f64(r.volint_nm),
            fmt_f64(r.wwr_nx),
            fmt_opt(r.cva_mc),
            fmt_opt(r.mc_stderr),
            fmt_opt(r.abs_error),
        );
    }
    out
}

pub const SWEEP_CSV_HEADER: &str =
    "T,rho,hurst,cva_approx,base,qvar_mm,skew_mx,volint_nm,wwr_nx,cva_mc,mc_stderr,abs_error";

/// Parses a CSV produced by [`grid_to_csv`]; bit-exact round trip.
pub fn parse_grid_csv(text: &str) -> Vec<GridRow> {
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| f[i].parse::<f64>().expect("malformed float field");
        let opt = |i: usize| if f[i].is_empty() { None } else { Some(num(i)) };
        rows.push(GridRow {
            maturity: num(0),
            rho: num(1),
            gamma: num(2),
            cva_approx: num(3),
            base: num(4),
            qvar_mm: num(5),
            skew_mx: num(6),
            volint_nm: num(7),
            wwr_nx: num(8),
            cva_mc: opt(9),
            mc_stderr: opt(10),
            abs_error: opt(11),
        });
    }
    rows
}

/// Compact maturity label for file names: `0.25 -> "0.25"`, `1.0 -> "1"`.
pub fn maturity_label(maturity: f64) -> String {
    let mut s = format!("{maturity:.4}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

/// Writes `grid_T<tau>.csv` per maturity plus `run_meta.json`; returns the
/// written paths.
pub fn write_grid_outputs(
    out_dir: &Path,
    table: &GridTable,
    meta: &RunMeta,
) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let mut maturities: Vec<f64> = table.rows.iter().map(|r| r.maturity).collect();
    maturities.sort_by(f64::total_cmp);
    maturities.dedup();
    for maturity in maturities {
        let rows: Vec<GridRow> = table
            .rows
            .iter()
            .filter(|r| r.maturity == maturity)
            .cloned()
            .collect();
        let path = out_dir.join(format!("grid_T{}.csv", maturity_label(maturity)));
        std::fs::write(&path, grid_to_csv(&rows, GRID_CSV_HEADER)).map_err(|source| {
            ReportError::Io {
                path: path.clone(),
                source,
            }
        })?;
        written.push(path);
    }
    written.push(write_meta(out_dir, meta)?);
    Ok(written)
}

pub fn write_sweep_outputs(
    out_dir: &Path,
    table: &GridTable,
    meta: &RunMeta,
) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let path = out_dir.join("hurst_sweep.csv");
    std::fs::write(&path, grid_to_csv(&table.rows, SWEEP_CSV_HEADER)).map_err(|source| {
        ReportError::Io {
            path: path.clone(),
            source,
        }
    })?;
    Ok(vec![path, write_meta(out_dir, meta)?])
}

/// Provenance of a run, written alongside the tables.
#[derive(Debug, serde::Serialize)]
pub struct RunMeta {
    pub seed: u64,
    pub crate_version: &'static str,
    pub threads: usize,
    pub wall_time_secs: f64,
    pub rows: usize,
    pub skipped: usize,
}

impl RunMeta {
    pub fn new(seed: u64, started: Instant, table: &GridTable) -> Self {
        Self {
            seed,
            crate_version: env!("CARGO_PKG_VERSION"),
            threads: rayon::current_num_threads(),
            wall_time_secs: started.elapsed().as_secs_f64(),
            rows: table.rows.len(),
            skipped: table.skipped.len(),
        }
    }
}

fn write_meta(out_dir: &Path, meta: &RunMeta) -> Result<PathBuf, ReportError> {
    let path = out_dir.join("run_meta.json");
    let text = serde_json::to_string_pretty(meta).expect("meta serializes");
    std::fs::write(&path, text).map_err(|source| ReportError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const SET_A_TOML: &str = r#"
[model]
kind = "rbergomi"
sigma0 = 0.08
nu = 0.1
hurst = 0.1

[intensity]
lambda0 = 0.035
q = 0.35
mu = 0.035
c = 0.1

[correlations]
eta = -0.2
rho_grid = [-0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8]
gamma_grid = [-0.3, -0.15, 0.0, 0.15, 0.3]

[contract]
spot = 100.0
strike = 100.0
maturities = [0.25]

[mc]
n_paths = 0
"#;

    #[test]
    fn parses_set_a_config() {
        let cfg = parse_config(SET_A_TOML).unwrap();
        assert_eq!(
            cfg.intensity,
            CirParams::new(0.035, 0.35, 0.035, 0.1).unwrap()
        );
        assert_eq!(cfg.rho_grid.len(), 9);
        assert_eq!(cfg.gamma_grid.len(), 5);
        assert_eq!(cfg.mc.n_steps, 100);
        assert_eq!(cfg.mc.seed, 42);
        assert_eq!(cfg.mc.ci_level, 0.95);
        match cfg.model {
            VolModelParams::RBergomi(r) => assert_eq!(r.hurst, 0.1),
            _ => panic!("expected rbergomi"),
        }
    }

    #[test]
    fn shipped_configs_load() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        let cfg = load_config(&dir.join("set_a.toml")).unwrap();
        assert_eq!(
            cfg.intensity,
            CirParams::new(0.035, 0.35, 0.035, 0.1).unwrap()
        );
        assert_eq!(cfg.maturities, vec![0.25, 0.5, 1.0]);
        for name in ["set_b.toml", "heston.toml", "sabr.toml"] {
            assert!(load_config(&dir.join(name)).is_ok(), "{name}");
        }
    }

    #[test]
    fn rejects_feller_violation_without_override() {
        let text = SET_A_TOML.replace("c = 0.1", "c = 0.2");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Feller { .. }), "{err}");
        let with_override = text.replace("c = 0.2", "c = 0.2\nallow_feller_violation = true");
        assert!(parse_config(&with_override).is_ok());
    }

    #[test]
    fn rejects_empty_grid() {
        let text = SET_A_TOML.replace(
            "rho_grid = [-0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8]",
            "rho_grid = []",
        );
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::EmptyGrid("rho_grid")), "{err}");
    }

    #[test]
    fn rejects_missing_field_with_parse_error() {
        let text = SET_A_TOML.replace("q = 0.35\n", "");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("missing field"), "{err}");
    }

    #[test]
    fn rejects_fully_inadmissible_correlations() {
        // eta = 0.7 with rho = 0.7 and gamma = -0.7: 1.47 >= 1 - 0.686
        let text = SET_A_TOML
            .replace("eta = -0.2", "eta = 0.7")
            .replace(
                "rho_grid = [-0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8]",
                "rho_grid = [0.7]",
            )
            .replace(
                "gamma_grid = [-0.3, -0.15, 0.0, 0.15, 0.3]",
                "gamma_grid = [-0.7]",
            );
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::NoAdmissiblePoint), "{err}");
    }

    #[test]
    fn rejects_unit_violations() {
        let bad_spot = SET_A_TOML.replace("spot = 100.0", "spot = -1.0");
        assert!(matches!(parse_config(&bad_spot), Err(ConfigError::Unit(_))));
        let bad_eta = SET_A_TOML.replace("eta = -0.2", "eta = 1.5");
        assert!(matches!(parse_config(&bad_eta), Err(ConfigError::Unit(_))));
    }

    #[test]
    fn approximation_only_grid_has_no_mc_columns() {
        let mut cfg = parse_config(SET_A_TOML).unwrap();
        cfg.rho_grid = vec![0.0];
        cfg.gamma_grid = vec![0.0];
        let table = run_grid(&cfg);
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert!(row.cva_mc.is_none() && row.mc_stderr.is_none() && row.abs_error.is_none());
        assert_eq!(row.wwr_nx, 0.0);
        assert_eq!(row.volint_nm, 0.0);
        assert!(row.cva_approx > 0.0);
    }

    #[test]
    fn full_grid_shape_is_nine_by_five() {
        let cfg = parse_config(SET_A_TOML).unwrap();
        let table = run_grid(&cfg);
        assert_eq!(table.rows.len(), 45);
        assert!(table.skipped.is_empty());
        // grid order: rho-major, gamma-minor
        assert_eq!(table.rows[0].rho, -0.8);
        assert_eq!(table.rows[0].gamma, -0.3);
        assert_eq!(table.rows[1].gamma, -0.15);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let cfg = {
            let mut c = parse_config(SET_A_TOML).unwrap();
            c.rho_grid = vec![-0.8, 0.3];
            c.gamma_grid = vec![0.15];
            c
        };
        let table = run_grid(&cfg);
        let csv = grid_to_csv(&table.rows, GRID_CSV_HEADER);
        let parsed = parse_grid_csv(&csv);
        assert_eq!(parsed.len(), table.rows.len());
        for (a, b) in table.rows.iter().zip(&parsed) {
            assert_eq!(a.cva_approx.to_bits(), b.cva_approx.to_bits());
            assert_eq!(a.wwr_nx.to_bits(), b.wwr_nx.to_bits());
            assert_eq!(a.cva_mc.is_none(), b.cva_mc.is_none());
        }
        // and the re-rendered text is identical
        assert_eq!(csv, grid_to_csv(&parsed, GRID_CSV_HEADER));
    }

    #[test]
    fn maturity_labels() {
        assert_eq!(maturity_label(0.25), "0.25");
        assert_eq!(maturity_label(0.5), "0.5");
        assert_eq!(maturity_label(1.0), "1");
    }

    #[test]
    fn hurst_sweep_consistent_with_grid() {
        let mut cfg = parse_config(SET_A_TOML).unwrap();
        cfg.rho_grid = vec![-0.4, 0.4];
        cfg.gamma_grid = vec![0.0];
        let grid = run_grid(&cfg);
        let sweep = hurst_sweep(&cfg, &[0.1]).unwrap();
        assert_eq!(sweep.rows.len(), 2);
        for (g, s) in grid.rows.iter().zip(&sweep.rows) {
            assert_eq!(g.cva_approx.to_bits(), s.cva_approx.to_bits());
            assert_eq!(s.gamma, 0.1); // carries H
        }
        // H = 0.5 still runs (Brownian kernel limit)
        let brown = hurst_sweep(&cfg, &[0.5]).unwrap();
        assert_eq!(brown.rows.len(), 2);
        assert!(brown.rows.iter().all(|r| r.cva_approx.is_finite()));
    }
}
