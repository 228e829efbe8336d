//! Config-driven runs. A [`RunConfig`] names one system, one operation and
//! the settings blocks it needs; [`run_config_file`] executes it and writes
//! every artifact atomically next to a copy of the config and a
//! `manifest.json`.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "system": { "family": "kan_cylinder", "k": 3, "eps": 0.5 },
//!   "operation": { "kind": "basin", "scales": [3, 4, 5] },
//!   "grid": { "nx": 512, "ny": 512 },
//!   "output_dir": "out/basin"
//! }
//! ```
//!
//! Unknown fields are rejected. `seed` is required by the stochastic
//! operations (`lyapunov`, `toy`, `sweep`).

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use schemars::JsonSchema;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::artifacts::{sha256_hex, write_atomic};
use crate::basins::{
    basin_map, box_counting_scales, boundary_box_dimension, scale_count, BasinLabelGrid,
    ClassifySettings, GridSpec, ScaleCount, Slice,
};
use crate::error::{Error, Result};
use crate::ergodic::{center_lyapunov_ensemble, LyapunovEstimate, OrbitSettings};
use crate::experiments::{
    report_artifacts, run_robustness_sweep, run_toy_experiment, scale_csv_bytes,
    ExperimentSettings, PerturbationMode,
};
use crate::quadrature::QuadratureSettings;
use crate::systems::{
    validate_conditions, ConditionReport, Family, KanCylinderSystem, KanSolidTorusSystem,
    KanT3System, SkewProductSystem, ToySystem,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Margin below which a passing condition is listed as a near failure.
pub const NEAR_FAILURE_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must equal 1.
    pub schema_version: u32,
    pub system: Family,
    pub operation: Operation,
    #[serde(default)]
    pub orbit: OrbitBlock,
    #[serde(default)]
    pub classify: ClassifySettings,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub slice: Slice,
    /// Overridden by `--out`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_grid() -> GridSpec {
    GridSpec::square(512)
}

fn default_scales() -> Vec<u32> {
    vec![3, 4, 5]
}

/// Orbit lengths; the seed lives at the top level of the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitBlock {
    pub n_transient: u64,
    pub n_average: u64,
}

impl Default for OrbitBlock {
    fn default() -> Self {
        let d = OrbitSettings::default();
        Self {
            n_transient: d.n_transient,
            n_average: d.n_average,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Operation {
    Validate,
    Lyapunov {
        /// Defaults to the lower distinguished level.
        #[serde(default)]
        level: Option<f64>,
        #[serde(default = "one")]
        orbits: usize,
    },
    Basin {
        #[serde(default = "default_scales")]
        scales: Vec<u32>,
    },
    Intermingle {
        /// Empty means every admissible dyadic scale.
        #[serde(default)]
        scales: Vec<u32>,
    },
    Dimension,
    Toy,
    Sweep {
        mode: PerturbationMode,
        etas: Vec<f64>,
        #[serde(default)]
        phase: f64,
        #[serde(default = "default_scales")]
        scales: Vec<u32>,
    },
}

fn one() -> usize {
    1
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Validate => "validate",
            Operation::Lyapunov { .. } => "lyapunov",
            Operation::Basin { .. } => "basin",
            Operation::Intermingle { .. } => "intermingle",
            Operation::Dimension => "dimension",
            Operation::Toy => "toy",
            Operation::Sweep { .. } => "sweep",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            Operation::Lyapunov { .. } | Operation::Toy | Operation::Sweep { .. }
        )
    }
}

fn config_err(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Domain(msg) => Error::config(path, msg),
        other => other,
    }
}

impl RunConfig {
    /// Parse JSON; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "system" {
                // The family tag buffers the block and hides inner paths.
                if let Some((inner, message)) = system_error(text) {
                    let path = match inner.as_str() {
                        "." => "system".to_owned(),
                        p => format!("system.{p}"),
                    };
                    return Error::config(with_missing_field(path, &message), message);
                }
            }
            let message = e.inner().to_string();
            Error::config(with_missing_field(path, &message), message)
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.system.check().map_err(config_err("system"))?;
        self.orbit_settings().check().map_err(config_err("orbit"))?;
        self.classify.check().map_err(config_err("classify"))?;
        self.quadrature.check().map_err(config_err("quadrature"))?;
        self.grid.bbox.check().map_err(config_err("grid.box"))?;
        if self.grid.nx == 0 || self.grid.ny == 0 {
            return Err(Error::config("grid", "nx and ny must be positive"));
        }
        if self.operation.is_stochastic() && self.seed.is_none() {
            return Err(Error::config(
                "seed",
                format!("operation `{}` is stochastic and needs a seed", self.operation.name()),
            ));
        }
        match &self.operation {
            Operation::Toy if !matches!(self.system, Family::Toy(_)) => Err(Error::config(
                "system.family",
                "operation `toy` needs the toy family",
            )),
            Operation::Lyapunov { orbits: 0, .. } => {
                Err(Error::config("operation.orbits", "must be at least 1"))
            }
            Operation::Sweep { etas, .. } if etas.first() != Some(&0.0) => {
                Err(Error::config("operation.etas", "must start at 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn orbit_settings(&self) -> OrbitSettings {
        OrbitSettings {
            n_transient: self.orbit.n_transient,
            n_average: self.orbit.n_average,
            seed: self.seed.unwrap_or(OrbitSettings::default().seed),
        }
    }

    fn experiment_settings(&self, scales: &[u32], phase: f64) -> ExperimentSettings {
        ExperimentSettings {
            slice: self.slice,
            grid: self.grid,
            classify: self.classify,
            orbit: self.orbit_settings(),
            quadrature: self.quadrature,
            scales: scales.to_vec(),
            phase,
        }
    }
}

fn with_missing_field(path: String, message: &str) -> String {
    let Some(field) = message
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next())
    else {
        return path;
    };
    match path.trim_end_matches('.') {
        "" => field.to_owned(),
        p => format!("{p}.{field}"),
    }
}

fn inner_error<T: DeserializeOwned>(v: serde_json::Value) -> Option<(String, String)> {
    serde_path_to_error::deserialize::<_, T>(v)
        .err()
        .map(|e| (e.path().to_string(), e.inner().to_string()))
}

fn system_error(text: &str) -> Option<(String, String)> {
    let v: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut block = v.get("system")?.as_object()?.clone();
    let family = block.remove("family")?;
    let block = serde_json::Value::Object(block);
    match family.as_str()? {
        "kan_cylinder" => inner_error::<KanCylinderSystem>(block),
        "toy" => inner_error::<ToySystem>(block),
        "kan_solid_torus" => inner_error::<KanSolidTorusSystem>(block),
        "kan_t3" => inner_error::<KanT3System>(block),
        _ => None,
    }
}

/// JSON schema of [`RunConfig`].
pub fn schema_json() -> String {
    let schema = schemars::schema_for!(RunConfig);
    serde_json::to_string_pretty(&schema).expect("schema serializes")
}

/// Process exit status for an error: 1 for config errors, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => 1,
        _ => 2,
    }
}

/// Named output files of one operation, in write order.
pub type Artifacts = Vec<(String, Vec<u8>)>;

#[derive(Serialize)]
struct ValidationOut<'a> {
    system: &'a SkewProductSystem,
    system_hash: String,
    all_passed: bool,
    near_failures: Vec<&'a str>,
    report: &'a ConditionReport,
}

#[derive(Serialize)]
struct LyapunovOut<'a> {
    system: &'a SkewProductSystem,
    level: f64,
    seed: u64,
    mean_center: f64,
    estimates: &'a [LyapunovEstimate],
}

#[derive(Serialize)]
struct LyapunovCsvRow {
    orbit: usize,
    center: f64,
    standard_error: f64,
    base_unstable: f64,
    base_stable: Option<f64>,
    n_used: u64,
}

#[derive(Serialize)]
struct BasinOut<'a> {
    grid: &'a BasinLabelGrid,
    fractions: crate::basins::LabelFractions,
    scales: &'a [ScaleCount],
    dimension: Option<f64>,
    evidence_kind: &'static str,
}

#[derive(Serialize)]
struct FractionCsvRow {
    label: &'static str,
    count: usize,
    fraction: f64,
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

fn csv_rows<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

fn scales_for(grid: &BasinLabelGrid, scales: &[u32]) -> Result<Vec<ScaleCount>> {
    scales.iter().map(|&j| scale_count(grid, j)).collect()
}

fn fraction_csv(grid: &BasinLabelGrid) -> Result<Vec<u8>> {
    let f = grid.fractions();
    csv_rows([
        FractionCsvRow { label: "attractor0", count: f.counts[0], fraction: f.attractor0 },
        FractionCsvRow { label: "attractor1", count: f.counts[1], fraction: f.attractor1 },
        FractionCsvRow { label: "undecided", count: f.counts[2], fraction: f.undecided },
    ])
}

fn grid_artifacts(grid: &BasinLabelGrid, scales: &[ScaleCount], with_dimension: bool) -> Result<Artifacts> {
    let out = BasinOut {
        grid,
        fractions: grid.fractions(),
        scales,
        dimension: if with_dimension { boundary_box_dimension(grid) } else { None },
        evidence_kind: "finite-scale evidence",
    };
    Ok(vec![
        ("basin.ppm".to_owned(), grid.ppm_bytes()),
        ("fractions.csv".to_owned(), fraction_csv(grid)?),
        ("intermingling.csv".to_owned(), scale_csv_bytes(scales)?),
        ("basin.json".to_owned(), json(&out)?),
    ])
}

/// Run the operation of `cfg` and return its artifacts without touching disk.
pub fn execute(cfg: &RunConfig) -> Result<Artifacts> {
    cfg.check()?;
    let sys = SkewProductSystem::new(cfg.system)?;
    let seed = cfg.seed;
    match &cfg.operation {
        Operation::Validate => {
            let report = validate_conditions(&sys, &cfg.quadrature)?;
            let out = ValidationOut {
                system: &sys,
                system_hash: sys.fingerprint(),
                all_passed: report.all_passed(),
                near_failures: report.near_failures(NEAR_FAILURE_MARGIN),
                report: &report,
            };
            Ok(vec![("validation.json".to_owned(), json(&out)?)])
        }
        Operation::Lyapunov { level, orbits } => {
            let level = level.unwrap_or(sys.levels()[0]);
            let s = cfg.orbit_settings();
            let est = center_lyapunov_ensemble(&sys, level, &s, *orbits)?;
            let mean_center = est.iter().map(|e| e.center).sum::<f64>() / est.len() as f64;
            let rows = csv_rows(est.iter().enumerate().map(|(i, e)| LyapunovCsvRow {
                orbit: i,
                center: e.center,
                standard_error: e.standard_error,
                base_unstable: e.base_unstable,
                base_stable: e.base_stable,
                n_used: e.n_used,
            }))?;
            let out = LyapunovOut {
                system: &sys,
                level,
                seed: s.seed,
                mean_center,
                estimates: &est,
            };
            Ok(vec![
                ("lyapunov.csv".to_owned(), rows),
                ("lyapunov.json".to_owned(), json(&out)?),
            ])
        }
        Operation::Basin { scales } => {
            let grid = basin_map(&sys, &cfg.slice, &cfg.grid, &cfg.classify, seed)?;
            let counts = scales_for(&grid, scales)?;
            grid_artifacts(&grid, &counts, false)
        }
        Operation::Intermingle { scales } => {
            let grid = basin_map(&sys, &cfg.slice, &cfg.grid, &cfg.classify, seed)?;
            let scales = if scales.is_empty() { box_counting_scales(&grid) } else { scales.clone() };
            let counts = scales_for(&grid, &scales)?;
            grid_artifacts(&grid, &counts, false)
        }
        Operation::Dimension => {
            let grid = basin_map(&sys, &cfg.slice, &cfg.grid, &cfg.classify, seed)?;
            let counts = scales_for(&grid, &box_counting_scales(&grid))?;
            grid_artifacts(&grid, &counts, true)
        }
        Operation::Toy => {
            let Family::Toy(toy) = cfg.system else {
                unreachable!("checked by RunConfig::check")
            };
            let report = run_toy_experiment(&toy, &cfg.experiment_settings(&default_scales(), 0.0))?;
            let mut out = report_artifacts(&report.report)?;
            out.push(("toy.json".to_owned(), json(&report)?));
            Ok(out)
        }
        Operation::Sweep { mode, etas, phase, scales } => {
            let report = run_robustness_sweep(&sys, *mode, etas, &cfg.experiment_settings(scales, *phase))?;
            report_artifacts(&report)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub operation: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    /// `(file name, sha256)` in write order.
    pub artifacts: Vec<(String, String)>,
    /// Hash over the config hash and every artifact hash; excludes the
    /// timestamp and wall clock below.
    pub artifact_hash: String,
    pub timestamp_unix: u64,
    pub wall_clock_secs: f64,
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

fn output_dir(cfg: &RunConfig, out_override: Option<&Path>) -> Result<PathBuf> {
    out_override
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::config("output_dir", "no output directory in config and no --out given"))
}

/// Load, run and write. `out_override` replaces the config's `output_dir`.
pub fn run_config_file(path: &Path, out_override: Option<&Path>) -> Result<RunOutcome> {
    let raw = std::fs::read(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    let text = std::str::from_utf8(&raw).map_err(|e| Error::config("<file>", e.to_string()))?;
    let cfg = RunConfig::from_json(text)?;
    let dir = output_dir(&cfg, out_override)?;
    run_config(&cfg, &raw, &dir)
}

/// Run a parsed config; `raw` is the config text copied to `config.json`.
pub fn run_config(cfg: &RunConfig, raw: &[u8], dir: &Path) -> Result<RunOutcome> {
    let start = Instant::now();
    let artifacts = execute(cfg)?;
    let config_sha256 = sha256_hex(raw);
    let mut hashes = Vec::with_capacity(artifacts.len());
    for (name, bytes) in &artifacts {
        write_atomic(&dir.join(name), bytes)?;
        hashes.push((name.clone(), sha256_hex(bytes)));
    }
    write_atomic(&dir.join("config.json"), raw)?;
    let mut combined = format!("config {config_sha256}\n");
    for (name, h) in &hashes {
        combined.push_str(&format!("{name} {h}\n"));
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        schema_version: cfg.schema_version,
        operation: cfg.operation.name().to_owned(),
        config_sha256,
        seed: cfg.seed,
        artifacts: hashes,
        artifact_hash: sha256_hex(combined.as_bytes()),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    write_atomic(&dir.join("manifest.json"), &json(&manifest)?)?;
    Ok(RunOutcome {
        output_dir: dir.to_path_buf(),
        manifest,
    })
}
