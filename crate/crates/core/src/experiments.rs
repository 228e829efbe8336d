//! Scripted experiments: the toy example's single attractor, and perturbation
//! sweeps contrasting boundary-preserving perturbations (intermingling
//! persists) with fiber rotations on T³ (the invariant tori disappear).

use std::path::{Path, PathBuf};
use std::time::Instant;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::artifacts::write_atomic;
use crate::basins::{
    basin_map, boundary_box_dimension, scale_count, write_scale_csv, BasinLabel, BasinLabelGrid,
    ClassifySettings, GridSpec, LabelFractions, ScaleCount, Slice,
};
use crate::error::{Error, Result};
use crate::ergodic::{center_lyapunov, random_point_on_level, LyapunovEstimate, OrbitSettings};
use crate::quadrature::QuadratureSettings;
use crate::systems::{validate_conditions, ConditionReport, Family, SkewProductSystem, ToySystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// Adds `η t(1−t) sin 2π(θ + a)` to an interval-fiber map; both boundary
    /// levels stay fixed.
    BoundaryPreserving,
    /// Adds the constant `η` to a circle-fiber map; for `η ∉ Z` neither
    /// invariant level survives.
    FiberRotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub mode: PerturbationMode,
    pub eta: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Perturbation {
    pub(crate) fn check_finite(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0 && self.phase.is_finite()) {
            return Err(Error::domain(format!(
                "perturbation needs finite eta >= 0 and finite phase (got eta = {}, phase = {})",
                self.eta, self.phase
            )));
        }
        Ok(())
    }
}

/// Perturb an unperturbed system. Fails when the mode does not fit the fiber
/// type or when `η` breaks monotonicity of the fiber maps.
pub fn perturb(sys: &SkewProductSystem, p: Perturbation) -> Result<SkewProductSystem> {
    if sys.perturbation().is_some() {
        return Err(Error::domain("system is already perturbed"));
    }
    sys.with_perturbation(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    pub slice: Slice,
    pub grid: GridSpec,
    pub classify: ClassifySettings,
    pub orbit: OrbitSettings,
    pub quadrature: QuadratureSettings,
    /// Dyadic scales at which the mixed-box statistic is reported.
    pub scales: Vec<u32>,
    /// Phase `a` of boundary-preserving perturbations.
    pub phase: f64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            slice: Slice::default(),
            grid: GridSpec::square(512),
            classify: ClassifySettings::default(),
            orbit: OrbitSettings::default(),
            quadrature: QuadratureSettings::default(),
            scales: vec![3, 4, 5],
            phase: 0.0,
        }
    }
}

/// Center exponent from a seeded random start on one distinguished level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelExponent {
    pub level: f64,
    pub invariant: bool,
    pub estimate: LyapunovEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub eta: f64,
    pub conditions: ConditionReport,
    pub fractions: LabelFractions,
    pub scales: Vec<ScaleCount>,
    pub center: Vec<LevelExponent>,
    pub dimension: Option<f64>,
    #[serde(skip)]
    pub grid: Option<BasinLabelGrid>,
}

impl ExperimentRow {
    pub fn statistic_at(&self, j: u32) -> Option<f64> {
        self.scales.iter().find(|s| s.scale_j == j).map(|s| s.mixed_fraction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub system: SkewProductSystem,
    pub mode: Option<PerturbationMode>,
    pub settings: ExperimentSettings,
    pub seed: u64,
    /// Intermingling statistics certify mixing at finitely many scales only.
    pub evidence_kind: String,
    pub rows: Vec<ExperimentRow>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

const EVIDENCE_KIND: &str = "finite-scale evidence";

fn run_row(
    sys: &SkewProductSystem,
    eta: f64,
    settings: &ExperimentSettings,
) -> Result<ExperimentRow> {
    let conditions = validate_conditions(sys, &settings.quadrature)?;
    let grid = basin_map(
        sys,
        &settings.slice,
        &settings.grid,
        &settings.classify,
        Some(settings.orbit.seed),
    )?;
    let scales = settings
        .scales
        .iter()
        .map(|&j| scale_count(&grid, j))
        .collect::<Result<Vec<_>>>()?;
    let center = sys
        .levels()
        .iter()
        .enumerate()
        .map(|(i, &level)| {
            let x0 = random_point_on_level(sys, level, settings.orbit.seed, i as u64)?;
            Ok(LevelExponent {
                level,
                invariant: sys.is_invariant_level(level),
                estimate: center_lyapunov(sys, x0, &settings.orbit)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentRow {
        eta,
        conditions,
        fractions: grid.fractions(),
        scales,
        center,
        dimension: boundary_box_dimension(&grid),
        grid: Some(grid),
    })
}

/// One row per `η` (ascending, starting at 0) of `mode` applied to `sys`.
pub fn run_robustness_sweep(
    sys: &SkewProductSystem,
    mode: PerturbationMode,
    eta_list: &[f64],
    settings: &ExperimentSettings,
) -> Result<ExperimentReport> {
    if eta_list.first() != Some(&0.0) {
        return Err(Error::domain("eta list must start at 0"));
    }
    if eta_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain("eta list must be strictly ascending"));
    }
    let start = Instant::now();
    let rows = eta_list
        .iter()
        .map(|&eta| {
            let perturbed = perturb(
                sys,
                Perturbation {
                    mode,
                    eta,
                    phase: settings.phase,
                },
            )?;
            run_row(&perturbed, eta, settings)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        experiment: "robustness_sweep".to_owned(),
        system: sys.clone(),
        mode: Some(mode),
        settings: settings.clone(),
        seed: settings.orbit.seed,
        evidence_kind: EVIDENCE_KIND.to_owned(),
        rows,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub report: ExperimentReport,
    /// Share of the slice attracted to the sink torus `t = 1/2`.
    pub attractor_fraction: f64,
    pub center_at_attractor: LyapunovEstimate,
    pub center_at_repeller: LyapunovEstimate,
    /// Every cell in the rows adjacent to the repelling circle `t = 0`
    /// (bottom and top of a base × fiber slice) lands in the attractor's
    /// basin: the repeller lies in the closure of the basin.
    pub repeller_adjacent_attractor1: bool,
    /// Smallest domination margin recorded by the validator.
    pub domination_margin: f64,
}

/// Toy (Anosov × Morse–Smale) experiment on `toy` with `settings`.
pub fn run_toy_experiment(toy: &ToySystem, settings: &ExperimentSettings) -> Result<ToyReport> {
    let start = Instant::now();
    let sys = SkewProductSystem::new(Family::Toy(*toy))?;
    let row = run_row(&sys, 0.0, settings)?;
    let grid = row.grid.as_ref().expect("row keeps its grid");
    let repeller_adjacent_attractor1 = match settings.slice {
        Slice::BaseFiber { .. } => (0..grid.nx).all(|i| {
            grid.get(i, 0) == BasinLabel::Attractor1
                && grid.get(i, grid.ny - 1) == BasinLabel::Attractor1
        }),
        Slice::BasePlane { .. } => false,
    };
    let domination = row
        .conditions
        .get("domination")
        .expect("toy report has a domination entry");
    let domination_margin = domination.evidence["lower_margin"].min(domination.evidence["upper_margin"]);
    let center_at_repeller = row.center[0].estimate;
    let center_at_attractor = row.center[1].estimate;
    let attractor_fraction = row.fractions.attractor1;
    Ok(ToyReport {
        report: ExperimentReport {
            experiment: "toy".to_owned(),
            system: sys,
            mode: None,
            settings: settings.clone(),
            seed: settings.orbit.seed,
            evidence_kind: EVIDENCE_KIND.to_owned(),
            rows: vec![row],
            wall_clock_secs: start.elapsed().as_secs_f64(),
        },
        attractor_fraction,
        center_at_attractor,
        center_at_repeller,
        repeller_adjacent_attractor1,
        domination_margin,
    })
}

/// `basin_eta_0p0200.ppm` style name: four decimals, `p` for the point.
pub fn eta_file_name(eta: f64) -> String {
    format!("basin_eta_{eta:.4}.ppm").replacen('.', "p", 1)
}

#[derive(Serialize)]
struct SweepCsvRow {
    eta: f64,
    conditions_passed: bool,
    attractor0_fraction: f64,
    attractor1_fraction: f64,
    undecided_fraction: f64,
    majority_fraction: f64,
    center_level0: f64,
    center_level1: f64,
    dimension: Option<f64>,
}

#[derive(Serialize)]
struct ScaleCsvRow {
    eta: f64,
    scale_j: u32,
    mixed_fraction: f64,
    mixed_count: usize,
    total_boxes: usize,
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

/// Named artifacts of a report: `sweep.csv`, `intermingling.csv`,
/// `report.json` and one PPM per row that kept its grid.
pub fn report_artifacts(report: &ExperimentReport) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    let sweep = csv_bytes(report.rows.iter().map(|r| SweepCsvRow {
        eta: r.eta,
        conditions_passed: r.conditions.all_passed(),
        attractor0_fraction: r.fractions.attractor0,
        attractor1_fraction: r.fractions.attractor1,
        undecided_fraction: r.fractions.undecided,
        majority_fraction: r.fractions.majority_fraction(),
        center_level0: r.center[0].estimate.center,
        center_level1: r.center[1].estimate.center,
        dimension: r.dimension,
    }))?;
    out.push(("sweep.csv".to_owned(), sweep));

    let scales = csv_bytes(report.rows.iter().flat_map(|r| {
        r.scales.iter().map(move |s| ScaleCsvRow {
            eta: r.eta,
            scale_j: s.scale_j,
            mixed_fraction: s.mixed_fraction,
            mixed_count: s.mixed_count,
            total_boxes: s.total_boxes,
        })
    }))?;
    out.push(("intermingling.csv".to_owned(), scales));
    out.push(("report.json".to_owned(), serde_json::to_vec_pretty(report)?));

    for row in &report.rows {
        if let Some(grid) = &row.grid {
            out.push((eta_file_name(row.eta), grid.ppm_bytes()));
        }
    }
    Ok(out)
}

/// Write [`report_artifacts`] into `dir`, each file atomically. Returns the
/// written paths.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    report_artifacts(report)?
        .into_iter()
        .map(|(name, bytes)| write_atomic(&dir.join(name), &bytes))
        .collect()
}

/// Scale counts of one grid as CSV bytes (`scale_j,mixed_fraction,...`).
pub fn scale_csv_bytes(rows: &[ScaleCount]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_scale_csv(rows, &mut out)?;
    Ok(out)
}
