//! Basin classification on 2-D slices of phase space, dyadic intermingling
//! counts and a box-counting estimate for the basin boundary.
//!
//! A point is attributed to an attractor when its fiber coordinate stays
//! within `tol` of that attractor's level for `window` consecutive iterates;
//! points that never settle within `max_iter` are `Undecided`. The mixed-box
//! statistics are finite-scale evidence of intermingling, nothing more.

use std::io::Write;

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{cell_center, circle_gap, Box2D, CirclePoint, PhasePoint, TorusPoint};
use crate::systems::{FiberKind, SkewProductSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum BasinLabel {
    /// Attracted to fiber level 0.
    Attractor0 = 0,
    /// Attracted to fiber level 1 (interval fibers) or 1/2 (circle fibers).
    Attractor1 = 1,
    Undecided = 2,
}

impl BasinLabel {
    pub fn rgb(self) -> [u8; 3] {
        match self {
            BasinLabel::Attractor0 => [0, 0, 255],
            BasinLabel::Attractor1 => [255, 0, 0],
            BasinLabel::Undecided => [0, 0, 0],
        }
    }

    pub fn is_decided(self) -> bool {
        self != BasinLabel::Undecided
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySettings {
    pub max_iter: u64,
    pub tol: f64,
    pub window: u64,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-3,
            window: 10,
        }
    }
}

impl ClassifySettings {
    pub fn check(&self) -> Result<()> {
        if self.window < 1 || self.max_iter < self.window {
            return Err(Error::domain(format!(
                "classify settings need max_iter >= window >= 1 (got {} and {})",
                self.max_iter, self.window
            )));
        }
        if !(self.tol > 0.0 && self.tol < 0.25) {
            return Err(Error::domain(format!("tol = {} must lie in (0, 1/4)", self.tol)));
        }
        Ok(())
    }
}

/// Label and the iterate at which it was decided (`max_iter` if undecided).
pub fn classify_with_time(
    sys: &SkewProductSystem,
    x0: PhasePoint,
    cs: &ClassifySettings,
) -> Result<(BasinLabel, u64)> {
    cs.check()?;
    sys.check_point(&x0)?;
    Ok(classify_unchecked(sys, x0, cs))
}

pub fn classify(sys: &SkewProductSystem, x0: PhasePoint, cs: &ClassifySettings) -> Result<BasinLabel> {
    classify_with_time(sys, x0, cs).map(|(label, _)| label)
}

#[inline]
fn classify_unchecked(sys: &SkewProductSystem, x0: PhasePoint, cs: &ClassifySettings) -> (BasinLabel, u64) {
    let [l0, l1] = sys.levels();
    let circle = sys.fiber_kind() == FiberKind::Circle;
    let dist = |t: f64, level: f64| {
        if circle {
            circle_gap(t, level)
        } else {
            (t - level).abs()
        }
    };
    let (mut run0, mut run1) = (0u64, 0u64);
    let mut x = x0;
    for n in 1..=cs.max_iter {
        x = sys.step(x);
        if dist(x.fiber, l0) < cs.tol {
            run0 += 1;
            if run0 >= cs.window {
                return (BasinLabel::Attractor0, n);
            }
        } else {
            run0 = 0;
        }
        if dist(x.fiber, l1) < cs.tol {
            run1 += 1;
            if run1 >= cs.window {
                return (BasinLabel::Attractor1, n);
            }
        } else {
            run1 = 0;
        }
    }
    (BasinLabel::Undecided, cs.max_iter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum BaseAxis {
    U,
    V,
}

/// A 2-D slice of phase space parametrized by the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Slice {
    /// Horizontal axis is a base coordinate (θ for a circle base, otherwise
    /// `axis`, with the other torus coordinate held at `fixed`); vertical
    /// axis is the fiber.
    BaseFiber { axis: BaseAxis, fixed: f64 },
    /// The base torus at a fixed fiber height.
    BasePlane { fiber: f64 },
}

impl Default for Slice {
    fn default() -> Self {
        Slice::BaseFiber {
            axis: BaseAxis::U,
            fixed: 0.1,
        }
    }
}

impl Slice {
    pub fn point(&self, sys: &SkewProductSystem, xy: [f64; 2]) -> Result<PhasePoint> {
        let [x, y] = xy;
        let p = match (*self, sys.has_circle_base()) {
            (Slice::BaseFiber { .. }, true) => PhasePoint::new(CirclePoint::new(x)?, y),
            (Slice::BaseFiber { axis, fixed }, false) => {
                let z = match axis {
                    BaseAxis::U => TorusPoint::new(x, fixed)?,
                    BaseAxis::V => TorusPoint::new(fixed, x)?,
                };
                PhasePoint::new(z, y)
            }
            (Slice::BasePlane { fiber }, false) => PhasePoint::new(TorusPoint::new(x, y)?, fiber),
            (Slice::BasePlane { .. }, true) => {
                return Err(Error::domain("a base-plane slice needs a torus base"))
            }
        };
        sys.check_point(&p)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "box", default = "Box2D::unit")]
    pub bbox: Box2D,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn square(n: usize) -> Self {
        Self {
            bbox: Box2D::unit(),
            nx: n,
            ny: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub system: SkewProductSystem,
    pub system_hash: String,
    pub slice: Slice,
    pub classify: ClassifySettings,
    pub seed: Option<u64>,
}

/// Row-major labels (`x` fastest, rows by increasing `y`) over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinLabelGrid {
    #[serde(rename = "box")]
    pub bbox: Box2D,
    pub nx: usize,
    pub ny: usize,
    pub labels: Vec<BasinLabel>,
    pub provenance: Option<Provenance>,
}

impl BasinLabelGrid {
    /// A grid from explicit labels, without provenance (synthetic tests).
    pub fn from_labels(nx: usize, ny: usize, labels: Vec<BasinLabel>) -> Result<Self> {
        if nx == 0 || ny == 0 || labels.len() != nx * ny {
            return Err(Error::domain(format!(
                "{} labels do not fill a {nx}x{ny} grid",
                labels.len()
            )));
        }
        Ok(Self {
            bbox: Box2D::unit(),
            nx,
            ny,
            labels,
            provenance: None,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> BasinLabel {
        self.labels[j * self.nx + i]
    }

    pub fn fractions(&self) -> LabelFractions {
        let mut counts = [0usize; 3];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        LabelFractions::from_counts(counts)
    }

    /// Binary PPM (P6, maxval 255). The top image row is the largest `y`.
    pub fn write_ppm(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.nx, self.ny)?;
        let mut row = Vec::with_capacity(3 * self.nx);
        for j in (0..self.ny).rev() {
            row.clear();
            for i in 0..self.nx {
                row.extend_from_slice(&self.get(i, j).rgb());
            }
            w.write_all(&row)?;
        }
        Ok(())
    }

    pub fn ppm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(3 * self.labels.len() + 32);
        self.write_ppm(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelFractions {
    pub attractor0: f64,
    pub attractor1: f64,
    pub undecided: f64,
    pub counts: [usize; 3],
}

impl LabelFractions {
    fn from_counts(counts: [usize; 3]) -> Self {
        let total = counts.iter().sum::<usize>().max(1) as f64;
        Self {
            attractor0: counts[0] as f64 / total,
            attractor1: counts[1] as f64 / total,
            undecided: counts[2] as f64 / total,
            counts,
        }
    }

    /// Share of `label` among decided cells (0 when nothing is decided).
    pub fn share_of_decided(&self, label: BasinLabel) -> f64 {
        let decided = self.counts[0] + self.counts[1];
        if decided == 0 || label == BasinLabel::Undecided {
            return 0.0;
        }
        self.counts[label as usize] as f64 / decided as f64
    }

    /// Fraction of all cells carrying the more common attractor label.
    pub fn majority_fraction(&self) -> f64 {
        self.attractor0.max(self.attractor1)
    }
}

/// Classify every cell center of `grid` on `slice`. Rows are processed in
/// parallel and written by index, so the result does not depend on the
/// number of workers.
pub fn basin_map(
    sys: &SkewProductSystem,
    slice: &Slice,
    grid: &GridSpec,
    cs: &ClassifySettings,
    seed: Option<u64>,
) -> Result<BasinLabelGrid> {
    cs.check()?;
    grid.bbox.check()?;
    let (nx, ny) = (grid.nx, grid.ny);
    if nx == 0 || ny == 0 {
        return Err(Error::domain(format!("grid resolution {nx}x{ny} is empty")));
    }
    // Validate the corners up front so the sweep itself cannot fail.
    for (i, j) in [(0, 0), (nx - 1, ny - 1)] {
        slice.point(sys, cell_center(&grid.bbox, nx, ny, i, j))?;
    }
    let mut labels = vec![BasinLabel::Undecided; nx * ny];
    labels.par_chunks_mut(nx).enumerate().try_for_each(|(j, row)| {
        for (i, out) in row.iter_mut().enumerate() {
            let x0 = slice.point(sys, cell_center(&grid.bbox, nx, ny, i, j))?;
            *out = classify_unchecked(sys, x0, cs).0;
        }
        Ok::<_, Error>(())
    })?;
    Ok(BasinLabelGrid {
        bbox: grid.bbox,
        nx,
        ny,
        labels,
        provenance: Some(Provenance {
            system: sys.clone(),
            system_hash: sys.fingerprint(),
            slice: *slice,
            classify: *cs,
            seed,
        }),
    })
}

/// Mixed-box count at one dyadic scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleCount {
    pub scale_j: u32,
    pub mixed_fraction: f64,
    pub mixed_count: usize,
    pub total_boxes: usize,
}

/// Per-box label presence at scale `j` as a `2ʲ × 2ʲ` row-major bitmask
/// (bit 0: Attractor0 present, bit 1: Attractor1 present).
pub fn dyadic_presence(grid: &BasinLabelGrid, j: u32) -> Result<Vec<u8>> {
    let n = 1usize
        .checked_shl(j)
        .filter(|&n| n <= grid.nx && n <= grid.ny)
        .ok_or_else(|| Error::domain(format!("scale j = {j} is finer than the grid")))?;
    if !grid.nx.is_multiple_of(n) || !grid.ny.is_multiple_of(n) {
        return Err(Error::domain(format!(
            "2^{j} does not divide the grid resolution {}x{}",
            grid.nx, grid.ny
        )));
    }
    let (bw, bh) = (grid.nx / n, grid.ny / n);
    if bw * bh < 2 {
        return Err(Error::domain(format!(
            "dyadic boxes at scale j = {j} hold a single cell"
        )));
    }
    let mut mask = vec![0u8; n * n];
    for cj in 0..grid.ny {
        let row = &grid.labels[cj * grid.nx..(cj + 1) * grid.nx];
        let base = (cj / bh) * n;
        for (ci, &l) in row.iter().enumerate() {
            let bit = match l {
                BasinLabel::Attractor0 => 1,
                BasinLabel::Attractor1 => 2,
                BasinLabel::Undecided => 0,
            };
            mask[base + ci / bw] |= bit;
        }
    }
    Ok(mask)
}

pub fn scale_count(grid: &BasinLabelGrid, j: u32) -> Result<ScaleCount> {
    let mask = dyadic_presence(grid, j)?;
    let mixed = mask.iter().filter(|&&m| m == 3).count();
    Ok(ScaleCount {
        scale_j: j,
        mixed_fraction: mixed as f64 / mask.len() as f64,
        mixed_count: mixed,
        total_boxes: mask.len(),
    })
}

/// Fraction of the `4ʲ` dyadic sub-boxes that contain cells of both
/// attractor labels.
pub fn intermingling_statistic(grid: &BasinLabelGrid, j: u32) -> Result<f64> {
    Ok(scale_count(grid, j)?.mixed_fraction)
}

/// Scales usable for box counting: `j ≥ 2`, `2ʲ` divides both resolutions,
/// and each box spans at least 2 cells per axis.
pub fn box_counting_scales(grid: &BasinLabelGrid) -> Vec<u32> {
    (2..usize::BITS)
        .take_while(|&j| {
            let n = 1usize << j;
            grid.nx.is_multiple_of(n) && grid.ny.is_multiple_of(n) && grid.nx / n >= 2 && grid.ny / n >= 2
        })
        .collect()
}

/// Least-squares slope of `log N(j)` against `j log 2`, where `N(j)` counts
/// mixed dyadic boxes. `None` below 256² cells per axis, with fewer than four
/// usable scales, or when fewer than two scales have mixed boxes.
pub fn boundary_box_dimension(grid: &BasinLabelGrid) -> Option<f64> {
    if grid.nx < 256 || grid.ny < 256 {
        return None;
    }
    let scales = box_counting_scales(grid);
    if scales.len() < 4 {
        return None;
    }
    let pts: Vec<(f64, f64)> = scales
        .iter()
        .filter_map(|&j| {
            let c = scale_count(grid, j).ok()?;
            (c.mixed_count > 0).then(|| (j as f64 * std::f64::consts::LN_2, (c.mixed_count as f64).ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).clamp(0.0, 2.0))
}

/// CSV with header `scale_j,mixed_fraction,mixed_count,total_boxes`.
pub fn write_scale_csv(rows: &[ScaleCount], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
