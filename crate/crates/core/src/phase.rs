//! Points on S¹, T² and the product phase spaces, plus the rectangular grids
//! every sweep is built on.
//!
//! Coordinates are stored as canonical representatives in `[0, 1)`. Reduction
//! mod 1 is `x - floor(x)`; results that land in `[1 - 2⁻⁵², 1)` are snapped
//! to `0` so long orbits never carry the representative `1 - ulp`.

use std::f64::consts::TAU;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SNAP_BELOW_ONE: f64 = 1.0 - f64::EPSILON;

/// Reduce a finite real mod 1 without checking finiteness.
#[inline(always)]
pub fn frac(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= SNAP_BELOW_ONE {
        0.0
    } else {
        r
    }
}

pub fn wrap_circle(x: f64) -> Result<CirclePoint> {
    if !x.is_finite() {
        return Err(Error::domain(format!("cannot wrap non-finite value {x}")));
    }
    Ok(CirclePoint(frac(x)))
}

/// `sin(2πx)`, exact (signed zero or ±1) at multiples of a quarter turn.
#[inline(always)]
pub fn sin_turn(x: f64) -> f64 {
    let r = frac(x);
    if r < 0.25 {
        (TAU * r).sin()
    } else if r < 0.5 {
        (TAU * (0.5 - r)).sin()
    } else if r < 0.75 {
        -(TAU * (r - 0.5)).sin()
    } else {
        -(TAU * (1.0 - r)).sin()
    }
}

/// `cos(2πx)`, exact at multiples of a quarter turn.
#[inline(always)]
pub fn cos_turn(x: f64) -> f64 {
    let r = frac(x);
    if r < 0.75 {
        sin_turn(r + 0.25)
    } else {
        sin_turn(r - 0.75)
    }
}

/// Shorter-arc distance on the unit circle, in `[0, 1/2]`.
#[inline(always)]
pub fn circle_gap(a: f64, b: f64) -> f64 {
    // |a - b| is computed identically for both argument orders.
    let d = frac((a - b).abs());
    d.min(1.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CirclePoint(f64);

impl CirclePoint {
    pub fn new(x: f64) -> Result<Self> {
        wrap_circle(x)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Wrap a value already known to be finite.
    #[inline(always)]
    pub(crate) fn wrap_finite(x: f64) -> Self {
        CirclePoint(frac(x))
    }
}

pub fn circle_dist(a: CirclePoint, b: CirclePoint) -> f64 {
    circle_gap(a.0, b.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    u: f64,
    v: f64,
}

impl TorusPoint {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        Ok(Self {
            u: wrap_circle(u)?.0,
            v: wrap_circle(v)?.0,
        })
    }

    pub(crate) fn from_canonical(u: f64, v: f64) -> Self {
        debug_assert!((0.0..1.0).contains(&u) && (0.0..1.0).contains(&v));
        Self { u, v }
    }

    pub fn u(self) -> f64 {
        self.u
    }

    pub fn v(self) -> f64 {
        self.v
    }
}

/// Euclidean distance on the flat torus.
pub fn torus_dist(a: TorusPoint, b: TorusPoint) -> f64 {
    circle_gap(a.u, b.u).hypot(circle_gap(a.v, b.v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BasePoint {
    Circle(CirclePoint),
    Torus(TorusPoint),
}

impl BasePoint {
    /// First base coordinate (θ on S¹, u on T²).
    pub fn first(self) -> f64 {
        match self {
            BasePoint::Circle(c) => c.0,
            BasePoint::Torus(z) => z.u,
        }
    }
}

impl From<CirclePoint> for BasePoint {
    fn from(c: CirclePoint) -> Self {
        BasePoint::Circle(c)
    }
}

impl From<TorusPoint> for BasePoint {
    fn from(z: TorusPoint) -> Self {
        BasePoint::Torus(z)
    }
}

/// A point `(base, fiber)` of a skew-product phase space. The fiber domain
/// (interval or circle) belongs to the system, which checks it on entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub base: BasePoint,
    pub fiber: f64,
}

impl PhasePoint {
    pub fn new(base: impl Into<BasePoint>, fiber: f64) -> Self {
        Self {
            base: base.into(),
            fiber,
        }
    }

    pub fn circle(theta: f64, fiber: f64) -> Result<Self> {
        Ok(Self::new(CirclePoint::new(theta)?, fiber))
    }

    pub fn torus(u: f64, v: f64, fiber: f64) -> Result<Self> {
        Ok(Self::new(TorusPoint::new(u, v)?, fiber))
    }
}

/// Axis-aligned box inside the unit square `[0,1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Box2D {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Box2D {
    pub fn new(lower: [f64; 2], upper: [f64; 2]) -> Result<Self> {
        let b = Self { lower, upper };
        b.check()?;
        Ok(b)
    }

    pub fn unit() -> Self {
        Self {
            lower: [0.0, 0.0],
            upper: [1.0, 1.0],
        }
    }

    pub fn check(&self) -> Result<()> {
        for axis in 0..2 {
            let (lo, hi) = (self.lower[axis], self.upper[axis]);
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::domain("box corners must be finite"));
            }
            if lo >= hi {
                return Err(Error::domain(format!(
                    "degenerate box on axis {axis}: lower {lo} >= upper {hi}"
                )));
            }
            if lo < 0.0 || hi > 1.0 {
                return Err(Error::domain(format!(
                    "box axis {axis} [{lo}, {hi}] leaves the fundamental domain [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.upper[0] - self.lower[0]
    }

    pub fn height(&self) -> f64 {
        self.upper[1] - self.lower[1]
    }
}

/// Center of cell `(i, j)` of an `nx × ny` partition of `bx`.
#[inline]
pub fn cell_center(bx: &Box2D, nx: usize, ny: usize, i: usize, j: usize) -> [f64; 2] {
    [
        bx.lower[0] + (i as f64 + 0.5) * bx.width() / nx as f64,
        bx.lower[1] + (j as f64 + 0.5) * bx.height() / ny as f64,
    ]
}

/// Cell-center samples of `bx`, row-major (`x` fastest), rows ordered by
/// increasing `y`.
pub fn make_grid(bx: &Box2D, nx: usize, ny: usize) -> Result<Vec<[f64; 2]>> {
    bx.check()?;
    if nx == 0 || ny == 0 {
        return Err(Error::domain(format!("grid resolution {nx}x{ny} is empty")));
    }
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push(cell_center(bx, nx, ny, i, j));
        }
    }
    Ok(out)
}
