//! Composite midpoint rules on S¹ and T².
//!
//! For smooth periodic integrands the midpoint rule converges
//! geometrically, so the circle rule is accurate to round-off at the default
//! resolution.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLES_PER_AXIS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSettings {
    /// Midpoint samples on S¹.
    pub circle_samples: usize,
    /// Midpoint samples per axis on T².
    pub torus_samples: usize,
    /// Base samples per axis for sampled sup/inf checks (fiber uses this + 1).
    pub sandwich_samples: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            circle_samples: 1 << 16,
            torus_samples: 1024,
            sandwich_samples: 64,
        }
    }
}

impl QuadratureSettings {
    pub fn check(&self) -> Result<()> {
        for (name, n) in [
            ("circle_samples", self.circle_samples),
            ("torus_samples", self.torus_samples),
            ("sandwich_samples", self.sandwich_samples),
        ] {
            if n < MIN_SAMPLES_PER_AXIS {
                return Err(Error::domain(format!(
                    "quadrature {name} = {n} is below the minimum of {MIN_SAMPLES_PER_AXIS}"
                )));
            }
        }
        Ok(())
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Mean of `f` over S¹ by the `n`-point midpoint rule.
pub fn circle_mean(n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut acc = CompensatedSum::default();
    let h = 1.0 / n as f64;
    for i in 0..n {
        acc.add(f((i as f64 + 0.5) * h));
    }
    acc.value() / n as f64
}

/// Mean of `f` over T² by the `n × n` midpoint rule.
pub fn torus_mean(n: usize, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
    let mut acc = CompensatedSum::default();
    let h = 1.0 / n as f64;
    for j in 0..n {
        let v = (j as f64 + 0.5) * h;
        let mut row = CompensatedSum::default();
        for i in 0..n {
            row.add(f((i as f64 + 0.5) * h, v));
        }
        acc.add(row.value());
    }
    acc.value() / (n * n) as f64
}
