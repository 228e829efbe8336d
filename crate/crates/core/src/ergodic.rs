//! Orbits, Birkhoff averages and center Lyapunov exponents.
//!
//! The derivative of a skew product over a linear base is block triangular,
//! so the base exponents are read off the base map and only the center
//! exponent `(1/n) Σ log|∂_t φ(fⁱ x)|` is estimated along an orbit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{BasePoint, CirclePoint, PhasePoint, TorusPoint};
use crate::quadrature::{circle_mean, torus_mean, CompensatedSum, QuadratureSettings};
use crate::systems::SkewProductSystem;

/// Number of batches for batch-means standard errors.
pub const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitSettings {
    pub n_transient: u64,
    pub n_average: u64,
    pub seed: u64,
}

impl Default for OrbitSettings {
    fn default() -> Self {
        Self {
            n_transient: 0,
            n_average: 1_000_000,
            seed: 0x5eed,
        }
    }
}

impl OrbitSettings {
    pub fn check(&self) -> Result<()> {
        if self.n_average == 0 {
            return Err(Error::domain("n_average must be at least 1"));
        }
        Ok(())
    }
}

/// Deterministic generator for stream `index` of `seed`; streams of one seed
/// are independent, so multi-orbit drivers shard by orbit index.
pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Lebesgue-random base point for `sys`.
pub fn random_base(sys: &SkewProductSystem, rng: &mut impl Rng) -> BasePoint {
    if sys.has_circle_base() {
        BasePoint::Circle(CirclePoint::new(rng.gen()).expect("finite"))
    } else {
        BasePoint::Torus(TorusPoint::new(rng.gen(), rng.gen()).expect("finite"))
    }
}

/// Random point on the fiber level `level`, base drawn from stream `index`
/// of `seed`.
pub fn random_point_on_level(
    sys: &SkewProductSystem,
    level: f64,
    seed: u64,
    index: u64,
) -> Result<PhasePoint> {
    let x = PhasePoint::new(random_base(sys, &mut rng_for(seed, index)), level);
    sys.check_point(&x)?;
    Ok(x)
}

/// Streaming forward orbit `x₀, f(x₀), …, fⁿ(x₀)`.
#[derive(Debug, Clone)]
pub struct Orbit<'a> {
    sys: &'a SkewProductSystem,
    next: PhasePoint,
    remaining: u64,
}

impl Iterator for Orbit<'_> {
    type Item = PhasePoint;

    #[inline]
    fn next(&mut self) -> Option<PhasePoint> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let out = self.next;
        if self.remaining > 0 {
            self.next = self.sys.step(out);
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining as usize;
        (n, Some(n))
    }
}

pub fn orbit(sys: &SkewProductSystem, x0: PhasePoint, n: u64) -> Result<Orbit<'_>> {
    sys.check_point(&x0)?;
    Ok(Orbit {
        sys,
        next: x0,
        remaining: n + 1,
    })
}

/// Mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub n: u64,
}

struct BatchAccumulator {
    n: u64,
    seen: u64,
    total: CompensatedSum,
    batches: Vec<CompensatedSum>,
    counts: Vec<u64>,
}

impl BatchAccumulator {
    fn new(n: u64) -> Self {
        let b = (BATCHES as u64).min(n).max(1) as usize;
        Self {
            n,
            seen: 0,
            total: CompensatedSum::default(),
            batches: vec![CompensatedSum::default(); b],
            counts: vec![0; b],
        }
    }

    #[inline(always)]
    fn push(&mut self, x: f64) {
        let b = (self.seen as u128 * self.batches.len() as u128 / self.n as u128) as usize;
        self.batches[b].add(x);
        self.counts[b] += 1;
        self.total.add(x);
        self.seen += 1;
    }

    fn finish(self) -> BatchEstimate {
        let mean = self.total.value() / self.seen as f64;
        let b = self.batches.len();
        let standard_error = if b < 2 {
            0.0
        } else {
            let means: Vec<f64> = self
                .batches
                .iter()
                .zip(&self.counts)
                .map(|(s, &c)| s.value() / c as f64)
                .collect();
            let grand = means.iter().sum::<f64>() / b as f64;
            let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
            (var / b as f64).sqrt()
        };
        BatchEstimate {
            mean,
            standard_error,
            n: self.seen,
        }
    }
}

/// Average `g` over `n_average` iterates following `n_transient` discarded
/// ones.
fn orbit_estimate(
    sys: &SkewProductSystem,
    x0: PhasePoint,
    s: &OrbitSettings,
    mut g: impl FnMut(&PhasePoint) -> f64,
) -> Result<BatchEstimate> {
    s.check()?;
    sys.check_point(&x0)?;
    let mut x = x0;
    for _ in 0..s.n_transient {
        x = sys.step(x);
    }
    let mut acc = BatchAccumulator::new(s.n_average);
    for _ in 0..s.n_average {
        acc.push(g(&x));
        x = sys.step(x);
    }
    Ok(acc.finish())
}

pub fn birkhoff_estimate(
    sys: &SkewProductSystem,
    x0: PhasePoint,
    observable: impl FnMut(&PhasePoint) -> f64,
    s: &OrbitSettings,
) -> Result<BatchEstimate> {
    orbit_estimate(sys, x0, s, observable)
}

/// Finite-time Birkhoff average `(1/n) Σ g(fᵏ x₀)` after burn-in.
pub fn birkhoff_average(
    sys: &SkewProductSystem,
    x0: PhasePoint,
    observable: impl FnMut(&PhasePoint) -> f64,
    s: &OrbitSettings,
) -> Result<f64> {
    Ok(birkhoff_estimate(sys, x0, observable, s)?.mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Center exponent in nats per iterate.
    pub center: f64,
    pub base_unstable: f64,
    /// `None` for the expanding circle base, which has no stable direction.
    pub base_stable: Option<f64>,
    pub n_used: u64,
    pub standard_error: f64,
}

pub fn center_lyapunov(
    sys: &SkewProductSystem,
    x0: PhasePoint,
    s: &OrbitSettings,
) -> Result<LyapunovEstimate> {
    let est = orbit_estimate(sys, x0, s, |x| sys.fiber_dt(x.base, x.fiber).abs().ln())?;
    let (base_unstable, base_stable) = sys.base_exponents();
    Ok(LyapunovEstimate {
        center: est.mean,
        base_unstable,
        base_stable,
        n_used: est.n,
        standard_error: est.standard_error,
    })
}

/// Center exponents from `n_orbits` random starts on `level`; orbit `i`
/// draws its start from stream `i` of `s.seed`, so the result does not
/// depend on scheduling.
pub fn center_lyapunov_ensemble(
    sys: &SkewProductSystem,
    level: f64,
    s: &OrbitSettings,
    n_orbits: usize,
) -> Result<Vec<LyapunovEstimate>> {
    (0..n_orbits as u64)
        .into_par_iter()
        .map(|i| center_lyapunov(sys, random_point_on_level(sys, level, s.seed, i)?, s))
        .collect()
}

/// Mean over the base of `log|∂_t φ(·, level)|` by the midpoint rule; this is
/// the center exponent of the Lebesgue measure on the invariant level.
pub fn boundary_log_integral(
    sys: &SkewProductSystem,
    level: f64,
    quad: &QuadratureSettings,
) -> Result<f64> {
    quad.check()?;
    if !sys.is_invariant_level(level) {
        return Err(Error::domain(format!(
            "fiber level {level} is not invariant for {}",
            sys.family().name()
        )));
    }
    let value = if sys.has_circle_base() {
        circle_mean(quad.circle_samples, |th| {
            let b = BasePoint::Circle(CirclePoint::wrap_finite(th));
            sys.fiber_dt(b, level).abs().ln()
        })
    } else {
        torus_mean(quad.torus_samples, |u, v| {
            let b = BasePoint::Torus(TorusPoint::from_canonical(u, v));
            sys.fiber_dt(b, level).abs().ln()
        })
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{KanCylinderSystem, KanT3System, ToySystem};

    fn cyl() -> SkewProductSystem {
        KanCylinderSystem::default().into()
    }

    fn closed_form(eps: f64) -> f64 {
        ((1.0 + (1.0 - eps * eps).sqrt()) / 2.0).ln()
    }

    #[test]
    fn orbit_examples() {
        let sys = cyl();
        let fixed = PhasePoint::circle(0.0, 0.0).unwrap();
        assert!(orbit(&sys, fixed, 50).unwrap().all(|x| x == fixed));
        assert_eq!(orbit(&sys, fixed, 0).unwrap().count(), 1);

        let pts: Vec<_> = orbit(&sys, PhasePoint::circle(0.1, 0.0).unwrap(), 4)
            .unwrap()
            .collect();
        assert_eq!(pts.len(), 5);
        let expect = [0.1, 0.3, 0.9, 0.7, 0.1];
        for (p, e) in pts.iter().zip(expect) {
            assert!((p.base.first() - e).abs() < 1e-12);
            assert_eq!(p.fiber, 0.0);
        }
    }

    #[test]
    fn orbit_rejects_points_outside_phase_space() {
        let sys = cyl();
        assert!(orbit(&sys, PhasePoint::torus(0.1, 0.1, 0.0).unwrap(), 3).is_err());
    }

    #[test]
    fn birkhoff_of_constant_and_fixed_point() {
        let sys = cyl();
        let s = OrbitSettings {
            n_average: 1000,
            ..Default::default()
        };
        let x0 = PhasePoint::circle(0.37, 0.42).unwrap();
        assert_eq!(birkhoff_average(&sys, x0, |_| 2.5, &s).unwrap(), 2.5);
        let fixed = PhasePoint::circle(0.5, 1.0).unwrap();
        let v = birkhoff_average(&sys, fixed, |x| x.base.first() + x.fiber, &s).unwrap();
        assert_eq!(v, 1.5);
    }

    #[test]
    fn birkhoff_base_coordinate_equidistributes() {
        let sys = cyl();
        let s = OrbitSettings::default();
        let x0 = random_point_on_level(&sys, 0.0, 2024, 0).unwrap();
        let est = birkhoff_estimate(&sys, x0, |x| x.base.first(), &s).unwrap();
        let oracle = circle_mean(1 << 10, |th| th);
        assert!((oracle - 0.5).abs() < 1e-12);
        assert!(
            (est.mean - oracle).abs() <= 3.0 * est.standard_error,
            "{est:?}"
        );
    }

    #[test]
    fn birkhoff_is_affine_in_the_observable() {
        let sys: SkewProductSystem = KanT3System::default().into();
        let s = OrbitSettings {
            n_average: 20_000,
            n_transient: 10,
            ..Default::default()
        };
        let x0 = PhasePoint::torus(0.3, 0.6, 0.2).unwrap();
        let g = |x: &PhasePoint| x.fiber * x.base.first();
        let plain = birkhoff_average(&sys, x0, g, &s).unwrap();
        let affine = birkhoff_average(&sys, x0, |x| 3.0 * g(x) - 1.25, &s).unwrap();
        assert!((affine - (3.0 * plain - 1.25)).abs() < 1e-12);
    }

    #[test]
    fn center_exponent_at_fixed_points() {
        let s = OrbitSettings {
            n_average: 100_000,
            ..Default::default()
        };
        let est = center_lyapunov(&cyl(), PhasePoint::circle(0.0, 0.0).unwrap(), &s).unwrap();
        assert!((est.center - 0.5f64.ln()).abs() < 1e-14);
        assert_eq!(est.standard_error, 0.0);
        assert_eq!(est.base_unstable, 3f64.ln());
        assert_eq!(est.base_stable, None);

        let toy: SkewProductSystem = ToySystem::default().into();
        let est = center_lyapunov(&toy, PhasePoint::torus(0.31, 0.77, 0.5).unwrap(), &s).unwrap();
        assert!((est.center - 0.5f64.ln()).abs() < 1e-14);
        let lu = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((est.base_unstable - lu).abs() < 1e-15);
        assert_eq!(est.base_stable, Some(-est.base_unstable));
        assert!(est.base_stable.unwrap() < est.center && est.center < est.base_unstable);
    }

    #[test]
    fn boundary_integrals_match_closed_form() {
        let q = QuadratureSettings::default();
        for eps in [0.1, 0.5, 0.9] {
            let sys: SkewProductSystem = KanCylinderSystem::new(3, eps).unwrap().into();
            let i0 = boundary_log_integral(&sys, 0.0, &q).unwrap();
            let i1 = boundary_log_integral(&sys, 1.0, &q).unwrap();
            assert!((i0 - closed_form(eps)).abs() < 1e-8, "{eps}: {i0}");
            assert!((i0 - i1).abs() < 1e-10);
        }
        assert!(boundary_log_integral(&cyl(), 0.5, &q).is_err());
    }

    #[test]
    fn boundary_integral_oracle_by_simpson() {
        // Independent route: composite Simpson on [0,1] with a different node set.
        let n = 20_000;
        let f = |th: f64| (1.0 - 0.5 * (std::f64::consts::TAU * th).cos()).ln();
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let simpson = s * h / 3.0;
        let quad = boundary_log_integral(&cyl(), 0.0, &QuadratureSettings::default()).unwrap();
        assert!((simpson - quad).abs() < 1e-10);
    }

    #[test]
    fn torus_boundary_integrals_agree() {
        let q = QuadratureSettings {
            torus_samples: 512,
            ..Default::default()
        };
        let sys: SkewProductSystem = KanT3System::default().into();
        let i0 = boundary_log_integral(&sys, 0.0, &q).unwrap();
        let i1 = boundary_log_integral(&sys, 0.5, &q).unwrap();
        assert!(i0 < 0.0);
        assert!((i0 - i1).abs() < 1e-12);
    }

    #[test]
    fn estimates_are_deterministic() {
        let sys = cyl();
        let s = OrbitSettings {
            n_average: 50_000,
            seed: 9,
            ..Default::default()
        };
        let a = center_lyapunov_ensemble(&sys, 0.0, &s, 4).unwrap();
        let b = center_lyapunov_ensemble(&sys, 0.0, &s, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].center, a[1].center);
    }
}
