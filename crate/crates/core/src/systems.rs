//! The four skew-product families: the Kan endomorphism of the cylinder, the
//! Anosov × Morse–Smale toy map of T³, and the Kan-type diffeomorphisms of
//! T² × [0,1] and T² × S¹.
//!
//! Every system has the form `(b, t) ↦ (B(b), φ(b, t))` with a linear base
//! map `B` and an explicit fiber family:
//!
//! | family          | base        | fiber map                                  |
//! |-----------------|-------------|--------------------------------------------|
//! | `kan_cylinder`  | `θ ↦ kθ`    | `t − ε t(1−t) cos 2πθ`                     |
//! | `toy`           | `z ↦ Az`    | `t + (δ/2π) sin 2πt`                       |
//! | `kan_solid_torus` | `z ↦ Mz`  | `t − ε t(1−t) c(z)`                        |
//! | `kan_t3`        | `z ↦ Mz`    | `t − (ε/2π) sin(2πt) c(z)`                 |
//!
//! where `c(z) = β(|z−p|/r) − β(|z−q|/r)` and `β(s) = exp(1 − 1/(1−s²))` on
//! `|s| < 1`. The factors `t(1−t)` and `sin 2πt` vanish exactly at the
//! invariant levels, so boundary invariance holds with zero floating-point
//! error.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ergodic;
use crate::experiments::{Perturbation, PerturbationMode};
use crate::phase::{
    circle_gap, cos_turn, frac, sin_turn, torus_dist, BasePoint, CirclePoint, PhasePoint,
    TorusPoint,
};
use crate::quadrature::QuadratureSettings;

/// 2×2 integer matrix acting on T².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct IntMatrix2(pub [[i64; 2]; 2]);

/// Moduli of the eigenvalues of a hyperbolic matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub stable: f64,
    pub unstable: f64,
}

impl IntMatrix2 {
    pub const CAT: IntMatrix2 = IntMatrix2([[2, 1], [1, 1]]);

    pub fn det(&self) -> i64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    pub fn trace(&self) -> i64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn mul(&self, other: &IntMatrix2) -> IntMatrix2 {
        let [[a, b], [c, d]] = self.0;
        let [[e, f], [g, h]] = other.0;
        IntMatrix2([[a * e + b * g, a * f + b * h], [c * e + d * g, c * f + d * h]])
    }

    /// Eigenvalue moduli, or `None` when some eigenvalue lies on the unit
    /// circle (or the pair is complex, which for `|det| = 1` is the same).
    pub fn spectrum(&self) -> Option<Spectrum> {
        let tr = self.trace() as f64;
        let det = self.det() as f64;
        let disc = tr * tr - 4.0 * det;
        if disc < 0.0 || det == 0.0 {
            return None;
        }
        let big = (tr.abs() + disc.sqrt()) / 2.0;
        let small = det.abs() / big;
        (small < 1.0 && big > 1.0).then_some(Spectrum {
            stable: small,
            unstable: big,
        })
    }

    /// Singular values `(σ_min, σ_max)`, i.e. `‖M⁻¹‖⁻¹` and `‖M‖`.
    pub fn singular_values(&self) -> (f64, f64) {
        let [[a, b], [c, d]] = self.0.map(|r| r.map(|x| x as f64));
        let fro = a * a + b * b + c * c + d * d;
        let det = (a * d - b * c).abs();
        let root = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
        let max = ((fro + root) / 2.0).sqrt();
        (det / max, max)
    }

    #[inline(always)]
    pub(crate) fn apply_raw(&self, u: f64, v: f64) -> (f64, f64) {
        let [[a, b], [c, d]] = self.0;
        (
            frac(a as f64 * u + b as f64 * v),
            frac(c as f64 * u + d as f64 * v),
        )
    }

    pub fn apply(&self, z: TorusPoint) -> TorusPoint {
        let (u, v) = self.apply_raw(z.u(), z.v());
        TorusPoint::from_canonical(u, v)
    }

    /// All fixed points on T², enumerated exactly: they are the solutions of
    /// `(M − I)z ∈ Z²`, whose coordinates have denominator `|det(M − I)|`.
    pub fn fixed_points(&self) -> Vec<TorusPoint> {
        let [[a, b], [c, d]] = self.0;
        let (a, d) = (a - 1, d - 1);
        let n = (a * d - b * c).abs();
        if n == 0 {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(n as usize);
        for x in 0..n {
            for y in 0..n {
                if (a * x + b * y).rem_euclid(n) == 0 && (c * x + d * y).rem_euclid(n) == 0 {
                    out.push(TorusPoint::from_canonical(x as f64 / n as f64, y as f64 / n as f64));
                }
            }
        }
        out
    }

    pub fn fixes(&self, z: TorusPoint) -> bool {
        torus_dist(self.apply(z), z) < 1e-9
    }

    fn check_anosov(&self, what: &str) -> Result<Spectrum> {
        if self.det().abs() != 1 {
            return Err(Error::domain(format!(
                "{what} {:?} has determinant {}, expected ±1",
                self.0,
                self.det()
            )));
        }
        self.spectrum()
            .ok_or_else(|| Error::domain(format!("{what} {:?} is not hyperbolic", self.0)))
    }
}

/// `z ↦ Mz (mod 1)`.
pub fn anosov_map(m: &IntMatrix2, z: TorusPoint) -> TorusPoint {
    m.apply(z)
}

/// Kan endomorphism of the cylinder S¹ × [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct KanCylinderSystem {
    pub k: u32,
    pub eps: f64,
}

impl Default for KanCylinderSystem {
    fn default() -> Self {
        Self { k: 3, eps: 0.5 }
    }
}

impl KanCylinderSystem {
    pub fn new(k: u32, eps: f64) -> Result<Self> {
        let s = Self { k, eps };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::domain(format!("k = {} must be at least 3", self.k)));
        }
        check_unit_strength("eps", self.eps)
    }

    #[inline(always)]
    fn fiber(&self, theta: f64, t: f64) -> f64 {
        t - self.eps * t * (1.0 - t) * cos_turn(theta)
    }

    #[inline(always)]
    fn fiber_dt(&self, theta: f64, t: f64) -> f64 {
        1.0 - self.eps * (1.0 - 2.0 * t) * cos_turn(theta)
    }

    pub fn map(&self, x: PhasePoint) -> Result<PhasePoint> {
        SkewProductSystem::from(*self).map(x)
    }

    pub fn fiber_derivative(&self, x: PhasePoint) -> Result<f64> {
        SkewProductSystem::from(*self).fiber_derivative(x)
    }
}

/// Anosov × Morse–Smale map of T² × S¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ToySystem {
    pub a: IntMatrix2,
    pub delta: f64,
}

impl Default for ToySystem {
    fn default() -> Self {
        Self {
            a: IntMatrix2::CAT,
            delta: 0.5,
        }
    }
}

impl ToySystem {
    pub fn new(a: IntMatrix2, delta: f64) -> Result<Self> {
        let s = Self { a, delta };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        self.a.check_anosov("toy base matrix")?;
        check_unit_strength("delta", self.delta)
    }

    #[inline(always)]
    fn fiber(&self, t: f64) -> f64 {
        t + self.delta / TAU * sin_turn(t)
    }

    #[inline(always)]
    fn fiber_dt(&self, t: f64) -> f64 {
        1.0 + self.delta * cos_turn(t)
    }

    pub fn map(&self, x: PhasePoint) -> Result<PhasePoint> {
        SkewProductSystem::from(*self).map(x)
    }

    pub fn fiber_derivative(&self, x: PhasePoint) -> Result<f64> {
        SkewProductSystem::from(*self).fiber_derivative(x)
    }
}

/// Bump coupling `c(z) = β(|z−p|/r) − β(|z−q|/r)` shared by the two Kan
/// families over T².
#[derive(Debug, Clone, Copy, PartialEq)]
struct BumpPair {
    p: [f64; 2],
    q: [f64; 2],
    inv_r2: f64,
}

impl BumpPair {
    #[inline(always)]
    fn bump(&self, center: [f64; 2], u: f64, v: f64) -> f64 {
        let du = circle_gap(u, center[0]);
        let dv = circle_gap(v, center[1]);
        let s2 = (du * du + dv * dv) * self.inv_r2;
        if s2 < 1.0 {
            (1.0 - 1.0 / (1.0 - s2)).exp()
        } else {
            0.0
        }
    }

    #[inline(always)]
    fn coupling(&self, u: f64, v: f64) -> f64 {
        self.bump(self.p, u, v) - self.bump(self.q, u, v)
    }
}

macro_rules! torus_kan_system {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            pub m: IntMatrix2,
            pub eps: f64,
            pub radius: f64,
            pub p: [f64; 2],
            pub q: [f64; 2],
        }

        impl Default for $name {
            fn default() -> Self {
                Self {
                    m: IntMatrix2::CAT.mul(&IntMatrix2::CAT),
                    eps: 0.5,
                    radius: 0.2,
                    p: [0.0, 0.0],
                    q: [0.2, 0.4],
                }
            }
        }

        impl $name {
            fn check(&self) -> Result<()> {
                self.m.check_anosov("base matrix")?;
                check_unit_strength("eps", self.eps)?;
                if !(self.radius > 0.0 && self.radius < 0.5) {
                    return Err(Error::domain(format!(
                        "bump radius {} must lie in (0, 1/2)", self.radius
                    )));
                }
                let p = TorusPoint::new(self.p[0], self.p[1])?;
                let q = TorusPoint::new(self.q[0], self.q[1])?;
                for (name, z) in [("p", p), ("q", q)] {
                    if !self.m.fixes(z) {
                        return Err(Error::domain(format!(
                            "{name} = ({}, {}) is not fixed by {:?}", z.u(), z.v(), self.m.0
                        )));
                    }
                }
                let gap = torus_dist(p, q);
                if gap <= 2.0 * self.radius {
                    return Err(Error::domain(format!(
                        "bump supports overlap: |p - q| = {gap} <= 2r = {}", 2.0 * self.radius
                    )));
                }
                Ok(())
            }

            fn bumps(&self) -> BumpPair {
                BumpPair {
                    p: self.p,
                    q: self.q,
                    inv_r2: 1.0 / (self.radius * self.radius),
                }
            }

            /// The coupling `c(z)`; `1` at `p`, `−1` at `q`, `0` off both
            /// bump supports.
            pub fn coupling(&self, z: TorusPoint) -> f64 {
                self.bumps().coupling(z.u(), z.v())
            }

            pub fn map(&self, x: PhasePoint) -> Result<PhasePoint> {
                SkewProductSystem::from(*self).map(x)
            }

            pub fn fiber_derivative(&self, x: PhasePoint) -> Result<f64> {
                SkewProductSystem::from(*self).fiber_derivative(x)
            }
        }
    };
}

torus_kan_system!(
    /// Kan-type diffeomorphism of the solid torus T² × [0,1].
    KanSolidTorusSystem
);
torus_kan_system!(
    /// Kan-type diffeomorphism of T³ = T² × S¹ with invariant tori at
    /// `t = 0` and `t = 1/2`.
    KanT3System
);

impl KanSolidTorusSystem {
    pub fn new(m: IntMatrix2, eps: f64, radius: f64, p: [f64; 2], q: [f64; 2]) -> Result<Self> {
        let s = Self { m, eps, radius, p, q };
        s.check()?;
        Ok(s)
    }
}

impl KanT3System {
    pub fn new(m: IntMatrix2, eps: f64, radius: f64, p: [f64; 2], q: [f64; 2]) -> Result<Self> {
        let s = Self { m, eps, radius, p, q };
        s.check()?;
        Ok(s)
    }
}

fn check_unit_strength(name: &str, x: f64) -> Result<()> {
    if (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {x} must lie in [0, 1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    KanCylinder(KanCylinderSystem),
    Toy(ToySystem),
    KanSolidTorus(KanSolidTorusSystem),
    KanT3(KanT3System),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::KanCylinder(_) => "kan_cylinder",
            Family::Toy(_) => "toy",
            Family::KanSolidTorus(_) => "kan_solid_torus",
            Family::KanT3(_) => "kan_t3",
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Family::KanCylinder(s) => s.check(),
            Family::Toy(s) => s.check(),
            Family::KanSolidTorus(s) => s.check(),
            Family::KanT3(s) => s.check(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiberKind {
    /// `[0, 1]`, boundary levels 0 and 1.
    Interval,
    /// `S¹ = [0, 1)`, invariant levels 0 and 1/2.
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kernel {
    Cylinder(KanCylinderSystem),
    Toy(ToySystem),
    Solid(IntMatrix2, f64, BumpPair),
    T3(IntMatrix2, f64, BumpPair),
}

/// A validated system, possibly carrying one perturbation. Immutable after
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemRepr", into = "SystemRepr")]
pub struct SkewProductSystem {
    family: Family,
    perturbation: Option<Perturbation>,
    kernel: Kernel,
}

#[derive(Serialize, Deserialize)]
struct SystemRepr {
    family: Family,
    perturbation: Option<Perturbation>,
}

impl TryFrom<SystemRepr> for SkewProductSystem {
    type Error = Error;

    fn try_from(r: SystemRepr) -> Result<Self> {
        let s = SkewProductSystem::new(r.family)?;
        match r.perturbation {
            Some(p) => s.with_perturbation(p),
            None => Ok(s),
        }
    }
}

impl From<SkewProductSystem> for SystemRepr {
    fn from(s: SkewProductSystem) -> Self {
        SystemRepr {
            family: s.family,
            perturbation: s.perturbation,
        }
    }
}

macro_rules! impl_from_family {
    ($($ty:ident => $variant:ident),*) => {$(
        impl From<$ty> for SkewProductSystem {
            /// Panics if the parameters violate the family invariants; use
            /// [`SkewProductSystem::new`] for fallible construction.
            fn from(s: $ty) -> Self {
                SkewProductSystem::new(Family::$variant(s)).expect("invalid system parameters")
            }
        }
    )*};
}

impl_from_family!(
    KanCylinderSystem => KanCylinder,
    ToySystem => Toy,
    KanSolidTorusSystem => KanSolidTorus,
    KanT3System => KanT3
);

impl SkewProductSystem {
    pub fn new(family: Family) -> Result<Self> {
        family.check()?;
        let kernel = match family {
            Family::KanCylinder(s) => Kernel::Cylinder(s),
            Family::Toy(s) => Kernel::Toy(s),
            Family::KanSolidTorus(s) => Kernel::Solid(s.m, s.eps, s.bumps()),
            Family::KanT3(s) => Kernel::T3(s.m, s.eps, s.bumps()),
        };
        Ok(Self {
            family,
            perturbation: None,
            kernel,
        })
    }

    /// Replace the perturbation after checking the perturbed fiber maps stay
    /// increasing bijections on a sample grid.
    pub(crate) fn with_perturbation(&self, p: Perturbation) -> Result<Self> {
        p.check_finite()?;
        match (p.mode, self.fiber_kind()) {
            (PerturbationMode::BoundaryPreserving, FiberKind::Interval)
            | (PerturbationMode::FiberRotation, FiberKind::Circle) => {}
            (mode, kind) => {
                return Err(Error::domain(format!(
                    "{mode:?} perturbation does not apply to {kind:?} fibers of {}",
                    self.family.name()
                )))
            }
        }
        let out = Self {
            perturbation: Some(p),
            ..self.clone()
        };
        let inf = out.min_signed_derivative(64);
        if !(inf > 0.0) {
            return Err(Error::domain(format!(
                "perturbation eta = {} makes the fiber map non-monotone (min derivative {inf})",
                p.eta
            )));
        }
        Ok(out)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn perturbation(&self) -> Option<&Perturbation> {
        self.perturbation.as_ref()
    }

    pub fn fiber_kind(&self) -> FiberKind {
        match self.kernel {
            Kernel::Cylinder(_) | Kernel::Solid(..) => FiberKind::Interval,
            Kernel::Toy(_) | Kernel::T3(..) => FiberKind::Circle,
        }
    }

    pub fn has_circle_base(&self) -> bool {
        matches!(self.kernel, Kernel::Cylinder(_))
    }

    /// The two distinguished fiber levels `[level₀, level₁]`: `[0, 1]` for
    /// interval fibers, `[0, 1/2]` for circle fibers.
    pub fn levels(&self) -> [f64; 2] {
        match self.fiber_kind() {
            FiberKind::Interval => [0.0, 1.0],
            FiberKind::Circle => [0.0, 0.5],
        }
    }

    /// Whether `level` is a distinguished level that the (possibly perturbed)
    /// map leaves invariant.
    pub fn is_invariant_level(&self, level: f64) -> bool {
        if !self.levels().contains(&level) {
            return false;
        }
        match self.perturbation {
            Some(Perturbation {
                mode: PerturbationMode::FiberRotation,
                eta,
                ..
            }) => frac(eta) == 0.0,
            _ => true,
        }
    }

    /// Short content hash of the serialized system.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("system serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    pub fn check_point(&self, x: &PhasePoint) -> Result<()> {
        match (self.has_circle_base(), x.base) {
            (true, BasePoint::Circle(_)) | (false, BasePoint::Torus(_)) => {}
            _ => {
                return Err(Error::domain(format!(
                    "base point {:?} does not belong to the {} phase space",
                    x.base,
                    self.family.name()
                )))
            }
        }
        let t = x.fiber;
        let ok = match self.fiber_kind() {
            FiberKind::Interval => (0.0..=1.0).contains(&t),
            FiberKind::Circle => (0.0..1.0).contains(&t),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "fiber coordinate {t} outside the {:?} fiber of {}",
                self.fiber_kind(),
                self.family.name()
            )))
        }
    }

    #[inline(always)]
    pub(crate) fn base_step(&self, b: BasePoint) -> BasePoint {
        match (&self.kernel, b) {
            (Kernel::Cylinder(s), BasePoint::Circle(c)) => {
                BasePoint::Circle(CirclePoint::wrap_finite(s.k as f64 * c.value()))
            }
            (Kernel::Toy(ToySystem { a: m, .. }), BasePoint::Torus(z))
            | (Kernel::Solid(m, ..), BasePoint::Torus(z))
            | (Kernel::T3(m, ..), BasePoint::Torus(z)) => BasePoint::Torus(m.apply(z)),
            _ => unreachable!("base point kind checked on entry"),
        }
    }

    /// Fiber image before reduction to the fiber domain.
    #[inline(always)]
    pub(crate) fn fiber_lift(&self, b: BasePoint, t: f64) -> f64 {
        let base = match (&self.kernel, b) {
            (Kernel::Cylinder(s), _) => s.fiber(b.first(), t),
            (Kernel::Toy(s), _) => s.fiber(t),
            (Kernel::Solid(_, eps, bumps), BasePoint::Torus(z)) => {
                t - eps * t * (1.0 - t) * bumps.coupling(z.u(), z.v())
            }
            (Kernel::T3(_, eps, bumps), BasePoint::Torus(z)) => {
                // Off the bumps the fiber map is the identity; skip the sine.
                match bumps.coupling(z.u(), z.v()) {
                    0.0 => t,
                    c => t - eps / TAU * sin_turn(t) * c,
                }
            }
            _ => unreachable!("base point kind checked on entry"),
        };
        match &self.perturbation {
            None => base,
            Some(p) => match p.mode {
                PerturbationMode::BoundaryPreserving => {
                    base + p.eta * t * (1.0 - t) * sin_turn(b.first() + p.phase)
                }
                PerturbationMode::FiberRotation => base + p.eta,
            },
        }
    }

    #[inline(always)]
    pub(crate) fn fiber_dt(&self, b: BasePoint, t: f64) -> f64 {
        let base = match (&self.kernel, b) {
            (Kernel::Cylinder(s), _) => s.fiber_dt(b.first(), t),
            (Kernel::Toy(s), _) => s.fiber_dt(t),
            (Kernel::Solid(_, eps, bumps), BasePoint::Torus(z)) => {
                1.0 - eps * (1.0 - 2.0 * t) * bumps.coupling(z.u(), z.v())
            }
            (Kernel::T3(_, eps, bumps), BasePoint::Torus(z)) => {
                1.0 - eps * cos_turn(t) * bumps.coupling(z.u(), z.v())
            }
            _ => unreachable!("base point kind checked on entry"),
        };
        match &self.perturbation {
            Some(p) if p.mode == PerturbationMode::BoundaryPreserving => {
                base + p.eta * (1.0 - 2.0 * t) * sin_turn(b.first() + p.phase)
            }
            _ => base,
        }
    }

    #[inline(always)]
    pub(crate) fn reduce_fiber(&self, t: f64) -> f64 {
        match self.fiber_kind() {
            FiberKind::Interval => t.clamp(0.0, 1.0),
            FiberKind::Circle => frac(t),
        }
    }

    /// One application of the map; `x` must already lie in phase space.
    #[inline(always)]
    pub(crate) fn step(&self, x: PhasePoint) -> PhasePoint {
        PhasePoint {
            base: self.base_step(x.base),
            fiber: self.reduce_fiber(self.fiber_lift(x.base, x.fiber)),
        }
    }

    pub fn map(&self, x: PhasePoint) -> Result<PhasePoint> {
        self.check_point(&x)?;
        Ok(self.step(x))
    }

    /// `∂_t φ` at `x`.
    pub fn fiber_derivative(&self, x: PhasePoint) -> Result<f64> {
        self.check_point(&x)?;
        Ok(self.fiber_dt(x.base, x.fiber))
    }

    /// Every fixed point of the base map in the fundamental domain.
    pub fn base_fixed_points(&self) -> Vec<BasePoint> {
        match &self.kernel {
            Kernel::Cylinder(s) => {
                let n = s.k - 1;
                (0..n)
                    .map(|j| BasePoint::Circle(CirclePoint::new(j as f64 / n as f64).unwrap()))
                    .collect()
            }
            Kernel::Toy(ToySystem { a: m, .. }) | Kernel::Solid(m, ..) | Kernel::T3(m, ..) => {
                m.fixed_points().into_iter().map(BasePoint::Torus).collect()
            }
        }
    }

    /// The base fixed points `(p, q)` over which the fiber dynamics
    /// contracts toward level₀ and level₁ respectively. For the toy system
    /// both are the origin.
    pub fn distinguished_points(&self) -> (BasePoint, BasePoint) {
        let torus = |c: [f64; 2]| BasePoint::Torus(TorusPoint::new(c[0], c[1]).unwrap());
        match &self.family {
            Family::KanCylinder(_) => {
                let fixed = self.base_fixed_points();
                let q = fixed
                    .iter()
                    .copied()
                    .min_by(|a, b| cos_turn(a.first()).total_cmp(&cos_turn(b.first())))
                    .unwrap();
                (fixed[0], q)
            }
            Family::Toy(_) => (torus([0.0, 0.0]), torus([0.0, 0.0])),
            Family::KanSolidTorus(s) => (torus(s.p), torus(s.q)),
            Family::KanT3(s) => (torus(s.p), torus(s.q)),
        }
    }

    /// Base Lyapunov exponents `(unstable, stable)`; the expanding circle map
    /// has no stable direction.
    pub fn base_exponents(&self) -> (f64, Option<f64>) {
        match &self.kernel {
            Kernel::Cylinder(s) => ((s.k as f64).ln(), None),
            Kernel::Toy(ToySystem { a: m, .. }) | Kernel::Solid(m, ..) | Kernel::T3(m, ..) => {
                let lu = m.spectrum().expect("hyperbolic by construction").unstable.ln();
                (lu, Some(-lu))
            }
        }
    }

    pub fn base_matrix(&self) -> Option<IntMatrix2> {
        match &self.kernel {
            Kernel::Cylinder(_) => None,
            Kernel::Toy(ToySystem { a: m, .. }) | Kernel::Solid(m, ..) | Kernel::T3(m, ..) => {
                Some(*m)
            }
        }
    }

    /// Base sample points at the corners of an `n`-grid (so fixed points with
    /// small denominators are hit exactly).
    pub(crate) fn base_samples(&self, n: usize) -> Vec<BasePoint> {
        if self.has_circle_base() {
            (0..n)
                .map(|i| BasePoint::Circle(CirclePoint::new(i as f64 / n as f64).unwrap()))
                .collect()
        } else {
            (0..n * n)
                .map(|idx| {
                    let (i, j) = (idx % n, idx / n);
                    BasePoint::Torus(TorusPoint::new(i as f64 / n as f64, j as f64 / n as f64).unwrap())
                })
                .collect()
        }
    }

    pub(crate) fn fiber_samples(&self, n: usize) -> Vec<f64> {
        match self.fiber_kind() {
            FiberKind::Interval => (0..=n).map(|j| j as f64 / n as f64).collect(),
            FiberKind::Circle => (0..n).map(|j| j as f64 / n as f64).collect(),
        }
    }

    fn min_signed_derivative(&self, n: usize) -> f64 {
        let fibers = self.fiber_samples(n);
        self.base_samples(n)
            .into_iter()
            .flat_map(|b| fibers.iter().map(move |&t| self.fiber_dt(b, t)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Sampled `(inf, sup)` of `|∂_t φ|` over an `n`-grid of base and fiber.
    pub(crate) fn derivative_range(&self, n: usize) -> (f64, f64) {
        let fibers = self.fiber_samples(n);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for b in self.base_samples(n) {
            for &t in &fibers {
                let d = self.fiber_dt(b, t).abs();
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        (lo, hi)
    }
}

/// One hypothesis verdict with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub name: String,
    pub passed: bool,
    pub evidence: BTreeMap<String, f64>,
}

impl ConditionEntry {
    fn new(name: &str, passed: bool, evidence: &[(&str, f64)]) -> Self {
        Self {
            name: name.to_owned(),
            passed,
            evidence: evidence.iter().map(|(k, v)| ((*k).to_owned(), *v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub family: String,
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Conditions whose recorded `*_margin` evidence is below `threshold`.
    pub fn near_failures(&self, threshold: f64) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| {
                e.evidence
                    .iter()
                    .any(|(k, v)| k.ends_with("_margin") && *v < threshold)
            })
            .map(|e| e.name.as_str())
            .collect()
    }
}

/// Check every hypothesis of the system's family numerically: exact boundary
/// invariance, fixed-point types over `p` and `q`, the derivative sandwich on
/// a sample grid, and the boundary log-derivative integrals by quadrature.
pub fn validate_conditions(
    sys: &SkewProductSystem,
    quad: &QuadratureSettings,
) -> Result<ConditionReport> {
    quad.check()?;
    let entries = match sys.family() {
        Family::Toy(toy) => toy_conditions(sys, toy, quad),
        Family::KanCylinder(_) => kan_conditions(sys, quad, "K"),
        Family::KanSolidTorus(_) => kan_conditions(sys, quad, "KD"),
        Family::KanT3(_) => kan_conditions(sys, quad, "KB"),
    };
    Ok(ConditionReport {
        family: sys.family().name().to_owned(),
        entries,
    })
}

/// Interior fixed points of `t ↦ φ(b, t)` found as sign changes or zeros of
/// `φ(b,t) − t` on a sample grid that excludes the two levels.
fn interior_fixed_points(sys: &SkewProductSystem, b: BasePoint, n: usize) -> usize {
    let [l0, l1] = sys.levels();
    let arcs: Vec<(f64, f64)> = match sys.fiber_kind() {
        FiberKind::Interval => vec![(l0, l1)],
        FiberKind::Circle => vec![(l0, l1), (l1, 1.0)],
    };
    let mut count = 0;
    for (lo, hi) in arcs {
        let mut prev: Option<f64> = None;
        for j in 1..n {
            let t = lo + (hi - lo) * j as f64 / n as f64;
            let g = sys.fiber_lift(b, t) - t;
            if g == 0.0 {
                count += 1;
            } else if let Some(p) = prev {
                if p.signum() != g.signum() {
                    count += 1;
                }
            }
            prev = Some(g);
        }
    }
    count
}

fn boundary_invariance_error(sys: &SkewProductSystem, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for b in sys.base_samples(n) {
        for level in sys.levels() {
            let image = sys.reduce_fiber(sys.fiber_lift(b, level));
            let err = match sys.fiber_kind() {
                FiberKind::Interval => (image - level).abs(),
                FiberKind::Circle => circle_gap(image, level),
            };
            worst = worst.max(err);
        }
    }
    worst
}

fn kan_conditions(sys: &SkewProductSystem, quad: &QuadratureSettings, prefix: &str) -> Vec<ConditionEntry> {
    let n = quad.sandwich_samples;
    let [l0, l1] = sys.levels();
    let mut out = Vec::with_capacity(4);

    let err = boundary_invariance_error(sys, n);
    out.push(ConditionEntry::new(
        &format!("{prefix}1"),
        err == 0.0,
        &[("max_abs_error", err), ("base_samples", sys.base_samples(n).len() as f64)],
    ));

    let (p, q) = sys.distinguished_points();
    let fixed = |b: BasePoint| match b {
        BasePoint::Circle(_) => circle_gap(sys.base_step(b).first(), b.first()) < 1e-12,
        BasePoint::Torus(z) => sys.base_matrix().is_some_and(|m| m.fixes(z)),
    };
    let p_sink = sys.fiber_dt(p, l0);
    let p_source = sys.fiber_dt(p, l1);
    let q_sink = sys.fiber_dt(q, l1);
    let q_source = sys.fiber_dt(q, l0);
    let interior = interior_fixed_points(sys, p, 4 * n) + interior_fixed_points(sys, q, 4 * n);
    let levels_fixed = [p, q]
        .iter()
        .all(|&b| [l0, l1].iter().all(|&l| sys.reduce_fiber(sys.fiber_lift(b, l)) == l));
    let hyperbolic = |sink: f64, source: f64| sink > 0.0 && sink < 1.0 && source > 1.0;
    out.push(ConditionEntry::new(
        &format!("{prefix}2"),
        fixed(p)
            && fixed(q)
            && levels_fixed
            && hyperbolic(p_sink, p_source)
            && hyperbolic(q_sink, q_source)
            && interior == 0,
        &[
            ("p_sink_multiplier", p_sink),
            ("p_source_multiplier", p_source),
            ("q_sink_multiplier", q_sink),
            ("q_source_multiplier", q_source),
            ("interior_fixed_points", interior as f64),
        ],
    ));

    let (inf, sup) = sys.derivative_range(n);
    let entry = match sys.family() {
        Family::KanCylinder(s) => {
            let k = s.k as f64;
            ConditionEntry::new(
                &format!("{prefix}3"),
                sup < k,
                &[
                    ("inf_derivative", inf),
                    ("sup_derivative", sup),
                    ("k", k),
                    ("upper_margin", k - sup),
                ],
            )
        }
        _ => {
            let m = sys.base_matrix().expect("torus base");
            let spec = m.spectrum().expect("hyperbolic");
            let (norm_lower, norm_upper) = m.singular_values();
            let norm_pass = norm_lower < inf && sup < norm_upper;
            ConditionEntry::new(
                &format!("{prefix}3"),
                spec.stable < inf && sup < spec.unstable,
                &[
                    ("inf_derivative", inf),
                    ("sup_derivative", sup),
                    ("lambda_stable", spec.stable),
                    ("lambda_unstable", spec.unstable),
                    ("lower_margin", inf - spec.stable),
                    ("upper_margin", spec.unstable - sup),
                    ("norm_lower", norm_lower),
                    ("norm_upper", norm_upper),
                    ("operator_norm_pass", if norm_pass { 1.0 } else { 0.0 }),
                ],
            )
        }
    };
    out.push(entry);

    let integral = |level| ergodic::boundary_log_integral(sys, level, quad).unwrap_or(f64::NAN);
    let (i0, i1) = (integral(l0), integral(l1));
    out.push(ConditionEntry::new(
        &format!("{prefix}4"),
        i0 < 0.0 && i1 < 0.0,
        &[("integral_level0", i0), ("integral_level1", i1)],
    ));
    out
}

fn toy_conditions(sys: &SkewProductSystem, toy: &ToySystem, quad: &QuadratureSettings) -> Vec<ConditionEntry> {
    let n = quad.sandwich_samples;
    let spec = toy.a.spectrum();
    let (ls, lu) = spec.map_or((f64::NAN, f64::NAN), |s| (s.stable, s.unstable));
    let mut out = vec![ConditionEntry::new(
        "hyperbolic_base",
        spec.is_some() && toy.a.det().abs() == 1,
        &[
            ("lambda_stable", ls),
            ("lambda_unstable", lu),
            ("det", toy.a.det() as f64),
        ],
    )];

    let origin = BasePoint::Torus(TorusPoint::from_canonical(0.0, 0.0));
    let source = sys.fiber_dt(origin, 0.0);
    let sink = sys.fiber_dt(origin, 0.5);
    let levels_fixed = [0.0, 0.5]
        .iter()
        .all(|&l| sys.reduce_fiber(sys.fiber_lift(origin, l)) == l);
    let interior = interior_fixed_points(sys, origin, 4 * n);
    out.push(ConditionEntry::new(
        "morse_smale_fiber",
        levels_fixed && source > 1.0 && sink > 0.0 && sink < 1.0 && interior == 0,
        &[
            ("source_multiplier", source),
            ("sink_multiplier", sink),
            ("interior_fixed_points", interior as f64),
        ],
    ));

    let (inf, sup) = sys.derivative_range(n);
    out.push(ConditionEntry::new(
        "domination",
        ls < inf && sup < lu,
        &[
            ("inf_derivative", inf),
            ("sup_derivative", sup),
            ("lambda_stable", ls),
            ("lambda_unstable", lu),
            ("lower_margin", inf - ls),
            ("upper_margin", lu - sup),
        ],
    ));
    out
}
