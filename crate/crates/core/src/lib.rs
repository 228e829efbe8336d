//! Numerical laboratory for Kan-type partially hyperbolic skew products
//! `(b, t) ↦ (B(b), φ(b, t))`: condition validators, center Lyapunov
//! exponents, basin maps with intermingling and boundary-dimension
//! statistics, and perturbation experiments.
//!
//! ```
//! use kanlab::{boundary_log_integral, KanCylinderSystem, QuadratureSettings, SkewProductSystem};
//!
//! let sys = SkewProductSystem::from(KanCylinderSystem::default());
//! let lambda = boundary_log_integral(&sys, 0.0, &QuadratureSettings::default()).unwrap();
//! assert!(lambda < 0.0);
//! ```

mod artifacts;
mod error;

pub mod basins;
pub mod cli;
pub mod ergodic;
pub mod experiments;
pub mod phase;
pub mod quadrature;
pub mod systems;

pub use basins::{
    basin_map, boundary_box_dimension, classify, intermingling_statistic, BasinLabel,
    BasinLabelGrid, ClassifySettings, GridSpec, Slice,
};
pub use error::{Error, Result};
pub use ergodic::{
    birkhoff_average, boundary_log_integral, center_lyapunov, orbit, LyapunovEstimate,
    OrbitSettings,
};
pub use experiments::{
    perturb, run_robustness_sweep, run_toy_experiment, ExperimentSettings, Perturbation,
    PerturbationMode,
};
pub use phase::{make_grid, wrap_circle, Box2D, CirclePoint, PhasePoint, TorusPoint};
pub use quadrature::QuadratureSettings;
pub use systems::{
    validate_conditions, ConditionReport, Family, IntMatrix2, KanCylinderSystem,
    KanSolidTorusSystem, KanT3System, SkewProductSystem, ToySystem,
};
