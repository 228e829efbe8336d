//! Perturbation sweeps. Boundary-preserving perturbations of the Kan cylinder
//! keep the basins intermingled; a constant fiber rotation of the Kan T3
//! system destroys the invariant tori.
//!
//! ```text
//! cargo run --release --example robustness_sweep -- [out_dir]
//! ```

use std::path::PathBuf;

use kanlab::experiments::write_report;
use kanlab::{
    run_robustness_sweep, ClassifySettings, ExperimentSettings, GridSpec, KanCylinderSystem,
    KanT3System, OrbitSettings, PerturbationMode, SkewProductSystem, Slice,
};

fn main() -> kanlab::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sweep_out".to_owned()));
    let base = ExperimentSettings {
        grid: GridSpec::square(128),
        orbit: OrbitSettings { n_average: 100_000, ..Default::default() },
        classify: ClassifySettings { max_iter: 5000, ..Default::default() },
        ..Default::default()
    };

    let cyl = SkewProductSystem::from(KanCylinderSystem::default());
    let r = run_robustness_sweep(&cyl, PerturbationMode::BoundaryPreserving, &[0.0, 0.02, 0.05], &base)?;
    println!("cylinder, boundary preserving");
    for row in &r.rows {
        println!(
            "  eta {:.3}  conditions {}  statistic j=5 {:?}  center(t=0) {:+.5}",
            row.eta,
            row.conditions.all_passed(),
            row.statistic_at(5),
            row.center[0].estimate.center
        );
    }
    write_report(&r, &out.join("cylinder"))?;

    let t3 = SkewProductSystem::from(KanT3System::default());
    let settings = ExperimentSettings { slice: Slice::BasePlane { fiber: 0.25 }, ..base };
    let r = run_robustness_sweep(&t3, PerturbationMode::FiberRotation, &[0.0, 0.02], &settings)?;
    println!("T3, fiber rotation");
    for row in &r.rows {
        let f = row.fractions;
        println!(
            "  eta {:.3}  a0 {:.3} a1 {:.3} undecided {:.3}  statistic j=5 {:?}",
            row.eta, f.attractor0, f.attractor1, f.undecided, row.statistic_at(5)
        );
    }
    write_report(&r, &out.join("t3"))?;
    println!("reports in {}", out.display());
    Ok(())
}
