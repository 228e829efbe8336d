//! Check the Kan hypotheses for each family, and show a failing case.
//!
//! ```text
//! cargo run --example validate_conditions
//! ```

use kanlab::{
    validate_conditions, KanCylinderSystem, KanSolidTorusSystem, KanT3System, QuadratureSettings,
    SkewProductSystem, ToySystem,
};

fn show(label: &str, sys: &SkewProductSystem, quad: &QuadratureSettings) -> kanlab::Result<()> {
    let report = validate_conditions(sys, quad)?;
    println!("{label} [{}]", sys.fingerprint());
    for e in &report.entries {
        let evidence: Vec<String> = e.evidence.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
        println!("  {:<20} {:<5} {}", e.name, if e.passed { "pass" } else { "FAIL" }, evidence.join(" "));
    }
    let near = report.near_failures(0.01);
    if !near.is_empty() {
        println!("  near failures: {near:?}");
    }
    Ok(())
}

fn main() -> kanlab::Result<()> {
    let quad = QuadratureSettings::default();
    show("kan cylinder", &KanCylinderSystem::default().into(), &quad)?;
    show("kan solid torus", &KanSolidTorusSystem::default().into(), &quad)?;
    show("kan T3", &KanT3System::default().into(), &quad)?;
    show("toy", &ToySystem::default().into(), &quad)?;

    // eps = 0 makes the fiber map the identity: no sink, no source.
    show("kan cylinder, eps = 0", &KanCylinderSystem::new(3, 0.0)?.into(), &quad)?;
    // delta = 0.9 puts the fiber contraction below the base contraction.
    show("toy, delta = 0.9", &ToySystem::new(kanlab::IntMatrix2::CAT, 0.9)?.into(), &quad)?;
    Ok(())
}
