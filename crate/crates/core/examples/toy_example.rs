//! Cat map times a Morse-Smale circle map: one attracting torus `t = 1/2`,
//! one repelling torus `t = 0`, no intermingling.
//!
//! ```text
//! cargo run --release --example toy_example
//! ```

use kanlab::{run_toy_experiment, ExperimentSettings, GridSpec, OrbitSettings, ToySystem};

fn main() -> kanlab::Result<()> {
    let settings = ExperimentSettings {
        grid: GridSpec::square(256),
        orbit: OrbitSettings { n_average: 100_000, ..Default::default() },
        ..Default::default()
    };
    let toy = ToySystem::default();
    let r = run_toy_experiment(&toy, &settings)?;
    let c = r.center_at_attractor;
    println!("base exponents     {:+.10} {:+.10}", c.base_unstable, c.base_stable.unwrap_or(f64::NAN));
    println!("center at sink     {:+.10}  (log(1 - delta) = {:+.10})", c.center, (1.0 - toy.delta).ln());
    println!("center at source   {:+.10}", r.center_at_repeller.center);
    println!("attractor share    {:.6}", r.attractor_fraction);
    println!("repeller in basin closure: {}", r.repeller_adjacent_attractor1);
    println!("domination margin  {:.6}", r.domination_margin);
    Ok(())
}
