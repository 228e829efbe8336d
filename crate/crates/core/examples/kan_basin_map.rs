//! Basin map of the Kan cylinder on the (θ, t) square, written as a PPM.
//! Blue cells go to `t = 0`, red cells to `t = 1`, black is undecided.
//!
//! ```text
//! cargo run --release --example kan_basin_map -- [n] [out.ppm]
//! ```

use std::fs::File;
use std::io::BufWriter;

use kanlab::{basin_map, ClassifySettings, GridSpec, KanCylinderSystem, SkewProductSystem, Slice};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(256);
    let out = args.next().unwrap_or_else(|| "kan_basin.ppm".to_owned());

    let sys = SkewProductSystem::from(KanCylinderSystem::default());
    let grid = basin_map(&sys, &Slice::default(), &GridSpec::square(n), &ClassifySettings::default(), None)?;
    let f = grid.fractions();
    println!(
        "{n}x{n}: attractor0 {:.4}  attractor1 {:.4}  undecided {:.4}",
        f.attractor0, f.attractor1, f.undecided
    );
    grid.write_ppm(BufWriter::new(File::create(&out)?))?;
    println!("wrote {out}");
    Ok(())
}
