//! Mixed-box statistic across dyadic scales for the Kan cylinder. A value of
//! 1.0 at scale j means every 2^-j box meets both basins.
//!
//! ```text
//! cargo run --release --example intermingling -- [n]
//! ```

use kanlab::basins::{box_counting_scales, scale_count};
use kanlab::{basin_map, ClassifySettings, GridSpec, KanCylinderSystem, SkewProductSystem, Slice};

fn main() -> kanlab::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(256);
    let sys = SkewProductSystem::from(KanCylinderSystem::default());
    let grid = basin_map(&sys, &Slice::default(), &GridSpec::square(n), &ClassifySettings::default(), None)?;
    println!("{:>3} {:>10} {:>8} {:>8}", "j", "mixed", "count", "boxes");
    for j in std::iter::once(1).chain(box_counting_scales(&grid)) {
        let c = scale_count(&grid, j)?;
        println!("{:>3} {:>10.6} {:>8} {:>8}", c.scale_j, c.mixed_fraction, c.mixed_count, c.total_boxes);
    }

    // The toy system has one attractor, so nothing is mixed.
    let toy = SkewProductSystem::from(kanlab::ToySystem::default());
    let g = basin_map(&toy, &Slice::default(), &GridSpec::square(64), &ClassifySettings::default(), None)?;
    println!("toy, j = 3: {}", scale_count(&g, 3)?.mixed_fraction);
    Ok(())
}
