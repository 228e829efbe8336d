//! Box-counting dimension of the basin boundary. A straight boundary gives
//! about 1; the intermingled Kan basins fill the square and give more.
//!
//! ```text
//! cargo run --release --example boundary_dimension -- [n]
//! ```

use kanlab::basins::{box_counting_scales, scale_count};
use kanlab::{
    basin_map, boundary_box_dimension, BasinLabel, BasinLabelGrid, ClassifySettings, GridSpec,
    KanCylinderSystem, SkewProductSystem, Slice,
};

fn main() -> kanlab::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(512);

    let labels = (0..n * n)
        .map(|k| if k % n < n / 3 { BasinLabel::Attractor0 } else { BasinLabel::Attractor1 })
        .collect();
    let straight = BasinLabelGrid::from_labels(n, n, labels)?;
    println!("straight boundary: {:?}", boundary_box_dimension(&straight));

    let sys = SkewProductSystem::from(KanCylinderSystem::default());
    let grid = basin_map(&sys, &Slice::default(), &GridSpec::square(n), &ClassifySettings::default(), None)?;
    for j in box_counting_scales(&grid) {
        let c = scale_count(&grid, j)?;
        println!("  j = {j:>2}: {} of {} boxes mixed", c.mixed_count, c.total_boxes);
    }
    println!("kan cylinder:      {:?}", boundary_box_dimension(&grid));
    Ok(())
}
