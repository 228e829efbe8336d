//! Center exponent on the invariant circle `t = 0` of the Kan cylinder:
//! time average along a random orbit against the quadrature value.
//!
//! ```text
//! cargo run --release --example center_lyapunov -- [n_average] [seed]
//! ```

use kanlab::{
    boundary_log_integral, center_lyapunov, ergodic::random_point_on_level, KanCylinderSystem,
    OrbitSettings, QuadratureSettings, SkewProductSystem,
};

fn main() -> kanlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_average = args.next().and_then(|s| s.parse().ok()).unwrap_or(1_000_000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0x5eed);

    let sys = SkewProductSystem::from(KanCylinderSystem::default());
    let exact = boundary_log_integral(&sys, 0.0, &QuadratureSettings::default())?;
    let s = OrbitSettings { n_transient: 0, n_average, seed };
    let x0 = random_point_on_level(&sys, 0.0, seed, 0)?;
    let est = center_lyapunov(&sys, x0, &s)?;

    println!("start            {:.12}", x0.base.first());
    println!("quadrature       {exact:.9}");
    println!("orbit average    {:.9} +- {:.2e} (n = {})", est.center, est.standard_error, est.n_used);
    println!("deviation / se   {:.2}", (est.center - exact).abs() / est.standard_error);
    println!("base exponent    {:.9}", est.base_unstable);
    Ok(())
}
