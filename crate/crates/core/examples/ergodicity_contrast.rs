//! Spread of cos(2 pi z) time averages under cat x Id and its deformation.
//! Small budgets by default; pass the ensemble size and horizons to enlarge.

use torus_deform::construction::build;
use torus_deform::ergodicity::{ergodicity_contrast, Observable};
use torus_deform::presets;

fn main() -> torus_deform::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ensemble = args.first().copied().unwrap_or(200);
    let horizons = if args.len() > 1 { args[1..].to_vec() } else { vec![1_000, 10_000] };
    let c = build(&presets::get("catxid")?.construction)?;
    let obs = [Observable::cos([0, 0, 1]), Observable::cos([1, 0, 0])];
    let r = ergodicity_contrast(&c.base, &c.map, &obs, ensemble, &horizons, 7)?;
    println!("{:<16} {:>7} {:>9} {:>9} {:>7}", "observable", "n", "base", "deformed", "ratio");
    for row in &r.rows {
        println!(
            "{:<16} {:>7} {:>9.4} {:>9.4} {:>7.3}",
            row.observable, row.horizon, row.base_std, row.deformed_std, row.ratio
        );
    }
    println!("sqrt(1/2) = {:.4}", 0.5f64.sqrt());
    Ok(())
}
