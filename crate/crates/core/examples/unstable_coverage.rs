//! Fraction of a grid whose unstable curves cross the local stable disk of
//! the fixed point, by horizon. Grid size is the first argument (default 12).

use torus_deform::construction::build;
use torus_deform::manifolds::{phc_plus_coverage, CoverageSettings, StableDisk, ANGLE_MIN};
use torus_deform::presets;

fn main() -> torus_deform::Result<()> {
    let grid: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(12);
    let c = build(&presets::get("bv-t3")?.construction)?;
    let disk = StableDisk {
        center: c.point,
        frame: c.frame,
        radius: 0.45,
    };
    let cert = disk.certify(&c.map, 12, 60);
    println!("disk certified: {} (off-plane {:.1e})", cert.certified, cert.max_offplane);
    let s = CoverageSettings {
        grid,
        horizon: 30,
        length: 50.0,
        h_max: 0.02,
        angle_min: ANGLE_MIN,
    };
    let r = phc_plus_coverage(&c.map, &disk, &s)?;
    for (g, v) in r.by_horizon.iter().enumerate().filter(|(g, _)| g % 5 == 0) {
        println!("N = {g:>2}: {v:.4}");
    }
    println!("coverage {:.4}, {} points never hit", r.coverage, r.failures.len());
    Ok(())
}
