//! Lyapunov exponents of the linear base and of the deformed map.
//! Pass a horizon as the first argument (default 20000).

use torus_deform::construction::build;
use torus_deform::geometry::TorusPoint;
use torus_deform::lyapunov::{benettin_exponents, cs_birkhoff_average};
use torus_deform::presets;

fn main() -> torus_deform::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let c = build(&presets::get("bv-t3")?.construction)?;
    let x0 = TorusPoint::wrap([0.123, 0.456, 0.789])?;
    let d = c.report.deformation.as_ref().unwrap();
    println!("log eigenvalues: {:?}", [d.triple.mu.ln(), d.triple.rho.ln(), d.triple.lambda.ln()]);
    for (name, map) in [("base", &c.base), ("deformed", &c.map)] {
        let e = benettin_exponents(map, &x0, n, 1)?;
        let cs = cs_birkhoff_average(map, &x0, n.min(10_000))?;
        println!("{name:>8}: {:?}  sum {:+.2e}  cs average {:+.6}", e.exponents, e.sum(), cs);
    }
    Ok(())
}
