//! Cone invariance and domination for the bv-t3 map, with the witness of
//! the worst sample.

use torus_deform::construction::build;
use torus_deform::presets;
use torus_deform::verification::{check_cone_invariance, check_domination, map_samples};

fn main() -> torus_deform::Result<()> {
    let c = build(&presets::get("bv-t3")?.construction)?;
    let d = c.report.deformation.as_ref().unwrap();
    let gamma = d.cone.gamma;
    let points = map_samples(&c.map, 10_000, 1);

    let cone = check_cone_invariance(&c.map, &c.frame, gamma, d.rotation.xi_prime, &points, 64)?;
    println!(
        "cone C_{gamma} -> C_{:.4}: {:?}, margin {:.3}, worst aperture {:.4} at {:?}",
        d.rotation.xi_prime, cone.verdict, cone.worst, cone.details["worst_aperture"], cone.witness
    );

    let dom = check_domination(&c.map, &c.frame, gamma, &points[..2000], 30);
    println!("domination within 30 steps: {:?}, largest onset n0 = {}", dom.verdict, dom.worst);
    Ok(())
}
