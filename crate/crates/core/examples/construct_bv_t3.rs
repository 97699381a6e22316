//! Builds the bv-t3 deformation and prints what changed at the fixed point.

use torus_deform::construction::build;
use torus_deform::presets;
use torus_deform::verification::fixed_point_spectrum;

fn main() -> torus_deform::Result<()> {
    let cfg = presets::get("bv-t3")?;
    let c = build(&cfg.construction)?;
    let d = c.report.deformation.as_ref().expect("preset has a deformation");
    println!("map: {}", c.report.label);
    println!("support: {}", c.report.support);
    println!("base eigenvalues: {:?}", c.report.base_eigenvalues);
    println!(
        "eta = {:.6}, aK = {:.4} (flow support {}), surgery radius {:.4}",
        d.eta, d.a_k, cfg.construction.deformation.unwrap().flow_support, d.surgery_radius
    );
    println!("cone: gamma {} -> xi {:.4}, after rotation xi' {:.4}", d.cone.gamma, d.cone.xi, d.rotation.xi_prime);

    let s = fixed_point_spectrum(&c.map, &c.point, 1)?;
    for (z, m) in s.eigenvalues.iter().zip(&s.moduli) {
        println!("  {:+.9} {:+.9}i  |.| = {:.9}", z[0], z[1], m);
    }
    println!("mu^(-1/2) = {:.9}", d.triple.mu.powf(-0.5));
    println!("complex stable pair: {}", s.complex_stable_pair);
    println!("max hamiltonian drift: {:.2e}", c.max_drift());
    Ok(())
}
