//! cat x Id with the index adjustment: the center direction becomes
//! contracting at 0, which the deformation then rotates into the weak stable
//! plane.

use torus_deform::construction::build;
use torus_deform::presets;
use torus_deform::sampling::Halton;
use torus_deform::verification::{check_cone_invariance, fixed_point_spectrum};

fn main() -> torus_deform::Result<()> {
    let c = build(&presets::get("catxid")?.construction)?;
    let ia = c.report.index_adjust.as_ref().unwrap();
    println!(
        "sigma {}: core diagonal {:?}, support radius {:.4}, linear core radius {:.4}",
        ia.sigma, ia.core_diagonal, ia.support_radius, ia.core_radius
    );
    let adjusted = c.adjusted.as_ref().unwrap();
    for (name, map) in [("base", &c.base), ("adjusted", adjusted), ("deformed", &c.map)] {
        let s = fixed_point_spectrum(map, &c.point, 1)?;
        println!("{name:>9}: moduli {:?} complex pair {}", s.moduli, s.complex_stable_pair);
    }

    let d = c.report.deformation.as_ref().unwrap();
    let ball = c.surgery_ball.as_ref().unwrap();
    let pts = Halton::new(1).ball_points(ball, 5000);
    let r = check_cone_invariance(&c.map, &c.frame, d.cone.gamma, d.rotation.xi_prime, &pts, 64)?;
    println!("cones on the deformation ball: {:?} (margin {:.3})", r.verdict, r.worst);
    Ok(())
}
