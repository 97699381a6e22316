//! Deforms the bv base at a point of period 2. The map equals the base off
//! one small ball, yet f^2 has a complex stable pair at the point.

use torus_deform::construction::{build, BaseSpec, ConstructionParams, DeformationParams};
use torus_deform::geometry::distance;
use torus_deform::maps::IntegerMatrixSpec;
use torus_deform::verification::fixed_point_spectrum;

fn main() -> torus_deform::Result<()> {
    let params = ConstructionParams {
        base: BaseSpec::Matrix {
            rows: IntegerMatrixSpec::new(vec![vec![1, -1, 1], vec![-1, 2, -2], vec![1, -2, 3]])?,
        },
        point: [1.0 / 13.0, 10.0 / 13.0, 8.0 / 13.0],
        period: 2,
        index_adjust: None,
        deformation: Some(DeformationParams {
            flow_support: 0.5,
            flow_core: 0.15,
            psi_bound: 100.0,
            ramp_support: 0.04,
            ramp_core: 0.01,
            scale: 0.01,
            gamma: 1.0,
            theta: 1.0,
            rotation_plateau: 0.01,
            rotation_support: 0.04,
            surgery_radius: None,
        }),
        integrator: Default::default(),
    };
    let c = build(&params)?;
    let q = c.map.eval(&c.point);
    println!("p = {:?}, f(p) = {:?}", c.point.coords(), q.coords());
    println!("d(f^2 p, p) = {:.2e}", distance(&c.map.iterate(&c.point, 2), &c.point));
    println!("support: {}", c.report.support);
    let s = fixed_point_spectrum(&c.map, &c.point, 2)?;
    println!("Df^2(p) moduli {:?}, arguments {:?}", s.moduli, s.arguments);
    Ok(())
}
