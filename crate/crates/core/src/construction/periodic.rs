//! Moving a deformation of `A^n` near a period-`n` point into a deformation of `A`.

use crate::error::{Error, Result};
use crate::geometry::{displacement, singular_values, Ball, Mat3, TorusPoint, Vec3};
use crate::maps::{LinearTorusMap, SmoothMap, Support, TorusMap};

/// Points `(A^n - I)^{-1} k mod 1` for integer `k` in a small box; all have period dividing `n`.
pub fn periodic_points(a: &LinearTorusMap, n: u32, reach: i64) -> Result<Vec<TorusPoint>> {
    let an = *a.power(n).matrix();
    let m = (an - Mat3::identity())
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput(format!("A^{n} has eigenvalue 1")))?;
    let mut out: Vec<TorusPoint> = Vec::new();
    for i in -reach..=reach {
        for j in -reach..=reach {
            for k in -reach..=reach {
                let p = TorusPoint::from_lift(m * Vec3::new(i as f64, j as f64, k as f64));
                if out.iter().all(|q| displacement(q, &p).norm() > 1e-9) {
                    out.push(p);
                }
            }
        }
    }
    out.sort_by(|a, b| a.coords().partial_cmp(&b.coords()).unwrap());
    Ok(out)
}

/// Least period of `p` under `A`, up to `max`.
pub fn least_period(a: &LinearTorusMap, p: &TorusPoint, max: u32) -> Option<u32> {
    let mut q = *p;
    for k in 1..=max {
        q = a.eval(&q);
        if displacement(p, &q).norm() < 1e-9 {
            return Some(k);
        }
    }
    None
}

/// `min |M u + c|` over `|u| <= r`.
fn min_over_ball(m: &Mat3, c: &Vec3, r: f64) -> f64 {
    if let Some(mi) = m.try_inverse() {
        let u = -(mi * c);
        if u.norm() <= r {
            return 0.0;
        }
    }
    // boundary minimizer u(nu) = -(M^T M + nu)^{-1} M^T c, |u(nu)| decreasing in nu
    let mtm = m.transpose() * m;
    let mtc = m.transpose() * c;
    let at = |nu: f64| -> Vec3 {
        (mtm + Mat3::identity() * nu)
            .try_inverse()
            .map(|inv| -(inv * mtc))
            .unwrap_or_else(Vec3::zeros)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while at(hi).norm() > r {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).norm() > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = at(hi);
    (m * u + c).norm()
}

/// Check that the ellipsoids `A^i B`, `0 <= i < n`, are pairwise disjoint on the torus.
pub fn check_orbit_disjoint(a: &LinearTorusMap, ball: &Ball, n: u32) -> Result<()> {
    let am = *a.matrix();
    let p = ball.frame.basis();
    let r = ball.radius;
    let mut pow = vec![Mat3::identity()];
    let mut pts = vec![ball.center];
    for i in 1..n as usize {
        pow.push(am * pow[i - 1]);
        pts.push(a.eval(&pts[i - 1]));
    }
    for i in 0..n as usize {
        for j in (i + 1)..n as usize {
            let ai_p = pow[i] * p;
            let aj_p = pow[j] * p;
            let aj_p_inv = aj_p
                .try_inverse()
                .ok_or_else(|| Error::InvalidInput("singular orbit frame".into()))?;
            let m = aj_p_inv * ai_p;
            let reach = r * (singular_values(&ai_p)[0] + singular_values(&aj_p)[0]);
            let d = pts[i].lift() - pts[j].lift();
            let lo = (d - Vec3::repeat(reach)).map(|v| v.floor() as i64);
            let hi = (d + Vec3::repeat(reach)).map(|v| v.ceil() as i64);
            for k0 in lo.x..=hi.x {
                for k1 in lo.y..=hi.y {
                    for k2 in lo.z..=hi.z {
                        let c = aj_p_inv * (d - Vec3::new(k0 as f64, k1 as f64, k2 as f64));
                        if min_over_ball(&m, &c, r) <= r * (1.0 + 1e-9) {
                            return Err(Error::BallsNotDisjoint { i, j });
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// `f = A` off the ball `B`, `f = A^{-(n-1)} f_n` on it, so that `f^n = f_n` near `p`.
pub struct PeriodicAdaptation {
    base: LinearTorusMap,
    deformed_power: SmoothMap,
    unwind: LinearTorusMap,
    lift: LinearTorusMap,
    ball: Ball,
    n: u32,
}

impl PeriodicAdaptation {
    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn period(&self) -> u32 {
        self.n
    }
}

impl TorusMap for PeriodicAdaptation {
    fn eval(&self, x: &TorusPoint) -> TorusPoint {
        if self.ball.contains(x) {
            self.unwind.eval(&self.deformed_power.eval(x))
        } else {
            self.base.eval(x)
        }
    }

    fn differential(&self, x: &TorusPoint) -> Mat3 {
        if self.ball.contains(x) {
            self.unwind.matrix() * self.deformed_power.differential(x)
        } else {
            *self.base.matrix()
        }
    }

    fn step(&self, x: &TorusPoint) -> (TorusPoint, Mat3) {
        if self.ball.contains(x) {
            let (y, d) = self.deformed_power.step(x);
            (self.unwind.eval(&y), self.unwind.matrix() * d)
        } else {
            self.base.step(x)
        }
    }

    fn inverse(&self, y: &TorusPoint) -> Result<TorusPoint> {
        let x0 = self.base.inverse(y)?;
        if self.ball.contains(&x0) {
            self.deformed_power.inverse(&self.lift.eval(y))
        } else {
            Ok(x0)
        }
    }

    fn label(&self) -> String {
        format!("periodic[n={}] {}", self.n, self.deformed_power.label())
    }

    fn support(&self) -> Support {
        let inner = self.deformed_power.support();
        let cores = match &inner {
            Support::LinearOutside { cores, .. } => cores
                .iter()
                .map(|(b, m)| (*b, self.unwind.matrix() * m))
                .collect(),
            _ => vec![],
        };
        Support::LinearOutside {
            linear: *self.base.matrix(),
            perturbations: vec![self.ball],
            cores,
        }
    }
}

/// Build `f` from a map `f_n` that agrees with `A^n` off the chart ball `ball` around a
/// point of period `n`. For `n = 1` the deformed map is returned unchanged.
pub fn periodic_adaptation(
    base: &LinearTorusMap,
    deformed_power: SmoothMap,
    ball: Ball,
    n: u32,
) -> Result<SmoothMap> {
    if n == 0 {
        return Err(Error::InvalidInput("period must be positive".into()));
    }
    let back = base.power(n).eval(&ball.center);
    let distance = displacement(&ball.center, &back).norm();
    if distance > 1e-9 {
        return Err(Error::NotPeriodic { distance });
    }
    if n == 1 {
        return Ok(deformed_power);
    }
    let dn = deformed_power.differential(&ball.center);
    let spec = crate::geometry::Spectrum::of(&dn);
    if let Some(v) = spec.values.iter().find(|v| v.im == 0.0 && v.re <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "Df^n(p) has a non-positive real eigenvalue {}",
            v.re
        )));
    }
    if ball.euclidean_extent() >= 0.5 {
        return Err(Error::InvalidInput(format!(
            "ball of extent {} does not embed in the torus",
            ball.euclidean_extent()
        )));
    }
    check_orbit_disjoint(base, &ball, n)?;
    let inv = base.inverted();
    Ok(SmoothMap::new(PeriodicAdaptation {
        base: base.clone(),
        deformed_power,
        unwind: inv.power(n - 1),
        lift: base.power(n - 1),
        ball,
        n,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{build, BaseSpec, ConstructionParams, DeformationParams};
    use crate::geometry::{distance, Frame, Spectrum};
    use crate::maps::IntegerMatrixSpec;
    use crate::sampling::Halton;
    use proptest::prelude::*;

    fn bv() -> LinearTorusMap {
        let spec = IntegerMatrixSpec::new(vec![vec![1, -1, 1], vec![-1, 2, -2], vec![1, -2, 3]]).unwrap();
        LinearTorusMap::of(&crate::maps::linear_anosov(&spec, true).unwrap()).unwrap()
    }

    fn period_two(a: &LinearTorusMap) -> TorusPoint {
        periodic_points(a, 2, 1)
            .unwrap()
            .into_iter()
            .find(|p| least_period(a, p, 2) == Some(2))
            .unwrap()
    }

    fn params(point: TorusPoint, period: u32) -> ConstructionParams {
        ConstructionParams {
            base: BaseSpec::Matrix {
                rows: IntegerMatrixSpec::new(vec![vec![1, -1, 1], vec![-1, 2, -2], vec![1, -2, 3]]).unwrap(),
            },
            point: point.coords(),
            period,
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
        }
    }

    #[test]
    fn periodic_points_return() {
        let a = bv();
        for n in 1..=3 {
            for p in periodic_points(&a, n, 1).unwrap() {
                assert!(distance(&a.power(n).eval(&p), &p) < 1e-9);
            }
        }
    }

    /// Brute-force minimum of |M u + c| over a dense sample of the ball.
    fn brute_min(m: &Mat3, c: &Vec3, r: f64) -> f64 {
        let mut best = f64::INFINITY;
        let h = Halton::new(0);
        for i in 0..20_000u64 {
            let u = h.unit(i);
            let theta = 2.0 * std::f64::consts::PI * u[0];
            let z = 2.0 * u[1] - 1.0;
            let s = (1.0 - z * z).sqrt();
            let rad = r * u[2].cbrt();
            let v = Vec3::new(s * theta.cos(), s * theta.sin(), z) * rad;
            best = best.min((m * v + c).norm());
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ball_minimum_matches_sampling(
            e in proptest::array::uniform9(-2.0f64..2.0),
            c in proptest::array::uniform3(-3.0f64..3.0),
            r in 0.1f64..1.0,
        ) {
            let m = Mat3::from_row_slice(&e);
            let c = Vec3::from(c);
            let exact = min_over_ball(&m, &c, r);
            let sampled = brute_min(&m, &c, r);
            prop_assert!(exact <= sampled + 1e-9);
            prop_assert!(sampled - exact < 0.05 * (1.0 + c.norm()));
        }
    }

    #[test]
    fn overlapping_orbit_balls_are_reported() {
        let a = bv();
        let p = period_two(&a);
        let frame = Frame::eigenframe(a.matrix()).unwrap();
        let small = Ball { center: p, frame, radius: 0.05 };
        check_orbit_disjoint(&a, &small, 2).unwrap();
        let big = Ball { center: p, frame, radius: 0.3 };
        assert_eq!(check_orbit_disjoint(&a, &big, 2), Err(Error::BallsNotDisjoint { i: 0, j: 1 }));
    }

    #[test]
    fn non_periodic_point_is_rejected() {
        let p = TorusPoint::wrap([0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(build(&params(p, 2)), Err(Error::NotPeriodic { .. })));
    }

    #[test]
    fn period_two_adaptation() {
        let a = bv();
        let p = period_two(&a);
        let c = build(&params(p, 2)).unwrap();
        let ball = c.surgery_ball.unwrap();
        let f = &c.map;

        // agrees with A off the ball, exactly
        for x in Halton::new(1).torus_points(4000) {
            if !ball.contains(&x) {
                assert_eq!(f.eval(&x), a.eval(&x));
            }
        }
        // f^2(p) = p and Df^2(p) is the product of the two differentials
        assert!(distance(&f.iterate(&p, 2), &p) < 1e-12);
        let product = f.differential(&f.eval(&p)) * f.differential(&p);
        let spec = Spectrum::of(&product);
        let mu = c.report.deformation.as_ref().unwrap().triple.mu;
        assert!((spec.values[0].re - mu).abs() < 1e-8 * mu);
        for v in &spec.values[1..] {
            assert!((v.norm() - mu.powf(-0.5)).abs() < 1e-8);
            assert!(v.im.abs() > 0.1);
        }
        // volume and inverse on the ball
        for x in Halton::new(2).ball_points(&ball, 2000) {
            assert!((f.differential(&x).determinant() - 1.0).abs() < 1e-8);
            assert!(distance(&f.inverse(&f.eval(&x)).unwrap(), &x) < 1e-11);
        }
    }
}
