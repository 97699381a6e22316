use std::sync::Arc;

use super::{SmoothMap, Support, TorusMap};
use crate::error::{Error, Result};
use crate::geometry::{displacement, Ball, ChartPoint, Frame, Mat3, TorusPoint};
use crate::sampling::Halton;

/// A map of chart coordinates that equals a fixed linear map outside a ball.
pub trait LocalMap: Send + Sync {
    fn eval_with_differential(&self, q: &ChartPoint) -> (ChartPoint, Mat3);

    fn eval(&self, q: &ChartPoint) -> ChartPoint {
        self.eval_with_differential(q).0
    }

    fn differential(&self, q: &ChartPoint) -> Mat3 {
        self.eval_with_differential(q).1
    }

    /// The linear map this one equals outside `support_radius`.
    fn linear_part(&self) -> Mat3;

    fn support_radius(&self) -> f64;

    /// Radius of a ball around 0 on which the map is exactly linear, and its matrix.
    fn core(&self) -> Option<(f64, Mat3)>;

    fn label(&self) -> String;

    fn inverse(&self, r: &ChartPoint) -> Result<ChartPoint> {
        newton_inverse(self, r)
    }
}

/// Damped Newton solve of `F(q) = r`, seeded with the linear inverse.
pub fn newton_inverse<F: LocalMap + ?Sized>(f: &F, r: &ChartPoint) -> Result<ChartPoint> {
    const TOL: f64 = 1e-12;
    let l_inv = f
        .linear_part()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular linear part".into()))?;
    let mut q = l_inv * r;
    // F is a bijection equal to L off its support, so L^{-1} r is the
    // preimage whenever it lies off the support
    if q.norm() >= f.support_radius() {
        return Ok(q);
    }
    let (mut y, mut j) = f.eval_with_differential(&q);
    let mut res = (y - r).norm();
    for _ in 0..100 {
        if res <= TOL {
            return Ok(q);
        }
        let Some(j_inv) = j.try_inverse() else {
            break;
        };
        let dq = j_inv * (y - r);
        let mut step = 1.0;
        loop {
            let cand = q - dq * step;
            let (cy, cj) = f.eval_with_differential(&cand);
            let cres = (cy - r).norm();
            if cres < res || step < 1e-6 {
                q = cand;
                y = cy;
                j = cj;
                res = cres;
                break;
            }
            step *= 0.5;
        }
    }
    if res <= TOL {
        Ok(q)
    } else {
        Err(Error::InverseDidNotConverge { residual: res })
    }
}

/// A linear local map, equal to its linear part everywhere.
#[derive(Debug, Clone)]
pub struct LinearLocalMap {
    matrix: Mat3,
}

impl LinearLocalMap {
    pub fn new(matrix: Mat3) -> Self {
        LinearLocalMap { matrix }
    }
}

impl LocalMap for LinearLocalMap {
    fn eval_with_differential(&self, q: &ChartPoint) -> (ChartPoint, Mat3) {
        (self.matrix * q, self.matrix)
    }

    fn linear_part(&self) -> Mat3 {
        self.matrix
    }

    fn support_radius(&self) -> f64 {
        0.0
    }

    fn core(&self) -> Option<(f64, Mat3)> {
        Some((f64::INFINITY, self.matrix))
    }

    fn label(&self) -> String {
        "linear".into()
    }

    fn inverse(&self, r: &ChartPoint) -> Result<ChartPoint> {
        self.matrix
            .try_inverse()
            .map(|m| m * r)
            .ok_or_else(|| Error::InvalidInput("singular linear local map".into()))
    }
}

/// Replace a map by `chart^-1 o local o chart` on the chart ball of `radius` at `point`.
#[derive(Clone)]
pub struct LocalSurgerySpec {
    pub point: TorusPoint,
    pub frame: Frame,
    pub radius: f64,
    pub local: Arc<dyn LocalMap>,
}

impl LocalSurgerySpec {
    pub fn ball(&self) -> Ball {
        Ball {
            center: self.point,
            frame: self.frame,
            radius: self.radius,
        }
    }
}

/// Result of [`apply_surgery`].
pub struct SurgeryMap {
    base: SmoothMap,
    point: TorusPoint,
    frame: Frame,
    target: TorusPoint,
    linear: Mat3,
    local: Arc<dyn LocalMap>,
    support_radius: f64,
    base_support: Support,
}

impl SurgeryMap {
    pub fn base(&self) -> &SmoothMap {
        &self.base
    }

    pub fn local(&self) -> &Arc<dyn LocalMap> {
        &self.local
    }

    #[inline]
    fn chart(&self, x: &TorusPoint) -> ChartPoint {
        self.frame.to_chart(&displacement(&self.point, x))
    }
}

impl TorusMap for SurgeryMap {
    fn eval(&self, x: &TorusPoint) -> TorusPoint {
        let q = self.chart(x);
        if q.norm() >= self.support_radius {
            return self.base.eval(x);
        }
        self.target.translate(&self.frame.from_chart(&self.local.eval(&q)))
    }

    fn differential(&self, x: &TorusPoint) -> Mat3 {
        let q = self.chart(x);
        if q.norm() >= self.support_radius {
            return self.base.differential(x);
        }
        self.frame.unconjugate(&self.local.differential(&q))
    }

    fn step(&self, x: &TorusPoint) -> (TorusPoint, Mat3) {
        let q = self.chart(x);
        if q.norm() >= self.support_radius {
            return self.base.step(x);
        }
        let (r, d) = self.local.eval_with_differential(&q);
        (
            self.target.translate(&self.frame.from_chart(&r)),
            self.frame.unconjugate(&d),
        )
    }

    fn inverse(&self, y: &TorusPoint) -> Result<TorusPoint> {
        let x0 = self.base.inverse(y)?;
        let q0 = self.chart(&x0);
        if q0.norm() >= self.support_radius {
            return Ok(x0);
        }
        // the image of the ball may be longer than the torus period, so
        // lift y next to the linear image of x0 rather than next to the target
        let ad = self.linear * self.frame.from_chart(&q0);
        let r = self
            .frame
            .to_chart(&(ad + displacement(&self.target.translate(&ad), y)));
        let q = self.local.inverse(&r)?;
        Ok(self.point.translate(&self.frame.from_chart(&q)))
    }

    fn label(&self) -> String {
        format!(
            "surgery[{}] at {:?} on {}",
            self.local.label(),
            self.point.coords(),
            self.base.label()
        )
    }

    fn support(&self) -> Support {
        let pert = Ball {
            center: self.point,
            frame: self.frame,
            radius: self.support_radius,
        };
        let core = self.local.core().map(|(r, m)| {
            (
                Ball {
                    center: self.point,
                    frame: self.frame,
                    radius: r.min(self.support_radius),
                },
                self.frame.unconjugate(&m),
            )
        });
        let (linear, mut perturbations, mut cores) = match &self.base_support {
            Support::GlobalLinear(m) => (*m, vec![], vec![]),
            Support::LinearOutside {
                linear,
                perturbations,
                cores,
            } => (*linear, perturbations.clone(), cores.clone()),
            Support::Opaque => return Support::Opaque,
        };
        // old cores touched by the new perturbation are no longer linear
        let extent = pert.euclidean_extent();
        cores.retain(|(b, _)| displacement(&b.center, &pert.center).norm() >= extent + b.euclidean_extent());
        perturbations.push(pert);
        cores.extend(core);
        Support::LinearOutside {
            linear,
            perturbations,
            cores,
        }
    }
}

/// Relative width of the shell on which the local map is compared with the base.
const SHELL_WIDTH: f64 = 0.05;
const SHELL_SAMPLES: usize = 512;

/// Glue `s.local` into `base` on the chart ball of `s`.
pub fn apply_surgery(base: &SmoothMap, s: &LocalSurgerySpec) -> Result<SmoothMap> {
    if !(s.radius.is_finite() && s.radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "surgery radius must be positive, got {}",
            s.radius
        )));
    }
    let ball = s.ball();
    if ball.euclidean_extent() >= 0.5 {
        return Err(Error::InvalidInput(format!(
            "surgery ball of extent {} does not embed in the torus",
            ball.euclidean_extent()
        )));
    }
    let support = base.support();
    let lin = support.linear_on(&ball).ok_or_else(|| {
        Error::SurgeryMismatch(format!(
            "base map is not known to be linear on the surgery ball ({})",
            support.describe()
        ))
    })?;
    let l_chart = s.frame.conjugate(&lin);
    let diff = (l_chart - s.local.linear_part()).amax();
    if diff > 1e-10 * l_chart.amax().max(1.0) {
        return Err(Error::SurgeryMismatch(format!(
            "local linear part differs from the base linearization by {diff:e}"
        )));
    }
    let support_radius = s.local.support_radius();
    if support_radius > s.radius {
        return Err(Error::SurgeryMismatch(format!(
            "local map support radius {support_radius} exceeds the surgery radius {}",
            s.radius
        )));
    }
    let shell = Halton::new(0).shell_points(&ball, s.radius * (1.0 - SHELL_WIDTH), s.radius, SHELL_SAMPLES);
    for x in &shell {
        let q = ball.chart(x);
        let got = s.local.eval(&q);
        let want = l_chart * q;
        let err = (got - want).norm();
        if err > 1e-12 * (1.0 + want.norm()) {
            return Err(Error::SurgeryMismatch(format!(
                "local map departs from the linearization by {err:e} at chart point {:?}",
                q.as_slice()
            )));
        }
    }
    Ok(SmoothMap::new(SurgeryMap {
        target: base.eval(&s.point),
        linear: lin,
        base: base.clone(),
        point: s.point,
        frame: s.frame,
        local: s.local.clone(),
        support_radius,
        base_support: support,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance, Vec3};
    use crate::maps::test_support::*;
    use crate::maps::{linear_anosov, IntegerMatrixSpec};

    fn base() -> SmoothMap {
        linear_anosov(
            &IntegerMatrixSpec::new(vec![vec![1, -1, 1], vec![-1, 2, -2], vec![1, -2, 3]]).unwrap(),
            true,
        )
        .unwrap()
    }

    fn spec_for(local: Arc<dyn LocalMap>, radius: f64) -> LocalSurgerySpec {
        let f = base();
        let frame = Frame::eigenframe(&f.differential(&TorusPoint::ORIGIN)).unwrap();
        LocalSurgerySpec {
            point: TorusPoint::ORIGIN,
            frame,
            radius,
            local,
        }
    }

    #[test]
    fn trivial_surgery_equals_base() {
        let f = base();
        let s = spec_for(
            Arc::new(LinearLocalMap::new(
                Frame::eigenframe(&f.differential(&TorusPoint::ORIGIN))
                    .unwrap()
                    .conjugate(&f.differential(&TorusPoint::ORIGIN)),
            )),
            0.2,
        );
        let g = apply_surgery(&f, &s).unwrap();
        for p in sample(2000, 11) {
            assert!(distance(&g.eval(&p), &f.eval(&p)) < 1e-14);
        }
    }

    #[test]
    fn mismatched_linear_part_is_rejected() {
        let s = spec_for(Arc::new(LinearLocalMap::new(Mat3::identity())), 0.2);
        assert!(matches!(apply_surgery(&base(), &s), Err(Error::SurgeryMismatch(_))));
    }

    /// Rotation of the (v, w) plane by an angle depending on |q|, then the linear map.
    struct Twist {
        linear: Mat3,
        radius: f64,
        angle: f64,
    }

    impl Twist {
        fn profile(&self, r: f64) -> (f64, f64) {
            let s = r / self.radius;
            if s >= 1.0 {
                return (0.0, 0.0);
            }
            let b = (1.0 - s * s).powi(3);
            let db = -6.0 * s * (1.0 - s * s).powi(2) / self.radius;
            (self.angle * b, self.angle * db)
        }
    }

    impl LocalMap for Twist {
        fn eval_with_differential(&self, q: &ChartPoint) -> (ChartPoint, Mat3) {
            let r = q.norm();
            let (th, dth) = self.profile(r);
            let (c, s) = (th.cos(), th.sin());
            let rot = Vec3::new(q.x, c * q.y - s * q.z, s * q.y + c * q.z);
            let grad = if r > 0.0 { q * (dth / r) } else { Vec3::zeros() };
            let jw = Vec3::new(0.0, -rot.z, rot.y);
            let mut d = Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
            d += jw * grad.transpose();
            (self.linear * rot, self.linear * d)
        }

        fn linear_part(&self) -> Mat3 {
            self.linear
        }

        fn support_radius(&self) -> f64 {
            self.radius
        }

        fn core(&self) -> Option<(f64, Mat3)> {
            None
        }

        fn label(&self) -> String {
            "twist".into()
        }
    }

    fn twisted() -> (SmoothMap, SmoothMap, LocalSurgerySpec) {
        let f = base();
        let frame = Frame::eigenframe(&f.differential(&TorusPoint::ORIGIN)).unwrap();
        let local = Twist {
            linear: frame.conjugate(&f.differential(&TorusPoint::ORIGIN)),
            radius: 0.15,
            angle: 0.4,
        };
        let s = spec_for(Arc::new(local), 0.2);
        let g = apply_surgery(&f, &s).unwrap();
        (f, g, s)
    }

    #[test]
    fn surgery_agrees_with_base_outside_support() {
        let (f, g, s) = twisted();
        let h = Halton::new(4);
        let mut pts = h.shell_points(&s.ball(), 0.2, 0.3, 2000);
        pts.extend(sample(2000, 5).into_iter().filter(|p| !s.ball().contains(p)));
        for p in pts {
            assert_eq!(g.eval(&p), f.eval(&p));
            assert_eq!(g.differential(&p), f.differential(&p));
        }
    }

    #[test]
    fn twist_surgery_is_a_volume_preserving_diffeomorphism() {
        let (_, g, s) = twisted();
        let mut pts = Halton::new(6).ball_points(&s.ball(), 2000);
        pts.extend(sample(500, 7));
        for p in &pts {
            assert!((g.differential(p).determinant() - 1.0).abs() < 1e-12);
        }
        assert!(round_trip_error(&g, &pts) < 1e-10);
        assert!(finite_difference_error(&g, &pts[..300], 1e-6) < 1e-5);
        let inv = g.inverted();
        for p in &pts[..200] {
            let e = distance(&inv.eval(&g.eval(p)), p);
            assert!(e < 1e-10, "{e:e} at {p:?} chart {:?}", s.ball().chart(p));
        }
    }

    #[test]
    fn support_beyond_the_radius_is_rejected() {
        let f = base();
        let frame = Frame::eigenframe(&f.differential(&TorusPoint::ORIGIN)).unwrap();
        let local = Twist {
            linear: frame.conjugate(&f.differential(&TorusPoint::ORIGIN)),
            radius: 0.3,
            angle: 0.1,
        };
        let s = spec_for(Arc::new(local), 0.2);
        assert!(matches!(apply_surgery(&f, &s), Err(Error::SurgeryMismatch(_))));
    }

    #[test]
    fn overlapping_surgery_is_rejected() {
        let (_, g, s) = twisted();
        let shifted = LocalSurgerySpec {
            point: TorusPoint::wrap([0.05, 0.0, 0.0]).unwrap(),
            ..s
        };
        assert!(matches!(apply_surgery(&g, &shifted), Err(Error::SurgeryMismatch(_))));
    }

    #[test]
    fn support_descriptor_records_the_ball() {
        let (_, g, _) = twisted();
        match g.support() {
            Support::LinearOutside { perturbations, .. } => {
                assert_eq!(perturbations.len(), 1);
                assert_eq!(perturbations[0].radius, 0.15);
            }
            other => panic!("unexpected support {other:?}"),
        }
    }
}
