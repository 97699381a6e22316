//! Turning the neutral direction of `B x Id` into a weak stable one near a fixed point.
//!
//! In the eigenframe `(u, c, s)` the local map is `G = L o Phi` with
//! `Phi(u, c, s) = (phi_{tau(s)}(u, c), s)` and `phi` the shear flow with rate `sigma`,
//! so `DG = diag(lambda_u e^sigma, e^-sigma, lambda_s)` on the core.

use serde::{Deserialize, Serialize};

use super::flow::{IntegratorSettings, ShearFlow};
use super::profiles::{build_bump, TimeRamp};
use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, Frame, Mat3, TorusPoint, Vec2, Vec3};
use crate::maps::{apply_surgery, LocalMap, LocalSurgerySpec, SmoothMap};
use std::sync::Arc;

/// Shape of the index adjustment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexAdjustParams {
    pub sigma: f64,
    pub flow_support: f64,
    pub flow_core: f64,
    pub ramp_support: f64,
    pub ramp_core: f64,
    /// Bound on `sup |psi psi''|` for the profiles.
    pub psi_bound: f64,
}

/// The local map `G` in the `(u, c, s)` chart.
#[derive(Debug, Clone)]
pub struct IndexAdjustLocal {
    pub linear: Vec3,
    pub sigma: f64,
    pub flow: ShearFlow,
    pub ramp: TimeRamp,
}

impl IndexAdjustLocal {
    fn diag(&self) -> Mat3 {
        Mat3::from_diagonal(&self.linear)
    }

    /// Diagonal of `DG` on the core.
    pub fn core_diagonal(&self) -> Vec3 {
        Vec3::new(
            self.linear.x * self.sigma.exp(),
            self.linear.y * (-self.sigma).exp(),
            self.linear.z,
        )
    }
}

impl LocalMap for IndexAdjustLocal {
    fn eval_with_differential(&self, q: &ChartPoint) -> (ChartPoint, Mat3) {
        let l = self.diag();
        if self.sigma == 0.0 {
            return (l * q, l);
        }
        let (t, dt) = self.ramp.eval(q.z);
        let uc = Vec2::new(q.x, q.y);
        if t == 0.0 || self.flow.outside_support(&uc) {
            return (l * q, l);
        }
        let (p, dphi, x) = self
            .flow
            .flow_jet(t, &uc)
            .unwrap_or_else(|e| panic!("shear flow failed inside a validated construction: {e}"));
        let dphi_full = Mat3::new(
            dphi[(0, 0)],
            dphi[(0, 1)],
            dt * x.x,
            dphi[(1, 0)],
            dphi[(1, 1)],
            dt * x.y,
            0.0,
            0.0,
            1.0,
        );
        (l * Vec3::new(p.x, p.y, q.z), l * dphi_full)
    }

    fn eval(&self, q: &ChartPoint) -> ChartPoint {
        let l = self.diag();
        if self.sigma == 0.0 {
            return l * q;
        }
        let (t, _) = self.ramp.eval(q.z);
        let uc = Vec2::new(q.x, q.y);
        if t == 0.0 || self.flow.outside_support(&uc) {
            return l * q;
        }
        let p = self
            .flow
            .flow(t, &uc)
            .unwrap_or_else(|e| panic!("shear flow failed inside a validated construction: {e}"));
        l * Vec3::new(p.x, p.y, q.z)
    }

    fn linear_part(&self) -> Mat3 {
        self.diag()
    }

    fn support_radius(&self) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        Vec3::new(self.flow.psi1.support(), self.flow.psi2.support(), self.ramp.support()).norm()
    }

    fn core(&self) -> Option<(f64, Mat3)> {
        if self.sigma == 0.0 {
            return Some((f64::INFINITY, self.diag()));
        }
        if !self.flow.settings.exact_core {
            return None;
        }
        let grow = self.sigma.exp();
        let r = self
            .ramp
            .core()
            .min(self.flow.psi1.core() / grow)
            .min(self.flow.psi2.core() / grow);
        Some((0.95 * r, Mat3::from_diagonal(&self.core_diagonal())))
    }

    fn label(&self) -> String {
        format!("index-adjust[sigma={}]", self.sigma)
    }

    fn inverse(&self, r: &ChartPoint) -> Result<ChartPoint> {
        let w = Vec3::new(r.x / self.linear.x, r.y / self.linear.y, r.z / self.linear.z);
        if self.sigma == 0.0 {
            return Ok(w);
        }
        let (t, _) = self.ramp.eval(w.z);
        let uc = Vec2::new(w.x, w.y);
        if t == 0.0 || self.flow.outside_support(&uc) {
            return Ok(w);
        }
        let back = self.flow.flow(-t, &uc)?;
        Ok(Vec3::new(back.x, back.y, w.z))
    }
}

/// Apply the index adjustment to `h` at the fixed point `p`, in the eigenframe of `Dh(p)`.
/// Returns the adjusted map and the local map used. `sigma = 0` returns `h` itself.
pub fn index_adjust(
    h: &SmoothMap,
    p: &TorusPoint,
    params: &IndexAdjustParams,
    integrator: IntegratorSettings,
) -> Result<(SmoothMap, Option<Arc<IndexAdjustLocal>>, Frame)> {
    let back = h.eval(p);
    let distance = crate::geometry::distance(p, &back);
    if distance > 1e-9 {
        return Err(Error::NotPeriodic { distance });
    }
    let d = h.differential(p);
    let frame = Frame::eigenframe(&d)?;
    let diag = frame.conjugate(&d);
    let linear = Vec3::new(diag[(0, 0)], diag[(1, 1)], diag[(2, 2)]);
    if !(linear.x > 1.0 && linear.z > 0.0 && linear.z < 1.0) {
        return Err(Error::InvalidInput(format!(
            "index adjustment needs real eigenvalues lambda_u > 1 > lambda_s > 0, got {:?}",
            linear.as_slice()
        )));
    }
    if !(params.sigma >= 0.0 && params.sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma must be non-negative, got {}", params.sigma)));
    }
    if params.sigma == 0.0 {
        return Ok((h.clone(), None, frame));
    }
    let contracted = linear.y * (-params.sigma).exp();
    if contracted <= linear.z {
        return Err(Error::AdjustmentBreaksOrder {
            contracted,
            strong_stable: linear.z,
        });
    }
    let s = params.sigma.sqrt();
    let p1 = build_bump(params.flow_support, params.flow_core, s, params.psi_bound)?.profile;
    let p2 = build_bump(params.flow_support, params.flow_core, s, params.psi_bound)?.profile;
    let flow = ShearFlow::new(p1, p2, integrator)?;
    let ramp = TimeRamp::new(params.ramp_core, params.ramp_support)?;
    let local = Arc::new(IndexAdjustLocal {
        linear,
        sigma: params.sigma,
        flow,
        ramp,
    });
    let spec = LocalSurgerySpec {
        point: *p,
        frame,
        radius: local.support_radius() * 1.05,
        local: local.clone(),
    };
    let g = apply_surgery(h, &spec)?;
    Ok((g, Some(local), frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance, Spectrum};
    use crate::maps::{product_with_identity, IntegerMatrixSpec};
    use crate::sampling::Halton;
    use approx::assert_abs_diff_eq;

    fn cat() -> SmoothMap {
        product_with_identity(&IntegerMatrixSpec::new(vec![vec![2, 1], vec![1, 1]]).unwrap()).unwrap()
    }

    fn params(sigma: f64) -> IndexAdjustParams {
        IndexAdjustParams {
            sigma,
            flow_support: 0.2,
            flow_core: 0.17,
            ramp_support: 0.2,
            ramp_core: 0.17,
            psi_bound: 100.0,
        }
    }

    #[test]
    fn zero_sigma_keeps_the_map() {
        let h = cat();
        let (g, local, _) = index_adjust(&h, &TorusPoint::ORIGIN, &params(0.0), Default::default()).unwrap();
        assert!(local.is_none());
        for x in Halton::new(0).torus_points(200) {
            assert_eq!(g.eval(&x), h.eval(&x));
        }
    }

    #[test]
    fn adjusted_spectrum_at_the_fixed_point() {
        let (g, _, _) = index_adjust(&cat(), &TorusPoint::ORIGIN, &params(0.1), Default::default()).unwrap();
        let spec = Spectrum::of(&g.differential(&TorusPoint::ORIGIN));
        let lu = (3.0 + 5f64.sqrt()) / 2.0;
        let want = [lu * 0.1f64.exp(), (-0.1f64).exp(), 1.0 / lu];
        for (v, w) in spec.values.iter().zip(want) {
            assert_abs_diff_eq!(v.im, 0.0);
            assert_abs_diff_eq!(v.re, w, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(want.iter().product::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn too_much_contraction_is_rejected() {
        let r = index_adjust(&cat(), &TorusPoint::ORIGIN, &params(1.0), Default::default());
        assert!(matches!(r, Err(Error::AdjustmentBreaksOrder { .. })));
    }

    #[test]
    fn adjustment_is_local_and_volume_preserving() {
        let h = cat();
        let (g, local, frame) = index_adjust(&h, &TorusPoint::ORIGIN, &params(0.3), Default::default()).unwrap();
        let ball = crate::geometry::Ball {
            center: TorusPoint::ORIGIN,
            frame,
            radius: local.unwrap().support_radius(),
        };
        let shell = Halton::new(4).shell_points(&ball, ball.radius, 0.45, 2000);
        for x in &shell {
            assert_eq!(g.eval(x), h.eval(x));
        }
        for x in Halton::new(5).ball_points(&ball, 3000) {
            let d = g.differential(&x);
            assert!((d.determinant() - 1.0).abs() < 1e-8);
            assert!(distance(&g.inverse(&g.eval(&x)).unwrap(), &x) < 1e-11);
        }
    }

    #[test]
    fn differential_matches_finite_differences() {
        let (g, _, _) = index_adjust(&cat(), &TorusPoint::ORIGIN, &params(0.3), Default::default()).unwrap();
        let pts: Vec<TorusPoint> = Halton::new(6)
            .torus_points(300)
            .into_iter()
            .map(|x| TorusPoint::from_lift((x.lift() - Vec3::repeat(0.5)) * 0.6))
            .collect();
        // steep transition bands: Richardson-extrapolate the central differences
        let fd = crate::maps::test_support::finite_difference_error;
        for p in &pts {
            let d = g.differential(p);
            let col = |h: f64, j: usize| {
                let mut e = Vec3::zeros();
                e[j] = h;
                crate::geometry::displacement(&g.eval(&p.translate(&-e)), &g.eval(&p.translate(&e))) / (2.0 * h)
            };
            for j in 0..3 {
                let rich = (col(1e-6, j) * 4.0 - col(2e-6, j)) / 3.0;
                assert!((rich - d.column(j)).amax() < 1e-6, "{:?}", p.coords());
            }
        }
        assert!(fd(&g, &pts, 1e-7) < 1e-4);
    }
}
