//! The rescaled deformation `F1(x, y, z) = (mu x, a phi_{t(x)}(rho y / a, lambda z / a))`,
//! its cone certificate, and the composition with a localized rotation.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::ShearFlow;
use super::profiles::{Cutoff, TimeRamp};
use crate::error::{Error, Result};
use crate::geometry::{image_aperture_of, ChartPoint, ConeSpec, Mat2, Mat3, Vec2, Vec3};
use crate::maps::LocalMap;
use crate::sampling::Halton;

/// Eigenvalues `(mu, rho, lambda)` of a diagonal linearization, `lambda <= rho < 1 < mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTriple {
    pub mu: f64,
    pub rho: f64,
    pub lambda: f64,
}

impl SpectrumTriple {
    /// `lambda == rho` is admitted as the degenerate no-shear case.
    pub fn new(mu: f64, rho: f64, lambda: f64) -> Result<Self> {
        if !(0.0 < lambda && lambda <= rho && rho < 1.0 && 1.0 < mu && mu.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "spectrum must satisfy 0 < lambda <= rho < 1 < mu, got ({mu}, {rho}, {lambda})"
            )));
        }
        let det = mu * rho * lambda;
        if (det - 1.0).abs() > 1e-12 {
            return Err(Error::NotVolumePreserving { det });
        }
        Ok(SpectrumTriple { mu, rho, lambda })
    }

    /// Diagonal entries of a matrix that is diagonal in some chart frame.
    pub fn from_diagonal(m: &Mat3) -> Result<Self> {
        let off = (0..3)
            .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|ij| m[ij].abs())
            .fold(0.0, f64::max);
        if off > 1e-10 * m.amax() {
            return Err(Error::InvalidInput(format!(
                "linearization is not diagonal in the chart frame (off-diagonal {off:e})"
            )));
        }
        SpectrumTriple::new(m[(0, 0)], m[(1, 1)], m[(2, 2)])
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(self.mu, self.rho, self.lambda))
    }
}

/// The shear rate `eta = 1 / (lambda sqrt(mu))`: with it `(rho / eta, lambda eta)`
/// both equal `mu^{-1/2}`. Returns exactly 1 in the degenerate case.
pub fn solve_eta(s: &SpectrumTriple) -> f64 {
    let eta = 1.0 / (s.lambda * s.mu.sqrt());
    if (eta - 1.0).abs() <= 1e-12 {
        1.0
    } else {
        eta
    }
}

/// Sample count for the derivative bound `K`.
const K_SAMPLES: usize = 100_000;
/// Safety inflation applied to the sampled `K`.
const K_INFLATION: f64 = 1.1;

/// Measured bound on `|(g_1x, g_2x)| = |t'(x)| |X(phi_t(.))|` (Euclidean norm).
/// The flow preserves its support square, so the sup of `|X|` over the square suffices.
pub fn measure_k(flow: &ShearFlow, ramp: &TimeRamp) -> f64 {
    let side = (K_SAMPLES as f64).sqrt().ceil() as usize;
    let (e1, e2) = (flow.psi1.support(), flow.psi2.support());
    let mut sup_x: f64 = 0.0;
    for i in 0..=side {
        for j in 0..=side {
            let q = Vec2::new(
                -e1 + 2.0 * e1 * i as f64 / side as f64,
                -e2 + 2.0 * e2 * j as f64 / side as f64,
            );
            sup_x = sup_x.max(flow.field(&q).norm());
        }
    }
    K_INFLATION * ramp.max_slope(K_SAMPLES) * sup_x
}

/// The rescaled deformation `F1` in chart coordinates.
#[derive(Debug, Clone)]
pub struct RescaledDeformation {
    pub triple: SpectrumTriple,
    pub eta: f64,
    pub scale: f64,
    pub flow: ShearFlow,
    pub ramp: TimeRamp,
    pub k_bound: f64,
    trivial: bool,
}

impl RescaledDeformation {
    /// Half-widths of the support box in `(x, y, z)`.
    pub fn support_box(&self) -> Vec3 {
        if self.trivial {
            return Vec3::zeros();
        }
        let a = self.scale;
        Vec3::new(
            self.ramp.support(),
            a * self.flow.psi1.support() / self.triple.rho,
            a * self.flow.psi2.support() / self.triple.lambda,
        )
    }

    #[inline]
    fn flow_point(&self, q: &ChartPoint) -> Vec2 {
        Vec2::new(
            self.triple.rho * q.y / self.scale,
            self.triple.lambda * q.z / self.scale,
        )
    }

    /// `(x, y, z)` with the yz-block of the differential, `D phi_t * diag(rho, lambda)`.
    pub fn yz_block(&self, q: &ChartPoint) -> Mat2 {
        let d = self.differential(q);
        d.fixed_view::<2, 2>(1, 1).into_owned()
    }
}

impl LocalMap for RescaledDeformation {
    fn eval_with_differential(&self, q: &ChartPoint) -> (ChartPoint, Mat3) {
        let l = self.triple.matrix();
        if self.trivial {
            return (l * q, l);
        }
        let (t, dt) = self.ramp.eval(q.x);
        let y = self.flow_point(q);
        if t == 0.0 || self.flow.outside_support(&y) {
            return (l * q, l);
        }
        let (p, dphi, x) = self
            .flow
            .flow_jet(t, &y)
            .unwrap_or_else(|e| panic!("shear flow failed inside a validated construction: {e}"));
        let a = self.scale;
        let (rho, lam) = (self.triple.rho, self.triple.lambda);
        let out = Vec3::new(self.triple.mu * q.x, a * p.x, a * p.y);
        let d = Mat3::new(
            self.triple.mu,
            0.0,
            0.0,
            a * dt * x.x,
            dphi[(0, 0)] * rho,
            dphi[(0, 1)] * lam,
            a * dt * x.y,
            dphi[(1, 0)] * rho,
            dphi[(1, 1)] * lam,
        );
        (out, d)
    }

    fn eval(&self, q: &ChartPoint) -> ChartPoint {
        let l = self.triple.matrix();
        if self.trivial {
            return l * q;
        }
        let (t, _) = self.ramp.eval(q.x);
        let y = self.flow_point(q);
        if t == 0.0 || self.flow.outside_support(&y) {
            return l * q;
        }
        let p = self
            .flow
            .flow(t, &y)
            .unwrap_or_else(|e| panic!("shear flow failed inside a validated construction: {e}"));
        Vec3::new(self.triple.mu * q.x, self.scale * p.x, self.scale * p.y)
    }

    fn linear_part(&self) -> Mat3 {
        self.triple.matrix()
    }

    fn support_radius(&self) -> f64 {
        self.support_box().norm()
    }

    fn core(&self) -> Option<(f64, Mat3)> {
        if self.trivial {
            return Some((f64::INFINITY, self.triple.matrix()));
        }
        if !self.flow.settings.exact_core {
            return None;
        }
        let k = self.flow.core_rate();
        let grow = k.abs().exp();
        let a = self.scale;
        let r = self
            .ramp
            .core()
            .min(a * self.flow.psi1.core() / (self.triple.rho * grow))
            .min(a * self.flow.psi2.core() / (self.triple.lambda * grow));
        let m = Mat3::from_diagonal(&Vec3::new(
            self.triple.mu,
            self.triple.rho * k.exp(),
            self.triple.lambda * (-k).exp(),
        ));
        Some((0.95 * r, m))
    }

    fn label(&self) -> String {
        format!("F1[eta={:.6}, a={}]", self.eta, self.scale)
    }

    fn inverse(&self, r: &ChartPoint) -> Result<ChartPoint> {
        let l = self.triple;
        let x = r.x / l.mu;
        let (t, _) = self.ramp.eval(x);
        let a = self.scale;
        let img = Vec2::new(r.y / a, r.z / a);
        if self.trivial || t == 0.0 || self.flow.outside_support(&img) {
            return Ok(Vec3::new(x, r.y / l.rho, r.z / l.lambda));
        }
        let back = self.flow.flow(-t, &img)?;
        Ok(Vec3::new(x, a * back.x / l.rho, a * back.y / l.lambda))
    }
}

/// Points of the support box, for certificates and consistency checks.
fn box_points(half: &Vec3, n: usize, seed: u64) -> Vec<ChartPoint> {
    let h = Halton::new(seed);
    (0..n as u64)
        .map(|i| {
            let u = h.unit(i);
            Vec3::new(
                (2.0 * u[0] - 1.0) * half.x,
                (2.0 * u[1] - 1.0) * half.y,
                (2.0 * u[2] - 1.0) * half.z,
            )
        })
        .collect()
}

/// Sample count for the yz-Jacobian consistency check.
const JACOBIAN_SAMPLES: usize = 4096;

/// Assemble `F1` from a spectrum, a shear flow built with `solve_eta`, a time ramp and a scale `a`.
pub fn build_f1(
    triple: SpectrumTriple,
    flow: ShearFlow,
    ramp: TimeRamp,
    scale: f64,
) -> Result<RescaledDeformation> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidInput(format!("scale a must be positive, got {scale}")));
    }
    let eta = solve_eta(&triple);
    let trivial = flow.core_rate() == 0.0;
    if !trivial {
        let rate = -flow.core_rate();
        if (rate - eta.ln()).abs() > 1e-12 * eta.ln().max(1.0) {
            return Err(Error::ConstructionInconsistent(format!(
                "shear core rate {rate} does not match log eta = {}",
                eta.ln()
            )));
        }
    }
    let k_bound = if trivial { 0.0 } else { measure_k(&flow, &ramp) };
    let support = flow.psi1.support().min(flow.psi2.support());
    if scale * k_bound >= support {
        return Err(Error::ScaleTooLarge {
            a_k: scale * k_bound,
            support,
        });
    }
    let f1 = RescaledDeformation {
        triple,
        eta,
        scale,
        flow,
        ramp,
        k_bound,
        trivial,
    };
    if !trivial {
        let target = 1.0 / triple.mu;
        let worst = box_points(&f1.support_box(), JACOBIAN_SAMPLES, 17)
            .par_iter()
            .map(|q| (f1.yz_block(q).determinant() - target).abs())
            .reduce(|| 0.0, f64::max);
        if worst > 1e-8 {
            return Err(Error::ConstructionInconsistent(format!(
                "yz-Jacobian deviates from 1/mu by {worst:e}"
            )));
        }
    }
    Ok(f1)
}

/// Cone target `xi`: midpoint of `((aK + rho gamma) / mu, gamma)`.
pub fn cone_target(mu: f64, rho: f64, gamma: f64, a_k: f64) -> Result<f64> {
    let lower = (a_k + rho * gamma) / mu;
    if lower >= gamma {
        return Err(Error::ConeGapInfeasible { lower, gamma });
    }
    Ok((lower + gamma) / 2.0)
}

/// Outcome of a sampled cone check: the target and the worst sampled image aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub gamma: f64,
    /// The admissible lower end `(aK + rho_g gamma) / mu`.
    pub lower: f64,
    /// Measured bound on the yz-block norm (at least `rho`).
    pub rho_g: f64,
    pub xi: f64,
    pub sampled_aperture: f64,
    pub points: usize,
    pub boundary_vectors: usize,
}

/// Worst image aperture of `DF(q) C_gamma` over the given chart points.
pub fn sampled_aperture(f: &dyn LocalMap, gamma: f64, pts: &[ChartPoint], n_boundary: usize) -> Result<f64> {
    let boundary = ConeSpec::new(gamma)?.boundary_vectors(n_boundary);
    pts.par_iter()
        .map(|q| image_aperture_of(&f.differential(q), &boundary))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Sample sizes for cone certificates.
pub const CERT_POINTS: usize = 10_000;
pub const CERT_BOUNDARY: usize = 64;

/// Cone target for `F1` and its sampled certificate.
pub fn derive_cone_parameters(f1: &RescaledDeformation, gamma: f64) -> Result<ConeCertificate> {
    let pts = box_points(&f1.support_box(), CERT_POINTS, 23);
    let rho_g = pts
        .par_iter()
        .map(|q| {
            let b = f1.yz_block(q);
            b.svd(false, false).singular_values.max()
        })
        .reduce(|| f1.triple.rho, f64::max);
    let a_k = f1.scale * f1.k_bound;
    let xi = cone_target(f1.triple.mu, rho_g, gamma, a_k)?;
    let lower = (a_k + rho_g * gamma) / f1.triple.mu;
    let sampled = sampled_aperture(f1, gamma, &pts, CERT_BOUNDARY)?;
    if sampled > xi {
        return Err(Error::ConstructionInconsistent(format!(
            "sampled cone aperture {sampled} exceeds the target {xi}"
        )));
    }
    Ok(ConeCertificate {
        gamma,
        lower,
        rho_g,
        xi,
        sampled_aperture: sampled,
        points: pts.len(),
        boundary_vectors: CERT_BOUNDARY,
    })
}

/// `F = F1 o alpha`, `alpha(q) = (x, R_{Theta(|q|)} (y, z))`, `Theta = theta chi(|q|)`.
#[derive(Debug, Clone)]
pub struct RotatedDeformation {
    pub f1: Arc<RescaledDeformation>,
    pub theta: f64,
    pub localizer: Cutoff,
}

impl RotatedDeformation {
    /// `alpha(q)` and `D alpha(q)`.
    #[inline]
    pub fn rotation(&self, q: &ChartPoint) -> (ChartPoint, Mat3) {
        let r = q.norm();
        if self.theta == 0.0 || r >= self.localizer.support {
            return (*q, Mat3::identity());
        }
        let (chi, dchi, _) = self.localizer.eval(r);
        let th = self.theta * chi;
        let (c, s) = (th.cos(), th.sin());
        let w = Vec3::new(q.x, c * q.y - s * q.z, s * q.y + c * q.z);
        let mut d = Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
        if dchi != 0.0 {
            let grad = q * (self.theta * dchi / r);
            let jw = Vec3::new(0.0, -w.z, w.y);
            d += jw * grad.transpose();
        }
        (w, d)
    }
}

impl LocalMap for RotatedDeformation {
    fn eval_with_differential(&self, q: &ChartPoint) -> (ChartPoint, Mat3) {
        let (w, da) = self.rotation(q);
        let (out, df) = self.f1.eval_with_differential(&w);
        (out, df * da)
    }

    fn eval(&self, q: &ChartPoint) -> ChartPoint {
        self.f1.eval(&self.rotation(q).0)
    }

    fn linear_part(&self) -> Mat3 {
        self.f1.linear_part()
    }

    fn support_radius(&self) -> f64 {
        let rot = if self.theta == 0.0 { 0.0 } else { self.localizer.support };
        self.f1.support_radius().max(rot)
    }

    fn core(&self) -> Option<(f64, Mat3)> {
        let (r, m) = self.f1.core()?;
        let (c, s) = (self.theta.cos(), self.theta.sin());
        let rot = Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
        Some((r.min(self.localizer.core), m * rot))
    }

    fn label(&self) -> String {
        format!("{} o rotation[theta={}]", self.f1.label(), self.theta)
    }

    fn inverse(&self, r: &ChartPoint) -> Result<ChartPoint> {
        let w = self.f1.inverse(r)?;
        // the rotation preserves |q|, so its angle is read off the image
        let rad = w.norm();
        if self.theta == 0.0 || rad >= self.localizer.support {
            return Ok(w);
        }
        let th = -self.theta * self.localizer.eval(rad).0;
        let (c, s) = (th.cos(), th.sin());
        Ok(Vec3::new(w.x, c * w.y - s * w.z, s * w.y + c * w.z))
    }
}

/// Certificate of the rotated map: `DF C_gamma` inside `C_xi'` with `xi' = (xi + gamma) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationCertificate {
    pub xi_prime: f64,
    pub sampled_aperture: f64,
    pub points: usize,
}

/// Compose `F1` with a rotation localized to the chart ball of radius `support`
/// (equal to `theta` on the ball of radius `plateau`), keeping a cone certificate.
pub fn compose_rotation(
    f1: Arc<RescaledDeformation>,
    cert: &ConeCertificate,
    theta: f64,
    plateau: f64,
    support: f64,
) -> Result<(RotatedDeformation, RotationCertificate)> {
    let localizer = Cutoff::new(plateau, support)?;
    if !theta.is_finite() {
        return Err(Error::InvalidInput("rotation angle must be finite".into()));
    }
    let f = RotatedDeformation {
        f1,
        theta,
        localizer,
    };
    let xi_prime = (cert.xi + cert.gamma) / 2.0;
    let radius = f.support_radius();
    let h = Halton::new(29);
    let pts: Vec<ChartPoint> = (0..CERT_POINTS as u64)
        .map(|i| {
            let u = h.unit(i);
            let half = f.f1.support_box().map(|c| c.max(radius.min(support)));
            Vec3::new(
                (2.0 * u[0] - 1.0) * half.x,
                (2.0 * u[1] - 1.0) * half.y,
                (2.0 * u[2] - 1.0) * half.z,
            )
        })
        .collect();
    let sampled = sampled_aperture(&f, cert.gamma, &pts, CERT_BOUNDARY)?;
    if sampled > xi_prime {
        return Err(Error::RotationTooLarge {
            aperture: sampled,
            target: xi_prime,
        });
    }
    Ok((
        f,
        RotationCertificate {
            xi_prime,
            sampled_aperture: sampled,
            points: pts.len(),
        },
    ))
}
