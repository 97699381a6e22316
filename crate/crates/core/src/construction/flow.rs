//! Time-t maps of the Hamiltonian shear field `X = (psi1 psi2', -psi1' psi2)`
//! and their derivatives, by Gauss-Legendre collocation.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::profiles::BumpProfile;
use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};

/// Fixed-step Gauss-Legendre integrator settings. One stage is the implicit midpoint rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    pub stages: usize,
    /// Largest step for a unit-time flow; every flow uses `ceil(1 / step)` steps.
    pub step: f64,
    /// Accepted stage-equation residual.
    pub tolerance: f64,
    /// Use the closed-form solution on the linear core.
    pub exact_core: bool,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            stages: 3,
            step: 0.02,
            tolerance: 1e-13,
            exact_core: true,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.stages) {
            return Err(Error::InvalidInput(format!(
                "integrator stages must be 1, 2 or 3, got {}",
                self.stages
            )));
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "integrator step must be in (0, 1], got {}",
                self.step
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("integrator tolerance must be positive".into()));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (1.0 / self.step).ceil() as usize
    }
}

/// Running maximum of the relative energy drift, shared by clones of a flow.
#[derive(Debug, Clone, Default)]
pub struct DriftMonitor(Arc<AtomicU64>);

impl DriftMonitor {
    #[inline]
    fn record(&self, drift: f64) {
        // non-negative floats order like their bit patterns
        self.0.fetch_max(drift.to_bits(), Ordering::Relaxed);
    }

    pub fn max(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

struct Tableau<const S: usize> {
    a: [[f64; S]; S],
    b: [f64; S],
    c: [f64; S],
}

const GL1: Tableau<1> = Tableau {
    a: [[0.5]],
    b: [1.0],
    c: [0.5],
};

fn gl2() -> Tableau<2> {
    let r = 3f64.sqrt() / 6.0;
    Tableau {
        a: [[0.25, 0.25 - r], [0.25 + r, 0.25]],
        b: [0.5, 0.5],
        c: [0.5 - r, 0.5 + r],
    }
}

fn gl3() -> Tableau<3> {
    let r = 15f64.sqrt();
    Tableau {
        a: [
            [5.0 / 36.0, 2.0 / 9.0 - r / 15.0, 5.0 / 36.0 - r / 30.0],
            [5.0 / 36.0 + r / 24.0, 2.0 / 9.0, 5.0 / 36.0 - r / 24.0],
            [5.0 / 36.0 + r / 30.0, 2.0 / 9.0 + r / 15.0, 5.0 / 36.0],
        ],
        b: [5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
        c: [0.5 - r / 10.0, 0.5, 0.5 + r / 10.0],
    }
}

/// Maximum stage iterations per step.
const MAX_SWEEPS: usize = 60;

/// The flow of `X = (psi1(y) psi2'(z), -psi1'(y) psi2(z))`, the Hamiltonian
/// field of `H = psi1(y) psi2(z)`.
#[derive(Debug, Clone)]
pub struct ShearFlow {
    pub psi1: BumpProfile,
    pub psi2: BumpProfile,
    pub settings: IntegratorSettings,
    h_scale: f64,
    drift: DriftMonitor,
}

impl ShearFlow {
    pub fn new(psi1: BumpProfile, psi2: BumpProfile, settings: IntegratorSettings) -> Result<Self> {
        settings.validate()?;
        let h_scale = psi1.scan_sup(4096).0 * psi2.scan_sup(4096).0;
        Ok(ShearFlow {
            psi1,
            psi2,
            settings,
            h_scale,
            drift: DriftMonitor::default(),
        })
    }

    /// Shared drift monitor of this flow and its clones.
    pub fn drift(&self) -> &DriftMonitor {
        &self.drift
    }

    /// `sup |H|`, the scale for relative energy drift.
    pub fn energy_scale(&self) -> f64 {
        self.h_scale
    }

    /// Exponential rate on the linear core: `X = (kappa y, -kappa z)` there.
    pub fn core_rate(&self) -> f64 {
        self.psi1.slope * self.psi2.slope
    }

    #[inline]
    pub fn hamiltonian(&self, q: &Vec2) -> f64 {
        self.psi1.value(q.x) * self.psi2.value(q.y)
    }

    #[inline]
    pub fn field(&self, q: &Vec2) -> Vec2 {
        let (p1, d1, _) = self.psi1.eval(q.x);
        let (p2, d2, _) = self.psi2.eval(q.y);
        Vec2::new(p1 * d2, -d1 * p2)
    }

    /// `X(q)` and `DX(q)`.
    #[inline]
    pub fn field_jacobian(&self, q: &Vec2) -> (Vec2, Mat2) {
        let (p1, d1, e1) = self.psi1.eval(q.x);
        let (p2, d2, e2) = self.psi2.eval(q.y);
        (
            Vec2::new(p1 * d2, -d1 * p2),
            Mat2::new(d1 * d2, p1 * e2, -e1 * p2, -d1 * d2),
        )
    }

    /// Whether `q` is off the open support square, where `X` vanishes.
    #[inline]
    pub fn outside_support(&self, q: &Vec2) -> bool {
        q.x.abs() >= self.psi1.support() || q.y.abs() >= self.psi2.support()
    }

    /// `phi_t(q)`, bitwise equal to the position from `flow_jet`.
    pub fn flow(&self, t: f64, q: &Vec2) -> Result<Vec2> {
        Self::check_args(t, q)?;
        if self.outside_support(q) || t == 0.0 {
            return Ok(*q);
        }
        if self.settings.exact_core {
            if let Some((p, _)) = self.core_solution(t, q) {
                return Ok(p);
            }
        }
        let h0 = self.hamiltonian(q);
        let out = match self.settings.stages {
            1 => self.integrate_point(&GL1, t, q),
            2 => self.integrate_point(&gl2(), t, q),
            _ => self.integrate_point(&gl3(), t, q),
        }?;
        if self.h_scale > 0.0 {
            self.drift
                .record((self.hamiltonian(&out) - h0).abs() / self.h_scale);
        }
        Ok(out)
    }

    fn check_args(t: f64, q: &Vec2) -> Result<()> {
        if !(t.is_finite() && t.abs() <= 1.0 && q.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "flow needs |t| <= 1 and a finite point, got t = {t}, q = {q:?}"
            )));
        }
        Ok(())
    }

    /// `D phi_t(q)`.
    pub fn flow_differential(&self, t: f64, q: &Vec2) -> Result<Mat2> {
        Ok(self.flow_with_differential(t, q)?.1)
    }

    /// `phi_t(q)` and `D phi_t(q)`, integrated jointly.
    pub fn flow_with_differential(&self, t: f64, q: &Vec2) -> Result<(Vec2, Mat2)> {
        self.flow_jet(t, q).map(|(p, d, _)| (p, d))
    }

    /// `phi_t(q)`, `D phi_t(q)` and the time derivative of the computed map.
    /// The last one is `X(phi_t(q))` up to integration error, but is the exact
    /// derivative of the discrete map, so that chain-rule differentials stay exact.
    pub fn flow_jet(&self, t: f64, q: &Vec2) -> Result<(Vec2, Mat2, Vec2)> {
        Self::check_args(t, q)?;
        if self.outside_support(q) {
            return Ok((*q, Mat2::identity(), Vec2::zeros()));
        }
        if t == 0.0 {
            return Ok((*q, Mat2::identity(), self.field(q)));
        }
        if self.settings.exact_core {
            if let Some((p, d)) = self.core_solution(t, q) {
                return Ok((p, d, self.field(&p)));
            }
        }
        let h0 = self.hamiltonian(q);
        let out = match self.settings.stages {
            1 => self.integrate(&GL1, t, q),
            2 => self.integrate(&gl2(), t, q),
            _ => self.integrate(&gl3(), t, q),
        }?;
        if self.h_scale > 0.0 {
            self.drift
                .record((self.hamiltonian(&out.0) - h0).abs() / self.h_scale);
        }
        Ok(out)
    }

    /// Closed form `(y e^{kt}, z e^{-kt})` when the whole trajectory stays in the core box.
    fn core_solution(&self, t: f64, q: &Vec2) -> Option<(Vec2, Mat2)> {
        let k = self.core_rate();
        let grow = (k.abs() * t.abs()).exp();
        if q.x.abs() * grow <= self.psi1.core() && q.y.abs() * grow <= self.psi2.core() {
            let (e, f) = ((k * t).exp(), (-k * t).exp());
            return Some((Vec2::new(q.x * e, q.y * f), Mat2::new(e, 0.0, 0.0, f)));
        }
        None
    }

    /// Fixed-point solve of the implicit stages of one step from `q`.
    fn solve_stages<const S: usize>(
        &self,
        tab: &Tableau<S>,
        h: f64,
        q: &Vec2,
        stages: &mut [Vec2; S],
        fields: &mut [Vec2; S],
    ) -> Result<()> {
        let x0 = self.field(q);
        for i in 0..S {
            stages[i] = q + x0 * (tab.c[i] * h);
        }
        let mut change = f64::INFINITY;
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            for i in 0..S {
                fields[i] = self.field(&stages[i]);
            }
            change = 0.0;
            for i in 0..S {
                let mut next = *q;
                for j in 0..S {
                    next += fields[j] * (h * tab.a[i][j]);
                }
                change = change.max((next - stages[i]).amax());
                stages[i] = next;
            }
            sweeps += 1;
            if change <= 1e-17 + 1e-16 * q.amax() {
                break;
            }
        }
        if change > self.settings.tolerance {
            return Err(Error::IntegrationFailure { achieved: change });
        }
        for i in 0..S {
            fields[i] = self.field(&stages[i]);
        }
        Ok(())
    }

    fn integrate_point<const S: usize>(&self, tab: &Tableau<S>, t: f64, q0: &Vec2) -> Result<Vec2> {
        let n = self.settings.steps();
        let h = t / n as f64;
        let mut q = *q0;
        let mut stages = [Vec2::zeros(); S];
        let mut fields = [Vec2::zeros(); S];
        for _ in 0..n {
            self.solve_stages(tab, h, &q, &mut stages, &mut fields)?;
            for i in 0..S {
                q += fields[i] * (h * tab.b[i]);
            }
        }
        Ok(q)
    }

    fn integrate<const S: usize>(&self, tab: &Tableau<S>, t: f64, q0: &Vec2) -> Result<(Vec2, Mat2, Vec2)> {
        let n = self.settings.steps();
        let h = t / n as f64;
        let tol = self.settings.tolerance;
        let mut q = *q0;
        let mut phi = Mat2::identity();
        let mut vel = Vec2::zeros();
        let mut dstage = [Vec2::zeros(); S];
        let mut stages = [Vec2::zeros(); S];
        let mut fields = [Vec2::zeros(); S];
        let mut jacs = [Mat2::zeros(); S];
        let mut m = [Mat2::identity(); S];
        for _ in 0..n {
            self.solve_stages(tab, h, &q, &mut stages, &mut fields)?;
            for i in 0..S {
                let (f, j) = self.field_jacobian(&stages[i]);
                fields[i] = f;
                jacs[i] = j;
                m[i] = Mat2::identity();
            }
            // stage sensitivities M_i = I + h sum_j a_ij J_j M_j
            let mut dchange = f64::INFINITY;
            for _ in 0..MAX_SWEEPS {
                dchange = 0.0;
                for i in 0..S {
                    let mut next = Mat2::identity();
                    for j in 0..S {
                        next += jacs[j] * m[j] * (h * tab.a[i][j]);
                    }
                    dchange = dchange.max((next - m[i]).amax());
                    m[i] = next;
                }
                if dchange <= 1e-16 {
                    break;
                }
            }
            if dchange > tol {
                return Err(Error::IntegrationFailure { achieved: dchange });
            }
            // stage derivatives in h: W_i = sum_j a_ij (X_j + h J_j W_j)
            for w in dstage.iter_mut() {
                *w = Vec2::zeros();
            }
            for _ in 0..MAX_SWEEPS {
                let mut wchange: f64 = 0.0;
                for i in 0..S {
                    let mut next = Vec2::zeros();
                    for j in 0..S {
                        next += (fields[j] + jacs[j] * dstage[j] * h) * tab.a[i][j];
                    }
                    wchange = wchange.max((next - dstage[i]).amax());
                    dstage[i] = next;
                }
                if wchange <= 1e-16 * (1.0 + dstage.iter().map(|w| w.amax()).fold(0.0, f64::max)) {
                    break;
                }
            }
            let mut step_jac = Mat2::identity();
            let mut dq_dh = Vec2::zeros();
            for i in 0..S {
                q += fields[i] * (h * tab.b[i]);
                step_jac += jacs[i] * m[i] * (h * tab.b[i]);
                dq_dh += (fields[i] + jacs[i] * dstage[i] * h) * tab.b[i];
            }
            phi = step_jac * phi;
            // h = t / n, so each step contributes dq/dh / n
            vel = step_jac * vel + dq_dh / n as f64;
        }
        Ok((q, phi, vel))
    }
}
