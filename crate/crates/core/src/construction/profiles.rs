//! Compactly supported C^2 profiles with a linear or constant core.
//!
//! All profiles are assembled from one monotone cutoff: `1` on the core,
//! `0` beyond the support, and a degree-9 smoothstep in between. The
//! smoothstep is C^4 at both knots, more than the C^2 the construction
//! needs; the extra smoothness keeps high-order integrators at full order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `S(s) = 126 s^5 - 420 s^6 + 540 s^7 - 315 s^8 + 70 s^9` with its first two derivatives.
#[inline]
fn smoothstep(s: f64) -> (f64, f64, f64) {
    let s2 = s * s;
    let s4 = s2 * s2;
    let v = s4 * s * (126.0 + s * (-420.0 + s * (540.0 + s * (-315.0 + 70.0 * s))));
    let d1 = s4 * (630.0 + s * (-2520.0 + s * (3780.0 + s * (-2520.0 + 630.0 * s))));
    let d2 = s2 * s * (2520.0 + s * (-12600.0 + s * (22680.0 + s * (-17640.0 + 5040.0 * s))));
    (v, d1, d2)
}

/// Radial cutoff `chi(r)`, `r >= 0`: one on `[0, core]`, zero on `[support, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub core: f64,
    pub support: f64,
}

impl Cutoff {
    pub fn new(core: f64, support: f64) -> Result<Self> {
        if !(core > 0.0 && support > core && support.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "cutoff needs 0 < core < support, got core {core}, support {support}"
            )));
        }
        Ok(Cutoff { core, support })
    }

    /// Value and first two derivatives at `r >= 0`.
    #[inline]
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.core {
            return (1.0, 0.0, 0.0);
        }
        if r >= self.support {
            return (0.0, 0.0, 0.0);
        }
        let w = self.support - self.core;
        let (v, d1, d2) = smoothstep((r - self.core) / w);
        (1.0 - v, -d1 / w, -d2 / (w * w))
    }
}

/// `psi(t) = s0 t chi(|t|)`: linear with slope `s0` on the core, zero off the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub cutoff: Cutoff,
    pub slope: f64,
    /// Sampled `sup |psi psi''|`.
    pub sup_psi_psi2: f64,
}

/// Scan resolution for the transition band when estimating `sup |psi psi''|`.
const BUMP_SCAN: usize = 4096;

impl BumpProfile {
    fn with_cutoff(cutoff: Cutoff, slope: f64) -> Self {
        let mut p = BumpProfile {
            cutoff,
            slope,
            sup_psi_psi2: 0.0,
        };
        p.sup_psi_psi2 = p.scan_psi_psi2(BUMP_SCAN);
        p
    }

    /// The zero profile on the given radii.
    pub fn zero(cutoff: Cutoff) -> Self {
        BumpProfile {
            cutoff,
            slope: 0.0,
            sup_psi_psi2: 0.0,
        }
    }

    #[inline]
    pub fn support(&self) -> f64 {
        self.cutoff.support
    }

    #[inline]
    pub fn core(&self) -> f64 {
        self.cutoff.core
    }

    /// `(psi, psi', psi'')` at `t`.
    #[inline]
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let r = t.abs();
        if r >= self.cutoff.support {
            return (0.0, 0.0, 0.0);
        }
        if r <= self.cutoff.core {
            return (self.slope * t, self.slope, 0.0);
        }
        let (c, c1, c2) = self.cutoff.eval(r);
        let s = self.slope;
        let d1 = s * (c + r * c1);
        let d2 = s * (2.0 * c1 + r * c2);
        // odd extension: psi' even, psi'' odd
        (s * t * c, d1, if t < 0.0 { -d2 } else { d2 })
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    /// Largest `|psi psi''|` over `n` equispaced points of the transition band.
    pub fn scan_psi_psi2(&self, n: usize) -> f64 {
        let (c, e) = (self.cutoff.core, self.cutoff.support);
        (0..=n)
            .map(|k| {
                let t = c + (e - c) * k as f64 / n as f64;
                let (p, _, p2) = self.eval(t);
                (p * p2).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|psi|` and `|psi'|` over a scan of `[0, support]`.
    pub fn scan_sup(&self, n: usize) -> (f64, f64) {
        let e = self.cutoff.support;
        (0..=n).fold((0.0f64, 0.0f64), |(a, b), k| {
            let (p, p1, _) = self.eval(e * k as f64 / n as f64);
            (a.max(p.abs()), b.max(p1.abs()))
        })
    }
}

/// Outcome of [`build_bump`]; `core` may be smaller than requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpBuild {
    pub profile: BumpProfile,
    pub requested_core: f64,
    pub halvings: u32,
}

/// Maximum number of core halvings tried before giving up on a bound.
const MAX_HALVINGS: u32 = 12;

/// Build `psi` with `psi'(0) = slope` and `sup |psi psi''| <= bound`,
/// widening the transition band (halving the core) until the bound holds.
pub fn build_bump(support: f64, core: f64, slope: f64, bound: f64) -> Result<BumpBuild> {
    let cutoff = Cutoff::new(core, support)?;
    if !(bound > 0.0) {
        return Err(Error::InvalidInput(format!("bound must be positive, got {bound}")));
    }
    if slope == 0.0 {
        return Ok(BumpBuild {
            profile: BumpProfile::zero(cutoff),
            requested_core: core,
            halvings: 0,
        });
    }
    if !slope.is_finite() {
        return Err(Error::InvalidInput(format!("slope must be finite, got {slope}")));
    }
    let mut best = f64::INFINITY;
    for k in 0..=MAX_HALVINGS {
        let c = core / f64::powi(2.0, k as i32);
        let p = BumpProfile::with_cutoff(Cutoff::new(c, support)?, slope);
        if p.sup_psi_psi2 <= bound {
            return Ok(BumpBuild {
                profile: p,
                requested_core: core,
                halvings: k,
            });
        }
        best = best.min(p.sup_psi_psi2);
    }
    Err(Error::BoundInfeasible {
        requested: bound,
        achievable: best,
    })
}

/// `t(x) = chi(|x|)`: one on the core, zero off the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeRamp {
    pub cutoff: Cutoff,
}

impl TimeRamp {
    pub fn new(core: f64, support: f64) -> Result<Self> {
        Ok(TimeRamp {
            cutoff: Cutoff::new(core, support)?,
        })
    }

    /// `(t, t')` at `x`.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (v, d, _) = self.cutoff.eval(x.abs());
        (v, if x < 0.0 { -d } else { d })
    }

    #[inline]
    pub fn support(&self) -> f64 {
        self.cutoff.support
    }

    #[inline]
    pub fn core(&self) -> f64 {
        self.cutoff.core
    }

    /// Sampled `sup |t'|`.
    pub fn max_slope(&self, n: usize) -> f64 {
        let (c, e) = (self.cutoff.core, self.cutoff.support);
        (0..=n)
            .map(|k| self.eval(c + (e - c) * k as f64 / n as f64).1.abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn slope() -> f64 {
        1.178511f64.ln().sqrt()
    }

    #[test]
    fn smoothstep_matches_its_derivatives() {
        for k in 1..100 {
            let s = k as f64 / 100.0;
            let h = 1e-6;
            let (_, d1, d2) = smoothstep(s);
            let fd1 = (smoothstep(s + h).0 - smoothstep(s - h).0) / (2.0 * h);
            let fd2 = (smoothstep(s + h).1 - smoothstep(s - h).1) / (2.0 * h);
            assert_abs_diff_eq!(d1, fd1, epsilon = 1e-6);
            assert_abs_diff_eq!(d2, fd2, epsilon = 1e-5);
        }
        assert_eq!(smoothstep(0.0), (0.0, 0.0, 0.0));
        let (v, d1, d2) = smoothstep(1.0);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d1, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(d2, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_slope_gives_zero_profile() {
        let b = build_bump(0.1, 0.02, 0.0, 1.0).unwrap().profile;
        for k in -50..=50 {
            assert_eq!(b.eval(k as f64 * 0.003), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn plateau_and_support_are_exact() {
        let b = build_bump(0.1, 0.02, slope(), 1.0).unwrap().profile;
        assert_eq!(b.value(0.1), 0.0);
        assert_eq!(b.value(-0.1), 0.0);
        assert_eq!(b.value(0.3), 0.0);
        assert_eq!(b.value(0.01), slope() * 0.01);
        assert_eq!(b.value(-0.01), -slope() * 0.01);
        assert_eq!(b.eval(0.0).1, slope());
    }

    #[test]
    fn knots_are_c2() {
        let b = build_bump(0.1, 0.02, slope(), 1.0).unwrap().profile;
        for knot in [0.02, 0.1, -0.02, -0.1] {
            let h = 1e-13;
            let (l0, l1, l2) = b.eval(knot - h);
            let (r0, r1, r2) = b.eval(knot + h);
            assert_abs_diff_eq!(l0, r0, epsilon = 1e-12);
            assert_abs_diff_eq!(l1, r1, epsilon = 1e-11);
            assert_abs_diff_eq!(l2, r2, epsilon = 1e-9);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = build_bump(0.1, 0.02, -slope(), 1.0).unwrap().profile;
        for k in -99..=99 {
            let t = k as f64 * 0.001;
            let h = 1e-7;
            let (_, d1, d2) = b.eval(t);
            assert_abs_diff_eq!(d1, (b.value(t + h) - b.value(t - h)) / (2.0 * h), epsilon = 1e-6);
            assert_abs_diff_eq!(d2, (b.eval(t + h).1 - b.eval(t - h).1) / (2.0 * h), epsilon = 1e-4);
        }
    }

    #[test]
    fn reported_bound_agrees_with_a_dense_scan() {
        let b = build_bump(0.1, 0.02, slope(), 1.0).unwrap().profile;
        let dense = (0..=100_000)
            .map(|k| {
                let t = -0.1 + 0.2 * k as f64 / 100_000.0;
                let (p, _, p2) = b.eval(t);
                (p * p2).abs()
            })
            .fold(0.0, f64::max);
        assert!(dense.is_finite() && dense > 0.0);
        assert!((b.sup_psi_psi2 - dense).abs() <= 1e-3 * dense, "{} vs {dense}", b.sup_psi_psi2);
    }

    #[test]
    fn tight_bounds_shrink_the_core_or_fail() {
        let loose = build_bump(0.1, 0.09, slope(), 1.0).unwrap();
        let tight = build_bump(0.1, 0.09, slope(), loose.profile.sup_psi_psi2 * 0.5).unwrap();
        assert!(tight.halvings > 0);
        assert!(tight.profile.core() < 0.09);
        assert!(tight.profile.sup_psi_psi2 <= loose.profile.sup_psi_psi2 * 0.5);
        assert!(matches!(
            build_bump(0.1, 0.09, slope(), 1e-9),
            Err(Error::BoundInfeasible { .. })
        ));
    }

    #[test]
    fn time_ramp_is_monotone_and_bounded() {
        let r = TimeRamp::new(0.02, 0.1).unwrap();
        assert_eq!(r.eval(0.0), (1.0, 0.0));
        assert_eq!(r.eval(0.1).0, 0.0);
        let mut prev = 1.0;
        for k in 0..=200 {
            let x = k as f64 * 0.0006;
            let (t, d) = r.eval(x);
            assert!((0.0..=1.0).contains(&t));
            assert!(t <= prev);
            assert!(d <= 0.0);
            assert_eq!(r.eval(-x).0, t);
            prev = t;
        }
    }
}
