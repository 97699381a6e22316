//! Lyapunov exponents by QR propagation of the differential cocycle,
//! finite-time Oseledets directions, and the center-stable Birkhoff average.

use nalgebra::Matrix3x2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, TorusPoint, Vec3};
use crate::maps::SmoothMap;
use crate::sampling::Halton;

/// Running averages are recorded at about this many checkpoints.
const TRACE_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    /// Descending.
    pub exponents: [f64; 3],
    pub n: usize,
    /// `(step, running averages)` at regular checkpoints, ending at `n`.
    pub trace: Vec<(usize, [f64; 3])>,
    pub x0: [f64; 3],
}

impl ExponentEstimate {
    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

/// Modified Gram-Schmidt in place; returns the diagonal of `R`.
fn mgs(q: &mut Mat3) -> Result<Vec3> {
    let mut r = Vec3::zeros();
    for j in 0..3 {
        let mut v = q.column(j).into_owned();
        for k in 0..j {
            let e = q.column(k).into_owned();
            v -= e * e.dot(&v);
        }
        let scale = v.amax();
        let norm = if scale > 0.0 { scale * (v / scale).norm() } else { 0.0 };
        if !(norm >= 1e-300 && norm.is_finite()) {
            return Err(Error::Underflow(norm));
        }
        r[j] = norm;
        q.set_column(j, &(v / norm));
    }
    Ok(r)
}

/// Steps along the backward orbit used to align the initial frame with the
/// Oseledets flag; the averages themselves run over `x0, ..., f^{n-1}(x0)`.
pub const FRAME_WARMUP: usize = 50;

/// Exponents from `x0` over `n` steps, re-orthonormalizing every `renorm_every` steps.
pub fn benettin_exponents(map: &SmoothMap, x0: &TorusPoint, n: usize, renorm_every: usize) -> Result<ExponentEstimate> {
    if n < 100 {
        return Err(Error::InvalidInput(format!("need n >= 100, got {n}")));
    }
    if renorm_every == 0 {
        return Err(Error::InvalidInput("renorm_every must be at least 1".into()));
    }
    let stride = (n / TRACE_POINTS).max(1);
    let mut q = Mat3::identity();
    let inverse = map.inverted();
    let mut past = Vec::with_capacity(FRAME_WARMUP);
    let mut y = *x0;
    for _ in 0..FRAME_WARMUP {
        y = inverse.eval(&y);
        past.push(y);
    }
    for (k, p) in past.iter().rev().enumerate() {
        q = map.differential(p) * q;
        if (k + 1) % renorm_every == 0 || k + 1 == FRAME_WARMUP {
            mgs(&mut q)?;
        }
    }
    let mut sums = Vec3::zeros();
    let mut trace = Vec::new();
    let mut x = *x0;
    let mut pending = 0;
    for step in 1..=n {
        let (next, d) = map.step(&x);
        q = d * q;
        x = next;
        pending += 1;
        if pending == renorm_every || step == n {
            let r = mgs(&mut q)?;
            sums += r.map(f64::ln);
            pending = 0;
        }
        if step % stride == 0 || step == n {
            let avg = sums / step as f64;
            trace.push((step, [avg.x, avg.y, avg.z]));
        }
    }
    let mut exponents: [f64; 3] = (sums / n as f64).into();
    exponents.sort_by(|a, b| b.total_cmp(a));
    Ok(ExponentEstimate {
        exponents,
        n,
        trace,
        x0: x0.coords(),
    })
}

/// Finite-time splitting at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingEstimate {
    pub x: [f64; 3],
    pub uu: [f64; 3],
    /// Unit normal of the center-stable plane.
    pub cs_normal: [f64; 3],
    pub horizon: usize,
    /// Largest angle between the horizon-`n` and horizon-`n/2` estimates.
    pub convergence: f64,
}

impl SplittingEstimate {
    pub fn uu(&self) -> Vec3 {
        Vec3::from(self.uu)
    }

    pub fn cs_normal(&self) -> Vec3 {
        Vec3::from(self.cs_normal)
    }
}

/// A fixed direction with no rational relations, used to seed power iterations.
pub(crate) fn generic_vector() -> Vec3 {
    Vec3::new(1.0, 2f64.sqrt() - 1.0, 3f64.sqrt() - 1.5).normalize()
}

/// Angle between lines.
pub fn line_angle(a: &Vec3, b: &Vec3) -> f64 {
    let c = (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0);
    let s = a.cross(b).norm() / (a.norm() * b.norm());
    s.atan2(c)
}

fn push_forward(diffs: &[Mat3]) -> Vec3 {
    let mut v = generic_vector();
    for d in diffs {
        v = (d * v).normalize();
    }
    v
}

fn pull_back(diffs: &[Mat3]) -> Vec3 {
    let mut w = generic_vector();
    for d in diffs.iter().rev() {
        w = (d.transpose() * w).normalize();
    }
    w
}

/// Strong unstable direction and center-stable normal at `x` from orbit segments of length `n`.
pub fn oseledets_directions(map: &SmoothMap, x: &TorusPoint, n: usize) -> Result<SplittingEstimate> {
    if n < 20 {
        return Err(Error::InvalidInput(format!("need n >= 20, got {n}")));
    }
    let inverse = map.inverted();
    let mut past = Vec::with_capacity(n);
    let mut y = *x;
    for _ in 0..n {
        y = inverse.eval(&y);
        past.push(y);
    }
    // differentials along x_{-n}, ..., x_{-1}
    let back: Vec<Mat3> = past.iter().rev().map(|p| map.differential(p)).collect();
    let uu = push_forward(&back);
    let uu_half = push_forward(&back[n - n / 2..]);

    let mut fwd = Vec::with_capacity(n);
    let mut y = *x;
    for _ in 0..n {
        let (next, d) = map.step(&y);
        fwd.push(d);
        y = next;
    }
    let normal = pull_back(&fwd);
    let normal_half = pull_back(&fwd[..n / 2]);

    let convergence = line_angle(&uu, &uu_half).max(line_angle(&normal, &normal_half));
    if convergence > 1e-3 {
        return Err(Error::Inconclusive(format!(
            "splitting at {:?} not converged at horizon {n}: angle {convergence:e}",
            x.coords()
        )));
    }
    Ok(SplittingEstimate {
        x: x.coords(),
        uu: uu.into(),
        cs_normal: normal.into(),
        horizon: n,
        convergence,
    })
}

/// Orthonormal basis of the plane with unit normal `nu`.
fn plane_basis(nu: &Vec3) -> Matrix3x2<f64> {
    let helper = if nu.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = nu.cross(&helper).normalize();
    let e2 = nu.cross(&e1);
    Matrix3x2::from_columns(&[e1, e2])
}

/// Largest singular value of `d` restricted to the plane with unit normal `nu`.
pub fn restricted_norm(d: &Mat3, nu: &Vec3) -> f64 {
    (d * plane_basis(nu)).svd(false, false).singular_values.max()
}

/// Look-ahead used for the center-stable planes along an orbit.
pub const CS_LOOKAHEAD: usize = 30;

/// `(1/n) sum_{j<n} log |Df(f^j x0)|_{E^cs}|` with the planes estimated by
/// pulling back from `f^{n + 30}(x0)`.
pub fn cs_birkhoff_average(map: &SmoothMap, x0: &TorusPoint, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let m = CS_LOOKAHEAD;
    let mut diffs = Vec::with_capacity(n + m);
    let mut y = *x0;
    for _ in 0..n + m {
        let (next, d) = map.step(&y);
        diffs.push(d);
        y = next;
    }
    let last = pull_back(&diffs[n - 1..]);
    let short = pull_back(&diffs[n - 1..n - 1 + m / 2]);
    let angle = line_angle(&last, &short);
    if angle > 1e-3 {
        return Err(Error::Inconclusive(format!(
            "center-stable plane not converged with look-ahead {m}: angle {angle:e}"
        )));
    }
    let mut w = pull_back(&diffs[n..]);
    let mut total = 0.0;
    for d in diffs[..n].iter().rev() {
        w = (d.transpose() * w).normalize();
        total += restricted_norm(d, &w).ln();
    }
    Ok(total / n as f64)
}

/// Equal-width histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn of(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bins = bins.max(1);
        let mut counts = vec![0; bins];
        let width = hi - lo;
        for v in values {
            let k = if width > 0.0 {
                (((v - lo) / width) * bins as f64) as usize
            } else {
                0
            };
            counts[k.min(bins - 1)] += 1;
        }
        Histogram { lo, hi, counts }
    }
}

/// Default threshold on the middle exponent.
pub const DELTA_NUH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSurvey {
    pub n: usize,
    pub seed: u64,
    pub members: Vec<ExponentEstimate>,
    pub histograms: [Histogram; 3],
    pub delta_nuh: f64,
    /// Fraction of members with `|lambda_2| > delta_nuh`.
    pub nuh_fraction: f64,
    pub mean: [f64; 3],
}

/// Exponents over a low-discrepancy ensemble, one estimate per member in index order.
pub fn exponent_survey(map: &SmoothMap, ensemble_size: usize, n: usize, seed: u64) -> Result<ExponentSurvey> {
    if ensemble_size < 10 {
        return Err(Error::InvalidInput(format!("need ensemble_size >= 10, got {ensemble_size}")));
    }
    let starts = Halton::new(seed).torus_points(ensemble_size);
    let members: Vec<ExponentEstimate> = starts
        .par_iter()
        .map(|x| benettin_exponents(map, x, n, 1))
        .collect::<Result<_>>()?;
    let column = |i: usize| members.iter().map(|m| m.exponents[i]).collect::<Vec<_>>();
    let cols = [column(0), column(1), column(2)];
    let mean = cols.clone().map(|c| c.iter().sum::<f64>() / c.len() as f64);
    let nuh = cols[1].iter().filter(|v| v.abs() > DELTA_NUH).count();
    Ok(ExponentSurvey {
        n,
        seed,
        histograms: cols.map(|c| Histogram::of(&c, 20)),
        delta_nuh: DELTA_NUH,
        nuh_fraction: nuh as f64 / members.len() as f64,
        mean,
        members,
    })
}
