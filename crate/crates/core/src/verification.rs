//! Sampled checks of map-level properties: volume, support, cones,
//! finite-time domination, the spectrum at the periodic point, and the
//! composite membership check.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    displacement, image_aperture_of, transverse_ratio, Ball, ConeSpec, Frame, Mat3, Spectrum,
    TorusPoint, Vec3,
};
use crate::maps::SmoothMap;
use crate::sampling::{grid_points, Halton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// A finite horizon could not resolve the property either way.
    Inconclusive,
}

/// Outcome of one check. Failing reports carry a witness point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub verdict: Verdict,
    /// Check-specific worst value: a deviation, or a relative margin where noted.
    pub worst: f64,
    pub witness: Option<[f64; 3]>,
    pub samples: usize,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<VerificationReport>,
}

impl VerificationReport {
    pub fn new(check: &str, verdict: Verdict, worst: f64, witness: Option<&TorusPoint>, samples: usize) -> Self {
        VerificationReport {
            check: check.into(),
            verdict,
            worst,
            witness: witness.map(|w| w.coords()),
            samples,
            tolerances: BTreeMap::new(),
            details: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn tol(mut self, name: &str, v: f64) -> Self {
        self.tolerances.insert(name.into(), v);
        self
    }

    pub fn detail(mut self, name: &str, v: f64) -> Self {
        self.details.insert(name.into(), v);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Largest value and its index; ties go to the lower index so the result
/// does not depend on the reduction order.
fn worst_of(values: impl ParallelIterator<Item = (usize, f64)>) -> (usize, f64) {
    values.reduce(
        || (usize::MAX, f64::NEG_INFINITY),
        |a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        },
    )
}

/// Low-discrepancy sample of the torus with most points in the map's perturbation balls.
pub fn map_samples(map: &SmoothMap, n: usize, seed: u64) -> Vec<TorusPoint> {
    crate::sampling::focused_points(map.support().perturbations(), n, seed)
}

/// `max |det Df - 1|` over the given points.
pub fn check_volume(map: &SmoothMap, points: &[TorusPoint], tol: f64) -> VerificationReport {
    let (i, worst) = worst_of(
        points
            .par_iter()
            .enumerate()
            .map(|(i, x)| (i, (map.differential(x).determinant() - 1.0).abs())),
    );
    let verdict = if worst <= tol { Verdict::Pass } else { Verdict::Fail };
    VerificationReport::new("volume", verdict, worst, points.get(i), points.len()).tol("det", tol)
}

/// Points outside every ball: dense shells just outside each, plus a global sample.
pub fn outside_samples(balls: &[Ball], n: usize, seed: u64) -> Vec<TorusPoint> {
    let h = Halton::new(seed);
    let outside = |x: &TorusPoint| balls.iter().all(|b| !b.contains(x));
    let per_ball = if balls.is_empty() { 0 } else { n / 2 / balls.len() };
    let mut out: Vec<TorusPoint> = balls
        .iter()
        .flat_map(|b| h.shell_points(b, b.radius * 1.0001, b.radius * 1.2, per_ball))
        .filter(|x| outside(x))
        .collect();
    let mut i = 0u64;
    let g = Halton::new(seed.wrapping_add(1));
    while out.len() < n {
        let x = TorusPoint::from_lift(Vec3::from(g.unit(i)));
        if outside(&x) {
            out.push(x);
        }
        i += 1;
    }
    out.truncate(n);
    out
}

/// `max d(f(x), f0(x))` over points outside all `balls`; passes iff at most `1e-12`.
pub fn check_support(map: &SmoothMap, base: &SmoothMap, balls: &[Ball], n: usize, seed: u64) -> VerificationReport {
    let pts = outside_samples(balls, n, seed);
    let (i, worst) = worst_of(
        pts.par_iter()
            .enumerate()
            .map(|(i, x)| (i, displacement(&base.eval(x), &map.eval(x)).norm())),
    );
    let verdict = if worst <= 1e-12 { Verdict::Pass } else { Verdict::Fail };
    VerificationReport::new("support", verdict, worst, pts.get(i), pts.len()).tol("distance", 1e-12)
}

/// Worst image aperture of `Df(x) C_gamma` in `frame` coordinates; passes iff it is at most `xi`.
/// `worst` is the relative margin `(xi - aperture) / xi`.
pub fn check_cone_invariance(
    map: &SmoothMap,
    frame: &Frame,
    gamma: f64,
    xi: f64,
    points: &[TorusPoint],
    n_boundary: usize,
) -> Result<VerificationReport> {
    if !(0.0 < xi && xi < gamma) {
        return Err(Error::InvalidInput(format!("need 0 < xi < gamma, got xi = {xi}, gamma = {gamma}")));
    }
    let boundary = ConeSpec::new(gamma)?.boundary_vectors(n_boundary);
    let apertures: Vec<f64> = points
        .par_iter()
        .map(|x| image_aperture_of(&frame.conjugate(&map.differential(x)), &boundary))
        .collect::<Result<_>>()?;
    let (i, worst) = worst_of(apertures.par_iter().copied().enumerate());
    let margin = (xi - worst) / xi;
    let verdict = if worst <= xi { Verdict::Pass } else { Verdict::Fail };
    Ok(VerificationReport::new("cone_invariance", verdict, margin, points.get(i), points.len())
        .tol("gamma", gamma)
        .tol("xi", xi)
        .detail("worst_aperture", worst)
        .detail("boundary_vectors", n_boundary as f64))
}

/// Singular values of a finite-time cocycle, accurate in all three slots
/// for unit-determinant products (the middle one from the determinant).
#[derive(Debug, Clone, Copy)]
pub struct CocycleSvd {
    pub sigma: [f64; 3],
    /// Top output direction of the forward product (at the endpoint).
    pub top_out: Vec3,
    /// Top output direction of the inverse product (at the start point).
    pub bottom_in: Vec3,
}

/// Product of differentials along `n` steps from `x`, with its inverse product.
pub fn cocycle(map: &SmoothMap, x: &TorusPoint, n: usize) -> (Mat3, Mat3, f64, TorusPoint) {
    let mut fwd = Mat3::identity();
    let mut inv = Mat3::identity();
    let mut det = 1.0;
    let mut y = *x;
    for _ in 0..n {
        let (next, d) = map.step(&y);
        fwd = d * fwd;
        let di = d.try_inverse().expect("differential of a diffeomorphism is invertible");
        inv *= di;
        det *= d.determinant();
        y = next;
    }
    (fwd, inv, det, y)
}

/// Singular values of `fwd` using `inv` for the smallest one.
pub fn cocycle_svd(fwd: &Mat3, inv: &Mat3, det: f64) -> CocycleSvd {
    let f = fwd.svd(true, false);
    let (imax, s1) = f.singular_values.argmax();
    let top_out = f.u.expect("requested").column(imax).into_owned();
    let g = inv.svd(true, false);
    let (jmax, t1) = g.singular_values.argmax();
    let bottom_in = g.u.expect("requested").column(jmax).into_owned();
    let s3 = 1.0 / t1;
    let s2 = det.abs() / (s1 * s3);
    CocycleSvd {
        sigma: [s1, s2, s3],
        top_out,
        bottom_in,
    }
}

/// Offset `n0` with `ratio >= 2^(n - n0)`, clamped at 0.
fn offset(ratio: f64, n: usize) -> f64 {
    (n as f64 - ratio.log2()).ceil().max(0.0)
}

/// Finite-time domination: `sigma1 / sigma2 >= 2^(n - n0)` along `n_time` steps from every point,
/// with the top output direction inside `C_gamma` of `frame`. `worst` is the largest `n0`.
pub fn check_domination(
    map: &SmoothMap,
    frame: &Frame,
    gamma: f64,
    points: &[TorusPoint],
    n_time: usize,
) -> VerificationReport {
    let rows: Vec<(f64, f64)> = points
        .par_iter()
        .map(|x| {
            let (fwd, inv, det, _) = cocycle(map, x, n_time);
            let s = cocycle_svd(&fwd, &inv, det);
            let n0 = offset(s.sigma[0] / s.sigma[1], n_time);
            let ratio = transverse_ratio(&frame.to_chart(&s.top_out));
            (n0, ratio)
        })
        .collect();
    let (i, n0) = worst_of(rows.par_iter().map(|r| r.0).enumerate());
    let (j, dir) = worst_of(rows.par_iter().map(|r| r.1).enumerate());
    let (verdict, at) = if n0 >= n_time as f64 {
        (Verdict::Inconclusive, i)
    } else if dir > gamma {
        (Verdict::Fail, j)
    } else {
        (Verdict::Pass, i)
    };
    VerificationReport::new("domination", verdict, n0, points.get(at), points.len())
        .tol("gamma", gamma)
        .detail("n_time", n_time as f64)
        .detail("worst_direction_ratio", dir)
}

/// Eigenvalues of `Df^n(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSpectrum {
    /// `(re, im)`, sorted by decreasing modulus.
    pub eigenvalues: Vec<[f64; 2]>,
    pub moduli: Vec<f64>,
    pub arguments: Vec<f64>,
    /// The two stable eigenvalues form a complex pair: no one-dimensional
    /// invariant splitting of the stable plane at `p`.
    pub complex_stable_pair: bool,
}

pub fn fixed_point_spectrum(map: &SmoothMap, p: &TorusPoint, period: usize) -> Result<FixedPointSpectrum> {
    let back = map.iterate(p, period);
    let distance = displacement(p, &back).norm();
    if distance > 1e-10 {
        return Err(Error::NotPeriodic { distance });
    }
    let spec = Spectrum::of(&map.differential_power(p, period));
    let v = spec.values;
    Ok(FixedPointSpectrum {
        eigenvalues: v.iter().map(|c| [c.re, c.im]).collect(),
        moduli: v.iter().map(|c| c.norm()).collect(),
        arguments: v.iter().map(|c| c.im.atan2(c.re)).collect(),
        complex_stable_pair: v[1].im != 0.0 && v[2].im != 0.0,
    })
}

/// The tube `U_f`: a chart slab `|u| < tube`, `|(v, w)| < radius` around `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub center: [f64; 3],
    pub tube: f64,
    pub radius: f64,
}

/// A region with its chart frame.
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub center: TorusPoint,
    pub frame: Frame,
    pub tube: f64,
    pub radius: f64,
}

impl Region {
    pub fn new(spec: &RegionSpec, frame: Frame) -> Result<Self> {
        if !(spec.tube > 0.0 && spec.radius > 0.0) {
            return Err(Error::InvalidInput("region tube and radius must be positive".into()));
        }
        Ok(Region {
            center: TorusPoint::wrap(spec.center)?,
            frame,
            tube: spec.tube,
            radius: spec.radius,
        })
    }

    #[inline]
    pub fn contains(&self, x: &TorusPoint) -> bool {
        let q = self.frame.to_chart(&displacement(&self.center, x));
        q.x.abs() < self.tube && (q.y * q.y + q.z * q.z).sqrt() < self.radius
    }

    /// An `n^3` grid of the slab in chart coordinates.
    pub fn grid(&self, n: usize) -> Vec<TorusPoint> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = |m: usize| (m as f64 + 0.5) / n as f64 * 2.0 - 1.0;
                    let q = Vec3::new(c(i) * self.tube, c(j) * self.radius, c(k) * self.radius);
                    if q.y * q.y + q.z * q.z < self.radius * self.radius {
                        out.push(self.center.translate(&self.frame.from_chart(&q)));
                    }
                }
            }
        }
        out
    }
}

/// Grid points whose orbits `f^{-n}, ..., f^{n}` stay out of the region.
pub fn avoiding_points(map: &SmoothMap, region: &Region, grid: usize, n: usize) -> Vec<TorusPoint> {
    let inverse = map.inverted();
    grid_points(grid)
        .into_par_iter()
        .filter(|x| {
            let mut y = *x;
            let mut z = *x;
            for _ in 0..=n {
                if region.contains(&y) || region.contains(&z) {
                    return false;
                }
                y = map.eval(&y);
                z = inverse.eval(&z);
            }
            true
        })
        .collect()
}

/// Three-way finite-time splitting along orbit segments of length `2 n` centered at the points.
/// `worst` is the largest offset `n0` over both gaps.
pub fn check_three_way_splitting(
    map: &SmoothMap,
    frame: &Frame,
    gamma: f64,
    centers: &[TorusPoint],
    n: usize,
) -> VerificationReport {
    let inverse = map.inverted();
    let rows: Vec<(f64, f64)> = centers
        .par_iter()
        .map(|y| {
            let x = inverse.iterate(y, n);
            let (fwd, inv, det, _) = cocycle(map, &x, 2 * n);
            let s = cocycle_svd(&fwd, &inv, det);
            let n0 = offset(s.sigma[0] / s.sigma[1], 2 * n).max(offset(s.sigma[1] / s.sigma[2], 2 * n));
            let uu = transverse_ratio(&frame.to_chart(&s.top_out));
            let ss = {
                let q = frame.to_chart(&s.bottom_in);
                (q.x * q.x + q.y * q.y).sqrt() / q.z.abs()
            };
            (n0, uu.max(ss))
        })
        .collect();
    let (i, n0) = worst_of(rows.par_iter().map(|r| r.0).enumerate());
    let (j, dir) = worst_of(rows.par_iter().map(|r| r.1).enumerate());
    let (verdict, at) = if centers.is_empty() || n0 >= 2.0 * n as f64 {
        (Verdict::Inconclusive, i)
    } else if dir > gamma {
        (Verdict::Fail, j)
    } else {
        (Verdict::Pass, i)
    };
    VerificationReport::new("three_way_splitting", verdict, n0.max(0.0), centers.get(at), centers.len())
        .tol("gamma", gamma)
        .detail("segment_length", (2 * n) as f64)
        .detail("worst_direction_ratio", dir.max(0.0))
}

/// Composite verdict: fail if any child fails, inconclusive if any is, else pass.
pub fn composite(check: &str, children: Vec<VerificationReport>) -> VerificationReport {
    let verdict = if children.iter().any(|c| c.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if children.iter().any(|c| c.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    let failing = children.iter().position(|c| c.verdict != Verdict::Pass);
    let witness = failing.and_then(|i| children[i].witness);
    let samples = children.iter().map(|c| c.samples).sum();
    let mut r = VerificationReport::new(check, verdict, failing.map(|i| i as f64 + 1.0).unwrap_or(0.0), None, samples);
    r.witness = witness;
    r.children = children;
    r
}

/// Budgets of the composite membership check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MembershipSettings {
    pub cone_points: usize,
    pub n_boundary: usize,
    pub domination_points: usize,
    pub n_time: usize,
    /// Points per axis of the grid over the region.
    pub grid: usize,
    /// Arc length of the local unstable curves.
    pub local_length: f64,
    pub h_max: f64,
    pub angle_min: f64,
    /// Points per axis of the grid searched for region-avoiding orbits.
    pub avoid_grid: usize,
}

impl Default for MembershipSettings {
    fn default() -> Self {
        MembershipSettings {
            cone_points: 10_000,
            n_boundary: 64,
            domination_points: 2_000,
            n_time: 30,
            grid: 32,
            local_length: 0.7,
            h_max: 0.02,
            angle_min: crate::manifolds::ANGLE_MIN,
            avoid_grid: 64,
        }
    }
}

/// Local unstable curves of region points cross the stable disk transversely.
pub fn check_local_intersections(
    map: &SmoothMap,
    region: &Region,
    disk: &crate::manifolds::StableDisk,
    s: &MembershipSettings,
) -> Result<VerificationReport> {
    let pts = region.grid(s.grid);
    let cov = crate::manifolds::CoverageSettings {
        grid: s.grid,
        horizon: s.n_time,
        length: s.local_length,
        h_max: s.h_max,
        angle_min: s.angle_min,
    };
    let first: Vec<Option<usize>> = pts
        .par_iter()
        .map(|x| crate::manifolds::first_hit(map, disk, x, &cov))
        .collect::<Result<_>>()?;
    let missing: Vec<usize> = (0..pts.len()).filter(|&i| first[i].is_none()).collect();
    let verdict = if missing.is_empty() { Verdict::Pass } else { Verdict::Fail };
    let generations = first.iter().flatten().copied().max().unwrap_or(0);
    Ok(VerificationReport::new(
        "local_stable_intersection",
        verdict,
        missing.len() as f64 / pts.len().max(1) as f64,
        missing.first().map(|&i| &pts[i]),
        pts.len(),
    )
    .tol("angle_min", s.angle_min)
    .tol("local_length", s.local_length)
    .detail("disk_radius", disk.radius)
    .detail("max_generations", generations as f64))
}

/// The three conditions: (1) cone invariance and domination, (2) local unstable
/// curves of the region meet the stable disk, (3) orbit segments avoiding the
/// region split three ways. `worst` is the index of the first non-passing condition.
#[allow(clippy::too_many_arguments)]
pub fn check_v_membership(
    map: &SmoothMap,
    region: &Region,
    disk: &crate::manifolds::StableDisk,
    gamma: f64,
    xi: f64,
    s: &MembershipSettings,
    seed: u64,
) -> Result<VerificationReport> {
    let frame = region.frame;
    let pts = map_samples(map, s.cone_points, seed);
    let cone = check_cone_invariance(map, &frame, gamma, xi, &pts, s.n_boundary)?;
    let dom_pts = map_samples(map, s.domination_points, seed.wrapping_add(17));
    let dom = check_domination(map, &frame, gamma, &dom_pts, s.n_time);
    let first = composite("dominated_splitting", vec![cone, dom]);
    let second = check_local_intersections(map, region, disk, s)?;
    let avoiding = avoiding_points(map, region, s.avoid_grid, s.n_time);
    let third = check_three_way_splitting(map, &frame, gamma, &avoiding, s.n_time);
    Ok(composite("v_membership", vec![first, second, third]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{linear_anosov, product_with_identity, IntegerMatrixSpec, TorusMap};
    use approx::assert_abs_diff_eq;

    /// A non-integral diagonal "map", enough for local differential checks.
    struct Diagonal(Mat3);

    impl TorusMap for Diagonal {
        fn eval(&self, x: &TorusPoint) -> TorusPoint {
            TorusPoint::from_lift(self.0 * x.lift())
        }
        fn differential(&self, _x: &TorusPoint) -> Mat3 {
            self.0
        }
        fn inverse(&self, y: &TorusPoint) -> Result<TorusPoint> {
            Ok(TorusPoint::from_lift(self.0.try_inverse().unwrap() * y.lift()))
        }
        fn label(&self) -> String {
            "diag".into()
        }
        fn support(&self) -> crate::maps::Support {
            crate::maps::Support::Opaque
        }
    }

    fn diag(a: f64, b: f64, c: f64) -> SmoothMap {
        SmoothMap::new(Diagonal(Mat3::from_diagonal(&Vec3::new(a, b, c))))
    }

    fn bv() -> SmoothMap {
        linear_anosov(
            &IntegerMatrixSpec::new(vec![vec![1, -1, 1], vec![-1, 2, -2], vec![1, -2, 3]]).unwrap(),
            true,
        )
        .unwrap()
    }

    #[test]
    fn linear_maps_preserve_volume() {
        let pts = Halton::new(1).torus_points(1000);
        let r = check_volume(&bv(), &pts, 1e-12);
        assert!(r.passed());
        assert!(r.worst < 1e-12);
    }

    #[test]
    fn contracting_map_fails_volume_with_witness() {
        let pts = Halton::new(1).torus_points(10);
        let r = check_volume(&diag(2.0, 0.5, 0.9), &pts, 1e-8);
        assert_eq!(r.verdict, Verdict::Fail);
        assert_abs_diff_eq!(r.worst, 0.1, epsilon = 1e-12);
        assert!(r.witness.is_some());
    }

    #[test]
    fn diagonal_cone_ratios() {
        let pts = Halton::new(1).torus_points(10);
        let f = diag(2.0, 0.5, 0.5);
        let ok = check_cone_invariance(&f, &Frame::identity(), 1.0, 0.3, &pts, 64).unwrap();
        assert!(ok.passed());
        assert_abs_diff_eq!(ok.details["worst_aperture"], 0.25, epsilon = 1e-12);
        let bad = check_cone_invariance(&f, &Frame::identity(), 1.0, 0.2, &pts, 64).unwrap();
        assert_eq!(bad.verdict, Verdict::Fail);
        assert!(bad.witness.is_some());
    }

    #[test]
    fn diagonal_domination_offset_is_zero() {
        let pts = Halton::new(1).torus_points(5);
        let r = check_domination(&diag(2.0, 0.5, 0.4), &Frame::identity(), 1.0, &pts, 10);
        assert!(r.passed());
        assert_eq!(r.worst, 0.0);
        let (fwd, inv, det, _) = cocycle(&diag(2.0, 0.5, 0.4), &pts[0], 10);
        let s = cocycle_svd(&fwd, &inv, det);
        assert_abs_diff_eq!(s.sigma[0] / s.sigma[1], 4f64.powi(10), epsilon = 1e-3);
    }

    #[test]
    fn domination_offset_is_stable_in_the_horizon() {
        let f = bv();
        let frame = Frame::eigenframe(&f.differential(&TorusPoint::ORIGIN)).unwrap();
        let pts = Halton::new(2).torus_points(20);
        let a = check_domination(&f, &frame, 1.0, &pts, 10).worst;
        let b = check_domination(&f, &frame, 1.0, &pts, 40).worst;
        assert!((a - b).abs() <= 1.0);
    }

    #[test]
    fn cat_times_identity_is_dominated() {
        let f = product_with_identity(&IntegerMatrixSpec::new(vec![vec![2, 1], vec![1, 1]]).unwrap()).unwrap();
        let frame = Frame::eigenframe(&f.differential(&TorusPoint::ORIGIN)).unwrap();
        let pts = Halton::new(2).torus_points(20);
        let r = check_domination(&f, &frame, 1.0, &pts, 20);
        assert!(r.passed());
        let (fwd, inv, det, _) = cocycle(&f, &pts[0], 20);
        let s = cocycle_svd(&fwd, &inv, det);
        let lu = (3.0 + 5f64.sqrt()) / 2.0;
        assert_abs_diff_eq!((s.sigma[0] / s.sigma[1]).ln(), 20.0 * lu.ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(s.sigma[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn spectrum_of_a_diagonal_map() {
        let s = fixed_point_spectrum(&diag(2.0, 0.8, 0.625), &TorusPoint::ORIGIN, 1).unwrap();
        for (m, w) in s.moduli.iter().zip([2.0, 0.8, 0.625]) {
            assert_abs_diff_eq!(*m, w, epsilon = 1e-12);
        }
        assert!(!s.complex_stable_pair);
        let p = TorusPoint::wrap([0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(fixed_point_spectrum(&bv(), &p, 1), Err(Error::NotPeriodic { .. })));
    }

    #[test]
    fn support_of_the_identity_surgery_and_a_global_change() {
        let f = bv();
        let ball = Ball {
            center: TorusPoint::ORIGIN,
            frame: Frame::identity(),
            radius: 0.1,
        };
        let same = check_support(&f, &f, std::slice::from_ref(&ball), 500, 3);
        assert!(same.passed());
        assert_eq!(same.worst, 0.0);
        let other = check_support(&diag(1.0, 1.0, 1.0), &f, std::slice::from_ref(&ball), 500, 3);
        assert_eq!(other.verdict, Verdict::Fail);
        assert!(other.witness.is_some());
    }

    #[test]
    fn linear_base_splits_three_ways_off_a_tube() {
        let f = bv();
        let frame = Frame::eigenframe(&f.differential(&TorusPoint::ORIGIN)).unwrap();
        let region = Region::new(&RegionSpec { center: [0.0; 3], tube: 0.1, radius: 0.1 }, frame).unwrap();
        let pts = avoiding_points(&f, &region, 8, 5);
        assert!(!pts.is_empty());
        for x in &pts {
            assert!(!region.contains(x));
        }
        let r = check_three_way_splitting(&f, &frame, 1.0, &pts, 15);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn composite_reports_the_first_failing_child() {
        let ok = VerificationReport::new("a", Verdict::Pass, 0.0, None, 1);
        let bad = VerificationReport::new("b", Verdict::Fail, 1.0, Some(&TorusPoint::ORIGIN), 1);
        let c = composite("all", vec![ok.clone(), bad]);
        assert_eq!(c.verdict, Verdict::Fail);
        assert_eq!(c.worst, 2.0);
        assert!(c.witness.is_some());
        assert!(composite("all", vec![ok]).passed());
    }
}
