//! Strong unstable curves, the local stable disk of the periodic point, and
//! the coverage estimators built from their intersections.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{displacement, transverse_ratio, ChartPoint, Frame, Mat3, TorusPoint, Vec3};
use crate::lyapunov::generic_vector;
use crate::maps::SmoothMap;
use crate::sampling::grid_points;

/// Length of the seed segment.
pub const SEED_LENGTH: f64 = 1e-6;

/// Default transversality threshold in radians.
pub const ANGLE_MIN: f64 = 1e-3;

/// Backward steps used to align the seed direction with the strong unstable direction.
pub const DIRECTION_WARMUP: usize = 30;

/// The disk `{u = 0, |(v, w)| < radius}` in the chart of `frame` at `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableDisk {
    pub center: TorusPoint,
    pub frame: Frame,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskCertificate {
    pub radius: f64,
    pub samples: usize,
    pub steps: usize,
    /// Largest `|u|` of an image of a disk point.
    pub max_offplane: f64,
    /// Largest `|(v, w)|` reached by any iterate.
    pub max_radius: f64,
    /// Largest `|(v, w)|` after the last step.
    pub final_radius: f64,
    pub certified: bool,
}

impl StableDisk {
    /// Chart coordinates of `x` from the shortest displacement.
    #[inline]
    pub fn chart(&self, x: &TorusPoint) -> ChartPoint {
        self.frame.to_chart(&displacement(&self.center, x))
    }

    pub fn point(&self, q: &ChartPoint) -> TorusPoint {
        self.center.translate(&self.frame.from_chart(q))
    }

    /// Iterates a polar grid of the disk under `map`, projecting back to the
    /// plane after each step. Certified when every image stays on the plane to
    /// `1e-12`, inside the disk, and ends within `1e-6` of the center.
    pub fn certify(&self, map: &SmoothMap, rings: usize, steps: usize) -> DiskCertificate {
        let mut start = vec![Vec3::zeros()];
        for i in 1..=rings {
            let r = self.radius * i as f64 / (rings as f64 + 0.5);
            let k = 8 * i;
            for j in 0..k {
                let a = std::f64::consts::TAU * j as f64 / k as f64;
                start.push(Vec3::new(0.0, r * a.cos(), r * a.sin()));
            }
        }
        let rows: Vec<(f64, f64, f64)> = start
            .par_iter()
            .map(|q0| {
                let mut q = *q0;
                let (mut off, mut reach) = (0.0f64, q.norm());
                for _ in 0..steps {
                    let img = self.chart(&map.eval(&self.point(&q)));
                    off = off.max(img.x.abs());
                    q = Vec3::new(0.0, img.y, img.z);
                    reach = reach.max(q.norm());
                }
                (off, reach, q.norm())
            })
            .collect();
        let max_offplane = rows.iter().map(|r| r.0).fold(0.0, f64::max);
        let max_radius = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        let final_radius = rows.iter().map(|r| r.2).fold(0.0, f64::max);
        DiskCertificate {
            radius: self.radius,
            samples: start.len(),
            steps,
            max_offplane,
            max_radius,
            final_radius,
            certified: max_offplane <= 1e-12 && max_radius < self.radius && final_radius <= 1e-6,
        }
    }
}

/// Growth budget for unstable curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveBudget {
    /// Total arc length kept, split evenly on both sides of the seed image.
    pub length: f64,
    pub generations: usize,
    pub h_max: f64,
}

impl CurveBudget {
    fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.h_max > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidInput("curve length and spacing must be positive".into()));
        }
        Ok(())
    }
}

/// A polyline approximating a piece of a strong unstable curve.
#[derive(Debug, Clone, PartialEq)]
pub struct UnstableCurve {
    pub points: Vec<TorusPoint>,
    /// Index of the image of the seed's midpoint.
    pub seed_index: usize,
    pub seed: TorusPoint,
    pub arc_length: f64,
    pub generations: usize,
}

impl UnstableCurve {
    /// Segment vectors along the curve.
    pub fn segments(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.points.windows(2).map(|w| displacement(&w[0], &w[1]))
    }

    /// Largest transverse ratio of a segment in `frame` coordinates.
    pub fn max_tangent_ratio(&self, frame: &Frame) -> f64 {
        self.segments()
            .map(|d| transverse_ratio(&frame.to_chart(&d)))
            .fold(0.0, f64::max)
    }

    pub fn max_spacing(&self) -> f64 {
        self.segments().map(|d| d.norm()).fold(0.0, f64::max)
    }
}

fn arc_lengths(points: &[TorusPoint]) -> Vec<f64> {
    let mut s = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    s.push(0.0);
    for w in points.windows(2) {
        acc += displacement(&w[0], &w[1]).norm();
        s.push(acc);
    }
    s
}

/// Appends refined images of the segment `pre_a -> pre_b` (excluding `img_a`, including `img_b`).
fn refine(
    map: &SmoothMap,
    pre: (&TorusPoint, &TorusPoint),
    img: (&TorusPoint, &TorusPoint),
    h_max: f64,
    depth: u32,
    out: &mut Vec<(TorusPoint, TorusPoint)>,
) {
    if depth < 40 && displacement(img.0, img.1).norm() > h_max {
        let pre_m = pre.0.translate(&(displacement(pre.0, pre.1) * 0.5));
        let img_m = map.eval(&pre_m);
        refine(map, (pre.0, &pre_m), (img.0, &img_m), h_max, depth + 1, out);
        refine(map, (&pre_m, pre.1), (&img_m, img.1), h_max, depth + 1, out);
    } else {
        out.push((*pre.1, *img.1));
    }
}

/// Seeds a segment of length `1e-6` along `direction` at `x` and applies the map
/// `budget.generations` times, refining to spacing `h_max` and pruning to
/// `budget.length` around the seed image. The result passes through `f^N(x)`.
pub fn grow_unstable_curve(map: &SmoothMap, x: &TorusPoint, direction: &Vec3, budget: &CurveBudget) -> Result<UnstableCurve> {
    budget.validate()?;
    let e = direction.normalize() * (0.5 * SEED_LENGTH);
    let mut points = vec![x.translate(&-e), *x, x.translate(&e)];
    let mut seed_index = 1;
    for _ in 0..budget.generations {
        let images: Vec<TorusPoint> = points.iter().map(|p| map.eval(p)).collect();
        let mut refined = Vec::with_capacity(points.len() * 2);
        refined.push((points[0], images[0]));
        let mut new_seed = 0;
        for i in 0..points.len() - 1 {
            refine(
                map,
                (&points[i], &points[i + 1]),
                (&images[i], &images[i + 1]),
                budget.h_max,
                0,
                &mut refined,
            );
            if i + 1 == seed_index {
                new_seed = refined.len() - 1;
            }
        }
        if seed_index == 0 {
            new_seed = 0;
        }
        let imgs: Vec<TorusPoint> = refined.iter().map(|r| r.1).collect();
        let s = arc_lengths(&imgs);
        let half = 0.5 * budget.length;
        let lo = s.partition_point(|v| *v < s[new_seed] - half);
        let hi = s.partition_point(|v| *v <= s[new_seed] + half);
        points = imgs[lo..hi].to_vec();
        seed_index = new_seed - lo;
    }
    let s = arc_lengths(&points);
    Ok(UnstableCurve {
        arc_length: *s.last().unwrap_or(&0.0),
        points,
        seed_index,
        seed: *x,
        generations: budget.generations,
    })
}

/// Strong unstable direction at `x` by pushing a generic vector along `warmup` backward steps.
pub fn unstable_direction(map: &SmoothMap, x: &TorusPoint, warmup: usize) -> Vec3 {
    let inverse = map.inverted();
    let past: Vec<TorusPoint> = std::iter::successors(Some(*x), |y| Some(inverse.eval(y)))
        .skip(1)
        .take(warmup)
        .collect();
    let mut v = generic_vector();
    for p in past.iter().rev() {
        v = (map.differential(p) * v).normalize();
    }
    v
}

/// A crossing of a curve segment with the disk plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub segment: usize,
    /// Chart coordinates of the crossing.
    pub point: [f64; 3],
    /// Angle between the segment and the plane.
    pub angle: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Intersections {
    pub transverse: Vec<Crossing>,
    /// Crossings below the angle threshold.
    pub tangential: Vec<Crossing>,
}

/// Crossing of one segment with the plane inside the disk.
fn segment_crossing(disk: &StableDisk, normal: &Vec3, a: &TorusPoint, d: &Vec3) -> Option<(ChartPoint, f64)> {
    let qa = disk.chart(a);
    let dq = disk.frame.to_chart(d);
    let qb = qa + dq;
    let crosses = (qa.x < 0.0 && qb.x >= 0.0) || (qb.x < 0.0 && qa.x >= 0.0);
    if !crosses {
        return None;
    }
    let t = -qa.x / dq.x;
    let mut c = qa + dq * t;
    c.x = 0.0;
    if c.y.hypot(c.z) >= disk.radius {
        return None;
    }
    let angle = (normal.dot(d).abs() / (normal.norm() * d.norm())).min(1.0).asin();
    Some((c, angle))
}

/// Segments of `curve` crossing the disk, split by the angle threshold.
pub fn transverse_hit(curve: &UnstableCurve, disk: &StableDisk, angle_min: f64) -> Intersections {
    let normal = disk.frame.inverse().row(0).transpose();
    let mut out = Intersections::default();
    for (i, w) in curve.points.windows(2).enumerate() {
        let d = displacement(&w[0], &w[1]);
        if let Some((c, angle)) = segment_crossing(disk, &normal, &w[0], &d) {
            let hit = Crossing {
                segment: i,
                point: c.into(),
                angle,
            };
            if angle >= angle_min {
                out.transverse.push(hit);
            } else {
                out.tangential.push(hit);
            }
        }
    }
    out
}

/// Whether the curve has a transverse crossing, stopping at the first.
fn hits(curve: &UnstableCurve, disk: &StableDisk, angle_min: f64) -> bool {
    let normal = disk.frame.inverse().row(0).transpose();
    curve.points.windows(2).any(|w| {
        let d = displacement(&w[0], &w[1]);
        matches!(segment_crossing(disk, &normal, &w[0], &d), Some((_, a)) if a >= angle_min)
    })
}

/// Budgets for the coverage estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSettings {
    /// Points per axis of the uniform grid.
    pub grid: usize,
    pub horizon: usize,
    pub length: f64,
    pub h_max: f64,
    pub angle_min: f64,
}

/// Smallest `g <= horizon` such that the unstable curve through `x` grown for
/// `g` generations from `f^{-g}(x)` crosses the disk transversely.
pub fn first_hit(map: &SmoothMap, disk: &StableDisk, x: &TorusPoint, s: &CoverageSettings) -> Result<Option<usize>> {
    let inverse = map.inverted();
    let depth = s.horizon + DIRECTION_WARMUP;
    let past: Vec<TorusPoint> = std::iter::successors(Some(*x), |y| Some(inverse.eval(y)))
        .take(depth + 1)
        .collect();
    // direction at past[g], pushed forward from past[g + warmup]
    let diffs: Vec<Mat3> = past.iter().map(|p| map.differential(p)).collect();
    for g in 0..=s.horizon {
        let mut v = generic_vector();
        for k in (g + 1..=g + DIRECTION_WARMUP).rev() {
            v = (diffs[k] * v).normalize();
        }
        let budget = CurveBudget {
            length: s.length,
            generations: g,
            h_max: s.h_max,
        };
        let curve = grow_unstable_curve(map, &past[g], &v, &budget)?;
        if hits(&curve, disk, s.angle_min) {
            return Ok(Some(g));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub settings: CoverageSettings,
    pub disk_radius: f64,
    pub samples: usize,
    /// Fraction of grid points with a transverse hit within the horizon.
    pub coverage: f64,
    /// Coverage within horizon `g`, for `g = 0..=horizon`.
    pub by_horizon: Vec<f64>,
    /// Grid points with no hit: the finite-horizon estimate of the bad set.
    pub failures: Vec<[f64; 3]>,
}

fn first_hits(map: &SmoothMap, disk: &StableDisk, points: &[TorusPoint], s: &CoverageSettings) -> Result<Vec<Option<usize>>> {
    points.par_iter().map(|x| first_hit(map, disk, x, s)).collect()
}

fn summarize(s: &CoverageSettings, horizon: usize, disk: &StableDisk, points: &[TorusPoint], first: &[Option<usize>]) -> CoverageReport {
    let n = points.len().max(1) as f64;
    let within = |g: usize| first.iter().filter(|f| matches!(f, Some(h) if *h <= g)).count() as f64 / n;
    CoverageReport {
        settings: CoverageSettings { horizon, ..*s },
        disk_radius: disk.radius,
        samples: points.len(),
        coverage: within(horizon),
        by_horizon: (0..=horizon).map(within).collect(),
        failures: points
            .iter()
            .zip(first)
            .filter(|(_, f)| !matches!(f, Some(h) if *h <= horizon))
            .map(|(p, _)| p.coords())
            .collect(),
    }
}

/// Fraction of an `n^3` grid whose unstable curves meet the stable disk transversely.
pub fn phc_plus_coverage(map: &SmoothMap, disk: &StableDisk, s: &CoverageSettings) -> Result<CoverageReport> {
    let points = grid_points(s.grid);
    let first = first_hits(map, disk, &points, s)?;
    Ok(summarize(s, s.horizon, disk, &points, &first))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadSetReport {
    pub reports: Vec<CoverageReport>,
    /// Failure clouds shrink along the horizon sequence.
    pub nested: bool,
    pub refinement_warning: bool,
    /// Failure points probed for u-saturation, and how many had failing neighbours
    /// on both sides along their unstable direction.
    pub saturation_probed: usize,
    pub saturation_held: usize,
}

/// Coverage at each horizon in `horizons` (increasing), with a u-saturation
/// probe on up to `probes` failure points at the last horizon.
pub fn bad_set_estimate(
    map: &SmoothMap,
    disk: &StableDisk,
    s: &CoverageSettings,
    horizons: &[usize],
    probes: usize,
) -> Result<BadSetReport> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("horizons must be non-empty and increasing".into()));
    }
    let last = *horizons.last().unwrap();
    let top = CoverageSettings { horizon: last, ..*s };
    let points = grid_points(s.grid);
    let first = first_hits(map, disk, &points, &top)?;
    let reports: Vec<CoverageReport> = horizons.iter().map(|&h| summarize(s, h, disk, &points, &first)).collect();
    let nested = reports.windows(2).all(|w| {
        let earlier: std::collections::HashSet<[u64; 3]> =
            w[0].failures.iter().map(|p| p.map(f64::to_bits)).collect();
        w[1].failures.iter().all(|p| earlier.contains(&p.map(f64::to_bits)))
    });

    let failures: Vec<TorusPoint> = reports
        .last()
        .unwrap()
        .failures
        .iter()
        .map(|c| TorusPoint::from_lift(Vec3::from(*c)))
        .collect();
    let step = (failures.len() / probes.max(1)).max(1);
    let probed: Vec<&TorusPoint> = failures.iter().step_by(step).take(probes).collect();
    let delta = 0.5 / s.grid as f64;
    let held = probed
        .par_iter()
        .map(|x| -> Result<bool> {
            let u = unstable_direction(map, x, DIRECTION_WARMUP) * delta;
            let a = first_hit(map, disk, &x.translate(&u), &top)?;
            let b = first_hit(map, disk, &x.translate(&-u), &top)?;
            Ok(a.is_none() && b.is_none())
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|h| *h)
        .count();
    Ok(BadSetReport {
        reports,
        nested,
        refinement_warning: !nested,
        saturation_probed: probed.len(),
        saturation_held: held,
    })
}

/// Box-visit fraction of the unstable curve of a fixed point: a proxy for how
/// far its unstable manifold spreads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCoverage {
    pub boxes_per_axis: usize,
    pub arc_length: f64,
    pub generations: usize,
    pub visited_fraction: f64,
    pub proxy: bool,
}

/// Grows the unstable curve of the fixed point `p` along `direction` until its
/// length reaches `length` and counts visited boxes of an `n^3` partition.
pub fn unstable_box_coverage(
    map: &SmoothMap,
    p: &TorusPoint,
    direction: &Vec3,
    length: f64,
    h_max: f64,
    boxes: usize,
) -> Result<BoxCoverage> {
    let mut generations = 0;
    let mut curve = grow_unstable_curve(map, p, direction, &CurveBudget { length, generations, h_max })?;
    while curve.arc_length < 0.999 * length && generations < 200 {
        generations += 1;
        curve = grow_unstable_curve(map, p, direction, &CurveBudget { length, generations, h_max })?;
    }
    let idx = |c: f64| ((c * boxes as f64) as usize).min(boxes - 1);
    let mut seen = vec![false; boxes * boxes * boxes];
    for w in curve.points.windows(2) {
        // sample each segment finely enough to see every box it passes
        let d = displacement(&w[0], &w[1]);
        let k = ((d.amax() * boxes as f64 * 2.0).ceil() as usize).max(1);
        for j in 0..=k {
            let c = w[0].translate(&(d * (j as f64 / k as f64))).coords();
            seen[(idx(c[0]) * boxes + idx(c[1])) * boxes + idx(c[2])] = true;
        }
    }
    Ok(BoxCoverage {
        boxes_per_axis: boxes,
        arc_length: curve.arc_length,
        generations,
        visited_fraction: seen.iter().filter(|s| **s).count() as f64 / seen.len() as f64,
        proxy: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{real_eigenvector, Spectrum};
    use crate::maps::{linear_anosov, product_with_identity, IntegerMatrixSpec};
    use approx::assert_abs_diff_eq;

    fn bv() -> SmoothMap {
        linear_anosov(
            &IntegerMatrixSpec::new(vec![vec![1, -1, 1], vec![-1, 2, -2], vec![1, -2, 3]]).unwrap(),
            true,
        )
        .unwrap()
    }

    fn cat() -> SmoothMap {
        product_with_identity(&IntegerMatrixSpec::new(vec![vec![2, 1], vec![1, 1]]).unwrap()).unwrap()
    }

    fn disk_of(f: &SmoothMap, radius: f64) -> StableDisk {
        StableDisk {
            center: TorusPoint::ORIGIN,
            frame: Frame::eigenframe(&f.differential(&TorusPoint::ORIGIN)).unwrap(),
            radius,
        }
    }

    #[test]
    fn linear_curves_are_straight() {
        let f = bv();
        let a = f.differential(&TorusPoint::ORIGIN);
        let u = real_eigenvector(&a, Spectrum::of(&a).values[0].re).unwrap();
        let x = TorusPoint::wrap([0.3, 0.1, 0.7]).unwrap();
        let dir = unstable_direction(&f, &x, 30);
        let c = grow_unstable_curve(&f, &x, &dir, &CurveBudget { length: 3.0, generations: 12, h_max: 0.02 }).unwrap();
        for d in c.segments() {
            assert!(crate::lyapunov::line_angle(&d, &u) < 1e-8);
        }
        assert!(c.max_spacing() <= 0.02);
        assert!(c.arc_length <= 3.0 && c.arc_length > 2.9);
        let img = f.iterate(&x, 12);
        assert_eq!(c.points[c.seed_index], img);
    }

    #[test]
    fn product_curves_stay_in_their_slice() {
        let f = cat();
        let x = TorusPoint::wrap([0.3, 0.1, 0.7]).unwrap();
        let dir = unstable_direction(&f, &x, 30);
        let c = grow_unstable_curve(&f, &x, &dir, &CurveBudget { length: 5.0, generations: 15, h_max: 0.02 }).unwrap();
        for p in &c.points {
            assert!((p.z() - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn straight_segment_crossing() {
        let disk = StableDisk {
            center: TorusPoint::wrap([0.5, 0.5, 0.5]).unwrap(),
            frame: Frame::identity(),
            radius: 0.1,
        };
        let curve = |a: [f64; 3], b: [f64; 3]| UnstableCurve {
            points: vec![TorusPoint::wrap(a).unwrap(), TorusPoint::wrap(b).unwrap()],
            seed_index: 0,
            seed: TorusPoint::ORIGIN,
            arc_length: 0.0,
            generations: 0,
        };
        // 45 degrees through the center
        let hit = transverse_hit(&curve([0.49, 0.49, 0.5], [0.51, 0.51, 0.5]), &disk, ANGLE_MIN);
        assert_eq!(hit.transverse.len(), 1);
        assert_abs_diff_eq!(hit.transverse[0].angle, std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
        // parallel at u = 0.01
        let miss = transverse_hit(&curve([0.51, 0.45, 0.5], [0.51, 0.55, 0.5]), &disk, ANGLE_MIN);
        assert!(miss.transverse.is_empty() && miss.tangential.is_empty());
        // shallow crossing
        let shallow = transverse_hit(&curve([0.4999, 0.45, 0.5], [0.5001, 0.55, 0.5]), &disk, 0.01);
        assert!(shallow.transverse.is_empty());
        assert_eq!(shallow.tangential.len(), 1);
        // outside the disk radius
        let far = transverse_hit(&curve([0.49, 0.7, 0.5], [0.51, 0.7, 0.5]), &disk, ANGLE_MIN);
        assert!(far.transverse.is_empty());
        // across the torus seam
        let seam = StableDisk { center: TorusPoint::ORIGIN, ..disk };
        let wrap = transverse_hit(&curve([0.99, 0.01, 0.0], [0.01, 0.01, 0.0]), &seam, ANGLE_MIN);
        assert_eq!(wrap.transverse.len(), 1);
    }

    #[test]
    fn linear_stable_disk_certifies() {
        let f = bv();
        let c = disk_of(&f, 0.45).certify(&f, 6, 80);
        assert!(c.certified, "{c:?}");
    }

    #[test]
    fn linear_coverage_is_monotone_and_nearly_full() {
        let f = bv();
        let disk = disk_of(&f, 0.3);
        let mut last = 0.0;
        for length in [0.5, 2.0, 8.0] {
            let s = CoverageSettings { grid: 6, horizon: 14, length, h_max: 0.02, angle_min: ANGLE_MIN };
            let r = phc_plus_coverage(&f, &disk, &s).unwrap();
            assert!(r.coverage >= last);
            assert!(r.by_horizon.windows(2).all(|w| w[0] <= w[1]));
            last = r.coverage;
        }
        assert!(last >= 0.99, "{last}");
    }

    #[test]
    fn product_coverage_is_the_slab() {
        let f = cat();
        let disk = disk_of(&f, 0.1);
        let s = CoverageSettings { grid: 10, horizon: 20, length: 20.0, h_max: 0.02, angle_min: ANGLE_MIN };
        let r = phc_plus_coverage(&f, &disk, &s).unwrap();
        // grid z-levels 0.05 and 0.95 lie in the slab |z| < 0.1
        assert_abs_diff_eq!(r.coverage, 0.2, epsilon = 1e-12);
        for p in &r.failures {
            assert!(p[2] > 0.1 && p[2] < 0.9);
        }
    }

    #[test]
    fn bad_set_clouds_are_nested() {
        let f = bv();
        let disk = disk_of(&f, 0.3);
        let s = CoverageSettings { grid: 5, horizon: 0, length: 4.0, h_max: 0.02, angle_min: ANGLE_MIN };
        let r = bad_set_estimate(&f, &disk, &s, &[0, 4, 8, 12], 4).unwrap();
        assert!(r.nested && !r.refinement_warning);
        // at horizon 0 only points within the seed half-length of the plane can hit
        assert_eq!(r.reports[0].failures.len(), 125);
        let sizes: Vec<usize> = r.reports.iter().map(|c| c.failures.len()).collect();
        assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        assert!(bad_set_estimate(&f, &disk, &s, &[4, 4], 4).is_err());
    }

    #[test]
    fn unstable_curve_of_the_fixed_point_spreads() {
        let f = bv();
        let frame = Frame::eigenframe(&f.differential(&TorusPoint::ORIGIN)).unwrap();
        let u = frame.basis().column(0).into_owned();
        let b = unstable_box_coverage(&f, &TorusPoint::ORIGIN, &u, 40.0, 0.02, 8).unwrap();
        assert!(b.arc_length >= 0.999 * 40.0);
        assert!(b.visited_fraction > 0.5, "{b:?}");
    }
}
