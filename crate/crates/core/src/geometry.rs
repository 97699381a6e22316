//! Torus arithmetic, small dense linear algebra and the axis cone family.
//!
//! The torus is `R^3 / Z^3` with canonical coordinates in `[0, 1)`. Local
//! charts are flat: a chart is a translation to a base point followed by a
//! fixed linear frame (orthonormal for every shipped example).

use nalgebra::{Complex, Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Local coordinates `(u, v, w)` in a chart. `u` is the expanding axis.
pub type ChartPoint = Vec3;

#[inline]
fn reduce(c: f64) -> f64 {
    let r = c - c.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point of `T^3` with every coordinate reduced into `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    x: f64,
    y: f64,
    z: f64,
}

impl TorusPoint {
    pub const ORIGIN: TorusPoint = TorusPoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Reduce an arbitrary finite triple modulo 1.
    pub fn wrap(raw: [f64; 3]) -> Result<Self> {
        if raw.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite torus coordinate in {raw:?}"
            )));
        }
        Ok(Self::from_lift(Vec3::new(raw[0], raw[1], raw[2])))
    }

    /// Reduce a lifted point. Callers guarantee finiteness.
    #[inline]
    pub fn from_lift(v: Vec3) -> Self {
        debug_assert!(v.iter().all(|c| c.is_finite()), "non-finite lift {v:?}");
        TorusPoint {
            x: reduce(v.x),
            y: reduce(v.y),
            z: reduce(v.z),
        }
    }

    #[inline]
    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    /// The representative in `[0,1)^3` as a vector.
    #[inline]
    pub fn lift(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    #[inline]
    pub fn translate(&self, v: &Vec3) -> Self {
        Self::from_lift(self.lift() + v)
    }
}

/// Shortest lattice representative of `b - a`, each component in `[-1/2, 1/2)`.
#[inline]
pub fn displacement(a: &TorusPoint, b: &TorusPoint) -> Vec3 {
    let d = b.lift() - a.lift();
    d.map(|c| c - (c + 0.5).floor())
}

#[inline]
pub fn distance(a: &TorusPoint, b: &TorusPoint) -> f64 {
    displacement(a, b).norm()
}

/// A linear frame for chart coordinates: `lift = basis * chart`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    basis: Mat3,
    inverse: Mat3,
}

impl Frame {
    pub fn identity() -> Self {
        Frame {
            basis: Mat3::identity(),
            inverse: Mat3::identity(),
        }
    }

    pub fn new(basis: Mat3) -> Result<Self> {
        let inverse = basis
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("singular chart frame".into()))?;
        Ok(Frame { basis, inverse })
    }

    /// Unit eigenvectors of a matrix with three distinct real eigenvalues,
    /// ordered by decreasing modulus (expanding axis first).
    pub fn eigenframe(m: &Mat3) -> Result<Self> {
        let spec = Spectrum::of(m);
        let mut cols = [Vec3::zeros(); 3];
        for (k, ev) in spec.values.iter().enumerate() {
            if ev.im.abs() > 1e-12 * ev.norm().max(1.0) {
                return Err(Error::InvalidInput(
                    "eigenframe requires a real spectrum".into(),
                ));
            }
            cols[k] = real_eigenvector(m, ev.re)?;
        }
        for k in 0..3 {
            for l in (k + 1)..3 {
                let gap = (spec.values[k].re - spec.values[l].re).abs();
                if gap < 1e-9 {
                    return Err(Error::InvalidInput(
                        "eigenframe requires distinct eigenvalues".into(),
                    ));
                }
            }
        }
        Frame::new(Mat3::from_columns(&cols))
    }

    #[inline]
    pub fn basis(&self) -> &Mat3 {
        &self.basis
    }

    #[inline]
    pub fn inverse(&self) -> &Mat3 {
        &self.inverse
    }

    /// Lifted displacement to chart coordinates.
    #[inline]
    pub fn to_chart(&self, d: &Vec3) -> ChartPoint {
        self.inverse * d
    }

    #[inline]
    pub fn from_chart(&self, q: &ChartPoint) -> Vec3 {
        self.basis * q
    }

    /// A standard-coordinate matrix expressed in this frame.
    #[inline]
    pub fn conjugate(&self, m: &Mat3) -> Mat3 {
        self.inverse * m * self.basis
    }

    /// A frame-coordinate matrix expressed in standard coordinates.
    #[inline]
    pub fn unconjugate(&self, m: &Mat3) -> Mat3 {
        self.basis * m * self.inverse
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        (self.basis.transpose() * self.basis - Mat3::identity()).amax() <= tol
    }
}

/// A ball in chart coordinates around a torus point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: TorusPoint,
    pub frame: Frame,
    pub radius: f64,
}

impl Ball {
    #[inline]
    pub fn chart(&self, x: &TorusPoint) -> ChartPoint {
        self.frame.to_chart(&displacement(&self.center, x))
    }

    #[inline]
    pub fn contains(&self, x: &TorusPoint) -> bool {
        self.chart(x).norm() < self.radius
    }

    #[inline]
    pub fn from_chart(&self, q: &ChartPoint) -> TorusPoint {
        self.center.translate(&self.frame.from_chart(q))
    }

    /// Radius of a Euclidean ball (standard metric) containing this one.
    pub fn euclidean_extent(&self) -> f64 {
        self.radius * self.frame.basis().svd(false, false).singular_values.max()
    }
}

/// The cone `{v : |(v2, v3)| <= gamma |v1|}` around the first axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    aperture: f64,
}

impl ConeSpec {
    pub fn new(aperture: f64) -> Result<Self> {
        if !(aperture.is_finite() && aperture > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cone aperture must be positive, got {aperture}"
            )));
        }
        Ok(ConeSpec { aperture })
    }

    #[inline]
    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn contains(&self, v: &Vec3) -> Result<bool> {
        if v.iter().all(|c| *c == 0.0) {
            return Err(Error::InvalidInput("zero vector has no direction".into()));
        }
        Ok(transverse_ratio(v) <= self.aperture)
    }

    /// Unit vectors on the cone boundary at `samples` equally spaced angles.
    pub fn boundary_vectors(&self, samples: usize) -> Vec<Vec3> {
        let g = self.aperture;
        (0..samples)
            .map(|k| {
                let phi = std::f64::consts::TAU * (k as f64) / (samples as f64);
                Vec3::new(1.0, g * phi.cos(), g * phi.sin()).normalize()
            })
            .collect()
    }

    /// Largest sampled ratio `|(Av)_{2,3}| / |(Av)_1|` over boundary vectors.
    pub fn image_aperture(&self, a: &Mat3, samples: usize) -> Result<f64> {
        if samples < 8 {
            return Err(Error::InvalidInput(format!(
                "need at least 8 boundary samples, got {samples}"
            )));
        }
        image_aperture_of(a, &self.boundary_vectors(samples))
    }
}

/// `|(v2, v3)| / |v1|`; infinite when `v1 = 0`.
#[inline]
pub fn transverse_ratio(v: &Vec3) -> f64 {
    let t = v.y.hypot(v.z);
    if v.x == 0.0 {
        if t == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        t / v.x.abs()
    }
}

/// Worst image ratio of a precomputed boundary set.
pub fn image_aperture_of(a: &Mat3, boundary: &[Vec3]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for v in boundary {
        let w = a * v;
        if w.x == 0.0 {
            return Err(Error::ApertureInfinite);
        }
        worst = worst.max(transverse_ratio(&w));
    }
    Ok(worst)
}

/// `cone_image_aperture` as a free function.
pub fn cone_image_aperture(a: &Mat3, cone: &ConeSpec, samples: usize) -> Result<f64> {
    cone.image_aperture(a, samples)
}

/// Eigenvalues sorted by decreasing modulus, with the 2-norm condition
/// number of the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: [Complex<f64>; 3],
    pub condition: f64,
}

impl Spectrum {
    pub fn of(m: &Mat3) -> Self {
        let ev = m.complex_eigenvalues();
        let mut values = [ev[0], ev[1], ev[2]];
        values.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
        // polish real roots against the characteristic polynomial
        for v in values.iter_mut() {
            if v.im == 0.0 {
                v.re = polish_real_root(m, v.re);
            }
        }
        let sv = m.svd(false, false).singular_values;
        let smin = sv.min();
        let condition = if smin == 0.0 {
            f64::INFINITY
        } else {
            sv.max() / smin
        };
        Spectrum { values, condition }
    }

    pub fn moduli(&self) -> [f64; 3] {
        [
            self.values[0].norm(),
            self.values[1].norm(),
            self.values[2].norm(),
        ]
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }
}

fn char_poly(m: &Mat3) -> [f64; 3] {
    // t^3 + c2 t^2 + c1 t + c0
    let tr = m.trace();
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
        + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    [-m.determinant(), minors, -tr]
}

fn polish_real_root(m: &Mat3, mut t: f64) -> f64 {
    let [c0, c1, c2] = char_poly(m);
    for _ in 0..3 {
        let p = ((t + c2) * t + c1) * t + c0;
        let dp = (3.0 * t + 2.0 * c2) * t + c1;
        if dp == 0.0 {
            break;
        }
        let next = t - p / dp;
        if !next.is_finite() || (next - t).abs() > 1e-6 * t.abs().max(1.0) {
            break;
        }
        t = next;
    }
    t
}

/// Unit null vector of `m - lambda I`, sign fixed so its largest component is positive.
pub fn real_eigenvector(m: &Mat3, lambda: f64) -> Result<Vec3> {
    let s = m - Mat3::identity() * lambda;
    let rows = [
        s.row(0).transpose(),
        s.row(1).transpose(),
        s.row(2).transpose(),
    ];
    let cands = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = cands
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .copied()
        .unwrap_or_else(Vec3::zeros);
    if best.norm() == 0.0 {
        return Err(Error::InvalidInput(
            "eigenvector undetermined (repeated eigenvalue)".into(),
        ));
    }
    let mut v = best.normalize();
    let imax = v.iamax();
    if v[imax] < 0.0 {
        v = -v;
    }
    Ok(v)
}

/// Singular values in decreasing order.
pub fn singular_values(m: &Mat3) -> [f64; 3] {
    let sv = m.svd(false, false).singular_values;
    let mut s = [sv[0], sv[1], sv[2]];
    s.sort_by(|a, b| b.total_cmp(a));
    s
}
