//! Volume-preserving self-maps of the torus: evaluation, exact differential
//! and inverse, closed under composition and local surgery.

mod linear;
mod surgery;

use std::fmt;
use std::sync::Arc;

pub use linear::{linear_anosov, product_with_identity, IntegerMatrixSpec, LinearTorusMap};
pub use surgery::{apply_surgery, newton_inverse, LinearLocalMap, LocalMap, LocalSurgerySpec, SurgeryMap};

use crate::error::Result;
use crate::geometry::{displacement, Ball, Mat3, TorusPoint};

/// Where a map is known to be exactly affine.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// A toral automorphism: constant differential everywhere.
    GlobalLinear(Mat3),
    /// Equal to the automorphism `linear` outside `perturbations`; exactly
    /// affine with the given differential on each core ball.
    LinearOutside {
        linear: Mat3,
        perturbations: Vec<Ball>,
        cores: Vec<(Ball, Mat3)>,
    },
    Opaque,
}

impl Support {
    /// The constant differential on `ball` if the map is affine there.
    pub fn linear_on(&self, ball: &Ball) -> Option<Mat3> {
        match self {
            Support::GlobalLinear(m) => Some(*m),
            Support::LinearOutside {
                linear,
                perturbations,
                cores,
            } => {
                let extent = ball.euclidean_extent();
                for (core, m) in cores {
                    let inner = core.radius / core.frame.inverse().svd(false, false).singular_values.max();
                    let d = displacement(&core.center, &ball.center).norm();
                    if d + extent <= inner {
                        return Some(*m);
                    }
                }
                let clear = perturbations.iter().all(|b| {
                    displacement(&b.center, &ball.center).norm() >= extent + b.euclidean_extent()
                });
                clear.then_some(*linear)
            }
            Support::Opaque => None,
        }
    }

    pub fn perturbations(&self) -> &[Ball] {
        match self {
            Support::LinearOutside { perturbations, .. } => perturbations,
            _ => &[],
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Support::GlobalLinear(_) => "global linear".into(),
            Support::LinearOutside { perturbations, .. } => {
                let radii: Vec<String> = perturbations
                    .iter()
                    .map(|b| format!("{:.4}", b.radius))
                    .collect();
                format!("linear outside balls of radius [{}]", radii.join(", "))
            }
            Support::Opaque => "opaque".into(),
        }
    }
}

/// A self-map of `T^3` with its exact differential and inverse.
pub trait TorusMap: Send + Sync {
    fn eval(&self, x: &TorusPoint) -> TorusPoint;

    fn differential(&self, x: &TorusPoint) -> Mat3;

    /// Image and differential together; override when they share work.
    fn step(&self, x: &TorusPoint) -> (TorusPoint, Mat3) {
        (self.eval(x), self.differential(x))
    }

    fn inverse(&self, y: &TorusPoint) -> Result<TorusPoint>;

    fn label(&self) -> String;

    fn support(&self) -> Support;
}

/// Shared handle to an immutable torus map.
#[derive(Clone)]
pub struct SmoothMap(Arc<dyn TorusMap>);

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SmoothMap").field(&self.0.label()).finish()
    }
}

impl SmoothMap {
    pub fn new<M: TorusMap + 'static>(m: M) -> Self {
        SmoothMap(Arc::new(m))
    }

    #[inline]
    pub fn eval(&self, x: &TorusPoint) -> TorusPoint {
        self.0.eval(x)
    }

    #[inline]
    pub fn differential(&self, x: &TorusPoint) -> Mat3 {
        self.0.differential(x)
    }

    #[inline]
    pub fn step(&self, x: &TorusPoint) -> (TorusPoint, Mat3) {
        self.0.step(x)
    }

    #[inline]
    pub fn inverse(&self, y: &TorusPoint) -> Result<TorusPoint> {
        self.0.inverse(y)
    }

    pub fn label(&self) -> String {
        self.0.label()
    }

    pub fn support(&self) -> Support {
        self.0.support()
    }

    pub fn iterate(&self, x: &TorusPoint, n: usize) -> TorusPoint {
        (0..n).fold(*x, |p, _| self.eval(&p))
    }

    pub fn iterate_inverse(&self, x: &TorusPoint, n: usize) -> Result<TorusPoint> {
        let mut p = *x;
        for _ in 0..n {
            p = self.inverse(&p)?;
        }
        Ok(p)
    }

    /// Orbit `x, f(x), ..., f^n(x)` (length `n + 1`).
    pub fn orbit(&self, x: &TorusPoint, n: usize) -> Vec<TorusPoint> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(*x);
        for k in 0..n {
            out.push(self.eval(&out[k]));
        }
        out
    }

    /// Differential of the `n`-th iterate at `x`.
    pub fn differential_power(&self, x: &TorusPoint, n: usize) -> Mat3 {
        let mut p = *x;
        let mut d = Mat3::identity();
        for _ in 0..n {
            let (q, m) = self.step(&p);
            d = m * d;
            p = q;
        }
        d
    }

    /// The inverse map as a map. Evaluation panics if an inverse solve fails.
    pub fn inverted(&self) -> SmoothMap {
        if let Support::GlobalLinear(_) = self.support() {
            if let Some(lin) = LinearTorusMap::inverse_of(self) {
                return SmoothMap::new(lin);
            }
        }
        SmoothMap::new(InverseMap { inner: self.clone() })
    }
}

/// `compose(f, g) = f ∘ g`.
pub fn compose(f: &SmoothMap, g: &SmoothMap) -> SmoothMap {
    SmoothMap::new(Composition {
        outer: f.clone(),
        inner: g.clone(),
    })
}

struct Composition {
    outer: SmoothMap,
    inner: SmoothMap,
}

impl TorusMap for Composition {
    fn eval(&self, x: &TorusPoint) -> TorusPoint {
        self.outer.eval(&self.inner.eval(x))
    }

    fn differential(&self, x: &TorusPoint) -> Mat3 {
        self.step(x).1
    }

    fn step(&self, x: &TorusPoint) -> (TorusPoint, Mat3) {
        let (y, dg) = self.inner.step(x);
        let (z, df) = self.outer.step(&y);
        (z, df * dg)
    }

    fn inverse(&self, y: &TorusPoint) -> Result<TorusPoint> {
        self.inner.inverse(&self.outer.inverse(y)?)
    }

    fn label(&self) -> String {
        format!("({}) o ({})", self.outer.label(), self.inner.label())
    }

    fn support(&self) -> Support {
        match (self.outer.support(), self.inner.support()) {
            (Support::GlobalLinear(a), Support::GlobalLinear(b)) => Support::GlobalLinear(a * b),
            _ => Support::Opaque,
        }
    }
}

struct InverseMap {
    inner: SmoothMap,
}

impl TorusMap for InverseMap {
    fn eval(&self, y: &TorusPoint) -> TorusPoint {
        self.inner
            .inverse(y)
            .unwrap_or_else(|e| panic!("inverse of {} failed: {e}", self.inner.label()))
    }

    fn differential(&self, y: &TorusPoint) -> Mat3 {
        self.step(y).1
    }

    fn step(&self, y: &TorusPoint) -> (TorusPoint, Mat3) {
        let x = self.eval(y);
        let d = self.inner.differential(&x);
        let inv = d.try_inverse().unwrap_or_else(|| panic!("singular differential"));
        (x, inv)
    }

    fn inverse(&self, x: &TorusPoint) -> Result<TorusPoint> {
        Ok(self.inner.eval(x))
    }

    fn label(&self) -> String {
        format!("({})^-1", self.inner.label())
    }

    fn support(&self) -> Support {
        Support::Opaque
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::geometry::distance;

    fn cat3() -> SmoothMap {
        linear_anosov(
            &IntegerMatrixSpec::new(vec![vec![1, -1, 1], vec![-1, 2, -2], vec![1, -2, 3]]).unwrap(),
            true,
        )
        .unwrap()
    }

    #[test]
    fn composition_with_inverse_is_identity() {
        let f = cat3();
        let id = compose(&f, &f.inverted());
        for p in sample(1000, 1) {
            assert!(distance(&id.eval(&p), &p) < 1e-10);
        }
    }

    #[test]
    fn composition_chain_rule_matches_finite_differences() {
        let f = cat3();
        let g = product_with_identity(&IntegerMatrixSpec::new(vec![vec![2, 1], vec![1, 1]]).unwrap())
            .unwrap();
        let h = compose(&f, &g);
        assert!(finite_difference_error(&h, &sample(200, 2), 1e-6) < 1e-5);
        let p = TorusPoint::wrap([0.3, 0.1, 0.8]).unwrap();
        assert_eq!(h.differential(&p), f.differential(&g.eval(&p)) * g.differential(&p));
    }

    #[test]
    fn composition_of_linear_maps_is_linear() {
        let f = cat3();
        let g = product_with_identity(&IntegerMatrixSpec::new(vec![vec![2, 1], vec![1, 1]]).unwrap())
            .unwrap();
        let h = compose(&f, &g);
        let ab = f.differential(&TorusPoint::ORIGIN) * g.differential(&TorusPoint::ORIGIN);
        assert_eq!(h.support(), Support::GlobalLinear(ab));
        for p in sample(50, 3) {
            assert_eq!(h.differential(&p), ab);
        }
        assert!(round_trip_error(&h, &sample(1000, 4)) < 1e-10);
    }
}
