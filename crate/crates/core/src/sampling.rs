//! Deterministic sample sets: shifted Halton points, regular grids, ball
//! and shell samplers, and a counter-based generator for ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Ball, TorusPoint, Vec3};

const PRIMES: [u64; 3] = [2, 3, 5];

/// Radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Three-dimensional Halton sequence with a seeded Cranley-Patterson shift.
#[derive(Debug, Clone, Copy)]
pub struct Halton {
    shift: [f64; 3],
}

impl Halton {
    pub fn new(seed: u64) -> Self {
        let shift = if seed == 0 {
            [0.0; 3]
        } else {
            let mut rng = member_rng(seed, u64::MAX);
            [rng.random(), rng.random(), rng.random()]
        };
        Halton { shift }
    }

    /// Point `i` in the unit cube.
    pub fn unit(&self, i: u64) -> [f64; 3] {
        let mut u = [0.0; 3];
        for k in 0..3 {
            let v = radical_inverse(i + 1, PRIMES[k]) + self.shift[k];
            u[k] = v - v.floor();
        }
        u
    }

    pub fn torus_points(&self, n: usize) -> Vec<TorusPoint> {
        (0..n as u64)
            .map(|i| TorusPoint::from_lift(Vec3::from(self.unit(i))))
            .collect()
    }

    /// `n` points filling a chart ball, uniform in volume.
    pub fn ball_points(&self, ball: &Ball, n: usize) -> Vec<TorusPoint> {
        (0..n as u64)
            .map(|i| {
                let u = self.unit(i);
                ball.from_chart(&ball_chart_point(u, ball.radius))
            })
            .collect()
    }

    /// `n` points in the chart shell `r_in <= |q| <= r_out`.
    pub fn shell_points(&self, ball: &Ball, r_in: f64, r_out: f64, n: usize) -> Vec<TorusPoint> {
        (0..n as u64)
            .map(|i| {
                let u = self.unit(i);
                let r3 = r_in.powi(3) + u[0] * (r_out.powi(3) - r_in.powi(3));
                let dir = sphere_direction(u[1], u[2]);
                ball.from_chart(&(dir * r3.cbrt()))
            })
            .collect()
    }
}

fn sphere_direction(a: f64, b: f64) -> Vec3 {
    let cz = 1.0 - 2.0 * a;
    let s = (1.0 - cz * cz).max(0.0).sqrt();
    let phi = std::f64::consts::TAU * b;
    Vec3::new(s * phi.cos(), s * phi.sin(), cz)
}

fn ball_chart_point(u: [f64; 3], radius: f64) -> Vec3 {
    sphere_direction(u[1], u[2]) * (radius * u[0].cbrt())
}

/// Cell centers of an `n x n x n` grid on the torus, in lexicographic order.
pub fn grid_points(n: usize) -> Vec<TorusPoint> {
    let h = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push(TorusPoint::from_lift(Vec3::new(
                    (i as f64 + 0.5) * h,
                    (j as f64 + 0.5) * h,
                    (k as f64 + 0.5) * h,
                )));
            }
        }
    }
    out
}

/// Generator for ensemble member `index`: independent of the ensemble size.
pub fn member_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform initial point for ensemble member `index`.
pub fn member_point(seed: u64, index: u64) -> TorusPoint {
    let mut rng = member_rng(seed, index);
    TorusPoint::from_lift(Vec3::new(rng.random(), rng.random(), rng.random()))
}

/// Mixed sample set: most points inside the given balls, the rest spread
/// over the whole torus.
pub fn focused_points(balls: &[Ball], n: usize, seed: u64) -> Vec<TorusPoint> {
    let h = Halton::new(seed);
    if balls.is_empty() {
        return h.torus_points(n);
    }
    let n_global = n / 4;
    let n_local = n - n_global;
    let mut out = h.torus_points(n_global);
    let per = n_local / balls.len();
    for (k, b) in balls.iter().enumerate() {
        let m = if k + 1 == balls.len() {
            n_local - per * (balls.len() - 1)
        } else {
            per
        };
        out.extend(Halton::new(seed.wrapping_add(k as u64 + 1)).ball_points(b, m));
    }
    out
}
