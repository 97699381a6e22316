//! Birkhoff averages of trigonometric observables and their spread over
//! ensembles of initial points.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TorusPoint;
use crate::maps::SmoothMap;
use crate::sampling::member_point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    Constant { value: f64 },
    /// `cos(2 pi k . x)`
    Cos { k: [i64; 3] },
    /// `sin(2 pi k . x)`
    Sin { k: [i64; 3] },
}

impl Observable {
    pub fn cos(k: [i64; 3]) -> Self {
        Observable::Cos { k }
    }

    pub fn label(&self) -> String {
        let phase = |k: &[i64; 3]| {
            let terms: Vec<String> = ["x", "y", "z"]
                .iter()
                .zip(k)
                .filter(|(_, c)| **c != 0)
                .map(|(v, c)| if *c == 1 { v.to_string() } else { format!("{c}{v}") })
                .collect();
            terms.join("+")
        };
        match self {
            Observable::Constant { value } => format!("const({value})"),
            Observable::Cos { k } => format!("cos(2pi({}))", phase(k)),
            Observable::Sin { k } => format!("sin(2pi({}))", phase(k)),
        }
    }

    #[inline]
    pub fn eval(&self, x: &TorusPoint) -> f64 {
        let dot = |k: &[i64; 3]| {
            let c = x.coords();
            TAU * (k[0] as f64 * c[0] + k[1] as f64 * c[1] + k[2] as f64 * c[2])
        };
        match self {
            Observable::Constant { value } => *value,
            Observable::Cos { k } => dot(k).cos(),
            Observable::Sin { k } => dot(k).sin(),
        }
    }

    /// Exact average over the torus.
    pub fn space_average(&self) -> f64 {
        match self {
            Observable::Constant { value } => *value,
            Observable::Cos { k } if *k == [0, 0, 0] => 1.0,
            _ => 0.0,
        }
    }

    /// The default probes: `cos(2 pi x)`, `cos(2 pi y)`, `cos(2 pi z)`, `cos(2 pi (x + y + z))`.
    pub fn default_set() -> Vec<Observable> {
        vec![
            Observable::cos([1, 0, 0]),
            Observable::cos([0, 1, 0]),
            Observable::cos([0, 0, 1]),
            Observable::cos([1, 1, 1]),
        ]
    }
}

/// `(1/n) sum_{j<n} obs(f^j x0)`.
pub fn birkhoff_average(map: &SmoothMap, obs: &Observable, x0: &TorusPoint, n: usize) -> Result<f64> {
    Ok(birkhoff_ladder(map, std::slice::from_ref(obs), x0, &[n])?[0][0])
}

/// Averages of every observable at every horizon from one orbit pass.
/// `out[i][h]` is observable `i` at `horizons[h]`; horizons must be increasing.
pub fn birkhoff_ladder(map: &SmoothMap, obs: &[Observable], x0: &TorusPoint, horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
    if horizons.is_empty() || horizons[0] == 0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("horizons must be positive and increasing".into()));
    }
    let mut sums = vec![0.0; obs.len()];
    let mut out = vec![Vec::with_capacity(horizons.len()); obs.len()];
    let mut x = *x0;
    let mut next = 0;
    for j in 1..=*horizons.last().unwrap() {
        for (s, o) in sums.iter_mut().zip(obs) {
            *s += o.eval(&x);
        }
        x = map.eval(&x);
        if j == horizons[next] {
            for (col, s) in out.iter_mut().zip(&sums) {
                col.push(s / j as f64);
            }
            next += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub observable: String,
    pub ensemble_size: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Member time averages in member order.
    pub averages: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the member averages.
    pub std_dev: f64,
    pub space_average: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Dispersion reports for every observable and horizon from one pass per member.
/// Member `i` starts at `member_point(seed, i)`.
pub fn dispersion_ladder(
    map: &SmoothMap,
    obs: &[Observable],
    ensemble_size: usize,
    horizons: &[usize],
    seed: u64,
) -> Result<Vec<DispersionReport>> {
    if ensemble_size < 30 {
        return Err(Error::InvalidInput(format!("need ensemble_size >= 30, got {ensemble_size}")));
    }
    let members: Vec<Vec<Vec<f64>>> = (0..ensemble_size as u64)
        .into_par_iter()
        .map(|i| birkhoff_ladder(map, obs, &member_point(seed, i), horizons))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (k, o) in obs.iter().enumerate() {
        for (h, &n) in horizons.iter().enumerate() {
            let averages: Vec<f64> = members.iter().map(|m| m[k][h]).collect();
            let (mean, std_dev) = mean_std(&averages);
            out.push(DispersionReport {
                observable: o.label(),
                ensemble_size,
                horizon: n,
                seed,
                averages,
                mean,
                std_dev,
                space_average: o.space_average(),
            });
        }
    }
    Ok(out)
}

pub fn dispersion_experiment(map: &SmoothMap, obs: &Observable, ensemble_size: usize, n: usize, seed: u64) -> Result<DispersionReport> {
    Ok(dispersion_ladder(map, std::slice::from_ref(obs), ensemble_size, &[n], seed)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub observable: String,
    pub horizon: usize,
    pub base_std: f64,
    pub deformed_std: f64,
    /// `deformed_std / base_std`; 1 when both vanish.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub ensemble_size: usize,
    pub seed: u64,
    pub rows: Vec<ContrastRow>,
    pub base: Vec<DispersionReport>,
    pub deformed: Vec<DispersionReport>,
}

impl ContrastReport {
    pub fn rows_for(&self, label: &str) -> Vec<&ContrastRow> {
        self.rows.iter().filter(|r| r.observable == label).collect()
    }
}

/// Side-by-side dispersion of the same ensemble under two maps.
pub fn ergodicity_contrast(
    base: &SmoothMap,
    deformed: &SmoothMap,
    obs: &[Observable],
    ensemble_size: usize,
    horizons: &[usize],
    seed: u64,
) -> Result<ContrastReport> {
    let b = dispersion_ladder(base, obs, ensemble_size, horizons, seed)?;
    let d = dispersion_ladder(deformed, obs, ensemble_size, horizons, seed)?;
    let rows = b
        .iter()
        .zip(&d)
        .map(|(x, y)| ContrastRow {
            observable: x.observable.clone(),
            horizon: x.horizon,
            base_std: x.std_dev,
            deformed_std: y.std_dev,
            ratio: if x.std_dev == 0.0 && y.std_dev == 0.0 {
                1.0
            } else {
                y.std_dev / x.std_dev
            },
        })
        .collect();
    Ok(ContrastReport {
        ensemble_size,
        seed,
        rows,
        base: b,
        deformed: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{linear_anosov, product_with_identity, IntegerMatrixSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cat() -> SmoothMap {
        product_with_identity(&IntegerMatrixSpec::new(vec![vec![2, 1], vec![1, 1]]).unwrap()).unwrap()
    }

    fn bv() -> SmoothMap {
        linear_anosov(
            &IntegerMatrixSpec::new(vec![vec![1, -1, 1], vec![-1, 2, -2], vec![1, -2, 3]]).unwrap(),
            true,
        )
        .unwrap()
    }

    #[test]
    fn constant_average_is_exact() {
        let one = Observable::Constant { value: 1.0 };
        for n in [1, 7, 1000] {
            assert_eq!(birkhoff_average(&bv(), &one, &TorusPoint::wrap([0.1, 0.2, 0.3]).unwrap(), n).unwrap(), 1.0);
        }
        let r = dispersion_experiment(&cat(), &one, 30, 100, 1).unwrap();
        assert_eq!(r.std_dev, 0.0);
    }

    #[test]
    fn center_coordinate_is_invariant_under_the_product() {
        let z = Observable::cos([0, 0, 1]);
        let a = birkhoff_average(&cat(), &z, &TorusPoint::wrap([0.3, 0.8, 0.25]).unwrap(), 500).unwrap();
        assert_abs_diff_eq!(a, (TAU * 0.25).cos(), epsilon = 1e-15);
        let b = birkhoff_average(&cat(), &z, &TorusPoint::wrap([0.3, 0.8, 0.0]).unwrap(), 500).unwrap();
        assert_eq!(b, 1.0);
        let r = dispersion_experiment(&cat(), &z, 50, 200, 3).unwrap();
        for (i, a) in r.averages.iter().enumerate() {
            let z0 = member_point(3, i as u64).z();
            assert_abs_diff_eq!(*a, (TAU * z0).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn hyperbolic_direction_averages_decay() {
        let x = Observable::cos([1, 0, 0]);
        let r = dispersion_ladder(&bv(), &[x], 100, &[10, 10_000], 5).unwrap();
        assert!(r[1].std_dev < r[0].std_dev);
        assert!(r[1].mean.abs() < 0.05);
    }

    #[test]
    fn product_dispersion_is_the_spatial_deviation() {
        let r = dispersion_experiment(&cat(), &Observable::cos([0, 0, 1]), 1000, 1000, 11).unwrap();
        assert_abs_diff_eq!(r.std_dev, 0.5f64.sqrt(), epsilon = 0.05);
    }

    #[test]
    fn self_contrast_is_one() {
        let c = ergodicity_contrast(&cat(), &cat(), &Observable::default_set(), 30, &[10, 100], 2).unwrap();
        assert_eq!(c.rows.len(), 8);
        for r in &c.rows {
            assert_eq!(r.ratio, 1.0);
        }
        assert_eq!(c.rows_for("cos(2pi(z))").len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn ladder_averages_telescope(n1 in 1usize..200, extra in 1usize..200, x in 0.0f64..1.0) {
            let f = bv();
            let o = Observable::cos([1, 1, 1]);
            let x0 = TorusPoint::wrap([x, 0.3, 0.6]).unwrap();
            let n = n1 + extra;
            let l = birkhoff_ladder(&f, std::slice::from_ref(&o), &x0, &[n1, n]).unwrap();
            let tail = birkhoff_average(&f, &o, &f.iterate(&x0, n1), extra).unwrap();
            let joined = (n1 as f64 * l[0][0] + extra as f64 * tail) / n as f64;
            prop_assert!((joined - l[0][1]).abs() < 1e-12);
        }
    }
}
