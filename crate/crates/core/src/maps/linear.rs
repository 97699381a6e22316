use serde::{Deserialize, Serialize};

use super::{SmoothMap, Support, TorusMap};
use crate::error::{Error, Result};
use crate::geometry::{Mat3, Spectrum, TorusPoint};

/// Square integer matrix (2x2 or 3x3), row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntegerMatrixSpec {
    rows: Vec<Vec<i64>>,
}

impl IntegerMatrixSpec {
    pub fn new(rows: Vec<Vec<i64>>) -> Result<Self> {
        let n = rows.len();
        if !(n == 2 || n == 3) || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!(
                "integer matrix must be 2x2 or 3x3, got {} rows",
                n
            )));
        }
        Ok(IntegerMatrixSpec { rows })
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn determinant(&self) -> i64 {
        let r = &self.rows;
        match self.dim() {
            2 => r[0][0] * r[1][1] - r[0][1] * r[1][0],
            _ => {
                r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
                    - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
                    + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
            }
        }
    }

    /// Embedding into `Mat3`; a 2x2 block gets a trailing identity entry.
    pub fn to_mat3(&self) -> Mat3 {
        let mut m = Mat3::identity();
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v as f64;
            }
        }
        m
    }
}

/// Integer adjugate; equals the inverse when the determinant is 1.
fn adjugate(m: &[[i64; 3]; 3]) -> [[i64; 3]; 3] {
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let mut out = [[0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[j][i] = c(i, j);
        }
    }
    out
}

fn to_float(m: &[[i64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| m[i][j] as f64)
}

/// The toral automorphism `x -> A x mod 1` of an integer matrix with determinant 1.
#[derive(Debug, Clone)]
pub struct LinearTorusMap {
    entries: [[i64; 3]; 3],
    matrix: Mat3,
    inverse: Mat3,
    label: String,
}

impl LinearTorusMap {
    fn from_entries(entries: [[i64; 3]; 3], label: String) -> Result<Self> {
        let matrix = to_float(&entries);
        let det = matrix.determinant().round() as i64;
        if det != 1 {
            return Err(Error::NotVolumePreserving { det: det as f64 });
        }
        let inverse = to_float(&adjugate(&entries));
        Ok(LinearTorusMap {
            entries,
            matrix,
            inverse,
            label,
        })
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    pub fn entries(&self) -> [[i64; 3]; 3] {
        self.entries
    }

    /// The automorphism behind a globally linear map with integral matrix.
    pub fn of(f: &SmoothMap) -> Option<Self> {
        let Support::GlobalLinear(m) = f.support() else {
            return None;
        };
        let mut e = [[0i64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let v = m[(i, j)];
                if (v - v.round()).abs() > 1e-9 {
                    return None;
                }
                e[i][j] = v.round() as i64;
            }
        }
        LinearTorusMap::from_entries(e, f.label()).ok()
    }

    /// Integer inverse of a globally linear map, when its matrix is integral.
    pub(crate) fn inverse_of(f: &SmoothMap) -> Option<Self> {
        Self::of(f).map(|m| m.inverted())
    }

    /// The inverse automorphism.
    pub fn inverted(&self) -> Self {
        LinearTorusMap::from_entries(adjugate(&self.entries), format!("({})^-1", self.label))
            .expect("the adjugate of a determinant-one matrix has determinant one")
    }

    /// `A^n` as a torus map.
    pub fn power(&self, n: u32) -> Self {
        let mut acc = [[0i64; 3]; 3];
        for (i, row) in acc.iter_mut().enumerate() {
            row[i] = 1;
        }
        for _ in 0..n {
            let mut next = [[0i64; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    next[i][j] = (0..3).map(|k| self.entries[i][k] * acc[k][j]).sum();
                }
            }
            acc = next;
        }
        LinearTorusMap::from_entries(acc, format!("({})^{n}", self.label))
            .expect("powers of determinant-one matrices have determinant one")
    }
}

impl TorusMap for LinearTorusMap {
    #[inline]
    fn eval(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::from_lift(self.matrix * x.lift())
    }

    #[inline]
    fn differential(&self, _x: &TorusPoint) -> Mat3 {
        self.matrix
    }

    #[inline]
    fn step(&self, x: &TorusPoint) -> (TorusPoint, Mat3) {
        (self.eval(x), self.matrix)
    }

    fn inverse(&self, y: &TorusPoint) -> Result<TorusPoint> {
        Ok(TorusPoint::from_lift(self.inverse * y.lift()))
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn support(&self) -> Support {
        Support::GlobalLinear(self.matrix)
    }
}

fn check_hyperbolic(m: &Mat3, block_dim: usize) -> Result<()> {
    let spec = Spectrum::of(m);
    let moduli = if block_dim == 2 {
        // the trailing identity entry is not part of the block
        let b = m.fixed_view::<2, 2>(0, 0).into_owned();
        b.complex_eigenvalues().iter().map(|c| c.norm()).collect::<Vec<_>>()
    } else {
        spec.moduli().to_vec()
    };
    for modulus in moduli {
        if (modulus - 1.0).abs() <= 1e-9 {
            return Err(Error::NotHyperbolic { modulus });
        }
    }
    Ok(())
}

fn entries_of(spec: &IntegerMatrixSpec) -> [[i64; 3]; 3] {
    let mut e = [[0i64; 3]; 3];
    for (i, row) in e.iter_mut().enumerate() {
        row[i] = 1;
    }
    for (i, row) in spec.rows().iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            e[i][j] = *v;
        }
    }
    e
}

/// Toral automorphism of a 3x3 integer matrix with determinant 1.
/// With `validate_anosov`, rejects eigenvalues of modulus 1.
pub fn linear_anosov(spec: &IntegerMatrixSpec, validate_anosov: bool) -> Result<SmoothMap> {
    if spec.dim() != 3 {
        return Err(Error::InvalidInput(
            "linear_anosov needs a 3x3 matrix; use product_with_identity for 2x2 blocks".into(),
        ));
    }
    let det = spec.determinant();
    if det != 1 {
        return Err(Error::NotVolumePreserving { det: det as f64 });
    }
    let m = spec.to_mat3();
    if validate_anosov {
        check_hyperbolic(&m, 3)?;
    }
    let label = format!("linear{:?}", spec.rows());
    Ok(SmoothMap::new(LinearTorusMap::from_entries(entries_of(spec), label)?))
}

/// `(x, y, z) -> (B (x, y), z)` for a hyperbolic 2x2 block `B`.
pub fn product_with_identity(spec2d: &IntegerMatrixSpec) -> Result<SmoothMap> {
    if spec2d.dim() != 2 {
        return Err(Error::InvalidInput(
            "product_with_identity needs a 2x2 block".into(),
        ));
    }
    let det = spec2d.determinant();
    if det != 1 {
        return Err(Error::NotVolumePreserving { det: det as f64 });
    }
    let m = spec2d.to_mat3();
    check_hyperbolic(&m, 2)?;
    let label = format!("{:?} x Id", spec2d.rows());
    Ok(SmoothMap::new(LinearTorusMap::from_entries(entries_of(spec2d), label)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{displacement, Vec3};
    use crate::maps::test_support::*;

    fn spec(rows: Vec<Vec<i64>>) -> IntegerMatrixSpec {
        IntegerMatrixSpec::new(rows).unwrap()
    }

    #[test]
    fn identity_is_not_hyperbolic() {
        let id = spec(vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert!(matches!(linear_anosov(&id, true), Err(Error::NotHyperbolic { .. })));
        assert!(linear_anosov(&id, false).is_ok());
    }

    #[test]
    fn determinant_must_be_one() {
        let m = spec(vec![vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(
            linear_anosov(&m, false).unwrap_err(),
            Error::NotVolumePreserving { det: 2.0 }
        );
        let m = spec(vec![vec![0, 1], vec![1, 0]]);
        assert!(matches!(product_with_identity(&m), Err(Error::NotVolumePreserving { .. })));
        assert!(IntegerMatrixSpec::new(vec![vec![1, 2, 3]]).is_err());
    }

    #[test]
    fn cat_times_identity_spectrum() {
        // oracle: eigenvalues of [[2,1],[1,1]] solve t^2 - 3t + 1 = 0
        let lu = (3.0 + 5f64.sqrt()) / 2.0;
        let ls = (3.0 - 5f64.sqrt()) / 2.0;
        let h = product_with_identity(&spec(vec![vec![2, 1], vec![1, 1]])).unwrap();
        let s = Spectrum::of(&h.differential(&TorusPoint::ORIGIN));
        assert!((s.values[0].re - lu).abs() < 1e-12);
        assert!((s.values[1].re - 1.0).abs() < 1e-12);
        assert!((s.values[2].re - ls).abs() < 1e-12);
        assert!((lu * ls - 1.0).abs() < 1e-12);
        assert!((h.differential(&TorusPoint::ORIGIN).determinant() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_map_preserves_horizontal_slices() {
        let h = product_with_identity(&spec(vec![vec![2, 1], vec![1, 1]])).unwrap();
        for p in sample(200, 5) {
            assert_eq!(h.eval(&p).z(), p.z());
        }
    }

    #[test]
    fn linear_map_has_constant_differential_and_exact_inverse() {
        let a = spec(vec![vec![1, -1, 1], vec![-1, 2, -2], vec![1, -2, 3]]);
        let f = linear_anosov(&a, true).unwrap();
        let m = a.to_mat3();
        let pts = sample(1000, 6);
        for p in &pts {
            assert_eq!(f.differential(p), m);
        }
        assert!(round_trip_error(&f, &pts) < 1e-10);
        assert!(finite_difference_error(&f, &pts[..100], 1e-6) < 1e-5);
    }

    #[test]
    fn powers_match_iteration() {
        let a = spec(vec![vec![1, -1, 1], vec![-1, 2, -2], vec![1, -2, 3]]);
        let f = linear_anosov(&a, true).unwrap();
        let lin = LinearTorusMap::inverse_of(&f.inverted()).unwrap();
        let f3 = lin.power(3);
        let p = TorusPoint::wrap([0.123, 0.456, 0.789]).unwrap();
        let d = displacement(&f3.eval(&p), &f.iterate(&p, 3));
        assert!(d.norm() < 1e-12, "{d:?}");
        assert_eq!(lin.matrix() * Vec3::zeros(), Vec3::zeros());
    }
}
