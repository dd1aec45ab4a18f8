use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Cholesky factor `L` of a symmetric positive definite matrix, `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    lower: DMatrix<f64>,
}

impl SpdFactor {
    /// Factorizes `a`. Only the lower triangle is read after the symmetry check.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "cholesky needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Domain(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }

        let mut lower = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut pivot = a[(j, j)];
            for k in 0..j {
                pivot -= lower[(j, k)] * lower[(j, k)];
            }
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, pivot });
            }
            let diag = pivot.sqrt();
            lower[(j, j)] = diag;
            for i in (j + 1)..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= lower[(i, k)] * lower[(j, k)];
                }
                lower[(i, j)] = v / diag;
            }
        }
        Ok(Self { lower })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Solves `L z = b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut z = b.clone();
        for i in 0..n {
            let mut v = z[i];
            for k in 0..i {
                v -= self.lower[(i, k)] * z[k];
            }
            z[i] = v / self.lower[(i, i)];
        }
        z
    }

    /// Solves `Lᵀ x = z`. With `z` standard normal, `x` has covariance `A⁻¹`.
    pub fn solve_upper(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = z.clone();
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in (i + 1)..n {
                v -= self.lower[(k, i)] * x[k];
            }
            x[i] = v / self.lower[(i, i)];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `A⁻¹`, symmetrized.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::<f64>::zeros(n);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        (&inv + inv.transpose()) * 0.5
    }

    /// ln det A = 2 Σ ln L_ii.
    pub fn ln_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_factor_is_identity() {
        let f = SpdFactor::new(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.lower(), &DMatrix::<f64>::identity(3, 3));
        assert_eq!(f.ln_det(), 0.0);
    }

    #[test]
    fn hand_factor_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = SpdFactor::new(&a).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert!((f.lower() - expected).abs().max() < 1e-15);
        assert!((f.ln_det() - 8f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(SpdFactor::new(&a), Err(Error::NotPositiveDefinite { index: 1, .. })));
    }

    #[test]
    fn asymmetric_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.0, 2.0]);
        assert!(matches!(SpdFactor::new(&a), Err(Error::Domain(_))));
    }

    fn spd_from(entries: &[f64], n: usize) -> DMatrix<f64> {
        let b = DMatrix::from_row_slice(n, n, &entries[..n * n]);
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    proptest! {
        #[test]
        fn solve_reproduces_rhs(entries in prop::collection::vec(-3.0f64..3.0, 16), rhs in prop::collection::vec(-5.0f64..5.0, 4)) {
            let a = spd_from(&entries, 4);
            let b = DVector::from_vec(rhs);
            let f = SpdFactor::new(&a).unwrap();
            let x = f.solve(&b);
            let back = &a * x;
            prop_assert!((back - &b).norm() <= 1e-8 * b.norm().max(1.0));
            let reconstructed = f.lower() * f.lower().transpose();
            prop_assert!((reconstructed - &a).norm() <= 1e-10 * a.norm());
        }

        #[test]
        fn ln_det_matches_direct_determinant(entries in prop::collection::vec(-3.0f64..3.0, 9), n in 2usize..=3) {
            let a = spd_from(&entries, n);
            let f = SpdFactor::new(&a).unwrap();
            let direct = a.determinant().ln();
            prop_assert!((f.ln_det() - direct).abs() <= 1e-10 * direct.abs().max(1.0));
            let inv = f.inverse();
            prop_assert!((&a * inv - DMatrix::identity(n, n)).norm() < 1e-8);
        }
    }
}
