//! Minimal dense symmetric linear algebra for the GP: Cholesky factorization,
//! triangular solves, log-determinant, and explicit inverse. Matrices are
//! row-major `Vec<f64>` of size n*n; only sizes in the low hundreds occur.

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor `a` (row-major n*n). Returns `None` if the matrix is not
    /// numerically positive definite.
    pub fn factor(a: &[f64], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return None;
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Some(Self { n, l })
    }

    /// Solve `A x = b` via the factor (forward then backward substitution).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // L z = b
        for i in 0..n {
            let mut sum = x[i];
            for k in 0..i {
                sum -= self.l[i * n + k] * x[k];
            }
            x[i] = sum / self.l[i * n + i];
        }
        // L^T x = z
        for i in (0..n).rev() {
            let mut sum = x[i];
            for k in i + 1..n {
                sum -= self.l[k * n + i] * x[k];
            }
            x[i] = sum / self.l[i * n + i];
        }
        x
    }

    /// `log det A = 2 sum log L_ii`.
    pub fn log_det(&self) -> f64 {
        let n = self.n;
        (0..n).map(|i| self.l[i * n + i].ln()).sum::<f64>() * 2.0
    }

    /// `L z` for the lower factor (drawing correlated samples in tests).
    #[cfg(test)]
    pub fn lower_times(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(z.len(), n);
        (0..n)
            .map(|i| (0..=i).map(|k| self.l[i * n + k] * z[k]).sum())
            .collect()
    }

    /// Explicit `A^{-1}` (row-major, symmetric).
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut unit = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            let col = self.solve(&unit);
            unit[j] = 0.0;
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_solve_round_trip() {
        // SPD matrix: A = B B^T + I for a fixed B.
        let n = 4;
        let b = [
            1.0, 0.2, -0.3, 0.5, //
            0.0, 1.5, 0.1, -0.2, //
            0.4, 0.0, 2.0, 0.3, //
            -0.1, 0.6, 0.0, 1.2,
        ];
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    s += b[i * n + k] * b[j * n + k];
                }
                a[i * n + j] = s;
            }
        }
        let chol = Cholesky::factor(&a, n).unwrap();

        let rhs = [1.0, -2.0, 0.5, 3.0];
        let x = chol.solve(&rhs);
        for i in 0..n {
            let got: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((got - rhs[i]).abs() < 1e-10, "row {i}: {got} vs {}", rhs[i]);
        }

        let inv = chol.inverse();
        for i in 0..n {
            for j in 0..n {
                let got: f64 = (0..n).map(|k| a[i * n + k] * inv[k * n + j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((got - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn log_det_matches_2x2() {
        let a = [2.0, 0.5, 0.5, 3.0];
        let chol = Cholesky::factor(&a, 2).unwrap();
        let det: f64 = 2.0 * 3.0 - 0.5 * 0.5;
        assert!((chol.log_det() - det.ln()).abs() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let a = [1.0, 2.0, 2.0, 1.0]; // eigenvalues 3, -1
        assert!(Cholesky::factor(&a, 2).is_none());
    }
}
