use num_complex::Complex64;

use super::{schur, Matrix};
use crate::error::{Error, Result};

/// Eigenvector condition number above which a logarithm is refused.
pub const DIAGONALIZABLE_COND_LIMIT: f64 = 1e8;

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &Matrix) -> Matrix {
    assert!(m.is_square(), "expm of non-square matrix");
    let n = m.rows();
    let norm = m.norm_one();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m.scale_real(0.5f64.powi(squarings));
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=40 {
        term = term.matmul(&scaled).scale_real(1.0 / k as f64);
        sum = &sum + &term;
        if term.norm_one() <= f64::EPSILON * sum.norm_one() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Diagonalisation `Y diag(exp(logs)) Y^{-1}` of an upper-triangular matrix,
/// with `Y` unit upper triangular.
#[derive(Debug, Clone)]
pub struct TriangularLog {
    pub eigenvectors: Matrix,
    pub eigenvectors_inv: Matrix,
    /// Principal logarithms of the diagonal.
    pub logs: Vec<Complex64>,
}

impl TriangularLog {
    pub fn new(t: &Matrix) -> Result<Self> {
        let n = t.rows();
        let diag: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
        if let Some(j) = diag.iter().position(|d| d.norm() == 0.0) {
            return Err(Error::SingularInput(format!("eigenvalue {j} is zero")));
        }
        let mut y = Matrix::identity(n);
        for j in 0..n {
            let lambda = diag[j];
            for i in (0..j).rev() {
                let mut num = Complex64::new(0.0, 0.0);
                for l in i + 1..=j {
                    num += t[(i, l)] * y[(l, j)];
                }
                let mut den = diag[i] - lambda;
                let floor = 1e-14 * diag[i].norm().max(lambda.norm());
                if den.norm() < floor {
                    den = Complex64::new(floor, 0.0);
                }
                y[(i, j)] = -num / den;
            }
        }
        let y_inv = y.upper_triangular_inverse()?;
        let cond = y.norm_one() * y_inv.norm_one();
        if !cond.is_finite() || cond > DIAGONALIZABLE_COND_LIMIT {
            return Err(Error::NonDiagonalizable { condition: cond });
        }
        Ok(Self {
            eigenvectors: y,
            eigenvectors_inv: y_inv,
            logs: diag.iter().map(|d| d.ln()).collect(),
        })
    }

    /// `Y diag(logs) Y^{-1}`.
    pub fn log(&self) -> Matrix {
        self.apply_diag(|l| l)
    }

    /// `exp(s * log(T))`, i.e. the principal power `T^s`.
    pub fn power(&self, s: f64) -> Matrix {
        self.apply_diag(|l| (l * s).exp())
    }

    fn apply_diag(&self, f: impl Fn(Complex64) -> Complex64) -> Matrix {
        let d: Vec<Complex64> = self.logs.iter().map(|&l| f(l)).collect();
        self.eigenvectors
            .matmul(&Matrix::diag(&d))
            .matmul(&self.eigenvectors_inv)
    }
}

/// Principal matrix logarithm through the eigendecomposition.
///
/// Fails with `SingularInput` when an eigenvalue vanishes to working precision
/// and with `NonDiagonalizable` when the eigenvector basis has condition number
/// above [`DIAGONALIZABLE_COND_LIMIT`].
pub fn log_principal(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(
            "logarithm of non-square matrix".into(),
        ));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let (q, t) = schur(m)?;
    let floor = n as f64 * f64::EPSILON * m.norm_fro();
    if let Some(j) = (0..n).find(|&j| t[(j, j)].norm() <= floor) {
        return Err(Error::SingularInput(format!(
            "eigenvalue {} is zero to working precision",
            t[(j, j)]
        )));
    }
    let tl = TriangularLog::new(&t)?;
    Ok(q.matmul(&tl.log()).matmul(&q.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn expm_of_zero_and_diagonal() {
        assert!((&expm(&Matrix::zeros(3, 3)) - &Matrix::identity(3)).max_abs() < 1e-15);
        let e = expm(&Matrix::diag_real(&[0.5, -2.0]));
        assert!((e[(0, 0)].re - 0.5f64.exp()).abs() < 1e-14);
        assert!((e[(1, 1)].re - (-2.0f64).exp()).abs() < 1e-15);
        assert!(e[(0, 1)].norm() == 0.0);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 1.3;
        let e = expm(&Matrix::from_rows(&[&[0.0, t], &[-t, 0.0]]));
        assert!((e[(0, 0)].re - t.cos()).abs() < 1e-14);
        assert!((e[(0, 1)].re - t.sin()).abs() < 1e-14);
    }

    #[test]
    fn log_of_identity_is_zero() {
        let l = log_principal(&Matrix::identity(3)).unwrap();
        assert!(l.max_abs() < 1e-15);
    }

    #[test]
    fn log_of_diagonal_exponentials() {
        let l = log_principal(&Matrix::diag_real(&[E, E * E])).unwrap();
        assert!((l[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!((l[(1, 1)].re - 2.0).abs() < 1e-14);
        assert!(l[(0, 1)].norm() < 1e-14 && l[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn log_of_negative_real_uses_principal_branch() {
        let l = log_principal(&Matrix::diag_real(&[-1.0])).unwrap();
        assert!((l[(0, 0)].im - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn log_rejects_singular_and_defective() {
        let singular = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(
            log_principal(&singular),
            Err(Error::SingularInput(_))
        ));
        let jordan = Matrix::from_rows(&[&[2.0, 1.0], &[0.0, 2.0]]);
        assert!(matches!(
            log_principal(&jordan),
            Err(Error::NonDiagonalizable { .. })
        ));
    }

    #[test]
    fn triangular_power_interpolates() {
        let t = Matrix::from_rows(&[&[0.5, 0.3], &[0.0, 2.0]]);
        let tl = TriangularLog::new(&t).unwrap();
        assert!((&tl.power(1.0) - &t).max_abs() < 1e-14);
        assert!((&tl.power(0.0) - &Matrix::identity(2)).max_abs() < 1e-14);
        let half = tl.power(0.5);
        assert!((&half.matmul(&half) - &t).max_abs() < 1e-14);
    }
}
