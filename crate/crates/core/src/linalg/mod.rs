//! Small dense complex linear algebra: products, determinants, eigenvalues,
//! matrix exponential and logarithm.

mod funcs;
mod matrix;
mod schur;

use std::cmp::Ordering;

use num_complex::Complex64;

pub use funcs::{expm, log_principal, TriangularLog, DIAGONALIZABLE_COND_LIMIT};
pub use matrix::{kron, Matrix};
pub use schur::{periodic_schur, schur, PeriodicSchur};

use crate::error::Result;

/// Eigenvalues with algebraic multiplicity, sorted by descending modulus, then
/// descending real part, then descending imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<Complex64>);

impl Spectrum {
    /// Sorts `values`. With `real_input`, near-conjugate pairs are made exactly
    /// conjugate and unpaired values with negligible imaginary part are made
    /// real.
    pub fn new(mut values: Vec<Complex64>, real_input: bool) -> Self {
        if real_input {
            symmetrize_conjugates(&mut values);
        }
        values.sort_by(spectral_order);
        Self(values)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.0.iter()
    }

    pub fn max_modulus(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn product(&self) -> Complex64 {
        self.0.iter().product()
    }
}

/// Descending modulus, then descending real part, then descending imaginary part.
pub fn spectral_order(a: &Complex64, b: &Complex64) -> Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

fn symmetrize_conjugates(values: &mut [Complex64]) {
    const REL: f64 = 1e-6;
    let n = values.len();
    let mut paired = vec![false; n];
    for i in 0..n {
        if paired[i] || values[i].im <= 0.0 {
            continue;
        }
        let target = values[i].conj();
        let partner = (0..n)
            .filter(|&j| j != i && !paired[j] && values[j].im < 0.0)
            .min_by(|&a, &b| {
                (values[a] - target)
                    .norm()
                    .total_cmp(&(values[b] - target).norm())
            });
        if let Some(j) = partner {
            if (values[j] - target).norm() <= REL * values[i].norm() {
                let avg = (values[i] + values[j].conj()) * 0.5;
                values[i] = avg;
                values[j] = avg.conj();
                paired[i] = true;
                paired[j] = true;
            }
        }
    }
    for (v, p) in values.iter_mut().zip(&paired) {
        if !p && v.im.abs() <= REL * v.norm() {
            v.im = 0.0;
        }
    }
}

/// All eigenvalues of a square matrix (dimension at most 64), by Hessenberg
/// reduction and complex shifted QR.
pub fn eigenvalues(m: &Matrix) -> Result<Spectrum> {
    let (_, t) = schur(m)?;
    let values = (0..t.rows()).map(|i| t[(i, i)]).collect();
    Ok(Spectrum::new(values, m.is_real()))
}
