//! Complex Schur decompositions of single matrices and of matrix products.
//!
//! The product ("periodic") form is what makes Floquet multipliers of strongly
//! contracting cycles computable: the monodromy matrix is kept as a product of
//! short, well-conditioned transition matrices and all factors are brought to
//! upper-triangular form by a shared chain of unitary bases,
//!
//! ```text
//! T_i = Z_{i+1}^H A_i Z_i,  Z_K = Z_0,
//! A_{K-1} ... A_1 A_0 = Z_0 (T_{K-1} ... T_0) Z_0^H.
//! ```
//!
//! Eigenvalues of the product are the products of the triangular diagonals,
//! which keeps their relative accuracy even when they span many decades. A
//! single matrix is the special case `K = 1`, where this reduces to the usual
//! Hessenberg reduction followed by shifted QR.

use num_complex::Complex64;

use super::Matrix;
use crate::error::{Error, Result};

const EPS: f64 = f64::EPSILON;
const MAX_DIM: usize = 64;
const ITERATIONS_PER_EIGENVALUE: usize = 40;

/// Plane rotation `G = [[c, -conj(s)], [s, c]]` with real `c`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Givens {
    c: f64,
    s: Complex64,
}

impl Givens {
    /// Rotation whose adjoint maps `(a, b)` onto `(r, 0)`. Its first column is
    /// parallel to `(a, b)`.
    pub(crate) fn zeroing(a: Complex64, b: Complex64) -> Self {
        let na = a.norm();
        let nb = b.norm();
        if nb == 0.0 {
            return Self {
                c: 1.0,
                s: Complex64::new(0.0, 0.0),
            };
        }
        if na == 0.0 {
            return Self {
                c: 0.0,
                s: Complex64::new(1.0, 0.0),
            };
        }
        let norm = na.hypot(nb);
        Self {
            c: na / norm,
            s: b * a.conj() / (na * norm),
        }
    }

    /// `M <- G^H M` on rows `p`, `q`.
    pub(crate) fn apply_rows(&self, m: &mut Matrix, p: usize, q: usize) {
        let sc = self.s.conj();
        for j in 0..m.cols() {
            let x = m[(p, j)];
            let y = m[(q, j)];
            m[(p, j)] = x * self.c + sc * y;
            m[(q, j)] = y * self.c - self.s * x;
        }
    }

    /// `M <- M G` on columns `p`, `q`.
    pub(crate) fn apply_cols(&self, m: &mut Matrix, p: usize, q: usize) {
        let sc = self.s.conj();
        for i in 0..m.rows() {
            let x = m[(i, p)];
            let y = m[(i, q)];
            m[(i, p)] = x * self.c + y * self.s;
            m[(i, q)] = y * self.c - x * sc;
        }
    }
}

/// Schur form of the product `A_{K-1} ... A_0`.
///
/// `bases[i]` is the right basis of factor `i` and the left basis of factor
/// `i - 1` (cyclically), so `factors[i] = bases[(i+1) % K]^H A_i bases[i]`.
#[derive(Debug, Clone)]
pub struct PeriodicSchur {
    pub bases: Vec<Matrix>,
    pub factors: Vec<Matrix>,
}

impl PeriodicSchur {
    pub fn dim(&self) -> usize {
        self.factors[0].rows()
    }

    pub fn period(&self) -> usize {
        self.factors.len()
    }

    /// Diagonal products, in Schur order.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        (0..self.dim())
            .map(|j| self.factors.iter().map(|t| t[(j, j)]).product())
            .collect()
    }

    /// `ln |lambda_j|` accumulated factor by factor, immune to under/overflow of
    /// the product itself.
    pub fn log_moduli(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.factors.iter().map(|t| t[(j, j)].norm().ln()).sum())
            .collect()
    }

    /// Upper-triangular product `T_{K-1} ... T_0`.
    pub fn triangular_product(&self) -> Matrix {
        let mut acc = self.factors[0].clone();
        for t in &self.factors[1..] {
            acc = t.matmul(&acc);
        }
        acc
    }

    /// Applies `G` to basis `j`, updating both factors that touch it.
    fn rotate_basis(&mut self, j: usize, p: usize, q: usize, g: Givens) {
        let k = self.factors.len();
        g.apply_cols(&mut self.bases[j], p, q);
        g.apply_rows(&mut self.factors[(j + k - 1) % k], p, q);
        g.apply_cols(&mut self.factors[j], p, q);
    }

    /// Clears the subdiagonal fill `(r, r-1)` in every triangular factor,
    /// pushing it through to the Hessenberg factor `K - 1`.
    fn chase_through_triangular(&mut self, r: usize) {
        let k = self.factors.len();
        for i in 0..k - 1 {
            let a = self.factors[i][(r - 1, r - 1)];
            let b = self.factors[i][(r, r - 1)];
            if b.norm() == 0.0 {
                continue;
            }
            let g = Givens::zeroing(a, b);
            self.rotate_basis(i + 1, r - 1, r, g);
            self.factors[i][(r, r - 1)] = Complex64::new(0.0, 0.0);
        }
    }

    fn reduce(&mut self) {
        let n = self.dim();
        let k = self.period();
        // Triangularise factors 0..K-2, pushing the rotations into the next factor.
        for i in 0..k - 1 {
            for c in 0..n {
                for r in (c + 1..n).rev() {
                    let b = self.factors[i][(r, c)];
                    if b.norm() == 0.0 {
                        continue;
                    }
                    let a = self.factors[i][(r - 1, c)];
                    let g = Givens::zeroing(a, b);
                    self.rotate_basis(i + 1, r - 1, r, g);
                    self.factors[i][(r, c)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        // Hessenberg form for the last factor.
        for c in 0..n.saturating_sub(2) {
            for r in (c + 2..n).rev() {
                let b = self.factors[k - 1][(r, c)];
                if b.norm() == 0.0 {
                    continue;
                }
                let a = self.factors[k - 1][(r - 1, c)];
                let g = Givens::zeroing(a, b);
                self.rotate_basis(0, r - 1, r, g);
                self.factors[k - 1][(r, c)] = Complex64::new(0.0, 0.0);
                self.chase_through_triangular(r);
            }
        }
    }

    /// Eigenvalue of the trailing 2x2 block product closest to its last
    /// diagonal entry.
    fn wilkinson_shift(&self, hi: usize) -> Complex64 {
        let mut m = self.factors[0].block(hi - 1, hi - 1, 2, 2);
        for t in &self.factors[1..] {
            m = t.block(hi - 1, hi - 1, 2, 2).matmul(&m);
        }
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let p = (a - d) * 0.5;
        let bc = b * c;
        let mut disc = (p * p + bc).sqrt();
        if (p.conj() * disc).re < 0.0 {
            disc = -disc;
        }
        let den = p + disc;
        if den.norm() == 0.0 {
            d
        } else {
            d - bc / den
        }
    }

    fn sweep(&mut self, lo: usize, hi: usize, shift: Complex64) {
        let k = self.period();
        let lead: Complex64 = self.factors[..k - 1].iter().map(|t| t[(lo, lo)]).product();
        let h = &self.factors[k - 1];
        let x = h[(lo, lo)] * lead - shift;
        let y = h[(lo + 1, lo)] * lead;
        let g = Givens::zeroing(x, y);
        self.rotate_basis(0, lo, lo + 1, g);
        self.chase_through_triangular(lo + 1);
        for j in lo..hi.saturating_sub(1) {
            let h = &self.factors[k - 1];
            let a = h[(j + 1, j)];
            let b = h[(j + 2, j)];
            let g = Givens::zeroing(a, b);
            self.rotate_basis(0, j + 1, j + 2, g);
            self.factors[k - 1][(j + 2, j)] = Complex64::new(0.0, 0.0);
            self.chase_through_triangular(j + 2);
        }
    }

    fn iterate(&mut self) -> Result<()> {
        let n = self.dim();
        let k = self.period();
        if n < 2 {
            return Ok(());
        }
        let budget = ITERATIONS_PER_EIGENVALUE * n;
        let mut total = 0;
        let mut since_deflation = 0;
        let mut hi = n - 1;
        while hi > 0 {
            let mut lo = hi;
            while lo > 0 {
                let h = &self.factors[k - 1];
                let sub = h[(lo, lo - 1)].norm();
                let mut scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
                if scale == 0.0 {
                    scale = h.norm_fro();
                }
                if sub <= EPS * scale {
                    self.factors[k - 1][(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                    break;
                }
                lo -= 1;
            }
            if lo == hi {
                hi -= 1;
                since_deflation = 0;
                continue;
            }
            total += 1;
            since_deflation += 1;
            if total > budget {
                return Err(Error::NonConvergence(format!(
                    "shifted QR did not converge after {total} sweeps"
                )));
            }
            let shift = if since_deflation % 10 == 0 {
                // Exceptional shift to break cycles.
                let h = &self.factors[k - 1];
                let w = self.wilkinson_shift(hi);
                let mut kick = h[(hi, hi - 1)].norm();
                if hi >= 2 {
                    kick += h[(hi - 1, hi - 2)].norm();
                }
                w + Complex64::from_polar(0.75 * kick.max(w.norm() * 1e-3), 0.7)
            } else {
                self.wilkinson_shift(hi)
            };
            self.sweep(lo, hi, shift);
        }
        Ok(())
    }

    /// Swaps the adjacent eigenvalues at positions `j` and `j + 1`.
    ///
    /// Requires `|lambda_j| > |lambda_{j+1}|`; the swap direction vector is then
    /// obtained from a contracting backward recursion.
    fn swap_adjacent(&mut self, j: usize) {
        let k = self.period();
        let a: Vec<Complex64> = self.factors.iter().map(|t| t[(j, j)]).collect();
        let b: Vec<Complex64> = self.factors.iter().map(|t| t[(j, j + 1)]).collect();
        let c: Vec<Complex64> = self.factors.iter().map(|t| t[(j + 1, j + 1)]).collect();
        // Direction (s_i, 1) at basis i with factor_i (s_i, 1) ~ (s_{i+1}, 1);
        // backward step s_i = (c_i s_{i+1} - b_i) / a_i.
        let backward = |s_next: Complex64, i: usize| (c[i] * s_next - b[i]) / a[i];
        let mut gain = Complex64::new(1.0, 0.0);
        let mut offset = Complex64::new(0.0, 0.0);
        for i in (0..k).rev() {
            gain = gain * c[i] / a[i];
            offset = backward(offset, i);
        }
        let one = Complex64::new(1.0, 0.0);
        let s0 = offset / (one - gain);
        let mut s = vec![Complex64::new(0.0, 0.0); k];
        let mut next = s0;
        for i in (0..k).rev() {
            next = backward(next, i);
            s[i] = next;
        }
        for (i, &si) in s.iter().enumerate() {
            let g = Givens::zeroing(si, one);
            self.rotate_basis(i, j, j + 1, g);
        }
        for t in &mut self.factors {
            t[(j + 1, j)] = Complex64::new(0.0, 0.0);
        }
    }

    /// Reorders the diagonal so eigenvalue moduli increase down the diagonal.
    pub fn sort_ascending_modulus(&mut self) {
        let n = self.dim();
        if n < 2 {
            return;
        }
        loop {
            let mut swapped = false;
            for j in 0..n - 1 {
                let lm = self.log_moduli();
                if lm[j] > lm[j + 1] + 1e-10 {
                    self.swap_adjacent(j);
                    swapped = true;
                }
            }
            if !swapped {
                break;
            }
        }
    }
}

/// Periodic Schur decomposition of `factors[K-1] * ... * factors[0]`.
pub fn periodic_schur(factors: &[Matrix]) -> Result<PeriodicSchur> {
    let first = factors
        .first()
        .ok_or_else(|| Error::InvalidInput("periodic Schur needs at least one factor".into()))?;
    let n = first.rows();
    if factors.iter().any(|f| f.rows() != n || f.cols() != n) {
        return Err(Error::DimensionMismatch(
            "periodic Schur factors must be square and of equal size".into(),
        ));
    }
    if n > MAX_DIM {
        return Err(Error::InvalidInput(format!(
            "dimension {n} exceeds the dense eigen-solver limit {MAX_DIM}"
        )));
    }
    let mut ps = PeriodicSchur {
        bases: vec![Matrix::identity(n); factors.len()],
        factors: factors.to_vec(),
    };
    if n == 0 {
        return Ok(ps);
    }
    ps.reduce();
    ps.iterate()?;
    Ok(ps)
}

/// Complex Schur decomposition `m = q t q^H` with `t` upper triangular.
pub fn schur(m: &Matrix) -> Result<(Matrix, Matrix)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(
            "Schur form needs a square matrix".into(),
        ));
    }
    let mut ps = periodic_schur(std::slice::from_ref(m))?;
    Ok((ps.bases.remove(0), ps.factors.remove(0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_matrix(n: usize, seed: u64) -> Matrix {
        // Small deterministic LCG; avoids a dev-dependency in unit tests.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let data: Vec<f64> = (0..n * n).map(|_| next()).collect();
        Matrix::from_real(n, n, &data).unwrap()
    }

    #[test]
    fn givens_zeroes_second_component() {
        let a = Complex64::new(1.0, 2.0);
        let b = Complex64::new(-0.5, 0.25);
        let g = Givens::zeroing(a, b);
        let mut m = Matrix::zeros(2, 1);
        m[(0, 0)] = a;
        m[(1, 0)] = b;
        g.apply_rows(&mut m, 0, 1);
        assert!(m[(1, 0)].norm() < 1e-15);
        assert!((m[(0, 0)].norm() - a.norm().hypot(b.norm())).abs() < 1e-14);
    }

    #[test]
    fn schur_reconstructs_matrix() {
        for seed in 0..5 {
            let m = rand_matrix(6, seed);
            let (q, t) = schur(&m).unwrap();
            for i in 0..6 {
                for j in 0..i {
                    assert_eq!(t[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
            let back = &(&q * &t) * &q.adjoint();
            assert!((&back - &m).max_abs() < 1e-12);
            let qq = &q.adjoint() * &q;
            assert!((&qq - &Matrix::identity(6)).max_abs() < 1e-13);
        }
    }

    #[test]
    fn periodic_schur_matches_explicit_product() {
        let factors: Vec<Matrix> = (0..7).map(|s| rand_matrix(4, 100 + s)).collect();
        let ps = periodic_schur(&factors).unwrap();
        let k = factors.len();
        for i in 0..k {
            let t = &ps.factors[i];
            for r in 0..4 {
                for c in 0..r {
                    assert!(t[(r, c)].norm() < 1e-14, "factor {i} not triangular");
                }
            }
            let recon = &(&ps.bases[(i + 1) % k] * t) * &ps.bases[i].adjoint();
            assert!((&recon - &factors[i]).max_abs() < 1e-12);
        }
        let mut prod = factors[0].clone();
        for f in &factors[1..] {
            prod = f * &prod;
        }
        let (_, t) = schur(&prod).unwrap();
        let mut direct: Vec<Complex64> = (0..4).map(|j| t[(j, j)]).collect();
        let mut periodic = ps.eigenvalues();
        let key = |z: &Complex64| (z.norm(), z.re, z.im);
        direct.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        periodic.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (a, b) in direct.iter().zip(&periodic) {
            assert!((a - b).norm() < 1e-10 * prod.max_abs());
        }
    }

    #[test]
    fn periodic_schur_resolves_tiny_eigenvalues() {
        // A_i = R_{i+1} D R_i^T telescopes to R_0 D^K R_0^T: eigenvalues 1 and
        // 1e-60, the latter far below what the explicit product can resolve.
        let k = 20;
        let rot = |i: usize| {
            let theta = 0.3 * (i % k) as f64;
            Matrix::from_rows(&[&[theta.cos(), -theta.sin()], &[theta.sin(), theta.cos()]])
        };
        let scale = Matrix::diag_real(&[1.0, 1e-3]);
        let factors: Vec<Matrix> = (0..k)
            .map(|i| &(&rot(i + 1) * &scale) * &rot(i).transpose())
            .collect();
        let ps = periodic_schur(&factors).unwrap();
        let mut lm = ps.log_moduli();
        lm.sort_by(|a, b| a.total_cmp(b));
        let expected_small = 20.0 * 1e-3f64.ln();
        assert!((lm[0] - expected_small).abs() < 1e-9, "{lm:?}");
        assert!(lm[1].abs() < 1e-12, "{lm:?}");
    }

    #[test]
    fn reordering_keeps_factorisation_and_sorts() {
        let factors: Vec<Matrix> = (0..5).map(|s| rand_matrix(5, 7 + s)).collect();
        let mut ps = periodic_schur(&factors).unwrap();
        let before = ps.eigenvalues();
        ps.sort_ascending_modulus();
        let after = ps.eigenvalues();
        let lm = ps.log_moduli();
        for w in lm.windows(2) {
            assert!(w[0] <= w[1] + 1e-10);
        }
        let k = factors.len();
        for i in 0..k {
            let t = &ps.factors[i];
            let recon = &(&ps.bases[(i + 1) % k] * t) * &ps.bases[i].adjoint();
            assert!((&recon - &factors[i]).max_abs() < 1e-11);
        }
        let mut unmatched = after;
        for a in &before {
            let (idx, d) = unmatched
                .iter()
                .enumerate()
                .map(|(i, b)| (i, (a - b).norm()))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            assert!(
                d < 1e-10 * a.norm().max(1e-300),
                "{a} missing after reordering"
            );
            unmatched.swap_remove(idx);
        }
    }

    #[test]
    fn rejects_mixed_sizes() {
        let r = periodic_schur(&[Matrix::identity(2), Matrix::identity(3)]);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }
}
