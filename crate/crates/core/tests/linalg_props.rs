use floqnet::linalg::{eigenvalues, expm, kron, log_principal, Matrix};
use num_complex::Complex64;
use proptest::prelude::*;

fn real_matrix(n: usize, range: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-range..range, n * n)
        .prop_map(move |v| Matrix::from_real(n, n, &v).unwrap())
}

fn sized_matrix(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max).prop_flat_map(|n| real_matrix(n, 1.0))
}

fn cofactor_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    (0..n)
        .map(|j| {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(c, _)| *c != j)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][j] * cofactor_det(&minor)
        })
        .sum()
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)].re).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn eigenvalues_of_real_matrices_come_in_conjugate_pairs(m in sized_matrix(8)) {
        let s = eigenvalues(&m).unwrap();
        prop_assert_eq!(s.len(), m.rows());
        for z in s.iter() {
            let partner = s.iter().any(|w| *w == z.conj());
            prop_assert!(partner, "{} has no conjugate in {:?}", z, s);
        }
    }

    #[test]
    fn eigenvalue_product_is_determinant(m in sized_matrix(8)) {
        let s = eigenvalues(&m).unwrap();
        let det = m.determinant();
        let prod = s.product();
        prop_assert!((prod - det).norm() <= 1e-8 * det.norm().max(1e-3), "{} vs {}", prod, det);
    }

    #[test]
    fn eigenvalues_are_roots_of_the_characteristic_polynomial(m in sized_matrix(6)) {
        let n = m.rows();
        for z in eigenvalues(&m).unwrap().iter() {
            let shifted = &m - &Matrix::identity(n).scale(*z);
            let scale = (m.norm_fro() + z.norm()).powi(n as i32);
            prop_assert!(shifted.determinant().norm() < 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn determinant_matches_cofactor_expansion(m in real_matrix(4, 2.0)) {
        let oracle = cofactor_det(&rows(&m));
        let det = m.determinant();
        prop_assert!((det.re - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
        prop_assert!(det.im.abs() <= 1e-12);
    }

    #[test]
    fn kron_matches_index_definition(a in real_matrix(3, 1.0), b in real_matrix(2, 1.0)) {
        let k = kron(&a, &b);
        prop_assert_eq!((k.rows(), k.cols()), (6, 6));
        for i in 0..3 {
            for j in 0..3 {
                for p in 0..2 {
                    for q in 0..2 {
                        prop_assert_eq!(k[(2 * i + p, 2 * j + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn kron_mixed_product(a in real_matrix(2, 1.0), b in real_matrix(3, 1.0), c in real_matrix(2, 1.0), d in real_matrix(3, 1.0)) {
        let lhs = kron(&a, &b).matmul(&kron(&c, &d));
        let rhs = kron(&a.matmul(&c), &b.matmul(&d));
        prop_assert!((&lhs - &rhs).max_abs() < 1e-10);
    }

    #[test]
    fn expm_inverse_round_trip(m in sized_matrix(5)) {
        let scale = 5.0 / m.norm_one().max(1e-12);
        let m = m.scale_real(scale.min(5.0));
        let p = expm(&m).matmul(&expm(&m.scale_real(-1.0)));
        let n = m.rows();
        prop_assert!((&p - &Matrix::identity(n)).max_abs() < 1e-10);
    }

    #[test]
    fn log_exp_round_trip(m in real_matrix(4, 1.0)) {
        // Shift towards the identity so the spectrum stays clear of zero.
        let m = &m.scale_real(0.3) + &Matrix::identity(4).scale_real(2.0);
        let l = log_principal(&m).unwrap();
        let back = expm(&l);
        prop_assert!((&back - &m).norm_fro() < 1e-8 * m.norm_fro());
        let im = l.trace().im;
        prop_assert!(im > -std::f64::consts::PI * 4.0 && im <= std::f64::consts::PI * 4.0);
    }
}

#[test]
fn laplacian_of_complete_graphs() {
    for n in 3..=5usize {
        let mut rows = vec![vec![-1.0; n]; n];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = (n - 1) as f64;
        }
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = eigenvalues(&Matrix::from_rows(&refs)).unwrap();
        let v = s.values();
        for z in &v[..n - 1] {
            assert!((z - Complex64::new(n as f64, 0.0)).norm() < 1e-10);
        }
        assert!(v[n - 1].norm() < 1e-10);
    }
}

#[test]
fn random_round_trip_log() {
    // Well-conditioned nonsymmetric matrix with complex eigenvalues.
    let m = Matrix::from_rows(&[&[0.9, -0.4, 0.1], &[0.5, 1.1, 0.0], &[0.2, 0.3, 0.7]]);
    let back = expm(&log_principal(&m).unwrap());
    assert!((&back - &m).norm_fro() < 1e-8 * m.norm_fro());
}
