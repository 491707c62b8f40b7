use nalgebra::DMatrix;
use proptest::prelude::*;
use stmp_core::linops::dct::{naive_dct2, naive_dct3, OrthoDct};
use stmp_core::linops::{DenseOperator, LinearOperator, Operator, SvdOperator};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn adjoint_gap(op: &Operator, x: &[f64], y: &[f64]) -> f64 {
    let lhs = dot(&op.apply(x).unwrap(), y);
    let rhs = dot(x, &op.apply_adjoint(y).unwrap());
    (lhs - rhs).abs() / (1.0 + lhs.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_identity_partial_orthogonal(
        n in 1usize..200, frac in 0.05f64..1.0, seed: u64,
        xs in prop::collection::vec(-10.0f64..10.0, 200),
        ys in prop::collection::vec(-10.0f64..10.0, 200),
    ) {
        let m = ((n as f64 * frac).ceil() as usize).clamp(1, n);
        let op = Operator::partial_orthogonal(n, m, seed).unwrap();
        prop_assert!(adjoint_gap(&op, &xs[..n], &ys[..m]) < 1e-12);
    }

    #[test]
    fn adjoint_identity_dense(
        m in 1usize..30, n in 1usize..30, seed: u64,
        xs in prop::collection::vec(-10.0f64..10.0, 30),
        ys in prop::collection::vec(-10.0f64..10.0, 30),
    ) {
        let op = Operator::dense_gaussian(m, n, seed).unwrap();
        prop_assert!(adjoint_gap(&op, &xs[..n], &ys[..m]) < 1e-12);
    }
}

#[test]
fn partial_orthogonal_rows_are_orthonormal() {
    for (n, m) in [(16, 16), (64, 20), (100, 37), (7, 1)] {
        let op = Operator::partial_orthogonal(n, m, 9).unwrap();
        let a = op.to_dense().unwrap();
        let gram = &a * a.transpose();
        let err = (gram - DMatrix::<f64>::identity(m, m)).amax();
        assert!(err < 1e-12, "n={n} m={m}: {err}");
        // ‖A‖_F² = M
        assert!((a.norm_squared() - m as f64).abs() < 1e-10);
        assert_eq!(op.gram_spectrum().unwrap(), vec![1.0; m]);
    }
}

#[test]
fn dense_spectrum_matches_eigenvalues_of_gram() {
    let op = Operator::dense_gaussian(12, 30, 4).unwrap();
    let a = op.to_dense().unwrap();
    let mut eig: Vec<f64> = (&a * a.transpose()).symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    let spec = op.gram_spectrum().unwrap();
    assert_eq!(spec.len(), 12);
    for (s, e) in spec.iter().zip(&eig) {
        assert!((s - e).abs() < 1e-10 * e.max(1.0), "{s} vs {e}");
    }
}

#[test]
fn svd_operator_reproduces_dense_matrix() {
    let a = DMatrix::from_fn(7, 11, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0 + 0.1 * j as f64);
    let dense = DenseOperator::new(a.clone()).unwrap();
    let svd: &SvdOperator = &dense.svd().unwrap();
    let via_svd = Operator::Svd(svd.clone()).to_dense().unwrap();
    assert!((via_svd - &a).amax() < 1e-10);
    let s = svd.singular_values();
    assert!(s.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn naive_dct_matrix_is_orthogonal() {
    for n in [1usize, 2, 3, 5, 16] {
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                naive_dct2(&e)
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&cols[i], &cols[j]) - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn fast_dct_round_trip_and_agreement() {
    for n in [2usize, 3, 8, 100, 256, 1000] {
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + 0.01 * i as f64).collect();
        let plan = OrthoDct::new(n);
        let mut y = x.clone();
        plan.forward(&mut y);
        let naive = naive_dct2(&x);
        for (a, b) in y.iter().zip(&naive) {
            assert!((a - b).abs() < 1e-10, "n={n}");
        }
        let back = naive_dct3(&y);
        plan.inverse(&mut y);
        for ((a, b), c) in y.iter().zip(&x).zip(&back) {
            assert!((a - b).abs() < 1e-10 && (c - b).abs() < 1e-10, "n={n}");
        }
    }
}
