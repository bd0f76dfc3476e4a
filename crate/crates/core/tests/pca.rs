mod common;

use celebbasis::backends::TokenId;
use celebbasis::basis::{compute_pca, CelebBasis};
use celebbasis::dictionary::{EmbeddingSet, SetRole};
use celebbasis::Error;
use common::oracle::{covariance, jacobi_eigen, oracle_pca};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn set_from(rows: &[Vec<f64>], role: SetRole) -> EmbeddingSet {
    let vs: Vec<DVector<f64>> = rows.iter().map(|r| DVector::from_row_slice(r)).collect();
    EmbeddingSet::from_rows(
        role,
        vs.iter().enumerate().map(|(i, v)| (TokenId(i as u64), v)).collect(),
    )
    .unwrap()
}

fn random_rows(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Vec<Vec<f64>> {
    let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..2.0)).collect();
    (0..m)
        .map(|_| scales.iter().map(|s| s * rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn mean_of(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
        .collect()
}

#[test]
fn matches_jacobi_oracle_on_seeded_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..20 {
        let m = rng.random_range(10..=100);
        let d = rng.random_range(2..=32);
        let p = rng.random_range(1..=(m - 1).min(d));
        let rows = random_rows(&mut rng, m, d);
        let comp = compute_pca(&set_from(&rows, SetRole::First), p).unwrap();
        let oracle = oracle_pca(&rows, &mean_of(&rows), p);
        for k in 0..p {
            for j in 0..d {
                let err = (comp.directions[(k, j)] - oracle.directions[k][j]).abs();
                assert!(err < 1e-5, "case {case} ({m}x{d}, p={p}) dir {k}: {err:e}");
            }
            let rel = (comp.explained_variance[k] - oracle.variances[k]).abs() / oracle.variances[k];
            assert!(rel < 1e-6, "case {case} variance {k}: {rel:e}");
        }
    }
}

#[test]
fn frozen_hand_example() {
    // Covariance of these rows is diag(2/3, 8/3); the y axis dominates.
    let rows = vec![
        vec![1.0, 0.0],
        vec![-1.0, 0.0],
        vec![0.0, 2.0],
        vec![0.0, -2.0],
    ];
    let cov = covariance(&rows, &[0.0, 0.0]);
    assert!((cov[0][0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((cov[1][1] - 8.0 / 3.0).abs() < 1e-15);
    let comp = compute_pca(&set_from(&rows, SetRole::First), 2).unwrap();
    assert_eq!(comp.directions.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);
    assert_eq!(comp.directions.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
    assert!((comp.explained_variance[0] - 8.0 / 3.0).abs() < 1e-6);
    assert!((comp.explained_variance[1] - 2.0 / 3.0).abs() < 1e-6);
}

#[test]
fn rank_errors() {
    let rows = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0], vec![3.0, 6.0, 9.0]];
    let set = set_from(&rows, SetRole::Second);
    assert!(compute_pca(&set, 1).is_ok());
    match compute_pca(&set, 2) {
        Err(Error::Rank { requested: 2, achievable: 1 }) => {}
        other => panic!("expected rank error, got {other:?}"),
    }
    match compute_pca(&set, 3) {
        Err(Error::Rank { requested: 3, achievable: 2 }) => {}
        other => panic!("expected rank error, got {other:?}"),
    }
    assert!(matches!(compute_pca(&set, 0), Err(Error::InvalidArgument(_))));
}

#[test]
fn components_orthonormal_and_sorted() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let first = random_rows(&mut rng, 60, 24);
    let second = random_rows(&mut rng, 50, 24);
    let basis = CelebBasis::build(
        &set_from(&first, SetRole::First),
        &set_from(&second, SetRole::Second),
        20,
        0,
    )
    .unwrap();
    for comp in basis.components() {
        assert!(comp.orthonormality_error() < 1e-6);
        let ev = &comp.explained_variance;
        assert!(ev.iter().zip(ev.iter().skip(1)).all(|(a, b)| a >= b));
    }
}

#[test]
fn jacobi_on_hand_matrix() {
    // [[2, 1], [1, 2]] has eigenvalues 3 and 1.
    let (mut values, _) = jacobi_eigen(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert!((values[0] - 3.0).abs() < 1e-12);
    assert!((values[1] - 1.0).abs() < 1e-12);
}
