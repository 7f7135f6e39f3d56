mod common;

use common::*;
use proptest::prelude::*;
use pvcmc::linalg::{eigensolve_symmetric, jacobi_eigen, Matrix};
use pvcmc::metrics::acc;
use pvcmc::spectral::{affinity_from_z, normalized_laplacian, spectral_cluster, AffinityMatrix};
use rand::seq::SliceRandom;
use rand::Rng;

fn residual(m: &Matrix, value: f64, v: &[f64]) -> f64 {
    let n = m.rows;
    (0..n)
        .map(|i| {
            let mv: f64 = (0..n).map(|j| m[(i, j)] * v[j]).sum();
            (mv - value * v[i]).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

#[test]
fn eigensolvers_have_small_residuals_and_agree() {
    let mut r = rng(21);
    for &n in &[1, 2, 3, 7, 16, 33, 64] {
        for _ in 0..3 {
            let m = random_symmetric(&mut r, n);
            let scale = m.frobenius_norm();
            let a = eigensolve_symmetric(&m, n).unwrap();
            let b = jacobi_eigen(&m, n).unwrap();
            for j in 0..n {
                assert!(residual(&m, a.values[j], &a.vector(j)) <= 1e-8 * scale, "tql2 n={n} j={j}");
                assert!(residual(&m, b.values[j], &b.vector(j)) <= 1e-8 * scale, "jacobi n={n} j={j}");
                assert!((a.values[j] - b.values[j]).abs() <= 1e-8, "n={n} j={j}");
            }
            assert!(a.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

#[test]
fn eigenvectors_are_orthonormal() {
    let mut r = rng(22);
    let m = random_symmetric(&mut r, 20);
    let e = eigensolve_symmetric(&m, 20).unwrap();
    let gram = e.vectors.transpose().matmul(&e.vectors);
    for i in 0..20 {
        for j in 0..20 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((gram[(i, j)] - target).abs() < 1e-10);
        }
    }
}

/// Block-diagonal affinity with `c` components, rows shuffled.
fn block_affinity(r: &mut rand_chacha::ChaCha8Rng, c: usize, size: usize) -> (AffinityMatrix, Vec<usize>) {
    let n = c * size;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(r);
    let truth: Vec<usize> = order.iter().map(|&o| o / size).collect();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if truth[i] == truth[j] {
                let w = r.random_range(0.1..1.0);
                s[(i, j)] = w;
                s[(j, i)] = w;
            }
        }
    }
    (AffinityMatrix(s), truth)
}

#[test]
fn block_diagonal_components_are_recovered() {
    let mut r = rng(23);
    for c in 2..=4 {
        for trial in 0..3 {
            let (s, truth) = block_affinity(&mut r, c, 6 + trial);
            let l = spectral_cluster(&s, c, trial as u64).unwrap();
            assert_eq!(acc(&truth, &l.labels).unwrap(), 1.0, "c={c} trial={trial}");
        }
    }
}

#[test]
fn spectral_is_deterministic() {
    let mut r = rng(24);
    let (s, _) = block_affinity(&mut r, 3, 8);
    assert_eq!(spectral_cluster(&s, 3, 5).unwrap(), spectral_cluster(&s, 3, 5).unwrap());
}

proptest! {
    #[test]
    fn affinity_is_symmetric_nonnegative_and_laplacian_spectrum_in_range(
        n in 2usize..12,
        seed in 0u64..1000,
    ) {
        let mut r = rng(seed);
        let mut z = random_matrix(&mut r, n, n, 2.0);
        for i in 0..n {
            z[(i, i)] = 0.0;
        }
        let s = affinity_from_z(&z);
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(s.0[(i, j)], s.0[(j, i)]);
                prop_assert!(s.0[(i, j)] >= 0.0);
            }
        }
        let lap = normalized_laplacian(&s);
        let e = eigensolve_symmetric(&lap, n).unwrap();
        for &v in &e.values {
            prop_assert!((-1e-8..=2.0 + 1e-8).contains(&v), "eigenvalue {}", v);
        }
    }
}
