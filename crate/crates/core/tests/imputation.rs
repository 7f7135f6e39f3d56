mod common;

use common::*;
use pvcmc::dataio::{make_pairing_mask, ViewMatrix};
use pvcmc::impute::{knn_impute, Aggregation};
use rand::Rng;

#[test]
fn neighbor_sets_match_brute_force_and_observed_rows_are_untouched() {
    let mut r = rng(31);
    for instance in 0..50 {
        let n = r.random_range(6..=30);
        let n_views = r.random_range(2..=3);
        let fraction = r.random_range(0.3..0.9);
        let mask = make_pairing_mask(n, fraction, n_views, instance).unwrap();
        let paired = mask.paired_indices();
        let k = r.random_range(1..=paired.len().min(5));
        let views: Vec<ViewMatrix> = (0..n_views)
            .map(|v| {
                let d = r.random_range(1..5);
                ViewMatrix::new(v, random_matrix(&mut r, n, d, 3.0)).unwrap()
            })
            .collect();
        // Coarse integer embeddings force distance ties.
        let embeddings: Vec<_> = (0..n_views)
            .map(|_| {
                let mut e = random_matrix(&mut r, n, 2, 3.0);
                e.data.iter_mut().for_each(|x| *x = x.round());
                e
            })
            .collect();
        let result = knn_impute(&views, &mask, &embeddings, k, Aggregation::Mean).unwrap();
        assert_eq!(result.imputed.len(), mask.unpaired_count());
        for row in &result.imputed {
            let observed: Vec<usize> = (0..n_views).filter(|&v| mask.is_observed(row.sample, v)).collect();
            let expected = brute_force_neighbors(row.sample, &observed, &embeddings, &paired, k);
            assert_eq!(row.neighbors, expected, "instance {instance} sample {}", row.sample);
            let src = &views[row.missing_view].values;
            for c in 0..src.cols {
                let mean = expected.iter().map(|&j| src[(j, c)]).sum::<f64>() / k as f64;
                let got = result.completed_views[row.missing_view].values[(row.sample, c)];
                assert!((got - mean).abs() < 1e-12);
            }
        }
        for v in 0..n_views {
            for i in mask.observed_in(v) {
                let before = views[v].values.row(i);
                let after = result.completed_views[v].values.row(i);
                assert!(before.iter().zip(after).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
    }
}

#[test]
fn too_few_paired_samples_is_an_error() {
    let mask = make_pairing_mask(10, 0.2, 2, 0).unwrap();
    let views: Vec<ViewMatrix> =
        (0..2).map(|v| ViewMatrix::new(v, random_matrix(&mut rng(v as u64), 10, 2, 1.0)).unwrap()).collect();
    let emb: Vec<_> = views.iter().map(|v| v.values.clone()).collect();
    assert!(knn_impute(&views, &mask, &emb, 5, Aggregation::Mean).is_err());
}
