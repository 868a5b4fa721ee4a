mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use ucrdnet::{clustering, metrics};

#[test]
fn aligned_ranks_reproduce_reference_uci_ranks() {
    let rt = metrics::aligned_ranks(table(&UCI_MEANS).view()).unwrap();
    assert_eq!(rt.ranks(), table(&UCI_RANKS));
    let total: f64 = rt.ranks().sum();
    assert_eq!(total, 96.0 * 97.0 / 2.0);
}

#[test]
fn banner_cell_of_msra_table() {
    let rt = metrics::aligned_ranks(table(&MSRA_MEANS).view()).unwrap();
    assert!((rt.aligned().unwrap()[[0, 3]] - 0.3353).abs() < 5e-5);
    assert_eq!(rt.ranks()[[0, 3]], 1.0);
    assert_eq!(rt.ranks()[[0, 7]], 2.0);
}

#[test]
fn reference_p_values_follow_from_reference_statistics() {
    assert!((metrics::chi2_sf(68.262, 7) - 3.314e-12).abs() < 1e-15);
    assert!((metrics::chi2_sf(26.273, 7) - 4.501e-4).abs() < 1e-7);
}

#[test]
fn friedman_from_rank_tables_matches_direct_formula() {
    for ranks in [&MSRA_RANKS, &UCI_RANKS] {
        let rt = metrics::RankTable::from_ranks(table(ranks)).unwrap();
        let f = metrics::friedman_aligned(&rt);
        assert!((f.t - scalar_friedman_t(ranks)).abs() < 1e-9);
        assert_eq!(f.df, 7);
        assert!(!f.degenerate);
    }
}

fn brute_midranks_desc(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let greater = v.iter().filter(|&&y| y > x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            greater + (equal + 1.0) / 2.0
        })
        .collect()
}

#[test]
fn aligned_ranks_match_sort_oracle() {
    let mut r = rng(31);
    for _ in 0..50 {
        // Values on a coarse grid so ties occur.
        let v = Array2::from_shape_fn((3, 3), |_| r.random_range(0..6) as f64 / 4.0);
        let rt = metrics::aligned_ranks(v.view()).unwrap();
        let aligned: Vec<f64> = (0..3)
            .flat_map(|i| {
                let v = &v;
                let mean = (v[[i, 0]] + v[[i, 1]] + v[[i, 2]]) / 3.0;
                (0..3)
                    .map(move |j| ((v[[i, j]] - mean) * 1e12).round())
                    .collect::<Vec<_>>()
            })
            .collect();
        let expect = brute_midranks_desc(&aligned);
        assert_eq!(rt.ranks().iter().copied().collect::<Vec<_>>(), expect);
    }
}

#[test]
fn clustering_metric_examples_from_pair_enumeration() {
    let (truth, pred) = ([0, 0, 0, 1], [0, 0, 1, 1]);
    assert_eq!(brute_pairs(&pred, &truth), (1, 1, 2));
    assert_eq!(
        metrics::jaccard_index(&pred, &truth).unwrap(),
        brute_jaccard(&pred, &truth)
    );
    assert_eq!(metrics::fmi(&pred, &truth).unwrap(), brute_fmi(&pred, &truth));
    assert_eq!(metrics::clustering_accuracy(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.5);
}

fn labels(max_n: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1..=max_n).prop_flat_map(|n| (prop::collection::vec(0..5usize, n), prop::collection::vec(0..5usize, n)))
}

proptest! {
    #[test]
    fn metrics_are_relabeling_invariant((pred, truth) in labels(15), shift in 1usize..5) {
        let relabel = |l: &[usize]| l.iter().map(|x| (x + shift) % 5 * 3 + 7).collect::<Vec<_>>();
        let (p2, t2) = (relabel(&pred), relabel(&truth));
        prop_assert_eq!(metrics::clustering_accuracy(&pred, &truth).unwrap(), metrics::clustering_accuracy(&p2, &truth).unwrap());
        prop_assert_eq!(metrics::jaccard_index(&pred, &truth).unwrap(), metrics::jaccard_index(&pred, &t2).unwrap());
        prop_assert_eq!(metrics::fmi(&pred, &truth).unwrap(), metrics::fmi(&p2, &t2).unwrap());
        prop_assert_eq!(metrics::pair_confusion(&pred, &truth).unwrap(), metrics::pair_confusion(&p2, &t2).unwrap());
    }

    #[test]
    fn pair_counts_total((pred, truth) in labels(20)) {
        let c = metrics::pair_confusion(&pred, &truth).unwrap();
        let n = pred.len() as u64;
        prop_assert_eq!(c.total(), n * (n - 1) / 2);
        let j = metrics::jaccard_index(&pred, &truth).unwrap();
        let f = metrics::fmi(&pred, &truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&j) && (0.0..=1.0).contains(&f));
    }

    #[test]
    fn identical_partitions_score_one((pred, _) in labels(12)) {
        prop_assume!(pred.len() >= 2);
        let truth: Vec<usize> = pred.iter().map(|x| 4 - x).collect();
        prop_assert_eq!(metrics::clustering_accuracy(&pred, &truth).unwrap(), 1.0);
        let c = metrics::pair_confusion(&pred, &truth).unwrap();
        if c.tp > 0 {
            prop_assert_eq!(metrics::jaccard_index(&pred, &truth).unwrap(), 1.0);
            prop_assert_eq!(metrics::fmi(&pred, &truth).unwrap(), 1.0);
        }
    }

    #[test]
    fn friedman_ignores_per_dataset_offsets(seed in 0u64..1000) {
        let mut r = rng(seed);
        let v = Array2::from_shape_fn((4, 3), |_| r.random::<f64>());
        let offsets: Vec<f64> = (0..4).map(|_| r.random::<f64>() * 10.0 - 5.0).collect();
        let shifted = Array2::from_shape_fn((4, 3), |(i, j)| v[[i, j]] + offsets[i]);
        let a = metrics::aligned_ranks(v.view()).unwrap();
        let b = metrics::aligned_ranks(shifted.view()).unwrap();
        prop_assert_eq!(a.ranks(), b.ranks());
        prop_assert_eq!(metrics::friedman_aligned(&a), metrics::friedman_aligned(&b));
    }
}

#[test]
fn kmeans_inertia_never_increases() {
    for seed in 0..10 {
        let (x, _) = blobs(
            &[vec![0.0, 0.0], vec![2.0, 0.5], vec![1.0, 2.0], vec![3.0, 3.0]],
            25,
            0.8,
            seed,
        );
        let res = clustering::kmeans(x.view(), 4, seed, 100, 5).unwrap();
        assert!(res.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0]));
        assert!(res.labels.iter().all(|&l| l < 4));
        assert!(res.inertia <= *res.inertia_history.last().unwrap() + 1e-9);
    }
}

#[test]
fn three_separated_blobs_recovered_exactly() {
    let (x, y) = blobs(&[vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 5.0]], 50, 0.1, 44);
    let res = clustering::kmeans(x.view(), 3, 1, 300, 10).unwrap();
    assert_eq!(metrics::clustering_accuracy(&res.labels, &y).unwrap(), 1.0);
    let res = clustering::spectral(x.view(), 3, None, 1).unwrap();
    assert_eq!(metrics::clustering_accuracy(&res.labels, &y).unwrap(), 1.0);
}
