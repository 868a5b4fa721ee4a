//! Clusters three Gaussian blobs with k-means and spectral clustering and
//! scores both against the generating labels.
//!
//! ```text
//! cargo run --example cluster_blobs
//! ```

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ucrdnet::{clustering, metrics};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let centers = [[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]];
    let truth: Vec<usize> = (0..150).map(|i| i / 50).collect();
    let x = Array2::from_shape_fn((150, 2), |(i, j)| centers[truth[i]][j] + noise.sample(&mut rng));

    let km = clustering::kmeans(x.view(), 3, 1, clustering::DEFAULT_MAX_ITER, clustering::DEFAULT_N_INIT).unwrap();
    let sc = clustering::spectral(x.view(), 3, None, 1).unwrap();
    println!(
        "sigma (median distance): {:.3}",
        clustering::median_pairwise_distance(x.view()).unwrap()
    );
    for (name, r) in [("kmeans", &km), ("spectral", &sc)] {
        println!(
            "{name:>8}: accuracy {:.3}  jaccard {:.3}  fmi {:.3}  iterations {}",
            metrics::clustering_accuracy(&r.labels, &truth).unwrap(),
            metrics::jaccard_index(&r.labels, &truth).unwrap(),
            metrics::fmi(&r.labels, &truth).unwrap(),
            r.iterations,
        );
    }
}
