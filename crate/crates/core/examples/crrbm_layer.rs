//! Trains one collaborative layer on block-structured binary data and
//! compares it with a plain CD-1 layer (eta = 1) under the same partition.
//!
//! ```text
//! cargo run --example crrbm_layer
//! ```

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucrdnet::crrbm::{self, TrainConfig};
use ucrdnet::dataio::{Dataset, Preprocessing};
use ucrdnet::lsh::BlockPartition;

fn block_data(n: usize, m: usize, groups: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, m), |(i, j)| {
        let p = if i % groups == j * groups / m { 0.9 } else { 0.1 };
        f64::from(u8::from(rng.random::<f64>() < p))
    })
}

fn main() {
    let d = Dataset::with_preprocessing(block_data(200, 32, 4, 1), None, Preprocessing::UnitInterval).unwrap();
    let part = BlockPartition::from_lsh(&d, 4, 4, 64, 2).unwrap();
    let base = TrainConfig {
        epochs: 20,
        batch_size: 20,
        seed: 3,
        ..TrainConfig::default()
    };

    println!("{:>5} {:>10} {:>10} {:>10}", "eta", "epoch", "recon", "C~ data");
    for eta in [0.5, 1.0] {
        let cfg = TrainConfig { eta, ..base.clone() };
        let (_, report) = crrbm::train(&d, &cfg, &part).unwrap();
        for (t, e) in report.epochs.iter().enumerate().filter(|(t, _)| t % 5 == 4) {
            println!(
                "{eta:>5} {:>10} {:>10.4} {:>10.3}",
                t + 1,
                e.reconstruction_error,
                e.cost.data_surrogate
            );
        }
        println!("      ops: {:?}", report.counts);
    }
}
