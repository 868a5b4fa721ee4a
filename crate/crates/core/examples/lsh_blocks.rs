//! Groups the rows and columns of a block-structured binary matrix with
//! MinHash and prints the resulting block partition.
//!
//! ```text
//! cargo run --example lsh_blocks
//! ```

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucrdnet::dataio::{Dataset, Preprocessing};
use ucrdnet::lsh::{self, BlockPartition};

fn main() {
    // Two row clusters, each switching on its own half of the features.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Array2::from_shape_fn((12, 8), |(i, j)| {
        let on = (i < 6) == (j < 4);
        let p = if on { 0.9 } else { 0.05 };
        f64::from(u8::from(rng.random::<f64>() < p))
    });
    let d = Dataset::with_preprocessing(x, None, Preprocessing::UnitInterval).unwrap();

    let part = BlockPartition::from_lsh(&d, 2, 2, 64, 1).unwrap();
    println!("row groups: {:?}", part.row_groups());
    println!("col groups: {:?}", part.col_groups());
    print!("{}", part.to_text());

    let a = [0usize, 1, 2, 3].into_iter().collect();
    let b = [2usize, 3, 4].into_iter().collect();
    let est = lsh::minhash_signature(&a, 256, 3).agreement(&lsh::minhash_signature(&b, 256, 3));
    println!(
        "jaccard {:.3}, minhash estimate {est:.3}",
        lsh::jaccard_similarity(&a, &b)
    );
}
