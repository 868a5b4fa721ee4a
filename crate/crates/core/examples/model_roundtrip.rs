//! Trains a small three-layer network, saves it, loads it back and checks
//! that the reloaded model produces bit-identical features.
//!
//! ```text
//! cargo run --example model_roundtrip
//! ```

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucrdnet::crrbm::TrainConfig;
use ucrdnet::dataio::{self, Dataset};
use ucrdnet::network::{self, UcrdNet};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let raw = Dataset::new(Array2::from_shape_fn((40, 6), |_| rng.random::<f64>() * 10.0), None).unwrap();
    let d = dataio::standardize(&raw).unwrap();
    let base = TrainConfig {
        epochs: 5,
        batch_size: 10,
        seed: 2,
        ..TrainConfig::default()
    };
    let (net, _) = network::train_network(&d, &network::default_stack(&base)).unwrap();

    let dir = std::env::temp_dir().join(format!("ucrdnet-roundtrip-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("model.ucrd");
    net.save(&path).unwrap();
    let back = UcrdNet::load(&path).unwrap();

    let size = std::fs::metadata(&path).unwrap().len();
    let same = net.transform(d.values()).unwrap() == back.transform(d.values()).unwrap();
    println!(
        "{} bytes, {} layers, {:?} input",
        size,
        back.layers().len(),
        back.input_mode()
    );
    println!("identical model: {}, identical features: {same}", back == net);
    std::fs::remove_dir_all(&dir).unwrap();
}
