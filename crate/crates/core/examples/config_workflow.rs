//! Drives the `train`, `evaluate` and `benchmark` commands from a config
//! file, the same way the `ucrdnet` binary does.
//!
//! ```text
//! cargo run --example config_workflow
//! ```

use std::fmt::Write as _;
use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ucrdnet::cli;

fn main() {
    let dir = std::env::temp_dir().join(format!("ucrdnet-workflow-{}", std::process::id()));
    fs::create_dir_all(dir.join("bench")).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.4).unwrap();
    let mut csv = String::from("x0,x1,x2,class\n");
    for i in 0..60 {
        let c = i % 3;
        let row: Vec<String> = (0..3)
            .map(|j| format!("{:.4}", if j == c { 3.0 } else { 0.0 } + noise.sample(&mut rng)))
            .collect();
        writeln!(csv, "{},c{c}", row.join(",")).unwrap();
    }
    fs::write(dir.join("bench/blobs.data"), csv).unwrap();

    let conf = "\
[data]
path = blobs.data
header = true
label_column = 3

[network]
epochs = 10
batch_size = 12

[clustering]
algorithms = kmeans, spectral

[run]
seed = 7
repeats = 3
output = out
";
    fs::write(dir.join("bench/blobs.conf"), conf).unwrap();
    fs::write(dir.join("bench/blobs2.conf"), conf.replace("seed = 7", "seed = 8")).unwrap();

    let path = |p: &str| dir.join(p).to_string_lossy().into_owned();
    let steps: [Vec<String>; 3] = [
        vec!["train".into(), "--config".into(), path("bench/blobs.conf")],
        vec![
            "evaluate".into(),
            "--model".into(),
            path("bench/out/model.ucrd"),
            "--config".into(),
            path("bench/blobs.conf"),
        ],
        vec![
            "benchmark".into(),
            "--config".into(),
            path("bench"),
            "--out".into(),
            path("report"),
            "--repeats".into(),
            "2".into(),
        ],
    ];
    for args in steps {
        println!("$ ucrdnet {}", args[0]);
        let code = cli::run(std::iter::once("ucrdnet".to_string()).chain(args));
        assert_eq!(code, 0);
    }
    print!("{}", fs::read_to_string(dir.join("bench/out/evaluation.csv")).unwrap());
    print!("{}", fs::read_to_string(dir.join("report/summary.csv")).unwrap());
    fs::remove_dir_all(&dir).unwrap();
}
