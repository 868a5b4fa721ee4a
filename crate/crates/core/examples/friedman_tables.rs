//! Friedman aligned-ranks comparison of algorithms over datasets.
//!
//! With no argument a small built-in score grid is used; otherwise the
//! argument is a metric table CSV (`dataset,alg1,alg2,...`).
//!
//! ```text
//! cargo run --example friedman_tables [-- scores.csv]
//! ```

use std::path::Path;

use ndarray::array;
use ucrdnet::metrics::{self, MetricTable};

fn main() {
    let table = match std::env::args().nth(1) {
        Some(path) => MetricTable::read_csv(Path::new(&path)).expect("metric table"),
        None => MetricTable::new(
            ["iris", "wine", "seeds", "glass", "yeast"].map(String::from).to_vec(),
            ["kmeans", "spectral", "deep-kmeans"].map(String::from).to_vec(),
            array![
                [0.89, 0.90, 0.93],
                [0.70, 0.68, 0.95],
                [0.89, 0.90, 0.91],
                [0.42, 0.45, 0.51],
                [0.40, 0.39, 0.43],
            ],
        )
        .unwrap(),
    };

    let rt = metrics::aligned_ranks(table.values.view()).unwrap();
    let aligned = rt.aligned().unwrap();
    print!("{:>10}", "");
    for a in &table.algorithms {
        print!(" {a:>18}");
    }
    println!();
    for (i, d) in table.datasets.iter().enumerate() {
        print!("{d:>10}");
        for j in 0..table.algorithms.len() {
            print!(" {:>+9.4} ({:>5.1})", aligned[[i, j]], rt.ranks()[[i, j]]);
        }
        println!();
    }
    print!("{:>10}", "total");
    for t in rt.col_totals() {
        print!(" {t:>18.1}");
    }
    println!();

    let f = metrics::friedman_aligned(&rt);
    println!("T = {:.3}, df = {}, p = {:.3e}", f.t, f.df, f.p);
}
