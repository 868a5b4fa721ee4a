//! Independent oracles and fixtures shared by the integration tests.
//!
//! Everything here is written with plain loops over `Vec`s so that it shares
//! no code path with the library under test.

#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ucrdnet::lsh::BlockPartition;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `sigmoid(V W + b)` by scalar loops.
pub fn scalar_hidden(v: &Array2<f64>, w: &Array2<f64>, b: &[f64]) -> Vec<Vec<f64>> {
    let (n, m) = v.dim();
    let mh = w.ncols();
    let mut h = vec![vec![0.0; mh]; n];
    for s in 0..n {
        for j in 0..mh {
            let mut z = b[j];
            for i in 0..m {
                z += v[[s, i]] * w[[i, j]];
            }
            h[s][j] = sig(z);
        }
    }
    h
}

/// Block cost `Σ_kl Σ_{s,t} (h_st - u_kl)^2` by nested loops.
pub fn scalar_block_cost(h: &[Vec<f64>], rows: &[Vec<usize>], cols: &[Vec<usize>]) -> f64 {
    let mut c = 0.0;
    for r in rows {
        for l in cols {
            if r.is_empty() || l.is_empty() {
                continue;
            }
            let mut u = 0.0;
            for &s in r {
                for &t in l {
                    u += h[s][t];
                }
            }
            u /= (r.len() * l.len()) as f64;
            for &s in r {
                for &t in l {
                    c += (h[s][t] - u) * (h[s][t] - u);
                }
            }
        }
    }
    c
}

/// Surrogate cost: per-column squared deviation within each row group.
pub fn scalar_surrogate_cost(h: &[Vec<f64>], rows: &[Vec<usize>]) -> f64 {
    let mh = h[0].len();
    let mut c = 0.0;
    for r in rows.iter().filter(|r| !r.is_empty()) {
        for j in 0..mh {
            let mean = r.iter().map(|&s| h[s][j]).sum::<f64>() / r.len() as f64;
            for &s in r {
                c += (h[s][j] - mean) * (h[s][j] - mean);
            }
        }
    }
    c
}

/// Random split of `0..n` into `k` nonempty groups.
pub fn random_groups(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<usize>> {
    assert!(k >= 1 && k <= n);
    let mut owner: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        owner.swap(i, j);
    }
    let mut groups = vec![Vec::new(); k];
    for (i, &g) in owner.iter().enumerate() {
        groups[g].push(i);
    }
    groups
}

pub fn random_partition(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize, l: usize) -> BlockPartition {
    let rows = random_groups(rng, n, k);
    let cols = random_groups(rng, m, l);
    BlockPartition::new(rows, cols, n, m).unwrap()
}

/// Pair counts `(tp, fp, fn)` by enumerating every unordered pair.
pub fn brute_pairs(pred: &[usize], truth: &[usize]) -> (u64, u64, u64) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for i in 0..pred.len() {
        for j in i + 1..pred.len() {
            match (pred[i] == pred[j], truth[i] == truth[j]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    (tp, fp, fn_)
}

pub fn brute_jaccard(pred: &[usize], truth: &[usize]) -> f64 {
    let (tp, fp, fn_) = brute_pairs(pred, truth);
    if tp + fp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp + fn_) as f64
    }
}

pub fn brute_fmi(pred: &[usize], truth: &[usize]) -> f64 {
    let (tp, fp, fn_) = brute_pairs(pred, truth);
    if tp == 0 {
        return 0.0;
    }
    ((tp as f64 / (tp + fp) as f64) * (tp as f64 / (tp + fn_) as f64)).sqrt()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Best accuracy over every one-to-one map from cluster ids to class ids
/// (labels must lie in `0..5`).
pub fn brute_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let size = pred.iter().chain(truth).max().unwrap() + 1;
    assert!(size <= 5, "exhaustive search limited to 5 labels");
    let best = permutations(size)
        .iter()
        .map(|map| pred.iter().zip(truth).filter(|(p, t)| map[**p] == **t).count())
        .max()
        .unwrap();
    best as f64 / pred.len() as f64
}

/// `per` points around each center with isotropic noise `sd`.
pub fn blobs(centers: &[Vec<f64>], per: usize, sd: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let d = centers[0].len();
    let mut x = Array2::zeros((centers.len() * per, d));
    let mut y = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for p in 0..per {
            for j in 0..d {
                x[[c * per + p, j]] = center[j] + noise.sample(&mut r);
            }
            y.push(c);
        }
    }
    (x, y)
}

/// Binary data with `row_clusters` instance clusters and `feature_groups`
/// feature groups: cluster `c` switches on group `g` with probability 0.9
/// when `g == c % feature_groups` and 0.1 otherwise. Rows and columns are
/// interleaved so that groups are not contiguous.
pub fn block_binary(
    n: usize,
    m: usize,
    row_clusters: usize,
    feature_groups: usize,
    seed: u64,
) -> (Array2<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let labels: Vec<usize> = (0..n).map(|s| s % row_clusters).collect();
    let x = Array2::from_shape_fn((n, m), |(s, t)| {
        let p = if t % feature_groups == labels[s] % feature_groups {
            0.9
        } else {
            0.1
        };
        if r.random::<f64>() < p {
            1.0
        } else {
            0.0
        }
    });
    (x, labels)
}

pub const ALGORITHMS: [&str; 8] = [
    "AE-km",
    "DeepFS-km",
    "CDL-km",
    "UCRDNet-km",
    "AE-sc",
    "DeepFS-sc",
    "CDL-sc",
    "UCRDNet-sc",
];

pub const MSRA_DATASETS: [&str; 12] = [
    "banner",
    "beret",
    "bugat",
    "bugatti",
    "building",
    "vista",
    "vistawallpaper",
    "voituretuning",
    "water",
    "weddingring",
    "wing",
    "worldmap",
];

pub const UCI_DATASETS: [&str; 12] = [
    "balance",
    "biodegradation",
    "car",
    "climate",
    "credit",
    "dermatology",
    "haberman",
    "ilpd",
    "kdd",
    "ozone",
    "parkinsons",
    "secom",
];

/// Mean clustering accuracy on the MSRA-MM datasets (rows) per algorithm.
pub const MSRA_MEANS: [[f64; 8]; 12] = [
    [0.5105, 0.4364, 0.5267, 0.9372, 0.3570, 0.5093, 0.6031, 0.9349],
    [0.3893, 0.4254, 0.4304, 0.6895, 0.3642, 0.4001, 0.4063, 0.4224],
    [0.3889, 0.4005, 0.4380, 0.4297, 0.3515, 0.4947, 0.4769, 0.5748],
    [0.4161, 0.4305, 0.4390, 0.4989, 0.3639, 0.4947, 0.4769, 0.7007],
    [0.4501, 0.5159, 0.4918, 0.7146, 0.3469, 0.4812, 0.4877, 0.7058],
    [0.3842, 0.4251, 0.4030, 0.6308, 0.3567, 0.4927, 0.5424, 0.5720],
    [0.3780, 0.4251, 0.4030, 0.4906, 0.3717, 0.4927, 0.5924, 0.6320],
    [0.3788, 0.4331, 0.4020, 0.6394, 0.3481, 0.4391, 0.5631, 0.6359],
    [0.3482, 0.4140, 0.3955, 0.5108, 0.3449, 0.4638, 0.5201, 0.5705],
    [0.4091, 0.4064, 0.3987, 0.4192, 0.3456, 0.4966, 0.5054, 0.5217],
    [0.3680, 0.4151, 0.4065, 0.6192, 0.3540, 0.5456, 0.5668, 0.6121],
    [0.4834, 0.4731, 0.5077, 0.6043, 0.3455, 0.5672, 0.5455, 0.7134],
];

/// Reference aligned ranks for the MSRA-MM accuracies.
pub const MSRA_RANKS: [[f64; 8]; 12] = [
    [78.0, 93.0, 74.0, 1.0, 96.0, 81.0, 38.0, 2.0],
    [66.0, 44.0, 42.0, 3.0, 75.0, 57.0, 52.0, 45.0],
    [67.0, 59.0, 40.0, 43.0, 82.0, 28.0, 30.0, 13.0],
    [69.0, 63.0, 55.0, 31.0, 88.0, 35.0, 39.0, 4.0],
    [73.0, 41.0, 50.0, 5.0, 94.0, 58.0, 53.0, 7.0],
    [79.0, 65.0, 72.0, 11.0, 90.0, 36.0, 24.0, 17.0],
    [83.0, 64.0, 70.0, 33.0, 86.0, 32.0, 16.0, 9.0],
    [85.0, 61.0, 76.0, 8.0, 91.0, 56.0, 19.0, 10.0],
    [84.0, 51.0, 62.0, 25.0, 87.0, 34.0, 22.0, 15.0],
    [48.0, 49.0, 54.0, 46.0, 80.0, 27.0, 23.0, 18.0],
    [89.0, 71.0, 77.0, 12.0, 92.0, 26.0, 20.0, 14.0],
    [60.0, 68.0, 47.0, 21.0, 95.0, 29.0, 37.0, 6.0],
];

/// Mean clustering accuracy on the UCI datasets.
pub const UCI_MEANS: [[f64; 8]; 12] = [
    [0.3904, 0.4768, 0.4208, 0.6224, 0.4640, 0.4584, 0.4524, 0.4640],
    [0.6199, 0.6398, 0.5223, 0.6673, 0.6645, 0.6190, 0.6445, 0.6645],
    [0.3414, 0.4199, 0.4132, 0.4426, 0.5434, 0.6325, 0.6485, 0.6985],
    [0.5130, 0.5407, 0.5037, 0.5500, 0.5926, 0.8093, 0.5185, 0.9111],
    [0.6652, 0.5551, 0.5623, 0.6841, 0.6087, 0.6029, 0.5565, 0.6391],
    [0.4372, 0.2377, 0.2705, 0.4754, 0.3552, 0.2814, 0.3087, 0.4508],
    [0.6242, 0.6157, 0.5196, 0.6275, 0.7255, 0.7055, 0.6755, 0.7255],
    [0.6844, 0.6552, 0.6329, 0.8136, 0.5111, 0.6515, 0.6533, 0.6690],
    [0.5523, 0.3875, 0.6164, 0.9877, 0.6414, 0.7211, 0.6586, 0.8156],
    [0.9065, 0.7616, 0.9017, 0.9369, 0.7932, 0.8481, 0.8833, 0.9013],
    [0.6359, 0.6051, 0.5641, 0.8051, 0.7641, 0.7487, 0.7341, 0.7641],
    [0.7709, 0.7620, 0.8283, 0.9336, 0.8175, 0.5333, 0.5124, 0.7128],
];

/// Reference aligned ranks for the UCI accuracies.
pub const UCI_RANKS: [[f64; 8]; 12] = [
    [78.0, 44.0, 68.0, 7.0, 48.5, 53.0, 57.0, 48.5],
    [54.0, 43.0, 86.0, 28.0, 32.5, 55.0, 41.0, 32.5],
    [93.0, 81.0, 83.0, 76.0, 37.0, 11.0, 9.0, 5.0],
    [84.0, 77.0, 87.0, 73.0, 60.0, 4.0, 82.0, 2.0],
    [23.0, 70.0, 67.0, 17.0, 46.0, 51.0, 69.0, 35.0],
    [15.0, 88.0, 79.0, 10.0, 45.0, 74.0, 66.0, 13.0],
    [63.0, 65.0, 90.0, 61.0, 18.5, 24.0, 39.0, 18.5],
    [38.0, 47.0, 62.0, 6.0, 92.0, 52.0, 50.0, 42.0],
    [89.0, 96.0, 71.0, 1.0, 64.0, 25.0, 56.0, 8.0],
    [27.0, 85.0, 30.0, 20.0, 75.0, 58.0, 40.0, 31.0],
    [72.0, 80.0, 91.0, 12.0, 21.5, 26.0, 34.0, 21.5],
    [29.0, 36.0, 14.0, 3.0, 16.0, 94.0, 95.0, 59.0],
];

pub fn table(rows: &[[f64; 8]; 12]) -> Array2<f64> {
    Array2::from_shape_fn((12, 8), |(i, j)| rows[i][j])
}

/// Friedman aligned-ranks statistic from a rank matrix, by direct formula.
pub fn scalar_friedman_t(ranks: &[[f64; 8]; 12]) -> f64 {
    let (nd, na) = (12.0, 8.0);
    let n = nd * na;
    let mut col_sq = 0.0;
    for j in 0..8 {
        let c: f64 = (0..12).map(|i| ranks[i][j]).sum();
        col_sq += c * c;
    }
    let row_sq: f64 = ranks.iter().map(|r| r.iter().sum::<f64>().powi(2)).sum();
    (na - 1.0) * (col_sq - na * nd * nd / 4.0 * (n + 1.0) * (n + 1.0))
        / (n * (n + 1.0) * (2.0 * n + 1.0) / 6.0 - row_sq / na)
}
