//! K-means (Lloyd iterations, k-means++ seeding) and normalized spectral
//! clustering on feature matrices.

use std::cmp::Ordering;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k = {k} outside [{min}, {n}]")]
    KOutOfRange { k: usize, min: usize, n: usize },
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("non-finite value in input at row {0}")]
    NonFinite(usize),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    /// Sum of squared distances to the assigned centroid (for spectral
    /// clustering, measured in the embedding).
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each Lloyd assignment step of the winning run.
    pub inertia_history: Vec<f64>,
    /// Set when every input row is identical, so no partition is meaningful
    /// and all rows get label 0.
    pub degenerate: bool,
}

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_N_INIT: usize = 10;

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_input(x: ArrayView2<'_, f64>, k: usize, min_k: usize) -> Result<(), ClusterError> {
    let n = x.nrows();
    if k < min_k || k > n {
        return Err(ClusterError::KOutOfRange { k, min: min_k, n });
    }
    if let Some(row) = x.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(ClusterError::NonFinite(row));
    }
    Ok(())
}

fn all_rows_identical(x: ArrayView2<'_, f64>) -> bool {
    let first = x.row(0);
    x.rows().into_iter().all(|r| r == first)
}

/// Best of `n_init` Lloyd runs, each seeded by k-means++ with the seed
/// `derive_seed(seed, "kmeans.{r}")`. Ties in inertia go to the earlier run.
pub fn kmeans(
    x: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
    n_init: usize,
) -> Result<ClusterResult, ClusterError> {
    check_input(x, k, 1)?;
    let mut best: Option<ClusterResult> = None;
    for r in 0..n_init.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("kmeans.{r}")));
        let run = lloyd(x, plus_plus(x, k, &mut rng), max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one run");
    best.degenerate = all_rows_identical(x);
    Ok(best)
}

fn plus_plus<R: Rng>(x: ArrayView2<'_, f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = x.nrows();
    let mut centers = Array2::zeros((k, x.ncols()));
    centers.row_mut(0).assign(&x.row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = x.rows().into_iter().map(|r| sq_dist(r, centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive total"))
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&x.row(pick));
        for (i, r) in x.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, centers.row(c)));
        }
    }
    centers
}

fn nearest(row: ArrayView1<'_, f64>, centers: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.rows().into_iter().enumerate() {
        let d = sq_dist(row, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn update_centers(x: ArrayView2<'_, f64>, labels: &[usize], centers: &mut Array2<f64>) -> Vec<usize> {
    let mut counts = vec![0usize; centers.nrows()];
    let mut sums = Array2::<f64>::zeros(centers.dim());
    for (row, &l) in x.rows().into_iter().zip(labels) {
        counts[l] += 1;
        sums.row_mut(l).scaled_add(1.0, &row);
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            centers.row_mut(c).assign(&(&sums.row(c) / cnt as f64));
        }
    }
    counts
}

fn lloyd(x: ArrayView2<'_, f64>, mut centers: Array2<f64>, max_iter: usize) -> ClusterResult {
    let n = x.nrows();
    let k = centers.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter.max(1) {
        iterations += 1;
        let mut changed = false;
        for (i, row) in x.rows().into_iter().enumerate() {
            let (c, d) = nearest(row, &centers);
            changed |= labels[i] != c;
            labels[i] = c;
            dists[i] = d;
        }
        repair_empty(x, &mut labels, &mut dists, &mut centers);
        history.push(dists.iter().sum());
        if !changed && iterations > 1 {
            break;
        }
        update_centers(x, &labels, &mut centers);
    }
    update_centers(x, &labels, &mut centers);
    let inertia = x
        .rows()
        .into_iter()
        .zip(&labels)
        .map(|(r, &l)| sq_dist(r, centers.row(l)))
        .sum();
    debug_assert!(labels.iter().all(|&l| l < k));
    ClusterResult {
        labels,
        inertia,
        iterations,
        inertia_history: history,
        degenerate: false,
    }
}

/// Moves the point farthest from its centroid into each empty cluster, as
/// long as some point lies strictly away from its centroid. Only points whose
/// cluster keeps at least one other member are moved.
fn repair_empty(x: ArrayView2<'_, f64>, labels: &mut [usize], dists: &mut [f64], centers: &mut Array2<f64>) {
    let k = centers.nrows();
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let far = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1 && dists[i] > 0.0)
            .max_by(|&a, &b| {
                dists[a]
                    .partial_cmp(&dists[b])
                    .unwrap_or(Ordering::Equal)
                    .then(b.cmp(&a))
            });
        let Some(i) = far else { return };
        counts[labels[i]] -= 1;
        counts[c] = 1;
        labels[i] = c;
        dists[i] = 0.0;
        centers.row_mut(c).assign(&x.row(i));
    }
}

/// Median of all pairwise Euclidean distances; when that is 0 (more than
/// half of the pairs coincide) the median of the positive distances.
/// `None` when every row is identical.
pub fn median_pairwise_distance(x: ArrayView2<'_, f64>) -> Option<f64> {
    let n = x.nrows();
    let mut d: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for s in 0..n {
        for u in s + 1..n {
            d.push(sq_dist(x.row(s), x.row(u)).sqrt());
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    };
    if d.is_empty() {
        return None;
    }
    let med = median(&mut d);
    if med > 0.0 {
        return Some(med);
    }
    let mut pos: Vec<f64> = d.into_iter().filter(|&v| v > 0.0).collect();
    if pos.is_empty() {
        None
    } else {
        Some(median(&mut pos))
    }
}

/// RBF affinity `exp(-|x_s - x_u|^2 / (2 sigma^2))` with the diagonal kept.
pub fn rbf_affinity(x: ArrayView2<'_, f64>, sigma: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let denom = 2.0 * sigma * sigma;
    let mut a = DMatrix::zeros(n, n);
    for s in 0..n {
        for u in s..n {
            let v = (-sq_dist(x.row(s), x.row(u)) / denom).exp();
            a[(s, u)] = v;
            a[(u, s)] = v;
        }
    }
    a
}

/// `D^{-1/2} A D^{-1/2}` for the RBF affinity with zeroed diagonal. Rows
/// with zero degree stay zero.
pub fn normalized_affinity(x: ArrayView2<'_, f64>, sigma: f64) -> DMatrix<f64> {
    let mut a = rbf_affinity(x, sigma);
    a.fill_diagonal(0.0);
    let inv_sqrt: Vec<f64> = a
        .row_iter()
        .map(|r| {
            let d: f64 = r.iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    for s in 0..a.nrows() {
        for u in 0..a.ncols() {
            a[(s, u)] *= inv_sqrt[s] * inv_sqrt[u];
        }
    }
    a
}

/// Rows of the `k` leading eigenvectors of `m`, each normalized to unit
/// length (zero rows left as zero).
pub fn spectral_embedding(m: &DMatrix<f64>, k: usize) -> Array2<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let n = m.nrows();
    let mut emb = Array2::from_shape_fn((n, k), |(s, c)| eig.eigenvectors[(s, order[c])]);
    for mut row in emb.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    emb
}

/// Normalized spectral clustering. `sigma` defaults to
/// [`median_pairwise_distance`]. The embedding is clustered by
/// [`kmeans`] with seed `derive_seed(seed, "spectral.kmeans")`.
pub fn spectral(
    x: ArrayView2<'_, f64>,
    k: usize,
    sigma: Option<f64>,
    seed: u64,
) -> Result<ClusterResult, ClusterError> {
    check_input(x, k, 2)?;
    if let Some(s) = sigma.filter(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(ClusterError::InvalidSigma(s));
    }
    let Some(default_sigma) = median_pairwise_distance(x) else {
        return Ok(ClusterResult {
            labels: vec![0; x.nrows()],
            inertia: 0.0,
            iterations: 0,
            inertia_history: Vec::new(),
            degenerate: true,
        });
    };
    let m = normalized_affinity(x, sigma.unwrap_or(default_sigma));
    let emb = spectral_embedding(&m, k);
    kmeans(
        emb.view(),
        k,
        derive_seed(seed, "spectral.kmeans"),
        DEFAULT_MAX_ITER,
        DEFAULT_N_INIT,
    )
}

/// Writes `row,label` lines under a header.
pub fn write_labels(path: &Path, labels: &[usize]) -> Result<(), ClusterError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "label"])?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
