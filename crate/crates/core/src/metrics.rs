//! External clustering metrics and the Friedman aligned-ranks test.
//!
//! Accuracy uses an optimal one-to-one cluster-to-class mapping (Hungarian
//! assignment on the contingency table). Jaccard and Fowlkes-Mallows are
//! pair-counting indices over co-clustered instance pairs.
//!
//! The aligned-ranks test subtracts each dataset's mean across algorithms,
//! ranks all `n_d * n_a` aligned values jointly (rank 1 = largest, midranks
//! for ties) and compares rank totals:
//!
//! ```text
//! T = (n_a - 1) [Σ_j R_.j^2 - (n_a n_d^2 / 4)(n + 1)^2]
//!     / ([n (n + 1)(2n + 1)] / 6 - (1 / n_a) Σ_i R_i.^2),   n = n_a n_d
//! ```
//!
//! with `T ~ χ²(n_a - 1)` under the null hypothesis.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label sequences differ in length: {pred} vs {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("empty label sequence")]
    Empty,
    #[error("rank table needs at least 2 datasets and 2 algorithms, got {n_d} x {n_a}")]
    Degenerate { n_d: usize, n_a: usize },
    #[error("invalid rank table: {0}")]
    InvalidRanks(String),
    #[error("non-finite metric value at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("metric table: {0}")]
    Table(String),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<(), MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    Ok(())
}

/// Compact relabeling in first-appearance order.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(*l).or_insert(next)
        })
        .collect();
    (out, ids.len())
}

/// Counts `table[p][t]` of instances in predicted cluster `p` and class `t`.
pub fn contingency(pred: &[usize], truth: &[usize]) -> Result<Array2<u64>, MetricsError> {
    check_lengths(pred, truth)?;
    let (p, np) = compact(pred);
    let (t, nt) = compact(truth);
    let mut c = Array2::zeros((np, nt));
    for (&a, &b) in p.iter().zip(&t) {
        c[[a, b]] += 1;
    }
    Ok(c)
}

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting
/// paths with potentials). Returns the column assigned to each row.
pub fn hungarian(cost: &Array2<i64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "hungarian needs a square matrix");
    // 1-based arrays; row 0 / column 0 are sentinels.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            assignment[row_of[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of instances whose cluster maps to their class under the best
/// one-to-one mapping.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    let c = contingency(pred, truth)?;
    let size = c.nrows().max(c.ncols());
    let cost = Array2::from_shape_fn((size, size), |(i, j)| {
        if i < c.nrows() && j < c.ncols() {
            -(c[[i, j]] as i64)
        } else {
            0
        }
    });
    let matched: i64 = hungarian(&cost).iter().enumerate().map(|(i, &j)| -cost[[i, j]]).sum();
    Ok(matched as f64 / pred.len() as f64)
}

/// Counts over unordered instance pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairConfusion {
    /// Together in both partitions.
    pub tp: u64,
    /// Together in the prediction only.
    pub fp: u64,
    /// Together in the ground truth only.
    pub fn_: u64,
    pub tn: u64,
}

impl PairConfusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

pub fn pair_confusion(pred: &[usize], truth: &[usize]) -> Result<PairConfusion, MetricsError> {
    let c = contingency(pred, truth)?;
    let tp: u64 = c.iter().map(|&x| pairs(x)).sum();
    let same_pred: u64 = c.sum_axis(Axis(1)).iter().map(|&x| pairs(x)).sum();
    let same_truth: u64 = c.sum_axis(Axis(0)).iter().map(|&x| pairs(x)).sum();
    let total = pairs(pred.len() as u64);
    let fp = same_pred - tp;
    let fn_ = same_truth - tp;
    Ok(PairConfusion {
        tp,
        fp,
        fn_,
        tn: total - tp - fp - fn_,
    })
}

/// `TP / (TP + FP + FN)`, 1 when neither partition has a co-clustered pair.
pub fn jaccard_index(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let c = pair_confusion(pred, truth)?;
    let denom = c.tp + c.fp + c.fn_;
    Ok(if denom == 0 { 1.0 } else { c.tp as f64 / denom as f64 })
}

/// `sqrt(TP / (TP + FP) * TP / (TP + FN))`, 0 when `TP = 0`.
pub fn fmi(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let c = pair_confusion(pred, truth)?;
    if c.tp == 0 {
        return Ok(0.0);
    }
    let precision = c.tp as f64 / (c.tp + c.fp) as f64;
    let recall = c.tp as f64 / (c.tp + c.fn_) as f64;
    Ok((precision * recall).sqrt())
}

/// Aligned ranks of an `n_d x n_a` table (datasets by algorithms).
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    ranks: Array2<f64>,
    aligned: Option<Array2<f64>>,
}

/// Decimal places kept when comparing aligned values for ties, so that
/// values equal in the source table tie exactly after the mean subtraction.
const TIE_DECIMALS: f64 = 1e12;

impl RankTable {
    /// Wraps a precomputed rank matrix after checking its range and total.
    pub fn from_ranks(ranks: Array2<f64>) -> Result<Self, MetricsError> {
        let (n_d, n_a) = ranks.dim();
        if n_d < 2 || n_a < 2 {
            return Err(MetricsError::Degenerate { n_d, n_a });
        }
        let n = (n_d * n_a) as f64;
        if let Some(r) = ranks.iter().find(|r| !(1.0..=n).contains(*r)) {
            return Err(MetricsError::InvalidRanks(format!("rank {r} outside [1, {n}]")));
        }
        let total: f64 = ranks.sum();
        let expected = n * (n + 1.0) / 2.0;
        if (total - expected).abs() > 1e-6 {
            return Err(MetricsError::InvalidRanks(format!(
                "ranks sum to {total}, expected {expected}"
            )));
        }
        Ok(RankTable { ranks, aligned: None })
    }

    pub fn ranks(&self) -> ArrayView2<'_, f64> {
        self.ranks.view()
    }

    /// Aligned values, when the table was built by [`aligned_ranks`].
    pub fn aligned(&self) -> Option<ArrayView2<'_, f64>> {
        self.aligned.as_ref().map(|a| a.view())
    }

    pub fn n_datasets(&self) -> usize {
        self.ranks.nrows()
    }

    pub fn n_algorithms(&self) -> usize {
        self.ranks.ncols()
    }

    /// Per-dataset rank totals.
    pub fn row_totals(&self) -> Array1<f64> {
        self.ranks.sum_axis(Axis(1))
    }

    /// Per-algorithm rank totals.
    pub fn col_totals(&self) -> Array1<f64> {
        self.ranks.sum_axis(Axis(0))
    }
}

/// Midranks of `values`, rank 1 for the largest.
pub fn descending_midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1 ..= end.
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    ranks
}

/// Aligns each row on its mean and ranks all cells jointly.
pub fn aligned_ranks(values: ArrayView2<'_, f64>) -> Result<RankTable, MetricsError> {
    let (n_d, n_a) = values.dim();
    if n_d < 2 || n_a < 2 {
        return Err(MetricsError::Degenerate { n_d, n_a });
    }
    if let Some(((i, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(MetricsError::NonFinite(i, j));
    }
    let means = values.mean_axis(Axis(1)).expect("nonempty rows");
    let aligned = Array2::from_shape_fn((n_d, n_a), |(i, j)| values[[i, j]] - means[i]);
    let keys: Vec<f64> = aligned.iter().map(|a| (a * TIE_DECIMALS).round()).collect();
    let ranks = Array2::from_shape_vec((n_d, n_a), descending_midranks(&keys)).expect("shape");
    Ok(RankTable {
        ranks,
        aligned: Some(aligned),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FriedmanResult {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    /// Every aligned value tied (or a non-positive denominator): `T = 0`,
    /// `p = 1`.
    pub degenerate: bool,
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(df as f64 / 2.0, x / 2.0)
    }
}

pub fn friedman_aligned(rt: &RankTable) -> FriedmanResult {
    let n_d = rt.n_datasets() as f64;
    let n_a = rt.n_algorithms() as f64;
    let n = n_a * n_d;
    let df = rt.n_algorithms() - 1;
    let first = rt.ranks[[0, 0]];
    let all_tied = rt.ranks.iter().all(|&r| r == first);
    let col_sq: f64 = rt.col_totals().iter().map(|c| c * c).sum();
    let row_sq: f64 = rt.row_totals().iter().map(|r| r * r).sum();
    let num = (n_a - 1.0) * (col_sq - (n_a * n_d * n_d / 4.0) * (n + 1.0) * (n + 1.0));
    let den = n * (n + 1.0) * (2.0 * n + 1.0) / 6.0 - row_sq / n_a;
    if all_tied || den <= 0.0 {
        return FriedmanResult {
            t: 0.0,
            p: 1.0,
            df,
            degenerate: true,
        };
    }
    let t = num / den;
    FriedmanResult {
        t,
        p: chi2_sf(t, df),
        df,
        degenerate: false,
    }
}

/// Metric values of several algorithms over several datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub datasets: Vec<String>,
    pub algorithms: Vec<String>,
    /// `datasets.len() x algorithms.len()`.
    pub values: Array2<f64>,
}

impl MetricTable {
    pub fn new(datasets: Vec<String>, algorithms: Vec<String>, values: Array2<f64>) -> Result<Self, MetricsError> {
        if values.dim() != (datasets.len(), algorithms.len()) {
            return Err(MetricsError::Table(format!(
                "{} datasets x {} algorithms but values are {:?}",
                datasets.len(),
                algorithms.len(),
                values.dim()
            )));
        }
        Ok(MetricTable {
            datasets,
            algorithms,
            values,
        })
    }

    /// Reads `dataset,<alg>,<alg>,...` headed CSV with one row per dataset.
    pub fn read_csv(path: &Path) -> Result<Self, MetricsError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let header = r.headers()?.clone();
        if header.len() < 2 {
            return Err(MetricsError::Table(
                "header needs a dataset column and at least one algorithm".into(),
            ));
        }
        let algorithms: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut datasets = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(MetricsError::Table(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    rec.len(),
                    header.len()
                )));
            }
            datasets.push(rec[0].to_string());
            for (j, cell) in rec.iter().skip(1).enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    MetricsError::Table(format!("row {}, column {}: cannot parse {cell:?}", i + 1, j + 2))
                })?;
                values.push(v);
            }
        }
        let values = Array2::from_shape_vec((datasets.len(), algorithms.len()), values).expect("row lengths checked");
        MetricTable::new(datasets, algorithms, values)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MetricsError> {
        write_matrix(path, &self.datasets, &self.algorithms, self.values.view())
    }
}

/// Writes a headed `dataset,<col>,...` CSV of a matrix.
pub fn write_matrix(path: &Path, rows: &[String], cols: &[String], m: ArrayView2<'_, f64>) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["dataset".to_string()];
    header.extend(cols.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in rows.iter().zip(m.rows()) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn accuracy_examples() {
        assert_eq!(clustering_accuracy(&[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.5);
        assert_eq!(clustering_accuracy(&[0, 1, 2, 3], &[0, 0, 0, 0]).unwrap(), 0.25);
        assert!(matches!(clustering_accuracy(&[], &[]), Err(MetricsError::Empty)));
        assert!(matches!(
            clustering_accuracy(&[0], &[0, 1]),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn hungarian_small() {
        let cost = array![[4, 1, 3], [2, 0, 5], [3, 2, 2]];
        let a = hungarian(&cost);
        let total: i64 = a.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn pair_confusion_examples() {
        let c = pair_confusion(&[0, 0, 1, 1], &[0, 0, 0, 1]).unwrap();
        assert_eq!(
            c,
            PairConfusion {
                tp: 1,
                fp: 1,
                fn_: 2,
                tn: 2
            }
        );
        let c = pair_confusion(&[0, 1, 2], &[0, 1, 2]).unwrap();
        assert_eq!(
            c,
            PairConfusion {
                tp: 0,
                fp: 0,
                fn_: 0,
                tn: 3
            }
        );
        let c = pair_confusion(&[3, 3, 5], &[1, 1, 0]).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
    }

    #[test]
    fn jaccard_and_fmi_examples() {
        let (truth, pred) = ([0, 0, 0, 1], [0, 0, 1, 1]);
        assert_eq!(jaccard_index(&pred, &truth).unwrap(), 0.25);
        assert!((fmi(&pred, &truth).unwrap() - 0.408_248_290_463_863).abs() < 1e-12);
        assert_eq!(jaccard_index(&[2, 2, 7], &[0, 0, 1]).unwrap(), 1.0);
        assert_eq!(fmi(&[2, 2, 7], &[0, 0, 1]).unwrap(), 1.0);
        assert_eq!(jaccard_index(&[0, 1, 2], &[0, 0, 0]).unwrap(), 0.0);
        assert_eq!(fmi(&[0, 1, 2], &[0, 0, 0]).unwrap(), 0.0);
        assert_eq!(jaccard_index(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn midranks() {
        assert_eq!(descending_midranks(&[3.0, 1.0, 2.0, 2.0]), vec![1.0, 4.0, 2.5, 2.5]);
        assert_eq!(descending_midranks(&[0.0; 4]), vec![2.5; 4]);
    }

    #[test]
    fn all_equal_table_is_degenerate() {
        let rt = aligned_ranks(Array2::from_elem((3, 4), 0.7).view()).unwrap();
        assert!(rt.ranks().iter().all(|&r| r == 6.5));
        let f = friedman_aligned(&rt);
        assert_eq!((f.t, f.p, f.degenerate), (0.0, 1.0, true));
        assert!(matches!(
            aligned_ranks(Array2::zeros((1, 3)).view()),
            Err(MetricsError::Degenerate { .. })
        ));
    }

    #[test]
    fn row_offsets_do_not_change_ranks() {
        let v = array![[0.1, 0.5, 0.3], [0.9, 0.2, 0.4], [0.6, 0.6, 0.1]];
        let shifted = &v + &array![[10.0], [-3.0], [0.25]];
        assert_eq!(
            aligned_ranks(v.view()).unwrap().ranks(),
            aligned_ranks(shifted.view()).unwrap().ranks()
        );
    }

    #[test]
    fn chi2_tail_matches_reference() {
        // Reference values from 40-digit arbitrary precision.
        for (x, df, p) in [
            (67.626, 7, 4.453_031_853_030_893_6e-12),
            (68.262, 7, 3.314_442_980_693_784_7e-12),
            (26.273, 7, 4.501_078_238_239_421_6e-4),
            (2.0, 2, 0.367_879_441_171_442_3),
            (6.6, 5, 0.252_128_150_772_664_8),
        ] {
            let got = chi2_sf(x, df);
            assert!(
                (got - p).abs() <= 1e-12 && (got - p).abs() <= 1e-9 * p,
                "{x} {df}: {got} vs {p}"
            );
        }
        assert_eq!(chi2_sf(0.0, 3), 1.0);
    }

    #[test]
    fn rank_table_validation() {
        assert!(RankTable::from_ranks(array![[1.0, 2.0], [3.0, 4.0]]).is_ok());
        assert!(RankTable::from_ranks(array![[1.0, 2.0], [3.0, 5.0]]).is_err());
        assert!(RankTable::from_ranks(array![[0.0, 2.0], [4.0, 4.0]]).is_err());
    }

    #[test]
    fn metric_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let t = MetricTable::new(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into(), "z".into()],
            array![[0.1, 0.25, 1.0 / 3.0], [0.5, 0.0, 0.75]],
        )
        .unwrap();
        t.write_csv(&path).unwrap();
        assert!(std::fs::read_to_string(&path)
            .unwrap()
            .starts_with("dataset,x,y,z\na,0.1,0.25,"));
        assert_eq!(MetricTable::read_csv(&path).unwrap(), t);
    }
}
