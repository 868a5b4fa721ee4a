//! Locality-sensitive hashing for the collaborative block structure.
//!
//! Rows (instances) and columns (features) of the input matrix are grouped
//! separately: MinHash over median-binarized sets for binary-mode data and
//! sign random projections for real-valued data. Items are first bucketed by
//! their full signature, then buckets are merged by average signature
//! agreement or split by fresh hash bits until exactly the requested number
//! of groups remains. Every step is deterministic given the seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::dataio::{Dataset, Preprocessing};
use crate::seed::derive_seed;

/// Default signature length.
pub const DEFAULT_N_HASHES: usize = 64;

/// 2^61 - 1, the modulus of the universal hash family.
const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LshError {
    #[error("requested {requested} groups for {items} items")]
    GroupCount { requested: usize, items: usize },
    #[error("n_hashes must be at least 1")]
    NoHashes,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("partition file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignatureScheme {
    MinHash,
    SignProjection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub values: Vec<u64>,
    pub scheme: SignatureScheme,
}

impl Signature {
    /// Fraction of positions holding equal values.
    pub fn agreement(&self, other: &Signature) -> f64 {
        let same = self.values.iter().zip(&other.values).filter(|(a, b)| a == b).count();
        same as f64 / self.values.len().max(1) as f64
    }
}

/// splitmix64 finalizer. Item ids are usually small consecutive integers,
/// for which a bare linear hash is far from min-wise independent.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded family of `(a mix(x) + b) mod p` hashes, `p = 2^61 - 1`.
#[derive(Debug, Clone)]
pub struct MinHasher {
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(n_hashes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..n_hashes)
            .map(|_| (rng.random_range(1..MERSENNE_61), rng.random_range(0..MERSENNE_61)))
            .collect();
        MinHasher { coeffs }
    }

    fn hash(a: u64, b: u64, x: u64) -> u64 {
        let x = mix64(x) % MERSENNE_61;
        ((a as u128 * x as u128 + b as u128) % MERSENNE_61 as u128) as u64
    }

    /// Minimum hash per position; an empty set yields `u64::MAX` everywhere.
    pub fn signature<I: IntoIterator<Item = usize>>(&self, items: I) -> Signature {
        let mut values = vec![u64::MAX; self.coeffs.len()];
        for x in items {
            for (slot, &(a, b)) in values.iter_mut().zip(&self.coeffs) {
                *slot = (*slot).min(Self::hash(a, b, x as u64));
            }
        }
        Signature {
            values,
            scheme: SignatureScheme::MinHash,
        }
    }
}

/// Seeded random hyperplanes through the origin.
#[derive(Debug, Clone)]
pub struct SignProjector {
    /// `n_hashes x dim`, each row a unit direction.
    directions: Array2<f64>,
}

impl SignProjector {
    pub fn new(dim: usize, n_hashes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut directions = Array2::from_shape_simple_fn((n_hashes, dim), || rng.sample::<f64, _>(StandardNormal));
        for mut row in directions.axis_iter_mut(Axis(0)) {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row /= norm;
            }
        }
        SignProjector { directions }
    }

    /// Bit `t` is 1 iff the dot product with direction `t` is positive.
    pub fn signature(&self, row: ArrayView1<'_, f64>) -> Signature {
        let values = self
            .directions
            .axis_iter(Axis(0))
            .map(|d| u64::from(d.dot(&row) > 0.0))
            .collect();
        Signature {
            values,
            scheme: SignatureScheme::SignProjection,
        }
    }
}

pub fn minhash_signature(item_set: &BTreeSet<usize>, n_hashes: usize, seed: u64) -> Signature {
    MinHasher::new(n_hashes, seed).signature(item_set.iter().copied())
}

pub fn sign_projection_signature(row: &[f64], n_hashes: usize, seed: u64) -> Signature {
    SignProjector::new(row.len(), n_hashes, seed).signature(ArrayView1::from(row))
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets counted as identical.
pub fn jaccard_similarity(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// 1 where a value strictly exceeds its column median, else 0.
pub fn binarize_for_hash(values: ArrayView2<'_, f64>) -> Array2<u8> {
    let mut out = Array2::zeros(values.dim());
    for (j, col) in values.axis_iter(Axis(1)).enumerate() {
        let mut sorted = col.to_vec();
        sorted.sort_by(f64::total_cmp);
        let med = median(&sorted);
        for (i, &v) in col.iter().enumerate() {
            out[[i, j]] = u8::from(v > med);
        }
    }
    out
}

/// K row groups and L column groups covering a matrix.
///
/// Partitions built by [`BlockPartition::new`] or LSH have nonempty groups.
/// [`BlockPartition::restrict_rows`] produces a mini-batch view in which row
/// groups may be empty; empty groups contribute nothing to block statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    row_groups: Vec<Vec<usize>>,
    col_groups: Vec<Vec<usize>>,
    n_rows: usize,
    n_cols: usize,
}

fn validate_groups(groups: &[Vec<usize>], n: usize, what: &str) -> Result<(), LshError> {
    if groups.is_empty() || groups.len() > n {
        return Err(LshError::InvalidPartition(format!(
            "{} {what} groups for {n} {what}s",
            groups.len()
        )));
    }
    let mut seen = vec![false; n];
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(LshError::InvalidPartition(format!("{what} group {g} is empty")));
        }
        for &i in members {
            if i >= n {
                return Err(LshError::InvalidPartition(format!("{what} index {i} out of range")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(LshError::InvalidPartition(format!("{what} {i} appears twice")));
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(LshError::InvalidPartition(format!("{what} {i} is not covered")));
    }
    Ok(())
}

impl BlockPartition {
    pub fn new(
        row_groups: Vec<Vec<usize>>,
        col_groups: Vec<Vec<usize>>,
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self, LshError> {
        validate_groups(&row_groups, n_rows, "row")?;
        validate_groups(&col_groups, n_cols, "column")?;
        Ok(BlockPartition {
            row_groups,
            col_groups,
            n_rows,
            n_cols,
        })
    }

    /// One row group and one column group.
    pub fn single_block(n_rows: usize, n_cols: usize) -> Self {
        BlockPartition {
            row_groups: vec![(0..n_rows).collect()],
            col_groups: vec![(0..n_cols).collect()],
            n_rows,
            n_cols,
        }
    }

    /// LSH row and column partition of a dataset.
    pub fn from_lsh(d: &Dataset, k: usize, l: usize, n_hashes: usize, seed: u64) -> Result<Self, LshError> {
        let rows = partition_rows(d, k, n_hashes, derive_seed(seed, "lsh.rows"))?;
        let cols = partition_cols(d, l, n_hashes, derive_seed(seed, "lsh.cols"))?;
        BlockPartition::new(rows, cols, d.n_rows(), d.n_cols())
    }

    pub fn row_groups(&self) -> &[Vec<usize>] {
        &self.row_groups
    }

    pub fn col_groups(&self) -> &[Vec<usize>] {
        &self.col_groups
    }

    pub fn k(&self) -> usize {
        self.row_groups.len()
    }

    pub fn l(&self) -> usize {
        self.col_groups.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Group id of every row.
    pub fn row_assignment(&self) -> Vec<usize> {
        assignment(&self.row_groups, self.n_rows)
    }

    /// Group id of every column.
    pub fn col_assignment(&self) -> Vec<usize> {
        assignment(&self.col_groups, self.n_cols)
    }

    /// Restricts row groups to `rows`, renumbering them to batch-local
    /// positions (`rows[p]` becomes `p`). Keeps all K groups, some possibly
    /// empty.
    pub fn restrict_rows(&self, rows: &[usize]) -> BlockPartition {
        let owner = self.row_assignment();
        let mut row_groups = vec![Vec::new(); self.k()];
        for (p, &r) in rows.iter().enumerate() {
            row_groups[owner[r]].push(p);
        }
        BlockPartition {
            row_groups,
            col_groups: self.col_groups.clone(),
            n_rows: rows.len(),
            n_cols: self.n_cols,
        }
    }

    /// Text export: a `[rows]` section then a `[cols]` section, each line an
    /// `index group` pair.
    pub fn to_text(&self) -> String {
        let mut out = String::from("[rows]\n");
        for (i, g) in self.row_assignment().iter().enumerate() {
            out.push_str(&format!("{i} {g}\n"));
        }
        out.push_str("[cols]\n");
        for (j, g) in self.col_assignment().iter().enumerate() {
            out.push_str(&format!("{j} {g}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LshError> {
        let mut rows: Vec<(usize, usize)> = Vec::new();
        let mut cols: Vec<(usize, usize)> = Vec::new();
        let mut section: Option<&mut Vec<(usize, usize)>> = None;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            match line {
                "" => continue,
                "[rows]" => section = Some(&mut rows),
                "[cols]" => section = Some(&mut cols),
                _ => {
                    let target = section
                        .as_deref_mut()
                        .ok_or_else(|| LshError::Format(format!("line {}: pair before section header", n + 1)))?;
                    let mut it = line.split_whitespace().map(str::parse::<usize>);
                    match (it.next(), it.next(), it.next()) {
                        (Some(Ok(i)), Some(Ok(g)), None) => target.push((i, g)),
                        _ => return Err(LshError::Format(format!("line {}: expected `index group`", n + 1))),
                    }
                }
            }
        }
        let (row_groups, n_rows) = groups_from_pairs(&rows)?;
        let (col_groups, n_cols) = groups_from_pairs(&cols)?;
        BlockPartition::new(row_groups, col_groups, n_rows, n_cols)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_text().as_bytes())
    }
}

fn assignment(groups: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut owner = vec![usize::MAX; n];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            owner[i] = g;
        }
    }
    owner
}

fn groups_from_pairs(pairs: &[(usize, usize)]) -> Result<(Vec<Vec<usize>>, usize), LshError> {
    let n = pairs.len();
    let n_groups = pairs.iter().map(|&(_, g)| g + 1).max().unwrap_or(0);
    let mut groups = vec![Vec::new(); n_groups];
    for &(i, g) in pairs {
        if i >= n {
            return Err(LshError::Format(format!("index {i} exceeds item count {n}")));
        }
        groups[g].push(i);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    Ok((groups, n))
}

/// Groups the rows of `d` into exactly `k` sets of similar instances.
pub fn partition_rows(d: &Dataset, k: usize, n_hashes: usize, seed: u64) -> Result<Vec<Vec<usize>>, LshError> {
    group_items(d.values(), scheme_for(d), k, n_hashes, seed)
}

/// Groups the columns of `d` into exactly `l` sets of similar features.
pub fn partition_cols(d: &Dataset, l: usize, n_hashes: usize, seed: u64) -> Result<Vec<Vec<usize>>, LshError> {
    group_items(d.values().t(), scheme_for(d), l, n_hashes, seed)
}

fn scheme_for(d: &Dataset) -> SignatureScheme {
    match d.preprocessing() {
        Preprocessing::UnitInterval => SignatureScheme::MinHash,
        _ => SignatureScheme::SignProjection,
    }
}

/// Produces one signature per row of `items` under `scheme`.
fn signatures(items: ArrayView2<'_, f64>, scheme: SignatureScheme, n_hashes: usize, seed: u64) -> Vec<Signature> {
    match scheme {
        SignatureScheme::MinHash => {
            let bits = binarize_for_hash(items);
            let hasher = MinHasher::new(n_hashes, seed);
            bits.axis_iter(Axis(0))
                .map(|row| hasher.signature(row.iter().enumerate().filter(|(_, &b)| b == 1).map(|(j, _)| j)))
                .collect()
        }
        SignatureScheme::SignProjection => {
            let proj = SignProjector::new(items.ncols(), n_hashes, seed);
            items.axis_iter(Axis(0)).map(|row| proj.signature(row)).collect()
        }
    }
}

/// Rows of `items` are the things being grouped.
pub(crate) fn group_items(
    items: ArrayView2<'_, f64>,
    scheme: SignatureScheme,
    target: usize,
    n_hashes: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, LshError> {
    let n = items.nrows();
    if target == 0 || target > n {
        return Err(LshError::GroupCount {
            requested: target,
            items: n,
        });
    }
    if n_hashes == 0 {
        return Err(LshError::NoHashes);
    }
    let sigs = signatures(items, scheme, n_hashes, seed);

    // Buckets keyed by full signature, ordered by their smallest member.
    let mut by_sig: BTreeMap<&[u64], Vec<usize>> = BTreeMap::new();
    for (i, s) in sigs.iter().enumerate() {
        by_sig.entry(&s.values).or_default().push(i);
    }
    let mut buckets: Vec<Vec<usize>> = by_sig.into_values().collect();
    buckets.sort_by_key(|b| b[0]);

    if buckets.len() > target {
        buckets = merge_buckets(buckets, &sigs, target);
    }
    let mut round = 0u64;
    while buckets.len() < target {
        split_largest(
            &mut buckets,
            items,
            scheme,
            derive_seed(seed, &format!("lsh.split.{round}")),
        );
        round += 1;
    }
    for b in &mut buckets {
        b.sort_unstable();
    }
    buckets.sort_by_key(|b| b[0]);
    Ok(buckets)
}

/// Average-linkage merging on signature agreement counts.
///
/// `agree[a][b]` is the total number of equal signature positions over all
/// member pairs of buckets `a` and `b`; the mean agreement is that count over
/// `|a| |b|`. Comparisons use exact integer cross products so the outcome
/// never depends on float rounding. Ties go to the lexicographically lowest
/// bucket pair `(a, b)`, `a < b`.
fn merge_buckets(buckets: Vec<Vec<usize>>, sigs: &[Signature], target: usize) -> Vec<Vec<usize>> {
    let nb = buckets.len();
    let mut size: Vec<u128> = buckets.iter().map(|b| b.len() as u128).collect();
    let mut agree = vec![0u128; nb * nb];
    for a in 0..nb {
        let sa = &sigs[buckets[a][0]].values;
        for b in a + 1..nb {
            let sb = &sigs[buckets[b][0]].values;
            let same = sa.iter().zip(sb).filter(|(x, y)| x == y).count() as u128;
            let v = same * size[a] * size[b];
            agree[a * nb + b] = v;
            agree[b * nb + a] = v;
        }
    }
    let mut alive = vec![true; nb];
    // Strictly-better test between pairs (a, b) and (c, d).
    let beats = |agree: &[u128], size: &[u128], (a, b): (usize, usize), (c, d): (usize, usize)| {
        agree[a * nb + b] * size[c] * size[d] > agree[c * nb + d] * size[a] * size[b]
    };
    // best[a]: best partner b > a, first in index order on ties.
    let row_best = |agree: &[u128], size: &[u128], alive: &[bool], a: usize| {
        let mut best: Option<usize> = None;
        for b in (a + 1..nb).filter(|&b| alive[b]) {
            if best.is_none_or(|cur| beats(agree, size, (a, b), (a, cur))) {
                best = Some(b);
            }
        }
        best
    };
    let mut best: Vec<Option<usize>> = (0..nb).map(|a| row_best(&agree, &size, &alive, a)).collect();
    let mut members: Vec<Option<Vec<usize>>> = buckets.into_iter().map(Some).collect();
    let mut count = nb;
    while count > target {
        let mut pick: Option<(usize, usize)> = None;
        for a in (0..nb).filter(|&a| alive[a]) {
            if let Some(b) = best[a] {
                if pick.is_none_or(|p| beats(&agree, &size, (a, b), p)) {
                    pick = Some((a, b));
                }
            }
        }
        let (a, b) = pick.expect("at least two live buckets");
        let moved = members[b].take().unwrap_or_default();
        members[a].get_or_insert_with(Vec::new).extend(moved);
        alive[b] = false;
        best[b] = None;
        size[a] += size[b];
        for c in (0..nb).filter(|&c| alive[c] && c != a) {
            let v = agree[a * nb + c] + agree[b * nb + c];
            agree[a * nb + c] = v;
            agree[c * nb + a] = v;
        }
        best[a] = row_best(&agree, &size, &alive, a);
        for c in (0..b).filter(|&c| alive[c] && c != a) {
            match best[c] {
                Some(x) if x == a || x == b => best[c] = row_best(&agree, &size, &alive, c),
                Some(x)
                    if c < a
                        && (beats(&agree, &size, (c, a), (c, x))
                            || (a < x && !beats(&agree, &size, (c, x), (c, a)))) =>
                {
                    best[c] = Some(a);
                }
                _ => {}
            }
        }
        count -= 1;
    }
    members.into_iter().flatten().collect()
}

/// Splits the largest bucket (lowest index on ties) with one fresh hash bit,
/// falling back to round-robin when the bit does not separate its members.
fn split_largest(buckets: &mut Vec<Vec<usize>>, items: ArrayView2<'_, f64>, scheme: SignatureScheme, seed: u64) {
    let (idx, _) = buckets
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.len().cmp(&b.len()).then(j.cmp(i)))
        .expect("nonempty bucket list");
    let mut bucket = std::mem::take(&mut buckets[idx]);
    bucket.sort_unstable();
    let sub = items.select(Axis(0), &bucket);
    let bits: Vec<u64> = signatures(sub.view(), scheme, 1, seed)
        .into_iter()
        .map(|s| s.values[0] & 1)
        .collect();
    let (mut zero, mut one): (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
    for (&i, &bit) in bucket.iter().zip(&bits) {
        if bit == 0 {
            zero.push(i)
        } else {
            one.push(i)
        }
    }
    if zero.is_empty() || one.is_empty() {
        zero = bucket.iter().copied().step_by(2).collect();
        one = bucket.iter().copied().skip(1).step_by(2).collect();
    }
    buckets[idx] = zero;
    buckets.push(one);
}
