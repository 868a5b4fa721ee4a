//! Collaborative-representation RBM layers (binary and Gaussian visible units).
//!
//! A layer is an ordinary RBM trained by one-step contrastive divergence, plus
//! a block-centering regularizer on the hidden activations. Given a
//! [`BlockPartition`] of the data matrix into `K` row groups and `L` column
//! groups, the block center `u_kl` is the mean hidden activation over block
//! `(k, l)`, and the collaborative costs are
//!
//! ```text
//! C_data  = Σ_kl Σ_{s∈R_k, t∈C_l} (h_st  - u_kl)^2
//! C_recon = Σ_kl Σ_{s∈R_k, t∈C_l} (hr_st - ur_kl)^2
//! ```
//!
//! evaluated on the data-side and reconstruction-side hidden probabilities.
//! The per-parameter update mixes the CD-1 step with weight `eta * lr` and
//! the collaborative gradient with weight `2 (1 - eta) / (K L)`.
//!
//! Two collaborative gradients are available (see [`GradientMode`]):
//! `RowGroupCentered` centres each hidden column within its row group, which is
//! the exact gradient of the surrogate
//! `C~ = Σ_k Σ_j Σ_{s∈R_k} (h_sj - mean_{R_k} h_.j)^2`, while `ExactBlockCost`
//! differentiates `C_data + C_recon` through the block centers. In both cases
//! the reconstructed visible batch is held fixed, as in CD.
//!
//! Hidden width always equals visible width: the column groups index visible
//! features and are applied to hidden columns.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use thiserror::Error;

use crate::dataio::{Dataset, Preprocessing};
use crate::lsh::{BlockPartition, LshError};

#[derive(Debug, Error)]
pub enum RbmError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("probability {value} at ({row}, {col}) outside [0, 1]")]
    Probability { row: usize, col: usize, value: f64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{0} data cannot train a {1:?}-visible layer")]
    Preprocessing(Preprocessing, VisibleKind),
    #[error("non-finite parameter after update")]
    NonFinite,
    #[error(transparent)]
    Lsh(#[from] LshError),
}

fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<(), RbmError> {
    if expected == found {
        Ok(())
    } else {
        Err(RbmError::Dimension {
            context,
            expected,
            found,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VisibleKind {
    Binary,
    Gaussian,
}

impl VisibleKind {
    /// Visible kind matching a preprocessing state, if any.
    pub fn for_preprocessing(p: Preprocessing) -> Option<VisibleKind> {
        match p {
            Preprocessing::Standardized => Some(VisibleKind::Gaussian),
            Preprocessing::UnitInterval => Some(VisibleKind::Binary),
            Preprocessing::Raw => None,
        }
    }
}

/// Parameters of one layer. `weights` is `M x M'` (visible by hidden).
///
/// Gaussian visible units assume standardized inputs, so every visible
/// standard deviation is fixed at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
    pub visible_kind: VisibleKind,
}

impl RbmParams {
    pub fn new(
        weights: Array2<f64>,
        visible_bias: Array1<f64>,
        hidden_bias: Array1<f64>,
        visible_kind: VisibleKind,
    ) -> Result<Self, RbmError> {
        check_dim("visible bias", weights.nrows(), visible_bias.len())?;
        check_dim("hidden bias", weights.ncols(), hidden_bias.len())?;
        let p = RbmParams {
            weights,
            visible_bias,
            hidden_bias,
            visible_kind,
        };
        if !p.is_finite() {
            return Err(RbmError::NonFinite);
        }
        Ok(p)
    }

    pub fn zeros(n_visible: usize, n_hidden: usize, visible_kind: VisibleKind) -> Self {
        RbmParams {
            weights: Array2::zeros((n_visible, n_hidden)),
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
            visible_kind,
        }
    }

    /// Weights drawn from N(0, 0.01^2) in row-major order, zero biases.
    pub fn init<R: Rng + ?Sized>(n_visible: usize, n_hidden: usize, visible_kind: VisibleKind, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        let weights = Array2::from_shape_simple_fn((n_visible, n_hidden), || rng.sample(normal));
        RbmParams {
            weights,
            ..RbmParams::zeros(n_visible, n_hidden, visible_kind)
        }
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.visible_bias)
            .chain(&self.hidden_bias)
            .all(|v| v.is_finite())
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `P(h_j = 1 | v) = sigmoid(b_j + Σ_i v_i w_ij)` for every row of `visible`.
pub fn hidden_probs(p: &RbmParams, visible: ArrayView2<'_, f64>) -> Result<Array2<f64>, RbmError> {
    check_dim("hidden_probs input columns", p.n_visible(), visible.ncols())?;
    let mut z = visible.dot(&p.weights);
    z += &p.hidden_bias;
    z.mapv_inplace(sigmoid);
    Ok(z)
}

/// Visible reconstruction from hidden states: logistic for binary units,
/// linear (`a_i + Σ_j h_j w_ij`, no noise) for Gaussian units.
pub fn reconstruct_visible(p: &RbmParams, hidden: ArrayView2<'_, f64>) -> Result<Array2<f64>, RbmError> {
    check_dim("reconstruct_visible input columns", p.n_hidden(), hidden.ncols())?;
    let mut z = hidden.dot(&p.weights.t());
    z += &p.visible_bias;
    if p.visible_kind == VisibleKind::Binary {
        z.mapv_inplace(sigmoid);
    }
    Ok(z)
}

/// Bernoulli draws, one uniform per entry consumed in row-major order:
/// an entry is 1 iff its draw is below the probability.
pub fn sample_bernoulli<R: Rng + ?Sized>(probs: ArrayView2<'_, f64>, rng: &mut R) -> Result<Array2<f64>, RbmError> {
    if let Some(((row, col), &value)) = probs.indexed_iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(RbmError::Probability { row, col, value });
    }
    let mut out = Array2::zeros(probs.dim());
    for (o, &p) in out.iter_mut().zip(probs.iter()) {
        *o = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
    }
    Ok(out)
}

fn check_partition(h: ArrayView2<'_, f64>, part: &BlockPartition) -> Result<(), RbmError> {
    check_dim("partition rows", part.n_rows(), h.nrows())?;
    check_dim("partition columns", part.n_cols(), h.ncols())
}

/// `K x L` matrix of block means. Empty blocks (possible in a batch-restricted
/// partition) have center 0.
pub fn block_centers(h: ArrayView2<'_, f64>, part: &BlockPartition) -> Result<Array2<f64>, RbmError> {
    check_partition(h, part)?;
    let mut u = Array2::zeros((part.k(), part.l()));
    for (k, rows) in part.row_groups().iter().enumerate() {
        for (l, cols) in part.col_groups().iter().enumerate() {
            let n = rows.len() * cols.len();
            if n == 0 {
                continue;
            }
            let mut sum = 0.0;
            for &s in rows {
                for &t in cols {
                    sum += h[[s, t]];
                }
            }
            u[[k, l]] = sum / n as f64;
        }
    }
    Ok(u)
}

/// `Σ_kl Σ_{s∈R_k, t∈C_l} (h_st - u_kl)^2`.
pub fn block_cost(h: ArrayView2<'_, f64>, part: &BlockPartition) -> Result<f64, RbmError> {
    let u = block_centers(h, part)?;
    let mut cost = 0.0;
    for (k, rows) in part.row_groups().iter().enumerate() {
        for (l, cols) in part.col_groups().iter().enumerate() {
            for &s in rows {
                for &t in cols {
                    let r = h[[s, t]] - u[[k, l]];
                    cost += r * r;
                }
            }
        }
    }
    Ok(cost)
}

/// `Σ_k Σ_j Σ_{s∈R_k} (h_sj - mean_{R_k} h_.j)^2`: column-wise centering
/// within row groups, ignoring column groups.
pub fn surrogate_cost(h: ArrayView2<'_, f64>, part: &BlockPartition) -> Result<f64, RbmError> {
    check_partition(h, part)?;
    let mut cost = 0.0;
    for rows in part.row_groups().iter().filter(|r| !r.is_empty()) {
        let n = rows.len() as f64;
        for col in h.axis_iter(Axis(1)) {
            let mean = rows.iter().map(|&s| col[s]).sum::<f64>() / n;
            cost += rows.iter().map(|&s| (col[s] - mean).powi(2)).sum::<f64>();
        }
    }
    Ok(cost)
}

/// The four collaborative costs for one pair of hidden matrices.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CollabCost {
    pub data: f64,
    pub recon: f64,
    pub data_surrogate: f64,
    pub recon_surrogate: f64,
}

pub fn collaborative_cost(
    h: ArrayView2<'_, f64>,
    h_recon: ArrayView2<'_, f64>,
    part: &BlockPartition,
) -> Result<CollabCost, RbmError> {
    Ok(CollabCost {
        data: block_cost(h, part)?,
        recon: block_cost(h_recon, part)?,
        data_surrogate: surrogate_cost(h, part)?,
        recon_surrogate: surrogate_cost(h_recon, part)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// Row-group column-wise centering; gradient of the surrogate cost.
    #[default]
    RowGroupCentered,
    /// Chain rule through the block centers; gradient of the block cost.
    ExactBlockCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollaborativeSign {
    /// Subtract the collaborative gradient, minimizing the block cost.
    #[default]
    Descent,
    /// Add it, which ascends the block cost.
    Ascent,
}

/// Counters for the work done by training, in units of algorithm steps
/// rather than flops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts {
    pub encoder_steps: u64,
    pub decoder_steps: u64,
    /// One per `(row group, column group)` pair visited per batch.
    pub block_visits: u64,
    pub parameter_updates: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.encoder_steps + self.decoder_steps + self.block_visits + self.parameter_updates
    }
}

/// Collaborative gradient of `C_data + C_recon` (or its surrogate) with
/// respect to the weights (`M x M'`) and hidden biases.
#[derive(Debug, Clone, PartialEq)]
pub struct CollabGrads {
    pub weights: Array2<f64>,
    pub hidden_bias: Array1<f64>,
}

/// Computes both collaborative gradients, iterating over every block of the
/// partition. `visible`/`hidden` are the data side, `visible_recon` and
/// `hidden_recon` the reconstruction side.
pub fn collaborative_gradients(
    visible: ArrayView2<'_, f64>,
    hidden: ArrayView2<'_, f64>,
    visible_recon: ArrayView2<'_, f64>,
    hidden_recon: ArrayView2<'_, f64>,
    part: &BlockPartition,
    mode: GradientMode,
    counts: &mut OpCounts,
) -> Result<CollabGrads, RbmError> {
    check_dim("hidden rows", visible.nrows(), hidden.nrows())?;
    check_dim("reconstruction rows", visible.nrows(), visible_recon.nrows())?;
    check_dim("reconstruction columns", visible.ncols(), visible_recon.ncols())?;
    check_dim("reconstructed hidden shape", hidden.ncols(), hidden_recon.ncols())?;
    check_dim("reconstructed hidden rows", hidden.nrows(), hidden_recon.nrows())?;
    check_partition(hidden, part)?;
    let m = visible.ncols();
    let mut gw = Array2::zeros((m, hidden.ncols()));
    let mut gb = Array1::zeros(hidden.ncols());
    let mut mean_dv = vec![0.0; m];
    for rows in part.row_groups() {
        for cols in part.col_groups() {
            counts.block_visits += 1;
            if rows.is_empty() {
                continue;
            }
            let n = rows.len() as f64;
            for (v, h) in [(visible, hidden), (visible_recon, hidden_recon)] {
                match mode {
                    GradientMode::RowGroupCentered => {
                        for &j in cols {
                            let h_mean = rows.iter().map(|&s| h[[s, j]]).sum::<f64>() / n;
                            let d_mean = rows.iter().map(|&s| h[[s, j]] * (1.0 - h[[s, j]])).sum::<f64>() / n;
                            mean_dv.fill(0.0);
                            for &s in rows {
                                let d = (1.0 - h[[s, j]]) * h[[s, j]];
                                for (acc, &vi) in mean_dv.iter_mut().zip(v.row(s)) {
                                    *acc += d * vi;
                                }
                            }
                            mean_dv.iter_mut().for_each(|x| *x /= n);
                            for &s in rows {
                                let r = h[[s, j]] - h_mean;
                                let d = (1.0 - h[[s, j]]) * h[[s, j]];
                                for i in 0..m {
                                    gw[[i, j]] += 2.0 * r * (d * v[[s, i]] - mean_dv[i]);
                                }
                                gb[j] += 2.0 * r * (d - d_mean);
                            }
                        }
                    }
                    GradientMode::ExactBlockCost => {
                        let count = n * cols.len() as f64;
                        let center = rows
                            .iter()
                            .flat_map(|&s| cols.iter().map(move |&t| h[[s, t]]))
                            .sum::<f64>()
                            / count;
                        // dC/dh_st = 2 (h_st - u) - (2 / |block|) Σ_block (h - u);
                        // the second term is zero up to rounding.
                        let resid_mean = rows
                            .iter()
                            .flat_map(|&s| cols.iter().map(move |&t| h[[s, t]] - center))
                            .sum::<f64>()
                            / count;
                        for &s in rows {
                            for &t in cols {
                                let g = 2.0 * (h[[s, t]] - center - resid_mean) * (1.0 - h[[s, t]]) * h[[s, t]];
                                for i in 0..m {
                                    gw[[i, t]] += g * v[[s, i]];
                                }
                                gb[t] += g;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(CollabGrads {
        weights: gw,
        hidden_bias: gb,
    })
}

/// Weight part of [`collaborative_gradients`].
pub fn grad_collab_w(
    visible: ArrayView2<'_, f64>,
    hidden: ArrayView2<'_, f64>,
    visible_recon: ArrayView2<'_, f64>,
    hidden_recon: ArrayView2<'_, f64>,
    part: &BlockPartition,
    mode: GradientMode,
) -> Result<Array2<f64>, RbmError> {
    let mut c = OpCounts::default();
    Ok(collaborative_gradients(visible, hidden, visible_recon, hidden_recon, part, mode, &mut c)?.weights)
}

/// Hidden-bias part of [`collaborative_gradients`]. Visible biases do not
/// enter the collaborative cost, so they have no counterpart.
pub fn grad_collab_b(
    hidden: ArrayView2<'_, f64>,
    hidden_recon: ArrayView2<'_, f64>,
    part: &BlockPartition,
    mode: GradientMode,
) -> Result<Array1<f64>, RbmError> {
    // The bias gradient does not read the visible matrices.
    let empty = Array2::zeros((hidden.nrows(), 0));
    let mut c = OpCounts::default();
    Ok(collaborative_gradients(empty.view(), hidden, empty.view(), hidden_recon, part, mode, &mut c)?.hidden_bias)
}

/// Hyperparameters of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the CD term; `1 - eta` goes to the collaborative term.
    pub eta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Row groups; `None` means `ceil(sqrt(N))`.
    pub row_groups: Option<usize>,
    /// Column groups; `None` means `ceil(sqrt(M))`.
    pub col_groups: Option<usize>,
    pub n_hashes: usize,
    pub seed: u64,
    pub gradient_mode: GradientMode,
    pub collaborative_sign: CollaborativeSign,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.5,
            learning_rate: 0.05,
            epochs: 100,
            batch_size: 32,
            row_groups: None,
            col_groups: None,
            n_hashes: crate::lsh::DEFAULT_N_HASHES,
            seed: 0,
            gradient_mode: GradientMode::RowGroupCentered,
            collaborative_sign: CollaborativeSign::Descent,
        }
    }
}

fn ceil_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r < n {
        r += 1;
    }
    while r > 1 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r.max(1)
}

impl TrainConfig {
    /// Row and column group counts for an `n x m` input.
    pub fn group_counts(&self, n: usize, m: usize) -> (usize, usize) {
        (
            self.row_groups.unwrap_or_else(|| ceil_sqrt(n)),
            self.col_groups.unwrap_or_else(|| ceil_sqrt(m)),
        )
    }

    /// Checks the config against an `n x m` input.
    pub fn validate(&self, n: usize, m: usize) -> Result<(), RbmError> {
        let fail = |msg: String| Err(RbmError::Config(msg));
        if !(0.0..=1.0).contains(&self.eta) {
            return fail(format!("eta = {} outside [0, 1]", self.eta));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail(format!(
                "learning_rate = {} must be finite and >= 0",
                self.learning_rate
            ));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size == 0 || self.batch_size > n {
            return fail(format!("batch_size = {} outside [1, {n}]", self.batch_size));
        }
        if self.n_hashes == 0 {
            return fail("n_hashes must be at least 1".into());
        }
        let (k, l) = self.group_counts(n, m);
        if k == 0 || k > n {
            return fail(format!("row_groups = {k} outside [1, {n}]"));
        }
        if l == 0 || l > m {
            return fail(format!("col_groups = {l} outside [1, {m}]"));
        }
        Ok(())
    }
}

/// Statistics of one mini-batch update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchStats {
    /// Mean squared difference between the batch and its reconstruction.
    pub reconstruction_error: f64,
    pub cost: CollabCost,
}

/// One collaborative CD-1 step on a batch.
///
/// `part` must index the batch's rows (see [`BlockPartition::restrict_rows`]).
/// The moments use hidden probabilities on both sides; only the Gibbs step
/// samples. Consumes exactly `batch_rows * M'` uniforms from `rng`.
pub fn cd1_update<R: Rng + ?Sized>(
    p: &RbmParams,
    batch: ArrayView2<'_, f64>,
    part: &BlockPartition,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(RbmParams, BatchStats), RbmError> {
    cd1_update_counted(p, batch, part, cfg, rng, &mut OpCounts::default())
}

/// [`cd1_update`] with operation accounting.
pub fn cd1_update_counted<R: Rng + ?Sized>(
    p: &RbmParams,
    batch: ArrayView2<'_, f64>,
    part: &BlockPartition,
    cfg: &TrainConfig,
    rng: &mut R,
    counts: &mut OpCounts,
) -> Result<(RbmParams, BatchStats), RbmError> {
    if batch.nrows() == 0 {
        return Err(RbmError::EmptyBatch);
    }
    check_dim("batch columns", p.n_visible(), batch.ncols())?;
    check_dim("hidden width", p.n_visible(), p.n_hidden())?;
    let n = batch.nrows() as f64;

    let h = hidden_probs(p, batch)?;
    let h_sample = sample_bernoulli(h.view(), rng)?;
    counts.encoder_steps += 1;
    let v_recon = reconstruct_visible(p, h_sample.view())?;
    let h_recon = hidden_probs(p, v_recon.view())?;
    counts.decoder_steps += 1;

    let grads = collaborative_gradients(
        batch,
        h.view(),
        v_recon.view(),
        h_recon.view(),
        part,
        cfg.gradient_mode,
        counts,
    )?;

    let dw = (batch.t().dot(&h) - v_recon.t().dot(&h_recon)) / n;
    let da = (batch.sum_axis(Axis(0)) - v_recon.sum_axis(Axis(0))) / n;
    let db = (h.sum_axis(Axis(0)) - h_recon.sum_axis(Axis(0))) / n;

    let cd_rate = cfg.eta * cfg.learning_rate;
    let collab_rate = 2.0 * (1.0 - cfg.eta) / (part.k() * part.l()) as f64;
    let signed = match cfg.collaborative_sign {
        CollaborativeSign::Descent => -collab_rate,
        CollaborativeSign::Ascent => collab_rate,
    };
    // The collaborative gradients carry the factor 2 of the squared error;
    // the update uses half of it with the 2 (1 - eta) / (K L) prefactor.
    let mut next = p.clone();
    next.weights.scaled_add(cd_rate, &dw);
    next.weights.scaled_add(signed, &(grads.weights / 2.0));
    next.visible_bias.scaled_add(cd_rate, &da);
    next.hidden_bias.scaled_add(cd_rate, &db);
    next.hidden_bias.scaled_add(signed, &(grads.hidden_bias / 2.0));
    counts.parameter_updates += 1;
    if !next.is_finite() {
        return Err(RbmError::NonFinite);
    }

    let reconstruction_error = (&batch - &v_recon).mapv(|x| x * x).mean().unwrap_or(0.0);
    let cost = collaborative_cost(h.view(), h_recon.view(), part)?;
    Ok((
        next,
        BatchStats {
            reconstruction_error,
            cost,
        },
    ))
}

/// Classic CD-1 step (no collaborative term) with the same sampling contract
/// as [`cd1_update`].
pub fn cd1_classic_update<R: Rng + ?Sized>(
    p: &RbmParams,
    batch: ArrayView2<'_, f64>,
    learning_rate: f64,
    rng: &mut R,
) -> Result<RbmParams, RbmError> {
    if batch.nrows() == 0 {
        return Err(RbmError::EmptyBatch);
    }
    let n = batch.nrows() as f64;
    let h = hidden_probs(p, batch)?;
    let h_sample = sample_bernoulli(h.view(), rng)?;
    let v_recon = reconstruct_visible(p, h_sample.view())?;
    let h_recon = hidden_probs(p, v_recon.view())?;
    let mut next = p.clone();
    next.weights
        .scaled_add(learning_rate, &((batch.t().dot(&h) - v_recon.t().dot(&h_recon)) / n));
    next.visible_bias.scaled_add(
        learning_rate,
        &((batch.sum_axis(Axis(0)) - v_recon.sum_axis(Axis(0))) / n),
    );
    next.hidden_bias
        .scaled_add(learning_rate, &((h.sum_axis(Axis(0)) - h_recon.sum_axis(Axis(0))) / n));
    Ok(next)
}

/// Per-epoch training record, evaluated on the full data after the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpochStats {
    pub reconstruction_error: f64,
    pub cost: CollabCost,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub counts: OpCounts,
}

/// Deterministic full-data diagnostics: hidden probabilities, mean-field
/// reconstruction from them (no sampling), and the collaborative costs
/// under `part`.
pub fn evaluate(p: &RbmParams, data: ArrayView2<'_, f64>, part: &BlockPartition) -> Result<EpochStats, RbmError> {
    let h = hidden_probs(p, data)?;
    let v_recon = reconstruct_visible(p, h.view())?;
    let h_recon = hidden_probs(p, v_recon.view())?;
    Ok(EpochStats {
        reconstruction_error: (&data - &v_recon).mapv(|x| x * x).mean().unwrap_or(0.0),
        cost: collaborative_cost(h.view(), h_recon.view(), part)?,
    })
}

/// Stepwise trainer for one layer.
///
/// The rng stream is `ChaCha8(cfg.seed)`: weight initialization first, then
/// per epoch a shuffle of the row order followed by the Gibbs draws of each
/// batch in order.
pub struct Trainer<'a> {
    data: ArrayView2<'a, f64>,
    cfg: TrainConfig,
    part: &'a BlockPartition,
    params: RbmParams,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    report: TrainReport,
    classic: bool,
}

impl<'a> Trainer<'a> {
    /// Collaborative trainer over `data` with visible units of `kind`.
    pub fn new(
        data: ArrayView2<'a, f64>,
        kind: VisibleKind,
        cfg: &TrainConfig,
        part: &'a BlockPartition,
    ) -> Result<Self, RbmError> {
        Self::build(data, kind, cfg, part, false)
    }

    /// Plain CD-1 trainer sharing initialization, shuffling and sampling with
    /// [`Trainer::new`]; `eta` and the partition only affect reporting.
    pub fn classic(
        data: ArrayView2<'a, f64>,
        kind: VisibleKind,
        cfg: &TrainConfig,
        part: &'a BlockPartition,
    ) -> Result<Self, RbmError> {
        Self::build(data, kind, cfg, part, true)
    }

    fn build(
        data: ArrayView2<'a, f64>,
        kind: VisibleKind,
        cfg: &TrainConfig,
        part: &'a BlockPartition,
        classic: bool,
    ) -> Result<Self, RbmError> {
        let (n, m) = data.dim();
        cfg.validate(n, m)?;
        check_dim("partition rows", n, part.n_rows())?;
        check_dim("partition columns", m, part.n_cols())?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = RbmParams::init(m, m, kind, &mut rng);
        Ok(Trainer {
            data,
            cfg: cfg.clone(),
            part,
            params,
            rng,
            order: (0..n).collect(),
            report: TrainReport::default(),
            classic,
        })
    }

    pub fn params(&self) -> &RbmParams {
        &self.params
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    /// Number of mini-batches per epoch.
    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.cfg.batch_size)
    }

    pub fn run_epoch(&mut self) -> Result<EpochStats, RbmError> {
        self.order.shuffle(&mut self.rng);
        for rows in self.order.chunks(self.cfg.batch_size) {
            let batch = self.data.select(Axis(0), rows);
            self.params = if self.classic {
                cd1_classic_update(&self.params, batch.view(), self.cfg.learning_rate, &mut self.rng)?
            } else {
                let local = self.part.restrict_rows(rows);
                cd1_update_counted(
                    &self.params,
                    batch.view(),
                    &local,
                    &self.cfg,
                    &mut self.rng,
                    &mut self.report.counts,
                )?
                .0
            };
        }
        let stats = evaluate(&self.params, self.data, self.part)?;
        self.report.epochs.push(stats);
        Ok(stats)
    }

    pub fn run(mut self) -> Result<(RbmParams, TrainReport), RbmError> {
        while self.report.epochs.len() < self.cfg.epochs {
            self.run_epoch()?;
        }
        Ok((self.params, self.report))
    }
}

fn kind_for(d: &Dataset) -> Result<VisibleKind, RbmError> {
    VisibleKind::for_preprocessing(d.preprocessing())
        .ok_or(RbmError::Preprocessing(d.preprocessing(), VisibleKind::Gaussian))
}

/// Trains one collaborative layer. Standardized data gives a Gaussian-visible
/// layer, unit-interval data a binary one.
pub fn train(d: &Dataset, cfg: &TrainConfig, part: &BlockPartition) -> Result<(RbmParams, TrainReport), RbmError> {
    Trainer::new(d.values(), kind_for(d)?, cfg, part)?.run()
}

/// Plain CD-1 training with the same initialization and rng contract as
/// [`train`].
pub fn train_classic(
    d: &Dataset,
    cfg: &TrainConfig,
    part: &BlockPartition,
) -> Result<(RbmParams, TrainReport), RbmError> {
    Trainer::classic(d.values(), kind_for(d)?, cfg, part)?.run()
}
