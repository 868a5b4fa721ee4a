//! Greedy stacks of collaborative layers, and their on-disk format.
//!
//! Real-valued (standardized) input gets a Gaussian-visible first layer
//! followed by binary layers; unit-interval input gets binary layers
//! throughout. Each layer is trained on the deterministic hidden
//! probabilities of the layer below.
//!
//! Model file layout, little-endian, no padding:
//!
//! ```text
//! "UCRD"                magic
//! u32                   version (1)
//! u8                    input mode: 0 real-valued, 1 binary
//! u32                   layer count
//! per layer:
//!   u8                  visible kind: 0 binary, 1 gaussian
//!   u32, u32            M, M'
//!   f64 x M             visible biases
//!   f64 x M'            hidden biases
//!   f64 x M*M'          weights, row-major
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView2};
use thiserror::Error;

use crate::crrbm::{self, RbmError, RbmParams, TrainConfig, TrainReport, VisibleKind};
use crate::dataio::{Dataset, Preprocessing};
use crate::lsh::BlockPartition;
use crate::seed::derive_seed;

pub const MAGIC: &[u8; 4] = b"UCRD";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("no layer configs given")]
    NoLayers,
    #[error("{0} data has no matching input mode")]
    Preprocessing(Preprocessing),
    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: RbmError,
    },
    #[error("input has {found} columns, network expects {expected}")]
    InputWidth { expected: usize, found: usize },
    #[error("inconsistent network: {0}")]
    Inconsistent(String),
    #[error("bad magic: not a model file")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("model file truncated while reading {what}")]
    Truncated { what: &'static str },
    #[error("dimension inconsistency in model file: {0}")]
    DimensionMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    RealValued,
    Binary,
}

impl InputMode {
    pub fn for_preprocessing(p: Preprocessing) -> Option<InputMode> {
        match p {
            Preprocessing::Standardized => Some(InputMode::RealValued),
            Preprocessing::UnitInterval => Some(InputMode::Binary),
            Preprocessing::Raw => None,
        }
    }

    fn first_kind(self) -> VisibleKind {
        match self {
            InputMode::RealValued => VisibleKind::Gaussian,
            InputMode::Binary => VisibleKind::Binary,
        }
    }
}

/// How block partitions are chosen for layers above the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionPolicy {
    /// Hash each layer's own input.
    #[default]
    PerLayer,
    /// Reuse the partition computed on the network input.
    ReuseInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcrdNet {
    layers: Vec<RbmParams>,
    input_mode: InputMode,
}

impl UcrdNet {
    /// Checks the kind pattern and the chaining of layer widths.
    pub fn new(layers: Vec<RbmParams>, input_mode: InputMode) -> Result<Self, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::NoLayers);
        }
        for (t, layer) in layers.iter().enumerate() {
            let expected = if t == 0 {
                input_mode.first_kind()
            } else {
                VisibleKind::Binary
            };
            if layer.visible_kind != expected {
                return Err(NetworkError::Inconsistent(format!(
                    "layer {t} is {:?}-visible, {input_mode:?} input requires {expected:?}",
                    layer.visible_kind
                )));
            }
            if t > 0 && layers[t - 1].n_hidden() != layer.n_visible() {
                return Err(NetworkError::Inconsistent(format!(
                    "layer {} has {} hidden units but layer {t} has {} visible units",
                    t - 1,
                    layers[t - 1].n_hidden(),
                    layer.n_visible()
                )));
            }
        }
        Ok(UcrdNet { layers, input_mode })
    }

    pub fn layers(&self) -> &[RbmParams] {
        &self.layers
    }

    pub fn input_mode(&self) -> InputMode {
        self.input_mode
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_visible()
    }

    pub fn n_features(&self) -> usize {
        self.layers[self.layers.len() - 1].n_hidden()
    }

    /// Deterministic forward pass of hidden probabilities through all layers.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, NetworkError> {
        if x.ncols() != self.n_inputs() {
            return Err(NetworkError::InputWidth {
                expected: self.n_inputs(),
                found: x.ncols(),
            });
        }
        let mut h = x.to_owned();
        for (layer, p) in self.layers.iter().enumerate() {
            h = crrbm::hidden_probs(p, h.view()).map_err(|source| NetworkError::Layer { layer, source })?;
        }
        Ok(h)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(match self.input_mode {
            InputMode::RealValued => 0,
            InputMode::Binary => 1,
        });
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for p in &self.layers {
            out.push(match p.visible_kind {
                VisibleKind::Binary => 0,
                VisibleKind::Gaussian => 1,
            });
            out.extend_from_slice(&(p.n_visible() as u32).to_le_bytes());
            out.extend_from_slice(&(p.n_hidden() as u32).to_le_bytes());
            for v in p.visible_bias.iter().chain(&p.hidden_bias).chain(p.weights.iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetworkError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic").map_err(|_| NetworkError::BadMagic)? != MAGIC {
            return Err(NetworkError::BadMagic);
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(NetworkError::VersionMismatch { found: version });
        }
        let input_mode = match r.u8("input mode")? {
            0 => InputMode::RealValued,
            1 => InputMode::Binary,
            b => return Err(NetworkError::DimensionMismatch(format!("unknown input mode byte {b}"))),
        };
        let n_layers = r.u32("layer count")? as usize;
        if n_layers == 0 {
            return Err(NetworkError::DimensionMismatch("zero layers".into()));
        }
        let mut layers = Vec::new();
        for _ in 0..n_layers {
            let kind = match r.u8("visible kind")? {
                0 => VisibleKind::Binary,
                1 => VisibleKind::Gaussian,
                b => {
                    return Err(NetworkError::DimensionMismatch(format!(
                        "unknown visible kind byte {b}"
                    )))
                }
            };
            let m = r.u32("visible size")? as usize;
            let mh = r.u32("hidden size")? as usize;
            let a = Array1::from(r.f64s(m, "visible biases")?);
            let b = Array1::from(r.f64s(mh, "hidden biases")?);
            let w = r.f64s(
                m.checked_mul(mh).ok_or(NetworkError::Truncated { what: "weights" })?,
                "weights",
            )?;
            let w = Array2::from_shape_vec((m, mh), w).expect("length checked");
            layers.push(RbmParams::new(w, a, b, kind).map_err(|e| NetworkError::DimensionMismatch(e.to_string()))?);
        }
        if r.pos != bytes.len() {
            return Err(NetworkError::DimensionMismatch(format!(
                "{} trailing bytes after last layer",
                bytes.len() - r.pos
            )));
        }
        UcrdNet::new(layers, input_mode).map_err(|e| match e {
            NetworkError::Inconsistent(msg) => NetworkError::DimensionMismatch(msg),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NetworkError> {
        fs::write(path, self.to_bytes()).map_err(|source| NetworkError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let bytes = fs::read(path).map_err(|source| NetworkError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        UcrdNet::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], NetworkError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(NetworkError::Truncated { what })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, NetworkError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, NetworkError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, NetworkError> {
        let raw = self.take(n.checked_mul(8).ok_or(NetworkError::Truncated { what })?, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// LSH block partition used for a layer trained on `d` with `cfg`: group
/// counts from the config, hashing seeded from `derive_seed(cfg.seed, "lsh")`.
pub fn layer_partition(d: &Dataset, cfg: &TrainConfig) -> Result<BlockPartition, RbmError> {
    let (k, l) = cfg.group_counts(d.n_rows(), d.n_cols());
    cfg.validate(d.n_rows(), d.n_cols())?;
    Ok(BlockPartition::from_lsh(
        d,
        k,
        l,
        cfg.n_hashes,
        derive_seed(cfg.seed, "lsh"),
    )?)
}

/// One trained layer and what it saw.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRun {
    pub report: TrainReport,
    pub partition: BlockPartition,
}

/// Greedy layer-wise training, one layer per config.
pub fn train_network(d: &Dataset, cfgs: &[TrainConfig]) -> Result<(UcrdNet, Vec<LayerRun>), NetworkError> {
    train_network_with(d, cfgs, PartitionPolicy::PerLayer, false)
}

/// [`train_network`] with an explicit partition policy. With `classic` set,
/// every layer is trained by plain CD-1 (same seeds, same partitions for
/// reporting), giving a stacked-RBM baseline.
pub fn train_network_with(
    d: &Dataset,
    cfgs: &[TrainConfig],
    policy: PartitionPolicy,
    classic: bool,
) -> Result<(UcrdNet, Vec<LayerRun>), NetworkError> {
    if cfgs.is_empty() {
        return Err(NetworkError::NoLayers);
    }
    let input_mode =
        InputMode::for_preprocessing(d.preprocessing()).ok_or(NetworkError::Preprocessing(d.preprocessing()))?;
    let mut layers = Vec::with_capacity(cfgs.len());
    let mut runs: Vec<LayerRun> = Vec::with_capacity(cfgs.len());
    let mut input = d.without_labels();
    for (layer, cfg) in cfgs.iter().enumerate() {
        let wrap = |source| NetworkError::Layer { layer, source };
        let partition = match (policy, runs.first()) {
            (PartitionPolicy::ReuseInput, Some(first)) => first.partition.clone(),
            _ => layer_partition(&input, cfg).map_err(wrap)?,
        };
        let (params, report) = if classic {
            crrbm::train_classic(&input, cfg, &partition)
        } else {
            crrbm::train(&input, cfg, &partition)
        }
        .map_err(wrap)?;
        let hidden = crrbm::hidden_probs(&params, input.values()).map_err(wrap)?;
        input = Dataset::with_preprocessing(hidden, None, Preprocessing::UnitInterval)
            .map_err(|e| NetworkError::Inconsistent(format!("layer {layer} output: {e}")))?;
        layers.push(params);
        runs.push(LayerRun { report, partition });
    }
    Ok((UcrdNet::new(layers, input_mode)?, runs))
}

/// Three layer configs sharing `base`, with per-layer seeds derived from
/// `base.seed` and the roles `"layer.0"`, `"layer.1"`, `"layer.2"`.
pub fn default_stack(base: &TrainConfig) -> Vec<TrainConfig> {
    (0..3)
        .map(|t| TrainConfig {
            seed: derive_seed(base.seed, &format!("layer.{t}")),
            ..base.clone()
        })
        .collect()
}
