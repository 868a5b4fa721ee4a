//! Command-line driver: `train`, `evaluate` and `benchmark`.
//!
//! Run configs are line-oriented `key = value` text with `[section]`
//! headers; lines starting with `#` or `;` are comments. Relative paths are
//! resolved against the config file's directory. See the README for the
//! full key list.
//!
//! Exit status: 0 on success, 1 on a runtime failure, 2 on invalid input
//! (bad flags, bad config, missing files, unlabeled data where labels are
//! needed).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::{Array2, ArrayView2};

use crate::clustering::{self, ClusterResult};
use crate::crrbm::{CollaborativeSign, GradientMode, TrainConfig};
use crate::dataio::{self, CsvOptions, Dataset};
use crate::metrics::{self, MetricTable};
use crate::network::{self, InputMode, PartitionPolicy, UcrdNet};
use crate::seed::derive_seed;

/// A failed command, carrying its exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Kmeans,
    Spectral,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::Spectral => "spectral",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Accuracy,
    Jaccard,
    Fmi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub path: PathBuf,
    pub csv: CsvOptions,
    pub input_mode: InputMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub algorithms: Vec<Algorithm>,
    /// Cluster count; `None` means the number of classes in the labels.
    pub k: Option<usize>,
    pub n_init: usize,
    pub max_iter: usize,
    pub sigma: Option<f64>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            algorithms: vec![Algorithm::Kmeans, Algorithm::Spectral],
            k: None,
            n_init: clustering::DEFAULT_N_INIT,
            max_iter: clustering::DEFAULT_MAX_ITER,
            sigma: None,
        }
    }
}

/// Batch size used when a config leaves it unset, capped at the row count.
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_REPEATS: usize = 10;

/// A parsed run config. Layer seeds are derived from `seed` when the
/// layers are resolved, so overriding the seed changes every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<DataConfig>,
    /// Per-layer settings; `batch_size = 0` means "unset".
    pub layers: Vec<TrainConfig>,
    pub partition: PartitionPolicy,
    pub clustering: ClusterConfig,
    pub seed: u64,
    pub repeats: usize,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            layers: vec![
                TrainConfig {
                    batch_size: 0,
                    ..TrainConfig::default()
                };
                3
            ],
            partition: PartitionPolicy::PerLayer,
            clustering: ClusterConfig::default(),
            seed: 0,
            repeats: DEFAULT_REPEATS,
            output: PathBuf::from("ucrdnet-out"),
        }
    }
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn parse_sections(text: &str) -> Result<Vec<(String, Vec<Entry>)>, CliError> {
    let mut sections: Vec<(String, Vec<Entry>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            sections.push((name.trim().to_string(), Vec::new()));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(invalid(format!(
                "line {}: expected `key = value`, found {line:?}",
                i + 1
            )));
        };
        let Some((_, entries)) = sections.last_mut() else {
            return Err(invalid(format!("line {}: key outside of any [section]", i + 1)));
        };
        entries.push(Entry {
            line: i + 1,
            key: key.trim().to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(sections)
}

fn parse_value<T: std::str::FromStr>(section: &str, e: &Entry) -> Result<T, CliError> {
    e.value.parse().map_err(|_| {
        invalid(format!(
            "[{section}] {} (line {}): cannot parse {:?}",
            e.key, e.line, e.value
        ))
    })
}

fn field_error(section: &str, e: &Entry, msg: &str) -> CliError {
    invalid(format!("[{section}] {} (line {}): {msg}", e.key, e.line))
}

fn parse_bool(section: &str, e: &Entry) -> Result<bool, CliError> {
    match e.value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(field_error(section, e, "expected true or false")),
    }
}

/// Applies one training key to `cfg`; returns false for unknown keys.
fn apply_train_key(cfg: &mut TrainConfig, section: &str, e: &Entry) -> Result<bool, CliError> {
    match e.key.as_str() {
        "eta" => cfg.eta = parse_value(section, e)?,
        "learning_rate" => cfg.learning_rate = parse_value(section, e)?,
        "epochs" => cfg.epochs = parse_value(section, e)?,
        "batch_size" => cfg.batch_size = parse_value(section, e)?,
        "row_groups" => cfg.row_groups = Some(parse_value(section, e)?),
        "col_groups" => cfg.col_groups = Some(parse_value(section, e)?),
        "n_hashes" => cfg.n_hashes = parse_value(section, e)?,
        "gradient_mode" => {
            cfg.gradient_mode = match e.value.as_str() {
                "paper_printed" => GradientMode::RowGroupCentered,
                "exact_blockcost" => GradientMode::ExactBlockCost,
                _ => return Err(field_error(section, e, "expected paper_printed or exact_blockcost")),
            }
        }
        "collaborative_sign" => {
            cfg.collaborative_sign = match e.value.as_str() {
                "descent" => CollaborativeSign::Descent,
                "paper_literal" => CollaborativeSign::Ascent,
                _ => return Err(field_error(section, e, "expected descent or paper_literal")),
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

impl RunConfig {
    /// Parses config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        let sections = parse_sections(text)?;
        let mut base_layer = cfg.layers[0].clone();
        let mut n_layers = 3usize;
        let mut overrides: Vec<(usize, &str, &Entry)> = Vec::new();
        let mut data_path = None;
        let mut csv = CsvOptions::default();
        let mut input_mode = None;
        for (name, entries) in &sections {
            let section = name.as_str();
            if let Some(idx) = section.strip_prefix("layer.") {
                let t: usize = idx
                    .parse()
                    .map_err(|_| invalid(format!("[{section}]: layer index must be a number")))?;
                overrides.extend(entries.iter().map(|e| (t, section, e)));
                continue;
            }
            if !matches!(section, "data" | "network" | "clustering" | "run") {
                return Err(invalid(format!("unknown section [{section}]")));
            }
            for e in entries {
                match (section, e.key.as_str()) {
                    ("data", "path") => data_path = Some(base.join(&e.value)),
                    ("data", "label_column") => csv.label_column = Some(parse_value(section, e)?),
                    ("data", "header") => csv.has_header = parse_bool(section, e)?,
                    ("data", "delimiter") => {
                        let v = if e.value == "tab" { "\t" } else { e.value.as_str() };
                        if v.len() != 1 {
                            return Err(field_error(section, e, "expected a single character or `tab`"));
                        }
                        csv.delimiter = v.as_bytes()[0];
                    }
                    ("data", "input_mode") => {
                        input_mode = Some(match e.value.as_str() {
                            "real_valued" => InputMode::RealValued,
                            "binary" => InputMode::Binary,
                            _ => return Err(field_error(section, e, "expected real_valued or binary")),
                        })
                    }
                    ("network", "layers") => {
                        n_layers = parse_value(section, e)?;
                        if n_layers == 0 {
                            return Err(field_error(section, e, "must be at least 1"));
                        }
                    }
                    ("network", "partition") => {
                        cfg.partition = match e.value.as_str() {
                            "per_layer" => PartitionPolicy::PerLayer,
                            "reuse_input" => PartitionPolicy::ReuseInput,
                            _ => return Err(field_error(section, e, "expected per_layer or reuse_input")),
                        }
                    }
                    ("network", _) => {
                        if !apply_train_key(&mut base_layer, section, e)? {
                            return Err(field_error(section, e, "unknown key"));
                        }
                    }
                    ("clustering", "algorithms") => {
                        let mut algs = Vec::new();
                        for name in e.value.split(',').map(str::trim) {
                            let alg = Algorithm::from_str(name, true)
                                .map_err(|_| field_error(section, e, &format!("unknown algorithm {name:?}")))?;
                            if !algs.contains(&alg) {
                                algs.push(alg);
                            }
                        }
                        if algs.is_empty() {
                            return Err(field_error(section, e, "no algorithms listed"));
                        }
                        cfg.clustering.algorithms = algs;
                    }
                    ("clustering", "k") => cfg.clustering.k = Some(parse_value(section, e)?),
                    ("clustering", "n_init") => cfg.clustering.n_init = parse_value(section, e)?,
                    ("clustering", "max_iter") => cfg.clustering.max_iter = parse_value(section, e)?,
                    ("clustering", "sigma") => cfg.clustering.sigma = Some(parse_value(section, e)?),
                    ("run", "seed") => cfg.seed = parse_value(section, e)?,
                    ("run", "repeats") => cfg.repeats = parse_value(section, e)?,
                    ("run", "output") => cfg.output = base.join(&e.value),
                    _ => return Err(field_error(section, e, "unknown key")),
                }
            }
        }
        cfg.layers = vec![base_layer; n_layers];
        for (t, section, e) in overrides {
            let Some(layer) = cfg.layers.get_mut(t) else {
                return Err(invalid(format!(
                    "[{section}]: network has only {n_layers} layers (indices from 0)"
                )));
            };
            if !apply_train_key(layer, section, e)? {
                return Err(field_error(section, e, "unknown key"));
            }
        }
        if let Some(path) = data_path {
            cfg.data = Some(DataConfig {
                path,
                csv,
                input_mode: input_mode.unwrap_or(InputMode::RealValued),
            });
        } else if input_mode.is_some() || csv != CsvOptions::default() {
            return Err(invalid("[data] path: missing"));
        }
        if cfg.repeats == 0 {
            return Err(invalid("[run] repeats: must be at least 1"));
        }
        if cfg.clustering.n_init == 0 {
            return Err(invalid("[clustering] n_init: must be at least 1"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, base)
    }

    /// Layer configs for an `n`-row input: seeds derived from the master
    /// seed, unset batch sizes filled in, and every layer validated.
    pub fn resolve_layers(&self, n: usize, m: usize) -> Result<Vec<TrainConfig>, CliError> {
        self.layers
            .iter()
            .enumerate()
            .map(|(t, layer)| {
                let mut c = layer.clone();
                c.seed = derive_seed(self.seed, &format!("layer.{t}"));
                if c.batch_size == 0 {
                    c.batch_size = DEFAULT_BATCH_SIZE.min(n);
                }
                c.validate(n, m).map_err(|e| invalid(format!("[layer.{t}]: {e}")))?;
                Ok(c)
            })
            .collect()
    }
}

/// Loads and preprocesses a dataset for a network input mode.
pub fn prepare_dataset(path: &Path, csv: &CsvOptions, mode: InputMode) -> Result<Dataset, CliError> {
    if !path.exists() {
        return Err(invalid(format!("[data] path: file not found: {}", path.display())));
    }
    let raw = dataio::load_csv(path, csv).map_err(|e| invalid(format!("[data] path: {e}")))?;
    match mode {
        InputMode::RealValued => dataio::standardize(&raw),
        InputMode::Binary => dataio::scale_unit_interval(&raw),
    }
    .map_err(runtime)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))
}

/// Output of [`train_from_config`].
pub struct TrainOutcome {
    pub net: UcrdNet,
    pub runs: Vec<network::LayerRun>,
    pub data: Dataset,
}

pub fn train_from_config(cfg: &RunConfig) -> Result<TrainOutcome, CliError> {
    let data_cfg = cfg.data.as_ref().ok_or_else(|| invalid("[data] path: missing"))?;
    let data = prepare_dataset(&data_cfg.path, &data_cfg.csv, data_cfg.input_mode)?;
    let layers = cfg.resolve_layers(data.n_rows(), data.n_cols())?;
    let (net, runs) = network::train_network_with(&data, &layers, cfg.partition, false).map_err(runtime)?;
    Ok(TrainOutcome { net, runs, data })
}

/// Per-epoch report of every layer as CSV text.
pub fn report_csv(runs: &[network::LayerRun]) -> String {
    let mut out = String::from("layer,epoch,reconstruction_error,c_data,c_recon,c_data_surrogate,c_recon_surrogate\n");
    for (t, run) in runs.iter().enumerate() {
        for (e, s) in run.report.epochs.iter().enumerate() {
            let c = s.cost;
            writeln!(
                out,
                "{t},{},{},{},{},{},{}",
                e + 1,
                s.reconstruction_error,
                c.data,
                c.recon,
                c.data_surrogate,
                c.recon_surrogate
            )
            .expect("write to string");
        }
    }
    out
}

/// Mean and population standard deviation of each metric over repeats.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSummary {
    pub accuracy: (f64, f64),
    pub jaccard: (f64, f64),
    pub fmi: (f64, f64),
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs one clustering algorithm on `features`.
pub fn cluster(
    alg: Algorithm,
    features: ArrayView2<'_, f64>,
    k: usize,
    cc: &ClusterConfig,
    seed: u64,
) -> Result<ClusterResult, CliError> {
    match alg {
        Algorithm::Kmeans => clustering::kmeans(features, k, seed, cc.max_iter, cc.n_init),
        Algorithm::Spectral => clustering::spectral(features, k, cc.sigma, seed),
    }
    .map_err(|e| invalid(format!("[clustering]: {e}")))
}

/// Clusters `features` `repeats` times per algorithm and scores against
/// `truth`. Repeat `r` of algorithm `a` uses `derive_seed(seed, "evaluate.<a>.<r>")`.
/// Also returns the labels of each algorithm's first repeat.
pub fn evaluate_features(
    features: ArrayView2<'_, f64>,
    truth: &[usize],
    k: usize,
    cc: &ClusterConfig,
    repeats: usize,
    seed: u64,
) -> Result<Vec<(Algorithm, MetricSummary, Vec<usize>)>, CliError> {
    let mut out = Vec::new();
    for &alg in &cc.algorithms {
        let (mut acc, mut jac, mut fm) = (Vec::new(), Vec::new(), Vec::new());
        let mut first = Vec::new();
        for r in 0..repeats {
            let res = cluster(
                alg,
                features,
                k,
                cc,
                derive_seed(seed, &format!("evaluate.{}.{r}", alg.name())),
            )?;
            acc.push(metrics::clustering_accuracy(&res.labels, truth).map_err(runtime)?);
            jac.push(metrics::jaccard_index(&res.labels, truth).map_err(runtime)?);
            fm.push(metrics::fmi(&res.labels, truth).map_err(runtime)?);
            if r == 0 {
                first = res.labels;
            }
        }
        let summary = MetricSummary {
            accuracy: mean_std(&acc),
            jaccard: mean_std(&jac),
            fmi: mean_std(&fm),
        };
        out.push((alg, summary, first));
    }
    Ok(out)
}

pub fn evaluation_csv(rows: &[(String, MetricSummary)], repeats: usize) -> String {
    let mut out =
        String::from("algorithm,accuracy_mean,accuracy_std,jaccard_mean,jaccard_std,fmi_mean,fmi_std,repeats\n");
    for (name, s) in rows {
        writeln!(
            out,
            "{name},{},{},{},{},{},{},{repeats}",
            s.accuracy.0, s.accuracy.1, s.jaccard.0, s.jaccard.1, s.fmi.0, s.fmi.1
        )
        .expect("write to string");
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn labels_of(d: &Dataset) -> Result<Vec<usize>, CliError> {
    d.labels()
        .map(<[usize]>::to_vec)
        .ok_or_else(|| invalid("dataset has no labels; set [data] label_column or --label-column"))
}

#[derive(Debug, Parser)]
#[command(
    name = "ucrdnet",
    version,
    about = "Collaborative-representation deep network: train, evaluate, benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network from a run config; writes model.ucrd and train_report.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides [run] seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides [run] output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster a labeled dataset's network features; writes evaluation.csv.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Dataset CSV; defaults to [data] path of --config.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Run config supplying data and clustering settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Zero-based label column (overrides the config).
        #[arg(long)]
        label_column: Option<usize>,
        /// The dataset has a header row.
        #[arg(long)]
        header: bool,
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<Algorithm>>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate metric tables and run configs in a directory into a
    /// Friedman aligned-ranks comparison.
    Benchmark {
        /// Directory of *.csv metric tables and *.conf run configs.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Metric used for *.conf pipeline runs.
        #[arg(long, value_enum, default_value = "accuracy")]
        metric: Metric,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repeats: Option<usize>,
    },
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Train { config, seed, out } => cmd_train(&config, seed, out.as_deref()),
        Command::Evaluate {
            model,
            data,
            config,
            label_column,
            header,
            algorithms,
            k,
            repeats,
            seed,
            out,
        } => {
            let opts = EvaluateOptions {
                data,
                config,
                label_column,
                header,
                algorithms,
                k,
                repeats,
                seed,
                out,
            };
            cmd_evaluate(&model, &opts)
        }
        Command::Benchmark {
            config,
            out,
            metric,
            seed,
            repeats,
        } => cmd_benchmark(&config, &out, metric, seed, repeats).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn cmd_train(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output = o.to_path_buf();
    }
    let outcome = train_from_config(&cfg)?;
    create_dir(&cfg.output)?;
    let model = cfg.output.join("model.ucrd");
    outcome.net.save(&model).map_err(runtime)?;
    write_text(&cfg.output.join("train_report.csv"), &report_csv(&outcome.runs))?;
    for w in outcome.data.warnings() {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", model.display());
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    pub data: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub label_column: Option<usize>,
    pub header: bool,
    pub algorithms: Option<Vec<Algorithm>>,
    pub k: Option<usize>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

pub fn cmd_evaluate(model: &Path, opts: &EvaluateOptions) -> Result<(), CliError> {
    let cfg = match &opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if !model.exists() {
        return Err(invalid(format!("--model: file not found: {}", model.display())));
    }
    let net = UcrdNet::load(model).map_err(|e| invalid(format!("--model: {e}")))?;
    let mut csv = cfg.data.as_ref().map(|d| d.csv.clone()).unwrap_or_default();
    if let Some(c) = opts.label_column {
        csv.label_column = Some(c);
    }
    csv.has_header |= opts.header;
    let path = opts
        .data
        .clone()
        .or_else(|| cfg.data.as_ref().map(|d| d.path.clone()))
        .ok_or_else(|| invalid("--data: missing (and no [data] path in --config)"))?;
    let data = prepare_dataset(&path, &csv, net.input_mode())?;
    let truth = labels_of(&data)?;
    let features = net
        .transform(data.values())
        .map_err(|e| invalid(format!("--data: {e}")))?;
    let mut cc = cfg.clustering.clone();
    if let Some(a) = &opts.algorithms {
        cc.algorithms = a.clone();
    }
    if opts.k.is_some() {
        cc.k = opts.k;
    }
    let k = cc.k.or(data.n_classes()).expect("labels present");
    let repeats = opts.repeats.unwrap_or(cfg.repeats);
    if repeats == 0 {
        return Err(invalid("--repeats: must be at least 1"));
    }
    let seed = opts.seed.unwrap_or(cfg.seed);
    let out = opts.out.clone().unwrap_or(cfg.output.clone());
    let results = evaluate_features(features.view(), &truth, k, &cc, repeats, seed)?;
    create_dir(&out)?;
    let rows: Vec<(String, MetricSummary)> = results.iter().map(|(a, s, _)| (a.name().to_string(), *s)).collect();
    write_text(&out.join("evaluation.csv"), &evaluation_csv(&rows, repeats))?;
    for (alg, _, labels) in &results {
        clustering::write_labels(&out.join(format!("labels_{}.csv", alg.name())), labels).map_err(runtime)?;
    }
    println!("wrote {}", out.join("evaluation.csv").display());
    Ok(())
}

/// Result of [`cmd_benchmark`].
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub table: MetricTable,
    pub ranks: metrics::RankTable,
    pub friedman: metrics::FriedmanResult,
}

/// Metric row of one `*.conf` run: clustering the preprocessed input
/// (`raw-<alg>`) and the trained network's features (`ucrdnet-<alg>`).
fn pipeline_row(
    conf: &Path,
    metric: Metric,
    seed: Option<u64>,
    repeats: Option<usize>,
) -> Result<(Vec<String>, Vec<f64>), CliError> {
    let mut cfg = RunConfig::load(conf)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = repeats {
        cfg.repeats = r;
    }
    let outcome = train_from_config(&cfg)?;
    let truth = labels_of(&outcome.data).map_err(|e| invalid(format!("{}: {e}", conf.display())))?;
    let k = cfg.clustering.k.or(outcome.data.n_classes()).expect("labels present");
    let features = outcome.net.transform(outcome.data.values()).map_err(runtime)?;
    let pick = |s: &MetricSummary| match metric {
        Metric::Accuracy => s.accuracy.0,
        Metric::Jaccard => s.jaccard.0,
        Metric::Fmi => s.fmi.0,
    };
    let mut names = Vec::new();
    let mut values = Vec::new();
    for (prefix, x) in [("raw", outcome.data.values()), ("ucrdnet", features.view())] {
        for (alg, s, _) in evaluate_features(x, &truth, k, &cfg.clustering, cfg.repeats, cfg.seed)? {
            names.push(format!("{prefix}-{}", alg.name()));
            values.push(pick(&s));
        }
    }
    Ok((names, values))
}

/// Collects every `*.csv` metric table and `*.conf` pipeline run in `dir`
/// (sorted by file name) into one table and runs the aligned-ranks test.
/// Writes `metrics.csv`, `aligned.csv`, `ranks.csv` and `summary.csv` to `out`.
pub fn cmd_benchmark(
    dir: &Path,
    out: &Path,
    metric: Metric,
    seed: Option<u64>,
    repeats: Option<usize>,
) -> Result<BenchmarkReport, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| invalid(format!("--config: {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    files.sort();
    let mut algorithms: Option<Vec<String>> = None;
    let mut datasets = Vec::new();
    let mut values = Vec::new();
    let mut add = |name: String, algs: Vec<String>, row: Vec<f64>, src: &Path| -> Result<(), CliError> {
        match &algorithms {
            Some(a) if *a != algs => {
                return Err(invalid(format!(
                    "{}: algorithms {algs:?} differ from earlier inputs {a:?}",
                    src.display()
                )))
            }
            Some(_) => {}
            None => algorithms = Some(algs),
        }
        datasets.push(name);
        values.extend(row);
        Ok(())
    };
    for f in &files {
        match f.extension().and_then(|e| e.to_str()) {
            Some("csv") => {
                let t = MetricTable::read_csv(f).map_err(|e| invalid(format!("{}: {e}", f.display())))?;
                for (name, row) in t.datasets.iter().zip(t.values.rows()) {
                    add(name.clone(), t.algorithms.clone(), row.to_vec(), f)?;
                }
            }
            Some("conf") => {
                let (algs, row) = pipeline_row(f, metric, seed, repeats)?;
                let name = f
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                add(name, algs, row, f)?;
            }
            _ => {}
        }
    }
    let algorithms = algorithms.unwrap_or_default();
    if datasets.len() < 2 || algorithms.len() < 2 {
        return Err(invalid(format!(
            "benchmark needs at least 2 datasets and 2 algorithms, found {} x {} in {}",
            datasets.len(),
            algorithms.len(),
            dir.display()
        )));
    }
    let values = Array2::from_shape_vec((datasets.len(), algorithms.len()), values).expect("rows checked");
    let table = MetricTable::new(datasets, algorithms, values).map_err(runtime)?;
    let ranks = metrics::aligned_ranks(table.values.view()).map_err(|e| invalid(e.to_string()))?;
    let friedman = metrics::friedman_aligned(&ranks);

    create_dir(out)?;
    table.write_csv(&out.join("metrics.csv")).map_err(runtime)?;
    let aligned = ranks.aligned().expect("built from values").to_owned();
    metrics::write_matrix(
        &out.join("aligned.csv"),
        &table.datasets,
        &table.algorithms,
        aligned.view(),
    )
    .map_err(runtime)?;
    let mut rank_rows = table.datasets.clone();
    rank_rows.push("total".into());
    let mut with_totals = ranks.ranks().to_owned();
    with_totals.push_row(ranks.col_totals().view()).expect("matching width");
    metrics::write_matrix(
        &out.join("ranks.csv"),
        &rank_rows,
        &table.algorithms,
        with_totals.view(),
    )
    .map_err(runtime)?;
    let mut summary = String::from("key,value\n");
    writeln!(summary, "n_datasets,{}", table.datasets.len()).expect("write to string");
    writeln!(summary, "n_algorithms,{}", table.algorithms.len()).expect("write to string");
    writeln!(summary, "df,{}", friedman.df).expect("write to string");
    writeln!(summary, "T,{}", friedman.t).expect("write to string");
    writeln!(summary, "p,{}", friedman.p).expect("write to string");
    writeln!(summary, "degenerate,{}", friedman.degenerate).expect("write to string");
    for (alg, total) in table.algorithms.iter().zip(ranks.col_totals()) {
        writeln!(summary, "rank_total.{alg},{total}").expect("write to string");
    }
    write_text(&out.join("summary.csv"), &summary)?;
    println!("T = {} (df {}), p = {}", friedman.t, friedman.df, friedman.p);
    Ok(BenchmarkReport { table, ranks, friedman })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_sections() {
        let text = "\
# comment
[data]
path = x.csv
label_column = 4
header = true
delimiter = tab
input_mode = binary

[network]
layers = 2
eta = 0.25
epochs = 7
row_groups = 3
gradient_mode = exact_blockcost
partition = reuse_input

[layer.1]
epochs = 2
collaborative_sign = paper_literal

[clustering]
algorithms = spectral, kmeans
k = 4
sigma = 0.5

[run]
seed = 9
repeats = 3
output = out
";
        let cfg = RunConfig::parse(text, Path::new("/base")).unwrap();
        let data = cfg.data.unwrap();
        assert_eq!(data.path, PathBuf::from("/base/x.csv"));
        assert_eq!(data.csv.label_column, Some(4));
        assert_eq!(data.csv.delimiter, b'\t');
        assert!(data.csv.has_header);
        assert_eq!(data.input_mode, InputMode::Binary);
        assert_eq!(cfg.layers.len(), 2);
        assert_eq!(cfg.layers[0].epochs, 7);
        assert_eq!(cfg.layers[1].epochs, 2);
        assert_eq!(cfg.layers[1].eta, 0.25);
        assert_eq!(cfg.layers[0].gradient_mode, GradientMode::ExactBlockCost);
        assert_eq!(cfg.layers[1].collaborative_sign, CollaborativeSign::Ascent);
        assert_eq!(cfg.layers[0].collaborative_sign, CollaborativeSign::Descent);
        assert_eq!(cfg.partition, PartitionPolicy::ReuseInput);
        assert_eq!(cfg.clustering.algorithms, vec![Algorithm::Spectral, Algorithm::Kmeans]);
        assert_eq!(cfg.clustering.k, Some(4));
        assert_eq!((cfg.seed, cfg.repeats), (9, 3));
        assert_eq!(cfg.output, PathBuf::from("/base/out"));
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("[network]\neta = abc\n", "[network] eta"),
            ("[network]\nwhat = 1\n", "[network] what"),
            ("[bogus]\n", "[bogus]"),
            ("eta = 1\n", "outside"),
            ("[layer.5]\nepochs = 1\n", "[layer.5]"),
            ("[clustering]\nalgorithms = dbscan\n", "[clustering] algorithms"),
            ("[data]\nheader = true\n", "[data] path"),
            ("[run]\nrepeats = 0\n", "[run] repeats"),
        ];
        for (text, needle) in cases {
            let err = RunConfig::parse(text, Path::new(".")).unwrap_err();
            assert_eq!(err.exit_code(), 2);
            assert!(err.to_string().contains(needle), "{err} lacks {needle}");
        }
    }

    #[test]
    fn layer_resolution() {
        let cfg = RunConfig {
            seed: 5,
            ..RunConfig::default()
        };
        let layers = cfg.resolve_layers(10, 4).unwrap();
        assert_eq!(layers.len(), 3);
        assert_eq!(layers[0].batch_size, 10);
        assert_eq!(layers[1].seed, derive_seed(5, "layer.1"));
        let bad = RunConfig {
            layers: vec![TrainConfig {
                eta: 2.0,
                ..TrainConfig::default()
            }],
            ..RunConfig::default()
        };
        assert!(bad.resolve_layers(10, 4).unwrap_err().to_string().contains("[layer.0]"));
    }

    #[test]
    fn population_std() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
    }
}
