//! Dataset loading, validation and preprocessing.
//!
//! A [`Dataset`] is an immutable `N x M` matrix of finite reals, optionally
//! paired with class labels. Labels are remapped to contiguous ids
//! `0..n_classes` in order of first appearance; the original identifiers are
//! kept in [`Dataset::class_names`].
//!
//! Two preprocessing routes exist, one per visible-unit kind:
//! [`standardize`] (z-score, population variance) feeds Gaussian visible
//! units and [`scale_unit_interval`] (per-column min-max) feeds binary ones.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty input")]
    Empty,
    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {col}: cannot parse {text:?} as a finite real")]
    Parse { row: usize, col: usize, text: String },
    #[error("label column {col} out of range for rows with {width} fields")]
    LabelColumn { col: usize, width: usize },
    #[error("dataset is already preprocessed ({0})")]
    AlreadyPreprocessed(Preprocessing),
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

/// Preprocessing applied to a [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preprocessing {
    Raw,
    Standardized,
    UnitInterval,
}

impl fmt::Display for Preprocessing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preprocessing::Raw => "raw",
            Preprocessing::Standardized => "standardized",
            Preprocessing::UnitInterval => "unit_interval",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Array2<f64>,
    labels: Option<Vec<usize>>,
    class_names: Option<Vec<String>>,
    preprocessing: Preprocessing,
    warnings: Vec<String>,
}

impl Dataset {
    /// Builds a raw dataset from a value matrix and optional integer labels.
    ///
    /// Labels may be any integers; they are remapped to `0..n_classes` in order
    /// of first appearance.
    pub fn new(values: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self, DataError> {
        let names = labels.map(|l| l.iter().map(|v| v.to_string()).collect::<Vec<_>>());
        Self::from_parts(values, names, Preprocessing::Raw)
    }

    /// Builds a dataset with a declared preprocessing state, validating the
    /// state's invariant (for instance, every entry in `[0, 1]` for
    /// [`Preprocessing::UnitInterval`]).
    pub fn with_preprocessing(
        values: Array2<f64>,
        labels: Option<Vec<usize>>,
        preprocessing: Preprocessing,
    ) -> Result<Self, DataError> {
        let names = labels.map(|l| l.iter().map(|v| v.to_string()).collect::<Vec<_>>());
        let d = Self::from_parts(values, names, preprocessing)?;
        d.check_preprocessing()?;
        Ok(d)
    }

    fn from_parts(
        values: Array2<f64>,
        raw_labels: Option<Vec<String>>,
        preprocessing: Preprocessing,
    ) -> Result<Self, DataError> {
        let (n, m) = values.dim();
        if n == 0 || m == 0 {
            return Err(DataError::Empty);
        }
        if let Some(((r, c), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(DataError::Parse {
                row: r,
                col: c,
                text: values[[r, c]].to_string(),
            });
        }
        let (labels, class_names) = match raw_labels {
            None => (None, None),
            Some(raw) => {
                if raw.len() != n {
                    return Err(DataError::Invalid(format!("{} labels for {} rows", raw.len(), n)));
                }
                let mut ids: HashMap<String, usize> = HashMap::new();
                let mut names = Vec::new();
                let labels = raw
                    .into_iter()
                    .map(|name| {
                        let next = ids.len();
                        *ids.entry(name.clone()).or_insert_with(|| {
                            names.push(name);
                            next
                        })
                    })
                    .collect();
                (Some(labels), Some(names))
            }
        };
        Ok(Dataset {
            values,
            labels,
            class_names,
            preprocessing,
            warnings: Vec::new(),
        })
    }

    fn check_preprocessing(&self) -> Result<(), DataError> {
        match self.preprocessing {
            Preprocessing::UnitInterval => {
                if self.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(DataError::Invalid(
                        "unit_interval dataset has entries outside [0, 1]".into(),
                    ));
                }
            }
            Preprocessing::Standardized => {
                let n = self.n_rows() as f64;
                for (j, col) in self.values.axis_iter(Axis(1)).enumerate() {
                    let mean = col.sum() / n;
                    if mean.abs() > 1e-9 {
                        return Err(DataError::Invalid(format!("standardized column {j} has mean {mean}")));
                    }
                }
            }
            Preprocessing::Raw => {}
        }
        Ok(())
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Contiguous class ids, one per row.
    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Original label text for each class id.
    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.class_names.as_ref().map(Vec::len)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn preprocessing(&self) -> Preprocessing {
        self.preprocessing
    }

    /// Notes recorded by preprocessing (for example constant columns).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Returns a copy whose labels were dropped.
    pub fn without_labels(&self) -> Dataset {
        Dataset {
            labels: None,
            class_names: None,
            ..self.clone()
        }
    }
}

/// CSV parsing options.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Zero-based index of the label column, if any.
    pub label_column: Option<usize>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: false,
            label_column: None,
        }
    }
}

/// Loads a delimited text file. Row and column positions in errors are
/// zero-based and count data rows only (a skipped header is not counted).
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut flat = Vec::new();
    let mut labels = opts.label_column.map(|_| Vec::new());
    let mut width = None;
    let mut n_rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(DataError::Ragged {
                row,
                expected,
                found: record.len(),
            });
        }
        if let Some(lc) = opts.label_column {
            if lc >= expected {
                return Err(DataError::LabelColumn {
                    col: lc,
                    width: expected,
                });
            }
        }
        for (col, field) in record.iter().enumerate() {
            if Some(col) == opts.label_column {
                if let Some(l) = labels.as_mut() {
                    l.push(field.to_string());
                }
                continue;
            }
            let v: f64 = field.parse().map_err(|_| DataError::Parse {
                row,
                col,
                text: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    row,
                    col,
                    text: field.to_string(),
                });
            }
            flat.push(v);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(DataError::Empty);
    }
    let m = flat.len() / n_rows;
    if m == 0 {
        return Err(DataError::Invalid("no feature columns".into()));
    }
    let values = Array2::from_shape_vec((n_rows, m), flat).map_err(|e| DataError::Invalid(e.to_string()))?;
    Dataset::from_parts(values, labels, Preprocessing::Raw)
}

/// Writes values (and the label column, when the dataset has labels and
/// `opts.label_column` is set) using the shortest round-trip representation
/// of each float.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>, opts: &CsvOptions) -> Result<(), DataError> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    let delim = opts.delimiter as char;
    let labels = match (opts.label_column, d.labels(), d.class_names()) {
        (Some(col), Some(l), Some(names)) => Some((col.min(d.n_cols()), l, names)),
        _ => None,
    };
    if opts.has_header {
        let mut header: Vec<String> = (0..d.n_cols()).map(|j| format!("x{j}")).collect();
        if let Some((col, _, _)) = labels {
            header.insert(col, "label".into());
        }
        writeln!(out, "{}", header.join(&delim.to_string())).map_err(io_err)?;
    }
    for (i, row) in d.values.axis_iter(Axis(0)).enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some((col, l, names)) = labels {
            fields.insert(col, names[l[i]].clone());
        }
        writeln!(out, "{}", fields.join(&delim.to_string())).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn require_raw(d: &Dataset) -> Result<(), DataError> {
    match d.preprocessing {
        Preprocessing::Raw => Ok(()),
        other => Err(DataError::AlreadyPreprocessed(other)),
    }
}

/// Per-column z-score with population (1/N) variance. Constant columns become
/// all zeros and are noted in [`Dataset::warnings`].
pub fn standardize(d: &Dataset) -> Result<Dataset, DataError> {
    require_raw(d)?;
    let n = d.n_rows() as f64;
    let mut values = d.values.clone();
    let mut warnings = d.warnings.clone();
    for (j, mut col) in values.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std <= f64::EPSILON * mean.abs().max(1.0) {
            warnings.push(format!("column {j} is constant; standardized to zeros"));
            col.fill(0.0);
        } else {
            col.mapv_inplace(|v| (v - mean) / std);
        }
    }
    Ok(Dataset {
        values,
        warnings,
        preprocessing: Preprocessing::Standardized,
        ..d.clone()
    })
}

/// Per-column min-max scaling into `[0, 1]`; constant columns map to 0.5.
pub fn scale_unit_interval(d: &Dataset) -> Result<Dataset, DataError> {
    require_raw(d)?;
    let mut values = d.values.clone();
    let mut warnings = d.warnings.clone();
    for (j, mut col) in values.axis_iter_mut(Axis(1)).enumerate() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            let span = hi - lo;
            col.mapv_inplace(|v| ((v - lo) / span).clamp(0.0, 1.0));
        } else {
            warnings.push(format!("column {j} is constant; scaled to 0.5"));
            col.fill(0.5);
        }
    }
    Ok(Dataset {
        values,
        warnings,
        preprocessing: Preprocessing::UnitInterval,
        ..d.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn temp_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_small_fixture_exactly() {
        let f = temp_file("1,2\n3,4\n5,6\n");
        let d = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(d.values(), array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert_eq!(d.preprocessing(), Preprocessing::Raw);
        assert!(d.labels().is_none());
    }

    #[test]
    fn empty_file_is_rejected() {
        let f = temp_file("");
        let err = load_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert_eq!(err.to_string(), "empty input");
    }

    #[test]
    fn missing_file_is_rejected() {
        let err = load_csv("/definitely/not/here.csv", &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::Io { .. }));
    }

    #[test]
    fn ragged_and_unparseable_rows_report_positions() {
        let f = temp_file("1,2\n3\n");
        match load_csv(f.path(), &CsvOptions::default()).unwrap_err() {
            DataError::Ragged { row, expected, found } => assert_eq!((row, expected, found), (1, 2, 1)),
            e => panic!("unexpected {e}"),
        }
        let f = temp_file("1,2\n3,abc\n");
        match load_csv(f.path(), &CsvOptions::default()).unwrap_err() {
            DataError::Parse { row, col, .. } => assert_eq!((row, col), (1, 1)),
            e => panic!("unexpected {e}"),
        }
        let f = temp_file("1,NaN\n");
        assert!(matches!(
            load_csv(f.path(), &CsvOptions::default()),
            Err(DataError::Parse { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn label_column_is_extracted_and_remapped() {
        let f = temp_file("a;b;y\n1;2;L\n3;4;R\n5;6;L\n");
        let opts = CsvOptions {
            delimiter: b';',
            has_header: true,
            label_column: Some(2),
        };
        let d = load_csv(f.path(), &opts).unwrap();
        assert_eq!(d.values(), array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert_eq!(d.labels().unwrap(), &[0, 1, 0]);
        assert_eq!(d.class_names().unwrap(), &["L".to_string(), "R".to_string()]);
        assert_eq!(d.n_classes(), Some(2));
    }

    #[test]
    fn standardize_examples() {
        let d = Dataset::new(array![[2.0, 0.0], [2.0, 2.0]], None).unwrap();
        let s = standardize(&d).unwrap();
        assert_eq!(s.values().column(0).to_vec(), vec![0.0, 0.0]);
        assert_eq!(s.values().column(1).to_vec(), vec![-1.0, 1.0]);
        assert_eq!(s.warnings().len(), 1);
        assert_eq!(s.preprocessing(), Preprocessing::Standardized);
        assert!(matches!(
            standardize(&s),
            Err(DataError::AlreadyPreprocessed(Preprocessing::Standardized))
        ));
        assert!(scale_unit_interval(&s).is_err());
    }

    #[test]
    fn standardize_moments_on_random_fixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values = Array2::from_shape_fn((50, 5), |(_, j)| rng.random::<f64>() * (j as f64 + 1.0) * 10.0 - 3.0);
        let s = standardize(&Dataset::new(values, None).unwrap()).unwrap();
        // Independent moments: Kahan-compensated sums over each column.
        for j in 0..5 {
            let col: Vec<f64> = (0..50).map(|i| s.values()[[i, j]]).collect();
            let mean = kahan(&col) / 50.0;
            let sq: Vec<f64> = col.iter().map(|v| (v - mean).powi(2)).collect();
            let std = (kahan(&sq) / 50.0).sqrt();
            assert!(mean.abs() < 1e-9, "mean {mean}");
            assert!((std - 1.0).abs() < 1e-6, "std {std}");
        }
    }

    fn kahan(xs: &[f64]) -> f64 {
        let (mut sum, mut c) = (0.0, 0.0);
        for &x in xs {
            let y = x - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    }

    #[test]
    fn unit_interval_examples() {
        let d = Dataset::new(array![[1.0, 7.0], [3.0, 7.0], [5.0, 7.0]], None).unwrap();
        let s = scale_unit_interval(&d).unwrap();
        assert_eq!(s.values().column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(s.values().column(1).to_vec(), vec![0.5, 0.5, 0.5]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values = Array2::from_shape_fn((20, 3), |_| rng.random::<f64>() * 40.0 - 20.0);
        let s = scale_unit_interval(&Dataset::new(values, None).unwrap()).unwrap();
        for col in s.values().axis_iter(Axis(1)) {
            let mut lo = f64::MAX;
            let mut hi = f64::MIN;
            for &v in col {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            assert_eq!((lo, hi), (0.0, 1.0));
        }
    }

    #[test]
    fn preprocessing_keeps_labels() {
        let d = Dataset::new(array![[1.0], [2.0], [4.0]], Some(vec![5, 9, 5])).unwrap();
        for p in [standardize(&d).unwrap(), scale_unit_interval(&d).unwrap()] {
            assert_eq!(p.labels(), d.labels());
            assert_eq!(p.class_names(), d.class_names());
        }
    }

    #[test]
    fn declared_unit_interval_is_validated() {
        assert!(Dataset::with_preprocessing(array![[0.2, 1.5]], None, Preprocessing::UnitInterval).is_err());
        assert!(Dataset::with_preprocessing(array![[0.2, 1.0]], None, Preprocessing::UnitInterval).is_ok());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values = Array2::from_shape_fn((6, 3), |_| rng.random::<f64>() * 1e3 - 500.0);
        let d = Dataset::new(values, Some(vec![1, 0, 1, 2, 2, 0])).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        let opts = CsvOptions {
            label_column: Some(3),
            has_header: true,
            ..CsvOptions::default()
        };
        write_csv(&d, f.path(), &opts).unwrap();
        let back = load_csv(f.path(), &opts).unwrap();
        assert_eq!(back.values(), d.values());
        assert_eq!(back.labels(), d.labels());
    }
}
