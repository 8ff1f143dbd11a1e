//! Builds the surrogate training table from image triples.
//!
//! Each (original, processed) pair yields the reference-free input vector
//! `[psnr_in, drd_in, nrm_in]`, computed between an Otsu-binarized proxy of
//! the grayscale original and the processed image. The proxy stands in for
//! the original because DRD and NRM are defined only between bilevel
//! images; the global Otsu threshold keeps the proxy deterministic. The
//! target is the F-Measure of the processed image against its ground
//! truth, available only for training data.

use std::fs::File;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::imaging::{otsu_binarize, BinaryImage, GrayImage};
use crate::metrics::{confusion, drd, f_measure, nrm, psnr, MetricError};

/// PSNR values above this (including the identical-image infinity
/// sentinel) are clamped so surrogate inputs stay finite.
pub const PSNR_CLAMP_DB: f64 = 60.0;

/// Number of input metrics per image pair.
pub const FEATURE_DIM: usize = 3;

/// Names of the input feature columns, in order.
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = ["psnr_in", "drd_in", "nrm_in"];

/// Errors from dataset assembly and persistence.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path} line {line}: {detail}")]
    Parse {
        path: String,
        line: u64,
        detail: String,
    },
    #[error("feature construction failed for {id}: {source}")]
    FeatureConstruction { id: String, source: MetricError },
    #[error("feature construction failed for {id}: non-finite {name}")]
    NonFiniteFeature { id: String, name: &'static str },
    #[error("cannot standardize: column {name} is constant")]
    ConstantColumn { name: String },
    #[error("train count {train} must be smaller than the number of ids {total}")]
    BadSplit { train: usize, total: usize },
    #[error("training set is empty")]
    Empty,
    #[error("row {row} has {got} inputs, expected {expected}")]
    RowWidth {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("row {row} ({id}) has no target value")]
    MissingTarget { row: usize, id: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// One manifest line: an image id with its file paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub original: PathBuf,
    /// May be produced later by the binarize module.
    pub processed: Option<PathBuf>,
    /// Absent for unseen test images.
    pub gt: Option<PathBuf>,
}

/// One feature-table row: the input metric vector and optional target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    /// `[psnr_in, drd_in, nrm_in]`, all finite.
    pub inputs: [f64; FEATURE_DIM],
    /// F-Measure percent against ground truth, when known.
    pub target: Option<f64>,
}

/// Per-column location/scale statistics of a training set.
///
/// Standard deviations use the population (divide-by-n) convention. A
/// constant target column falls back to scale 1 so the degenerate
/// all-equal-targets case still trains and predicts the constant.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Normalization {
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    pub y_mean: f64,
    pub y_sd: f64,
}

impl Normalization {
    /// Maps a raw input row to z-scores.
    pub fn standardize_x(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.x_mean.iter().zip(&self.x_sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Maps a z-scored input row back to raw values.
    pub fn destandardize_x(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.x_mean.iter().zip(&self.x_sd))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }

    pub fn standardize_y(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_sd
    }

    pub fn destandardize_y(&self, z: f64) -> f64 {
        z * self.y_sd + self.y_mean
    }
}

/// The assembled design matrix and target vector, with optional
/// standardization statistics once [`standardize`] has run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Column names used in diagnostics.
    pub names: Vec<String>,
    /// Present on standardized sets; `x` and `y` are then z-scores.
    pub stats: Option<Normalization>,
}

impl TrainingSet {
    /// Builds a raw (unstandardized) training set; every row must carry a
    /// target.
    pub fn from_rows(rows: &[FeatureRow]) -> Result<Self, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut x = Vec::with_capacity(rows.len());
        let mut y = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let target = row.target.ok_or_else(|| DatasetError::MissingTarget {
                row: i + 1,
                id: row.id.clone(),
            })?;
            x.push(row.inputs.to_vec());
            y.push(target);
        }
        Ok(Self {
            x,
            y,
            names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            stats: None,
        })
    }

    /// Builds a raw training set from explicit matrices (used by the
    /// optimizer's internal models).
    pub fn from_xy(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self, DatasetError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(DatasetError::Empty);
        }
        let dim = x[0].len();
        for (i, row) in x.iter().enumerate() {
            if row.len() != dim {
                return Err(DatasetError::RowWidth {
                    row: i + 1,
                    got: row.len(),
                    expected: dim,
                });
            }
        }
        let names = (0..dim).map(|i| format!("x{i}")).collect();
        Ok(Self {
            x,
            y,
            names,
            stats: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, |r| r.len())
    }
}

fn column_stats(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fit_normalization(ts: &TrainingSet, strict_x: bool) -> Result<Normalization, DatasetError> {
    let dim = ts.dim();
    let mut x_mean = Vec::with_capacity(dim);
    let mut x_sd = Vec::with_capacity(dim);
    for c in 0..dim {
        let (mean, sd) = column_stats(ts.x.iter().map(|row| row[c]));
        if sd == 0.0 {
            if strict_x {
                return Err(DatasetError::ConstantColumn {
                    name: ts.names.get(c).cloned().unwrap_or_else(|| format!("x{c}")),
                });
            }
            x_mean.push(mean);
            x_sd.push(1.0);
        } else {
            x_mean.push(mean);
            x_sd.push(sd);
        }
    }
    let (y_mean, y_sd) = column_stats(ts.y.iter().copied());
    Ok(Normalization {
        x_mean,
        x_sd,
        y_mean,
        y_sd: if y_sd == 0.0 { 1.0 } else { y_sd },
    })
}

fn apply_normalization(ts: &TrainingSet, stats: Normalization) -> TrainingSet {
    let x = ts.x.iter().map(|row| stats.standardize_x(row)).collect();
    let y = ts.y.iter().map(|&v| stats.standardize_y(v)).collect();
    TrainingSet {
        x,
        y,
        names: ts.names.clone(),
        stats: Some(stats),
    }
}

/// Z-scores every input column and the target, storing the statistics for
/// later inversion. Constant input columns are rejected. Standardized
/// sets pass through unchanged.
pub fn standardize(ts: &TrainingSet) -> Result<TrainingSet, DatasetError> {
    if ts.is_empty() {
        return Err(DatasetError::Empty);
    }
    if ts.stats.is_some() {
        return Ok(ts.clone());
    }
    let stats = fit_normalization(ts, true)?;
    Ok(apply_normalization(ts, stats))
}

/// Like [`standardize`] but maps constant input columns to scale 1 instead
/// of erroring; used where the caller cannot control the design (e.g. the
/// Bayesian optimizer's internal model).
pub fn standardize_lenient(ts: &TrainingSet) -> Result<TrainingSet, DatasetError> {
    if ts.is_empty() {
        return Err(DatasetError::Empty);
    }
    if ts.stats.is_some() {
        return Ok(ts.clone());
    }
    let stats = fit_normalization(ts, false)?;
    Ok(apply_normalization(ts, stats))
}

/// Computes the reference-free input vector for one image pair.
///
/// The grayscale original is Otsu-binarized into a proxy, then PSNR
/// (clamped at [`PSNR_CLAMP_DB`]), DRD and NRM are computed with the
/// processed image as prediction and the proxy as reference.
pub fn build_features(
    id: &str,
    original: &GrayImage,
    processed: &BinaryImage,
) -> Result<FeatureRow, DatasetError> {
    let wrap = |source: MetricError| DatasetError::FeatureConstruction {
        id: id.to_string(),
        source,
    };
    let proxy = otsu_binarize(original);
    let psnr_in = psnr(processed, &proxy).map_err(wrap)?.min(PSNR_CLAMP_DB);
    let drd_in = drd(processed, &proxy).map_err(wrap)?;
    if !drd_in.is_finite() {
        return Err(DatasetError::NonFiniteFeature {
            id: id.to_string(),
            name: "drd_in",
        });
    }
    let nrm_in = nrm(&confusion(processed, &proxy).map_err(wrap)?).map_err(wrap)?;
    Ok(FeatureRow {
        id: id.to_string(),
        inputs: [psnr_in, drd_in, nrm_in],
        target: None,
    })
}

/// The training target: F-Measure percent of the processed image against
/// its ground truth.
pub fn build_target(processed: &BinaryImage, gt: &BinaryImage) -> Result<f64, DatasetError> {
    Ok(f_measure(&confusion(processed, gt)?))
}

// Knuth's MMIX linear congruential generator; fixed here so the split is
// reproducible across toolchains and languages.
const LCG_MULTIPLIER: u64 = 6364136223846793005;
const LCG_INCREMENT: u64 = 1442695040888963407;

struct SplitRng(u64);

impl SplitRng {
    fn next_u32(&mut self) -> u32 {
        self.0 = self
            .0
            .wrapping_mul(LCG_MULTIPLIER)
            .wrapping_add(LCG_INCREMENT);
        (self.0 >> 32) as u32
    }
}

/// Deterministically partitions `ids` into `(train, test)` with
/// `train_count` training ids, via a seeded Fisher-Yates shuffle over the
/// documented linear congruential generator.
pub fn split(
    ids: &[String],
    train_count: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), DatasetError> {
    if train_count >= ids.len() {
        return Err(DatasetError::BadSplit {
            train: train_count,
            total: ids.len(),
        });
    }
    let mut rng = SplitRng(seed);
    let mut shuffled: Vec<String> = ids.to_vec();
    for i in (1..shuffled.len()).rev() {
        let j = rng.next_u32() as usize % (i + 1);
        shuffled.swap(i, j);
    }
    let test = shuffled.split_off(train_count);
    Ok((shuffled, test))
}

/// Reads a manifest CSV with header `id,original,processed,gt`; empty
/// cells mark the optional columns absent. Relative paths are resolved
/// against the manifest's directory.
pub fn read_manifest<P: AsRef<Path>>(path: P) -> Result<Vec<ManifestEntry>, DatasetError> {
    let path = path.as_ref();
    let file = open(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    check_header(
        path,
        &mut reader,
        &["id", "original", "processed", "gt"],
    )?;
    let mut entries: Vec<ManifestEntry> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let id = field(0);
        if id.is_empty() {
            return Err(parse_err(path, line, "missing id"));
        }
        if entries.iter().any(|e| e.id == id) {
            return Err(parse_err(path, line, &format!("duplicate id {id:?}")));
        }
        let original = field(1);
        if original.is_empty() {
            return Err(parse_err(path, line, "missing original path"));
        }
        let resolve = |p: String| {
            if Path::new(&p).is_absolute() {
                PathBuf::from(p)
            } else {
                base.join(p)
            }
        };
        let optional = |p: String| if p.is_empty() { None } else { Some(resolve(p)) };
        entries.push(ManifestEntry {
            id,
            original: resolve(original),
            processed: optional(field(2)),
            gt: optional(field(3)),
        });
    }
    Ok(entries)
}

/// Feature-table CSV header.
pub const FEATURES_HEADER: [&str; 5] = ["id", "psnr_in", "drd_in", "nrm_in", "f_measure_target"];

/// Writes the feature table; values use the shortest representation that
/// round-trips exactly, and absent targets leave the cell empty.
pub fn write_features_csv<P: AsRef<Path>>(
    path: P,
    rows: &[FeatureRow],
) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    writer
        .write_record(FEATURES_HEADER)
        .map_err(|e| csv_error(path, &e))?;
    for row in rows {
        let target = row.target.map_or(String::new(), |t| t.to_string());
        writer
            .write_record([
                row.id.as_str(),
                &row.inputs[0].to_string(),
                &row.inputs[1].to_string(),
                &row.inputs[2].to_string(),
                &target,
            ])
            .map_err(|e| csv_error(path, &e))?;
    }
    writer.flush().map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

/// Reads a feature table written by [`write_features_csv`].
pub fn read_features_csv<P: AsRef<Path>>(path: P) -> Result<Vec<FeatureRow>, DatasetError> {
    let path = path.as_ref();
    let file = open(path)?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    check_header(path, &mut reader, &FEATURES_HEADER)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let id = field(0).to_string();
        if id.is_empty() {
            return Err(parse_err(path, line, "missing id"));
        }
        let mut inputs = [0.0; FEATURE_DIM];
        for (k, slot) in inputs.iter_mut().enumerate() {
            let raw = field(k + 1);
            let value = raw.parse::<f64>().map_err(|_| {
                parse_err(path, line, &format!("bad {} value {raw:?}", FEATURE_NAMES[k]))
            })?;
            if !value.is_finite() {
                return Err(parse_err(
                    path,
                    line,
                    &format!("{} must be finite, got {raw:?}", FEATURE_NAMES[k]),
                ));
            }
            *slot = value;
        }
        let target_raw = field(4);
        let target = if target_raw.is_empty() {
            None
        } else {
            let value = target_raw.parse::<f64>().map_err(|_| {
                parse_err(path, line, &format!("bad target value {target_raw:?}"))
            })?;
            if !(0.0..=100.0).contains(&value) {
                return Err(parse_err(
                    path,
                    line,
                    &format!("target must lie in [0, 100], got {target_raw:?}"),
                ));
            }
            Some(value)
        };
        rows.push(FeatureRow { id, inputs, target });
    }
    Ok(rows)
}

fn open(path: &Path) -> Result<File, DatasetError> {
    File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_header<R: std::io::Read>(
    path: &Path,
    reader: &mut csv::Reader<R>,
    expected: &[&str],
) -> Result<(), DatasetError> {
    let headers = reader.headers().map_err(|e| csv_error(path, &e))?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(parse_err(
            path,
            1,
            &format!("bad header {:?}, expected {:?}", got.join(","), expected.join(",")),
        ));
    }
    Ok(())
}

fn parse_err(path: &Path, line: u64, detail: &str) -> DatasetError {
    DatasetError::Parse {
        path: path.display().to_string(),
        line,
        detail: detail.to_string(),
    }
}

fn csv_error(path: &Path, e: &csv::Error) -> DatasetError {
    DatasetError::Parse {
        path: path.display().to_string(),
        line: e
            .position()
            .map_or(0, |p| p.line()),
        detail: e.to_string(),
    }
}
