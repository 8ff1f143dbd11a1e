//! Ground-truth-referenced quality metrics for bilevel document images:
//! F-Measure, MSE/PSNR, DRD and NRM.
//!
//! Numeric encoding: foreground (ink) maps to 0, background (paper) to 1,
//! so per-pixel differences are 0/1 and the PSNR contrast constant is 1.

use thiserror::Error;

use crate::imaging::BinaryImage;

/// Errors from metric computation.
#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("NRM undefined: {0} class is empty")]
    EmptyClass(&'static str),
}

/// Pixel-level confusion tallies between a prediction and a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    /// Foreground in both.
    pub tp: u64,
    /// Foreground in the prediction only.
    pub fp: u64,
    /// Foreground in the reference only.
    pub fn_: u64,
    /// Background in both.
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// The 5x5 normalized reciprocal-distance weight matrix used by DRD.
#[derive(Debug, Clone, PartialEq)]
pub struct DrdWeights {
    weights: [[f64; 5]; 5],
}

impl DrdWeights {
    /// Weight at neighborhood offset `(di, dj)`, each in `[-2, 2]`.
    pub fn at(&self, di: i32, dj: i32) -> f64 {
        self.weights[(di + 2) as usize][(dj + 2) as usize]
    }

    pub fn as_array(&self) -> &[[f64; 5]; 5] {
        &self.weights
    }
}

/// The four metric values for one image pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// Percent in `[0, 100]`.
    pub f_measure: f64,
    /// Decibels; `f64::INFINITY` when the images are identical.
    pub psnr: f64,
    pub drd: f64,
    /// In `[0, 1]`.
    pub nrm: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "id,f_measure,psnr,drd,nrm";

    /// One CSV row with six decimal places; infinities print as `inf`.
    pub fn csv_row(&self, id: &str) -> String {
        format!(
            "{},{},{},{},{}",
            id,
            fmt6(self.f_measure),
            fmt6(self.psnr),
            fmt6(self.drd),
            fmt6(self.nrm)
        )
    }
}

fn fmt6(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6}")
    }
}

fn check_same_dims(a: &BinaryImage, b: &BinaryImage) -> Result<(), MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    Ok(())
}

/// Tallies per-pixel agreement of `pred` against the reference `reference`.
pub fn confusion(
    pred: &BinaryImage,
    reference: &BinaryImage,
) -> Result<ConfusionCounts, MetricError> {
    check_same_dims(pred, reference)?;
    let mut c = ConfusionCounts::default();
    for (&p, &r) in pred.mask().iter().zip(reference.mask()) {
        match (p, r) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// F-Measure in percent: the harmonic mean of precision and recall.
///
/// Returns 0 when there are no true positives (zero-division convention).
pub fn f_measure(c: &ConfusionCounts) -> f64 {
    if c.tp == 0 {
        return 0.0;
    }
    let precision = c.tp as f64 / (c.tp + c.fp) as f64;
    let recall = c.tp as f64 / (c.tp + c.fn_) as f64;
    100.0 * (2.0 * recall * precision) / (recall + precision)
}

/// Mean squared error with the {0, 1} bilevel encoding; in `[0, 1]`.
pub fn mse(a: &BinaryImage, b: &BinaryImage) -> Result<f64, MetricError> {
    check_same_dims(a, b)?;
    let differing = a
        .mask()
        .iter()
        .zip(b.mask())
        .filter(|(x, y)| x != y)
        .count();
    Ok(differing as f64 / a.mask().len() as f64)
}

/// Peak signal-to-noise ratio `10 log10(C^2 / MSE)` with contrast `C = 1`.
///
/// Identical images give the `f64::INFINITY` sentinel.
pub fn psnr(a: &BinaryImage, b: &BinaryImage) -> Result<f64, MetricError> {
    let e = mse(a, b)?;
    if e == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (1.0 / e).log10())
    }
}

/// The normalized DRD weight matrix: raw weights `1/sqrt(i^2+j^2)` with
/// center weight 1, divided by their sum.
pub fn drd_weights() -> DrdWeights {
    let mut raw = [[0.0f64; 5]; 5];
    let mut sum = 0.0;
    for (i, row) in raw.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 2.0, j as f64 - 2.0);
            *w = if di == 0.0 && dj == 0.0 {
                1.0
            } else {
                1.0 / (di * di + dj * dj).sqrt()
            };
            sum += *w;
        }
    }
    let mut weights = raw;
    for row in weights.iter_mut() {
        for w in row.iter_mut() {
            *w /= sum;
        }
    }
    DrdWeights { weights }
}

/// Number of non-uniform 8x8 blocks in the non-overlapping grid tiling of
/// `reference`, partial edge blocks included.
pub fn nubn(reference: &BinaryImage) -> u64 {
    let mut count = 0u64;
    let (w, h) = (reference.width(), reference.height());
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            let first = reference.is_foreground(bx, by);
            let mut mixed = false;
            'block: for y in by..(by + 8).min(h) {
                for x in bx..(bx + 8).min(w) {
                    if reference.is_foreground(x, y) != first {
                        mixed = true;
                        break 'block;
                    }
                }
            }
            if mixed {
                count += 1;
            }
        }
    }
    count
}

/// Distance-reciprocal distortion of `pred` against `reference`.
///
/// Each pixel whose label differs accumulates the weighted count of 5x5
/// reference neighbors that disagree with the predicted label;
/// out-of-bounds neighbors count as background. The sum is normalized by
/// [`nubn`]. No flipped pixels gives 0; a zero NUBN with flipped pixels
/// present gives the `f64::INFINITY` sentinel (and a warning), since the
/// metric is undefined there.
pub fn drd(pred: &BinaryImage, reference: &BinaryImage) -> Result<f64, MetricError> {
    check_same_dims(pred, reference)?;
    let weights = drd_weights();
    let (w, h) = (pred.width(), pred.height());
    let mut total = 0.0f64;
    let mut flipped = 0u64;
    for y in 0..h {
        for x in 0..w {
            let p = pred.is_foreground(x, y);
            if p == reference.is_foreground(x, y) {
                continue;
            }
            flipped += 1;
            let mut dk = 0.0;
            for di in -2..=2i32 {
                for dj in -2..=2i32 {
                    let (nx, ny) = (x as i64 + dj as i64, y as i64 + di as i64);
                    let neighbor = if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h
                    {
                        reference.is_foreground(nx as usize, ny as usize)
                    } else {
                        false
                    };
                    if neighbor != p {
                        dk += weights.at(di, dj);
                    }
                }
            }
            total += dk;
        }
    }
    if flipped == 0 {
        return Ok(0.0);
    }
    let blocks = nubn(reference);
    if blocks == 0 {
        log::warn!("DRD undefined: {flipped} flipped pixels but zero non-uniform blocks");
        return Ok(f64::INFINITY);
    }
    Ok(total / blocks as f64)
}

/// Negative rate metric: the mean of the false-negative and false-positive
/// rates; in `[0, 1]`, lower is better.
pub fn nrm(c: &ConfusionCounts) -> Result<f64, MetricError> {
    if c.tp + c.fn_ == 0 {
        return Err(MetricError::EmptyClass("reference foreground"));
    }
    if c.fp + c.tn == 0 {
        return Err(MetricError::EmptyClass("reference background"));
    }
    let nr_fn = c.fn_ as f64 / (c.fn_ + c.tp) as f64;
    let nr_fp = c.fp as f64 / (c.fp + c.tn) as f64;
    Ok((nr_fn + nr_fp) / 2.0)
}

/// All four metrics of `pred` against `reference` in one report.
pub fn all_metrics(
    pred: &BinaryImage,
    reference: &BinaryImage,
) -> Result<MetricReport, MetricError> {
    let c = confusion(pred, reference)?;
    Ok(MetricReport {
        f_measure: f_measure(&c),
        psnr: psnr(pred, reference)?,
        drd: drd(pred, reference)?,
        nrm: nrm(&c)?,
    })
}
