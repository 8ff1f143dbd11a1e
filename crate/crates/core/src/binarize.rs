//! Tunable Sauvola local thresholding and the closed-loop automatic
//! binarization that maximizes the surrogate-predicted F-Measure over the
//! (window, sensitivity) parameter box.
//!
//! Window sums come from integer integral images, so the result is
//! bit-exact with a direct sliding-window evaluation and costs O(width x
//! height) regardless of window size.

use thiserror::Error;

use crate::bayesopt::{optimize, BoError, BoProblem, BoState};
use crate::dataset::build_features;
use crate::imaging::{BinaryImage, GrayImage};
use crate::surrogates::Model;

/// Dynamic range constant of the Sauvola threshold on the `[0, 1]` scale.
pub const SAUVOLA_R: f64 = 0.5;

/// Errors from binarization parameters and the closed loop.
#[derive(Debug, Error)]
pub enum BinarizeError {
    #[error("window must be an odd count >= 3, got {0}")]
    BadWindow(usize),
    #[error("sensitivity k must lie in [0.01, 0.6], got {0}")]
    BadSensitivity(f64),
    #[error("window bounds ({0}, {1}) invalid: need odd values with 3 <= min < max")]
    BadWindowBounds(usize, usize),
    #[error("every candidate binarization failed feature construction")]
    NoFeasiblePoint,
    #[error(transparent)]
    Optimizer(#[from] BoError),
}

/// Sauvola parameters: an odd window size and the sensitivity `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SauvolaParams {
    window: usize,
    k: f64,
}

impl SauvolaParams {
    pub const K_MIN: f64 = 0.01;
    pub const K_MAX: f64 = 0.6;

    pub fn new(window: usize, k: f64) -> Result<Self, BinarizeError> {
        if window < 3 || window.is_multiple_of(2) {
            return Err(BinarizeError::BadWindow(window));
        }
        if !(Self::K_MIN..=Self::K_MAX).contains(&k) {
            return Err(BinarizeError::BadSensitivity(k));
        }
        Ok(Self { window, k })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// Integer integral images of pixel levels and squared levels.
struct Integrals {
    width: usize,
    sum: Vec<u64>,
    sum_sq: Vec<u64>,
}

impl Integrals {
    fn build(img: &GrayImage) -> Self {
        let (w, h) = (img.width(), img.height());
        // One padding row/column of zeros keeps lookups branch-free.
        let stride = w + 1;
        let mut sum = vec![0u64; stride * (h + 1)];
        let mut sum_sq = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u64;
            let mut row_sq = 0u64;
            for x in 0..w {
                let v = img.level(x, y) as u64;
                row += v;
                row_sq += v * v;
                let idx = (y + 1) * stride + (x + 1);
                sum[idx] = sum[y * stride + (x + 1)] + row;
                sum_sq[idx] = sum_sq[y * stride + (x + 1)] + row_sq;
            }
        }
        Self {
            width: w,
            sum,
            sum_sq,
        }
    }

    /// Sums over the inclusive pixel box `[x0, x1] x [y0, y1]`.
    fn window_sums(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> (u64, u64) {
        let stride = self.width + 1;
        let a = y0 * stride + x0;
        let b = y0 * stride + (x1 + 1);
        let c = (y1 + 1) * stride + x0;
        let d = (y1 + 1) * stride + (x1 + 1);
        (
            self.sum[d] + self.sum[a] - self.sum[b] - self.sum[c],
            self.sum_sq[d] + self.sum_sq[a] - self.sum_sq[b] - self.sum_sq[c],
        )
    }
}

/// Shared threshold arithmetic: exact integer window sums in, the
/// foreground decision out. Both the integral-image path and the naive
/// reference path must call this to stay bit-exact with each other.
fn sauvola_decision(level: u8, sum: u64, sum_sq: u64, count: u64, k: f64) -> bool {
    let n = count as f64;
    let mean_level = sum as f64 / n;
    let var_level = (sum_sq as f64 / n - mean_level * mean_level).max(0.0);
    let mean = mean_level / 255.0;
    let sd = var_level.sqrt() / 255.0;
    let threshold = mean * (1.0 + k * (sd / SAUVOLA_R - 1.0));
    f64::from(level) / 255.0 <= threshold
}

/// Sauvola local thresholding: a pixel is foreground iff its intensity is
/// at most `m (1 + k (s/R - 1))`, with `m` and `s` the mean and standard
/// deviation over the window clipped to the image.
pub fn sauvola(img: &GrayImage, params: &SauvolaParams) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let radius = params.window / 2;
    let integrals = Integrals::build(img);
    let mut mask = Vec::with_capacity(w * h);
    for y in 0..h {
        let y0 = y.saturating_sub(radius);
        let y1 = (y + radius).min(h - 1);
        for x in 0..w {
            let x0 = x.saturating_sub(radius);
            let x1 = (x + radius).min(w - 1);
            let count = ((x1 - x0 + 1) * (y1 - y0 + 1)) as u64;
            let (sum, sum_sq) = integrals.window_sums(x0, y0, x1, y1);
            mask.push(sauvola_decision(img.level(x, y), sum, sum_sq, count, params.k));
        }
    }
    BinaryImage::from_mask(w, h, mask).expect("image dimensions are valid")
}

/// Result of the closed-loop automatic binarization.
#[derive(Debug, Clone)]
pub struct AutoBinarizeResult {
    pub image: BinaryImage,
    pub params: SauvolaParams,
    /// Surrogate-predicted F-Measure of the returned binarization.
    pub predicted_f_measure: f64,
    /// Full optimizer history; points are `(half_window, k)`.
    pub state: BoState,
}

impl AutoBinarizeResult {
    /// Trace CSV in the optimizer format with appended `w,k` columns
    /// holding the parameters as evaluated.
    pub fn trace_csv(&self) -> String {
        let base = self.state.trace_csv();
        let mut lines = base.lines();
        let mut out = String::new();
        if let Some(header) = lines.next() {
            out.push_str(header);
            out.push_str(",w,k\n");
        }
        for (line, point) in lines.zip(&self.state.points) {
            let window = 2 * (point[0] as i64) + 1;
            out.push_str(line);
            out.push_str(&format!(",{},{}\n", window, point[1]));
        }
        out
    }
}

/// Binarizes `img` with the Sauvola parameters that maximize the
/// surrogate-predicted F-Measure, searching the box
/// `[w_bounds] x [k_bounds]` with exactly `budget` binarizations.
///
/// The window is optimized through its integer half-width so candidate
/// windows stay odd. Feature-construction failures score `-inf`.
pub fn auto_binarize(
    img: &GrayImage,
    model: &Model,
    w_bounds: (usize, usize),
    k_bounds: (f64, f64),
    budget: usize,
    seed: u64,
) -> Result<AutoBinarizeResult, BinarizeError> {
    let (w_lo, w_hi) = w_bounds;
    if w_lo < 3 || w_lo.is_multiple_of(2) || w_hi.is_multiple_of(2) || w_lo >= w_hi {
        return Err(BinarizeError::BadWindowBounds(w_lo, w_hi));
    }
    let (k_lo, k_hi) = k_bounds;
    if !(SauvolaParams::K_MIN..=SauvolaParams::K_MAX).contains(&k_lo)
        || !(SauvolaParams::K_MIN..=SauvolaParams::K_MAX).contains(&k_hi)
        || k_lo >= k_hi
    {
        return Err(BinarizeError::BadSensitivity(if k_lo >= k_hi { k_hi } else { k_lo }));
    }
    let h_lo = (w_lo - 1) / 2;
    let h_hi = (w_hi - 1) / 2;
    let problem = BoProblem::new(vec![h_lo as f64, k_lo], vec![h_hi as f64, k_hi])?
        .with_integer_dims(vec![true, false])?;

    // Track the best binarization as evaluations happen so the winner
    // needs no extra binarization at the end.
    let mut best: Option<(f64, BinaryImage, SauvolaParams)> = None;
    let objective = |point: &[f64]| -> f64 {
        let window = 2 * (point[0].round() as usize) + 1;
        let params = match SauvolaParams::new(window, point[1]) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        let candidate = sauvola(img, &params);
        let row = match build_features("candidate", img, &candidate) {
            Ok(row) => row,
            Err(_) => return f64::NEG_INFINITY,
        };
        let predicted = model.predict(&row.inputs);
        if !predicted.is_finite() {
            return f64::NEG_INFINITY;
        }
        if best.as_ref().is_none_or(|(v, _, _)| predicted > *v) {
            best = Some((predicted, candidate, params));
        }
        predicted
    };

    let state = optimize(objective, &problem, budget, seed)?;
    let (predicted_f_measure, image, params) = best.ok_or(BinarizeError::NoFeasiblePoint)?;
    Ok(AutoBinarizeResult {
        image,
        params,
        predicted_f_measure,
        state,
    })
}
