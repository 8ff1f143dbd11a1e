//! Gaussian-process regression with an isotropic squared-exponential
//! kernel on standardized inputs; hyperparameters fit by maximizing the
//! log marginal likelihood with a seeded multi-start local search.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::dataset::{standardize, Normalization, TrainingSet};
use crate::optim::compass_maximize;

/// Jitter added to the kernel diagonal starts here and escalates tenfold
/// on Cholesky failure up to [`JITTER_CEILING`].
pub const JITTER_FLOOR: f64 = 1e-10;
pub const JITTER_CEILING: f64 = 1e-4;

/// log10 search bounds for (lengthscale, signal variance, noise variance).
const LOG10_BOUNDS_LOWER: [f64; 3] = [-3.0, -3.0, -10.0];
const LOG10_BOUNDS_UPPER: [f64; 3] = [3.0, 3.0, 1.0];

const MLE_RESTARTS: usize = 10;
const MLE_EVALS_PER_RESTART: usize = 160;

/// Kernel hyperparameters in natural units, applying to standardized data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyperparams {
    fn validate(&self) -> Result<(), SurrogateError> {
        if self.lengthscale > 0.0 && self.signal_variance > 0.0 && self.noise_variance >= 0.0 {
            Ok(())
        } else {
            Err(SurrogateError::BadHyperparams(format!(
                "lengthscale and signal variance must be positive, noise non-negative: {self:?}"
            )))
        }
    }
}

/// A trained Gaussian-process regressor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GpModelData", into = "GpModelData")]
pub struct GpModel {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    hp: GpHyperparams,
    jitter: f64,
    stats: Normalization,
    alpha: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

/// Serialized form: the factorization is rebuilt on load, so a round trip
/// reproduces predictions exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpModelData {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    hp: GpHyperparams,
    jitter: f64,
    stats: Normalization,
}

impl From<GpModel> for GpModelData {
    fn from(m: GpModel) -> Self {
        GpModelData {
            x: m.x,
            y: m.y,
            hp: m.hp,
            jitter: m.jitter,
            stats: m.stats,
        }
    }
}

impl TryFrom<GpModelData> for GpModel {
    type Error = SurrogateError;

    fn try_from(d: GpModelData) -> Result<Self, Self::Error> {
        let (chol, alpha, jitter) = factorize(&d.x, &d.y, &d.hp, Some(d.jitter))?;
        Ok(GpModel {
            x: d.x,
            y: d.y,
            hp: d.hp,
            jitter,
            stats: d.stats,
            alpha,
            chol,
        })
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
}

fn kernel(a: &[f64], b: &[f64], hp: &GpHyperparams) -> f64 {
    hp.signal_variance * (-sq_dist(a, b) / (2.0 * hp.lengthscale * hp.lengthscale)).exp()
}

fn kernel_matrix(x: &[Vec<f64>], hp: &GpHyperparams) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel(&x[i], &x[j], hp);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Factorizes `K + (noise + jitter) I`, escalating jitter on failure.
/// `fixed_jitter` pins the jitter (used when rebuilding a saved model).
#[allow(clippy::type_complexity)]
fn factorize(
    x: &[Vec<f64>],
    y: &[f64],
    hp: &GpHyperparams,
    fixed_jitter: Option<f64>,
) -> Result<(Cholesky<f64, Dyn>, DVector<f64>, f64), SurrogateError> {
    let base = kernel_matrix(x, hp);
    let mut jitters: Vec<f64> = Vec::new();
    match fixed_jitter {
        Some(j) => jitters.push(j),
        None => {
            let mut j = JITTER_FLOOR;
            while j <= JITTER_CEILING * (1.0 + 1e-12) {
                jitters.push(j);
                j *= 10.0;
            }
        }
    }
    for &jitter in &jitters {
        let mut k = base.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += hp.noise_variance + jitter;
        }
        if let Some(chol) = Cholesky::new(k) {
            let alpha = chol.solve(&DVector::from_column_slice(y));
            return Ok((chol, alpha, jitter));
        }
    }
    Err(SurrogateError::Conditioning {
        max_jitter: JITTER_CEILING,
    })
}

/// Log marginal likelihood of standardized data under the given
/// hyperparameters: `-y'a/2 - sum(log L_ii) - n ln(2 pi)/2`.
pub fn log_marginal_likelihood(
    x: &[Vec<f64>],
    y: &[f64],
    hp: &GpHyperparams,
) -> Result<f64, SurrogateError> {
    hp.validate()?;
    let (chol, alpha, _) = factorize(x, y, hp, None)?;
    let y_vec = DVector::from_column_slice(y);
    let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
    let n = y.len() as f64;
    Ok(-0.5 * y_vec.dot(&alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

/// Fits a GP with hyperparameters chosen by maximum-likelihood estimation:
/// seeded multi-start compass search over log10 hyperparameters.
pub fn gp_fit(ts: &TrainingSet, seed: u64) -> Result<GpModel, SurrogateError> {
    gp_fit_with_restarts(ts, seed, MLE_RESTARTS)
}

/// MLE fit with an explicit restart count (the Bayesian optimizer uses a
/// reduced count for speed).
pub fn gp_fit_with_restarts(
    ts: &TrainingSet,
    seed: u64,
    restarts: usize,
) -> Result<GpModel, SurrogateError> {
    let std = standardize(ts)?;
    if std.len() < 2 {
        return Err(SurrogateError::TooFewPoints {
            got: std.len(),
            need: 2,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let objective = |p: &[f64]| -> f64 {
        let hp = GpHyperparams {
            lengthscale: 10f64.powf(p[0]),
            signal_variance: 10f64.powf(p[1]),
            noise_variance: 10f64.powf(p[2]),
        };
        log_marginal_likelihood(&std.x, &std.y, &hp).unwrap_or(f64::NEG_INFINITY)
    };

    let mut best_point = vec![0.0, 0.0, -2.0];
    let mut best_val = f64::NEG_INFINITY;
    for restart in 0..restarts.max(1) {
        let start: Vec<f64> = if restart == 0 {
            vec![0.0, 0.0, -2.0]
        } else {
            (0..3)
                .map(|d| rng.gen_range(LOG10_BOUNDS_LOWER[d]..LOG10_BOUNDS_UPPER[d]))
                .collect()
        };
        let (point, val) = compass_maximize(
            objective,
            &start,
            &LOG10_BOUNDS_LOWER,
            &LOG10_BOUNDS_UPPER,
            0.25,
            1e-4,
            MLE_EVALS_PER_RESTART,
        );
        if val > best_val {
            best_val = val;
            best_point = point;
        }
    }
    if !best_val.is_finite() {
        return Err(SurrogateError::Conditioning {
            max_jitter: JITTER_CEILING,
        });
    }
    let hp = GpHyperparams {
        lengthscale: 10f64.powf(best_point[0]),
        signal_variance: 10f64.powf(best_point[1]),
        noise_variance: 10f64.powf(best_point[2]),
    };
    gp_fit_given(&std, hp)
}

/// Fits a GP with fixed hyperparameters (no search).
pub fn gp_fit_with(ts: &TrainingSet, hp: GpHyperparams) -> Result<GpModel, SurrogateError> {
    let std = standardize(ts)?;
    if std.len() < 2 {
        return Err(SurrogateError::TooFewPoints {
            got: std.len(),
            need: 2,
        });
    }
    gp_fit_given(&std, hp)
}

fn gp_fit_given(std: &TrainingSet, hp: GpHyperparams) -> Result<GpModel, SurrogateError> {
    hp.validate()?;
    let stats = std
        .stats
        .clone()
        .expect("standardized training set carries stats");
    let (chol, alpha, jitter) = factorize(&std.x, &std.y, &hp, None)?;
    Ok(GpModel {
        x: std.x.clone(),
        y: std.y.clone(),
        hp,
        jitter,
        stats,
        alpha,
        chol,
    })
}

impl GpModel {
    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hp
    }

    pub fn stats(&self) -> &Normalization {
        &self.stats
    }

    pub fn train_len(&self) -> usize {
        self.y.len()
    }

    pub fn input_dim(&self) -> usize {
        self.x.first().map_or(0, |r| r.len())
    }

    /// Posterior mean and variance on the standardized scale for a raw
    /// input point. The variance is clamped at zero.
    pub fn predict_standardized(&self, x: &[f64]) -> (f64, f64) {
        assert_eq!(x.len(), self.input_dim(), "prediction input dimension");
        let xs = self.stats.standardize_x(x);
        let k_star =
            DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| kernel(&xs, xi, &self.hp)));
        let mean = k_star.dot(&self.alpha);
        let v = self.chol.solve(&k_star);
        let variance = (self.hp.signal_variance - k_star.dot(&v)).max(0.0);
        (mean, variance)
    }

    /// Posterior mean (percent) and variance (percent squared) for a raw
    /// input point.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let (mean, variance) = self.predict_standardized(x);
        let sd = self.stats.y_sd;
        (self.stats.destandardize_y(mean), variance * sd * sd)
    }
}
