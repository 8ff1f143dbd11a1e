//! Single-hidden-layer feed-forward network (tanh hidden units, linear
//! output) trained by Levenberg-Marquardt on the sum of squared residuals.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::dataset::{standardize, Normalization, TrainingSet};

/// Default hidden-layer width.
pub const DEFAULT_HIDDEN: usize = 10;

/// Default Levenberg-Marquardt step budget.
pub const DEFAULT_MAX_EPOCHS: usize = 200;

const GRAD_TOLERANCE: f64 = 1e-6;
const DAMPING_INITIAL: f64 = 1e-3;
const DAMPING_CEILING: f64 = 1e10;

/// A trained network; weights act on the standardized scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnModel {
    input_dim: usize,
    hidden: usize,
    /// Hidden weights, row-major `hidden x input_dim`.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    stats: Normalization,
    /// Sum-of-squares after each accepted step (index 0 is the initial
    /// loss); not persisted.
    #[serde(skip)]
    pub sse_history: Vec<f64>,
}

impl AnnModel {
    /// Builds a network from explicit weights (mainly for tests).
    pub fn from_weights(
        input_dim: usize,
        hidden: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
        stats: Normalization,
    ) -> Self {
        assert_eq!(w1.len(), hidden * input_dim);
        assert_eq!(b1.len(), hidden);
        assert_eq!(w2.len(), hidden);
        Self {
            input_dim,
            hidden,
            w1,
            b1,
            w2,
            b2,
            stats,
            sse_history: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn stats(&self) -> &Normalization {
        &self.stats
    }

    /// Flattened parameter vector `[w1, b1, w2, b2]`.
    pub fn weights(&self) -> Vec<f64> {
        let mut all = self.w1.clone();
        all.extend_from_slice(&self.b1);
        all.extend_from_slice(&self.w2);
        all.push(self.b2);
        all
    }

    fn forward_std(&self, xs: &[f64]) -> f64 {
        let mut out = self.b2;
        for j in 0..self.hidden {
            let mut z = self.b1[j];
            for (d, x) in xs.iter().enumerate() {
                z += self.w1[j * self.input_dim + d] * x;
            }
            out += self.w2[j] * z.tanh();
        }
        out
    }

    /// Prediction on the standardized scale for a raw input point.
    pub fn predict_standardized(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.input_dim, "prediction input dimension");
        self.forward_std(&self.stats.standardize_x(x))
    }

    /// De-standardized prediction (percent).
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.stats.destandardize_y(self.predict_standardized(x))
    }
}

struct Network {
    input_dim: usize,
    hidden: usize,
    params: DVector<f64>,
}

impl Network {
    fn param_count(input_dim: usize, hidden: usize) -> usize {
        hidden * input_dim + hidden + hidden + 1
    }

    /// Residuals `f(x_k) - y_k` and the Jacobian d residual / d params.
    fn residuals_and_jacobian(
        &self,
        x: &[Vec<f64>],
        y: &[f64],
    ) -> (DVector<f64>, DMatrix<f64>) {
        let n = x.len();
        let (d, h) = (self.input_dim, self.hidden);
        let w1 = &self.params.as_slice()[..h * d];
        let b1 = &self.params.as_slice()[h * d..h * d + h];
        let w2 = &self.params.as_slice()[h * d + h..h * d + 2 * h];
        let b2 = self.params[h * d + 2 * h];
        let mut residuals = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, self.params.len());
        let mut act = vec![0.0f64; h];
        for k in 0..n {
            let xs = &x[k];
            let mut out = b2;
            for j in 0..h {
                let mut z = b1[j];
                for (dd, xv) in xs.iter().enumerate() {
                    z += w1[j * d + dd] * xv;
                }
                act[j] = z.tanh();
                out += w2[j] * act[j];
            }
            residuals[k] = out - y[k];
            for j in 0..h {
                let gate = w2[j] * (1.0 - act[j] * act[j]);
                for (dd, xv) in xs.iter().enumerate() {
                    jac[(k, j * d + dd)] = gate * xv;
                }
                jac[(k, h * d + j)] = gate;
                jac[(k, h * d + h + j)] = act[j];
            }
            jac[(k, h * d + 2 * h)] = 1.0;
        }
        (residuals, jac)
    }

    fn sse(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let (d, h) = (self.input_dim, self.hidden);
        let w1 = &self.params.as_slice()[..h * d];
        let b1 = &self.params.as_slice()[h * d..h * d + h];
        let w2 = &self.params.as_slice()[h * d + h..h * d + 2 * h];
        let b2 = self.params[h * d + 2 * h];
        let mut total = 0.0;
        for (xs, &yk) in x.iter().zip(y) {
            let mut out = b2;
            for j in 0..h {
                let mut z = b1[j];
                for (dd, xv) in xs.iter().enumerate() {
                    z += w1[j * d + dd] * xv;
                }
                out += w2[j] * z.tanh();
            }
            let r = out - yk;
            total += r * r;
        }
        total
    }
}

/// Trains a `[T, hidden, 1]` network by Levenberg-Marquardt.
///
/// Damping is multiplied by 10 on rejected steps and divided by 10 on
/// accepted ones, so the accepted-step loss sequence never increases.
/// Stops at `max_epochs` trial steps, a gradient max-norm below 1e-6, or
/// damping overflow.
pub fn ann_fit(
    ts: &TrainingSet,
    hidden: usize,
    seed: u64,
    max_epochs: usize,
) -> Result<AnnModel, SurrogateError> {
    let std = standardize(ts)?;
    if std.len() < 2 {
        return Err(SurrogateError::TooFewPoints {
            got: std.len(),
            need: 2,
        });
    }
    let input_dim = std.dim();
    let n_params = Network::param_count(input_dim, hidden);
    if std.len() <= n_params {
        log::warn!(
            "ANN has {} weights but only {} training points; expect overfitting",
            n_params,
            std.len()
        );
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let params = DVector::from_iterator(n_params, (0..n_params).map(|_| rng.gen_range(-0.5..0.5)));
    let mut net = Network {
        input_dim,
        hidden,
        params,
    };

    let mut sse = net.sse(&std.x, &std.y);
    if !sse.is_finite() {
        return Err(SurrogateError::Divergence { epoch: 0 });
    }
    let mut history = vec![sse];
    let mut damping = DAMPING_INITIAL;
    let mut epoch = 0usize;
    while epoch < max_epochs {
        epoch += 1;
        let (residuals, jac) = net.residuals_and_jacobian(&std.x, &std.y);
        let grad = jac.transpose() * &residuals;
        if grad.amax() < GRAD_TOLERANCE {
            break;
        }
        let jtj = jac.transpose() * &jac;
        let mut system = jtj.clone();
        for i in 0..n_params {
            system[(i, i)] += damping;
        }
        let step = match nalgebra::Cholesky::new(system) {
            Some(chol) => chol.solve(&(-&grad)),
            None => {
                damping *= 10.0;
                if damping > DAMPING_CEILING {
                    break;
                }
                continue;
            }
        };
        let trial = Network {
            input_dim,
            hidden,
            params: &net.params + &step,
        };
        let trial_sse = trial.sse(&std.x, &std.y);
        if !trial_sse.is_finite() {
            return Err(SurrogateError::Divergence { epoch });
        }
        if trial_sse < sse {
            net = trial;
            sse = trial_sse;
            history.push(sse);
            damping = (damping / 10.0).max(1e-12);
        } else {
            damping *= 10.0;
            if damping > DAMPING_CEILING {
                break;
            }
        }
    }

    let stats = std
        .stats
        .clone()
        .expect("standardized training set carries stats");
    let p = net.params.as_slice();
    let h = hidden;
    Ok(AnnModel {
        input_dim,
        hidden,
        w1: p[..h * input_dim].to_vec(),
        b1: p[h * input_dim..h * input_dim + h].to_vec(),
        w2: p[h * input_dim + h..h * input_dim + 2 * h].to_vec(),
        b2: p[h * input_dim + 2 * h],
        stats,
        sse_history: history,
    })
}
