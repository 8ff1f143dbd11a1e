//! Epsilon-SVR with a Gaussian kernel, trained by sequential minimal
//! optimization on the 2n-variable dual; hyperparameters either fixed or
//! tuned by Bayesian optimization of cross-validated RMSE.

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::bayesopt::{optimize, BoProblem};
use crate::dataset::{standardize, Normalization, TrainingSet};

/// Default SMO iteration budget.
pub const DEFAULT_SMO_BUDGET: usize = 500_000;

/// SMO terminates once the maximal KKT violation drops below this; well
/// under the 1e-3 contract so dual objectives are tight.
pub const KKT_TOLERANCE: f64 = 1e-5;

/// Bayesian-optimization budget for automatic hyperparameter tuning.
pub const AUTO_TUNE_BUDGET: usize = 30;

/// log10 tuning bounds for (C, epsilon, gamma).
const TUNE_LOWER: [f64; 3] = [-2.0, -3.0, -3.0];
const TUNE_UPPER_C: f64 = 3.0;
const TUNE_UPPER_GAMMA: f64 = 2.0;

/// Hyperparameters on the standardized scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrHyperparams {
    /// Box constraint.
    pub c: f64,
    /// Tube half-width.
    pub epsilon: f64,
    /// Gaussian kernel width `exp(-gamma ||a-b||^2)`.
    pub gamma: f64,
}

impl SvrHyperparams {
    fn validate(&self) -> Result<(), SurrogateError> {
        if self.c > 0.0 && self.epsilon >= 0.0 && self.gamma > 0.0 {
            Ok(())
        } else {
            Err(SurrogateError::BadHyperparams(format!(
                "C and gamma must be positive, epsilon non-negative: {self:?}"
            )))
        }
    }
}

/// How `svr_fit` obtains its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvrTuning {
    Fixed(SvrHyperparams),
    /// Bayesian optimization of 5-fold cross-validated RMSE over
    /// log-scaled bounds.
    Auto,
}

/// A trained epsilon-SVR model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvrModel {
    /// Standardized training points with nonzero dual coefficient.
    support_vectors: Vec<Vec<f64>>,
    /// `alpha_i - alpha_i*` per support vector.
    coefficients: Vec<f64>,
    bias: f64,
    hp: SvrHyperparams,
    stats: Normalization,
    kkt_violation: f64,
}

/// Raw output of the SMO solver on standardized data.
#[derive(Debug, Clone)]
pub struct DualSolution {
    /// `alpha_i - alpha_i*` for every training point.
    pub beta: Vec<f64>,
    pub bias: f64,
    /// The minimized dual objective value.
    pub objective: f64,
    pub kkt_violation: f64,
    pub iterations: usize,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Solves the epsilon-SVR dual
/// `min 1/2 b'Kb - y'b + eps * sum(a_i + a_i*)` over `0 <= a, a* <= C`,
/// `sum(a - a*) = 0`, by SMO with second-order working-set selection.
///
/// Iterations stop when the maximal KKT violation falls below `kkt_tol`;
/// exhausting `max_iter` first is a convergence error carrying the final
/// violation.
pub fn solve_dual(
    x: &[Vec<f64>],
    y: &[f64],
    hp: &SvrHyperparams,
    kkt_tol: f64,
    max_iter: usize,
) -> Result<DualSolution, SurrogateError> {
    hp.validate()?;
    let n = x.len();
    assert_eq!(n, y.len(), "design/target length mismatch");
    let c = hp.c;

    // Precomputed kernel Gram matrix.
    let mut k = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(&x[i], &x[j], hp.gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let kij = |i: usize, j: usize| k[i * n + j];

    // Variables s in 0..2n: s < n holds alpha_i (sign +1), s >= n holds
    // alpha_i* (sign -1). grad is the gradient of the dual objective.
    let sign = |s: usize| if s < n { 1.0 } else { -1.0 };
    let index = |s: usize| if s < n { s } else { s - n };
    let mut alpha = vec![0.0f64; 2 * n];
    let mut grad: Vec<f64> = (0..2 * n)
        .map(|s| hp.epsilon - sign(s) * y[index(s)])
        .collect();

    let tau = 1e-12;
    let mut iterations = 0usize;
    let mut violation = f64::INFINITY;
    while iterations < max_iter {
        // Working-set selection (maximal violating pair, second-order j).
        let mut m_val = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for s in 0..2 * n {
            let in_up = (sign(s) > 0.0 && alpha[s] < c) || (sign(s) < 0.0 && alpha[s] > 0.0);
            if in_up {
                let v = -sign(s) * grad[s];
                if v > m_val {
                    m_val = v;
                    i_sel = s;
                }
            }
        }
        let mut min_low = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = 0.0f64;
        for s in 0..2 * n {
            let in_low = (sign(s) > 0.0 && alpha[s] > 0.0) || (sign(s) < 0.0 && alpha[s] < c);
            if !in_low {
                continue;
            }
            let v = -sign(s) * grad[s];
            min_low = min_low.min(v);
            let grad_diff = m_val - v;
            if grad_diff > 0.0 {
                // Curvature along the feasible pair direction is
                // ||phi_i - phi_j||^2 regardless of the sign pattern.
                let (ii, jj) = (index(i_sel), index(s));
                let mut quad = kij(ii, ii) + kij(jj, jj) - 2.0 * kij(ii, jj);
                if quad <= 0.0 {
                    quad = tau;
                }
                let gain = -(grad_diff * grad_diff) / quad;
                if gain < best_obj {
                    best_obj = gain;
                    j_sel = s;
                }
            }
        }
        violation = m_val - min_low;
        if violation < kkt_tol || i_sel == usize::MAX || j_sel == usize::MAX {
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (ii, jj) = (index(i), index(j));
        let mut quad = kij(ii, ii) + kij(jj, jj) - 2.0 * kij(ii, jj);
        if quad <= 0.0 {
            quad = tau;
        }
        let old_i = alpha[i];
        let old_j = alpha[j];
        if sign(i) != sign(j) {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_i = alpha[i] - old_i;
        let d_j = alpha[j] - old_j;
        if d_i != 0.0 || d_j != 0.0 {
            for (s, g) in grad.iter_mut().enumerate() {
                let idx = index(s);
                *g += sign(s) * sign(i) * kij(idx, ii) * d_i
                    + sign(s) * sign(j) * kij(idx, jj) * d_j;
            }
        }
    }

    if violation >= kkt_tol && iterations >= max_iter {
        return Err(SurrogateError::Convergence {
            iterations,
            violation,
        });
    }

    // Bias from the stationarity conditions: average of sign*grad over
    // free variables, else the midpoint of the feasible interval.
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for s in 0..2 * n {
        let yg = sign(s) * grad[s];
        if alpha[s] >= c {
            if sign(s) > 0.0 {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if alpha[s] <= 0.0 {
            if sign(s) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum_free += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let bias = -rho;

    // Dual objective via W = (1/2) sum_s alpha_s (grad_s + p_s).
    let objective = 0.5
        * (0..2 * n)
            .map(|s| alpha[s] * (grad[s] + hp.epsilon - sign(s) * y[index(s)]))
            .sum::<f64>();

    let beta = (0..n).map(|i| alpha[i] - alpha[i + n]).collect();
    Ok(DualSolution {
        beta,
        bias,
        objective,
        kkt_violation: violation,
        iterations,
    })
}

/// Fits an epsilon-SVR; `budget` caps SMO iterations per solve.
pub fn svr_fit(
    ts: &TrainingSet,
    tuning: SvrTuning,
    budget: usize,
    seed: u64,
) -> Result<SvrModel, SurrogateError> {
    let std = standardize(ts)?;
    if std.len() < 2 {
        return Err(SurrogateError::TooFewPoints {
            got: std.len(),
            need: 2,
        });
    }
    let hp = match tuning {
        SvrTuning::Fixed(hp) => hp,
        SvrTuning::Auto => auto_tune(&std, budget, seed)?,
    };
    let solution = solve_dual(&std.x, &std.y, &hp, KKT_TOLERANCE, budget)?;
    let stats = std
        .stats
        .clone()
        .expect("standardized training set carries stats");
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for (xi, &b) in std.x.iter().zip(&solution.beta) {
        if b != 0.0 {
            support_vectors.push(xi.clone());
            coefficients.push(b);
        }
    }
    Ok(SvrModel {
        support_vectors,
        coefficients,
        bias: solution.bias,
        hp,
        stats,
        kkt_violation: solution.kkt_violation,
    })
}

/// Chooses (C, epsilon, gamma) by maximizing the negated k-fold
/// cross-validated RMSE with the Bayesian optimizer.
fn auto_tune(
    std: &TrainingSet,
    budget: usize,
    seed: u64,
) -> Result<SvrHyperparams, SurrogateError> {
    let folds = fold_assignments(std.len(), 5, seed);
    let problem = BoProblem::new(
        vec![TUNE_LOWER[0], TUNE_LOWER[1], TUNE_LOWER[2]],
        vec![TUNE_UPPER_C, 5.0f64.log10(), TUNE_UPPER_GAMMA],
    )
    .expect("static tuning bounds are valid");
    let objective = |p: &[f64]| -> f64 {
        let hp = SvrHyperparams {
            c: 10f64.powf(p[0]),
            epsilon: 10f64.powf(p[1]),
            gamma: 10f64.powf(p[2]),
        };
        match cross_validated_rmse(std, &folds, &hp, budget) {
            Ok(rmse) => -rmse,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let state = optimize(objective, &problem, AUTO_TUNE_BUDGET, seed)
        .map_err(|e| SurrogateError::BadHyperparams(format!("auto-tuning failed: {e}")))?;
    let (best, _) = state
        .incumbent()
        .ok_or_else(|| SurrogateError::BadHyperparams("auto-tuning found no point".into()))?;
    Ok(SvrHyperparams {
        c: 10f64.powf(best[0]),
        epsilon: 10f64.powf(best[1]),
        gamma: 10f64.powf(best[2]),
    })
}

fn fold_assignments(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let k = folds.min(n).max(2);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        assignment[idx] = pos % k;
    }
    assignment
}

fn cross_validated_rmse(
    std: &TrainingSet,
    folds: &[usize],
    hp: &SvrHyperparams,
    budget: usize,
) -> Result<f64, SurrogateError> {
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let mut squared = 0.0;
    let mut count = 0usize;
    for fold in 0..k {
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        let mut test_idx = Vec::new();
        for (i, &f) in folds.iter().enumerate() {
            if f == fold {
                test_idx.push(i);
            } else {
                train_x.push(std.x[i].clone());
                train_y.push(std.y[i]);
            }
        }
        if train_x.is_empty() || test_idx.is_empty() {
            continue;
        }
        let solution = solve_dual(&train_x, &train_y, hp, KKT_TOLERANCE, budget)?;
        for &i in &test_idx {
            let pred = kernel_expansion(&train_x, &solution.beta, solution.bias, hp, &std.x[i]);
            let err = pred - std.y[i];
            squared += err * err;
            count += 1;
        }
    }
    Ok((squared / count.max(1) as f64).sqrt())
}

fn kernel_expansion(
    points: &[Vec<f64>],
    beta: &[f64],
    bias: f64,
    hp: &SvrHyperparams,
    x: &[f64],
) -> f64 {
    points
        .iter()
        .zip(beta)
        .map(|(p, &b)| b * rbf(x, p, hp.gamma))
        .sum::<f64>()
        + bias
}

impl SvrModel {
    pub fn hyperparams(&self) -> &SvrHyperparams {
        &self.hp
    }

    pub fn stats(&self) -> &Normalization {
        &self.stats
    }

    pub fn support_vector_count(&self) -> usize {
        self.support_vectors.len()
    }

    pub fn kkt_violation(&self) -> f64 {
        self.kkt_violation
    }

    pub fn input_dim(&self) -> usize {
        self.stats.x_mean.len()
    }

    /// Prediction on the standardized scale for a raw input point.
    pub fn predict_standardized(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.input_dim(), "prediction input dimension");
        let xs = self.stats.standardize_x(x);
        kernel_expansion(
            &self.support_vectors,
            &self.coefficients,
            self.bias,
            &self.hp,
            &xs,
        )
    }

    /// De-standardized prediction (percent).
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.stats.destandardize_y(self.predict_standardized(x))
    }
}
