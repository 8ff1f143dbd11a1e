//! Bounded-domain Bayesian optimization: a Gaussian-process surrogate
//! with the expected-improvement acquisition, seeded and fully
//! deterministic.
//!
//! The loop starts from a stratified space-filling design, then fits a GP
//! (reduced restart count) to the finite observations and picks the next
//! point by maximizing expected improvement over 256 quasi-random
//! candidates with local refinement. Integer dimensions are relaxed to
//! the continuous box and rounded at evaluation time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::dataset::{standardize_lenient, TrainingSet};
use crate::optim::compass_maximize;
use crate::surrogates::gp_fit_with_restarts;

/// Candidate points scored by expected improvement per iteration.
const EI_CANDIDATES: usize = 256;

/// GP restarts inside the optimization loop (speed over polish).
const INNER_GP_RESTARTS: usize = 3;

/// Errors from optimizer setup.
#[derive(Debug, Error)]
pub enum BoError {
    #[error("invalid bounds in dimension {dim}: lower {lower} must be < upper {upper}")]
    BadBounds { dim: usize, lower: f64, upper: f64 },
    #[error("problem must have at least one dimension")]
    NoDimensions,
    #[error("budget {got} too small, need at least {need}")]
    BudgetTooSmall { got: usize, need: usize },
    #[error("point has {got} coordinates, problem has {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// A box-bounded maximization problem.
#[derive(Debug, Clone)]
pub struct BoProblem {
    lower: Vec<f64>,
    upper: Vec<f64>,
    integer_dims: Vec<bool>,
}

impl BoProblem {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, BoError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(BoError::NoDimensions);
        }
        for (dim, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l >= u || !l.is_finite() || !u.is_finite() {
                return Err(BoError::BadBounds { dim, lower: l, upper: u });
            }
        }
        let dims = lower.len();
        Ok(Self {
            lower,
            upper,
            integer_dims: vec![false; dims],
        })
    }

    /// Marks dimensions that take integer values; they are rounded at
    /// evaluation time and recorded as rounded.
    pub fn with_integer_dims(mut self, integer_dims: Vec<bool>) -> Result<Self, BoError> {
        if integer_dims.len() != self.dim() {
            return Err(BoError::DimensionMismatch {
                got: integer_dims.len(),
                expected: self.dim(),
            });
        }
        self.integer_dims = integer_dims;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Size of the space-filling design evaluated before the model-based
    /// loop starts.
    pub fn initial_design_size(&self) -> usize {
        (self.dim() + 1).max(5)
    }

    /// Rounds integer dimensions and clamps everything into the box.
    pub fn snap(&self, mut point: Vec<f64>) -> Vec<f64> {
        for (d, v) in point.iter_mut().enumerate() {
            if self.integer_dims[d] {
                *v = v.round();
            }
            *v = v.clamp(self.lower[d], self.upper[d]);
        }
        point
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }
}

/// Evaluation history of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoState {
    pub points: Vec<Vec<f64>>,
    /// Observed objective values; failed evaluations hold `-inf`.
    pub values: Vec<f64>,
    pub seed: u64,
}

impl BoState {
    pub fn new(seed: u64) -> Self {
        Self {
            points: Vec::new(),
            values: Vec::new(),
            seed,
        }
    }

    pub fn push(&mut self, point: Vec<f64>, value: f64) {
        self.points.push(point);
        self.values.push(value);
    }

    pub fn iterations(&self) -> usize {
        self.points.len()
    }

    pub fn best_index(&self) -> Option<usize> {
        if self.values.is_empty() {
            return None;
        }
        let mut best = 0usize;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        Some(best)
    }

    /// Best point and value seen so far.
    pub fn incumbent(&self) -> Option<(&[f64], f64)> {
        self.best_index()
            .map(|i| (self.points[i].as_slice(), self.values[i]))
    }

    /// Running incumbent value after each evaluation.
    pub fn incumbent_trace(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.values
            .iter()
            .map(|&v| {
                best = best.max(v);
                best
            })
            .collect()
    }

    /// Header `iteration,x0..,value,incumbent_value` plus one row per
    /// evaluation.
    pub fn trace_csv(&self) -> String {
        let dim = self.points.first().map_or(0, |p| p.len());
        let mut out = String::from("iteration");
        for d in 0..dim {
            out.push_str(&format!(",x{d}"));
        }
        out.push_str(",value,incumbent_value\n");
        let incumbents = self.incumbent_trace();
        for (i, (point, value)) in self.points.iter().zip(&self.values).enumerate() {
            out.push_str(&(i + 1).to_string());
            for v in point {
                out.push(',');
                out.push_str(&fmt_value(*v));
            }
            out.push(',');
            out.push_str(&fmt_value(*value));
            out.push(',');
            out.push_str(&fmt_value(incumbents[i]));
            out.push('\n');
        }
        out
    }
}

fn fmt_value(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        v.to_string()
    }
}

/// Expected improvement of a Gaussian posterior `(mean, sd)` over the
/// incumbent value; zero-deviation posteriors degrade to the hard
/// improvement `max(mean - incumbent, 0)`.
pub fn expected_improvement(mean: f64, sd: f64, incumbent_value: f64) -> f64 {
    assert!(sd >= 0.0, "standard deviation must be non-negative");
    let gap = mean - incumbent_value;
    if sd == 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sd;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (gap * normal.cdf(z) + sd * normal.pdf(z)).max(0.0)
}

/// Radical-inverse Halton point for 1-based `index`.
fn halton_point(index: usize, dim: usize) -> Vec<f64> {
    const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    (0..dim)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let mut i = index;
            let mut f = 1.0;
            let mut value = 0.0;
            while i > 0 {
                f /= base as f64;
                value += f * (i % base) as f64;
                i /= base;
            }
            value
        })
        .collect()
}

fn scale_to_box(unit: &[f64], problem: &BoProblem) -> Vec<f64> {
    unit.iter()
        .zip(problem.lower.iter().zip(&problem.upper))
        .map(|(u, (l, h))| l + u * (h - l))
        .collect()
}

/// Seeded stratified (Latin-hypercube-style) design of `count` points.
fn initial_design(problem: &BoProblem, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let dim = problem.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut strata: Vec<Vec<usize>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut order: Vec<usize> = (0..count).collect();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        strata.push(order);
    }
    (0..count)
        .map(|k| {
            (0..dim)
                .map(|d| {
                    let cell = strata[d][k] as f64;
                    let u = (cell + rng.gen_range(0.0..1.0)) / count as f64;
                    problem.lower[d] + u * (problem.upper[d] - problem.lower[d])
                })
                .collect()
        })
        .collect()
}

/// Proposes the next point to evaluate.
///
/// While fewer than the initial-design size (or `dim + 1` usable finite
/// observations) are available, returns the next space-filling point;
/// afterwards maximizes expected improvement under a GP fitted to the
/// finite observations. Deterministic given the state.
pub fn suggest_next(state: &BoState, problem: &BoProblem) -> Result<Vec<f64>, BoError> {
    let dim = problem.dim();
    let k = state.points.len();
    let init = problem.initial_design_size();
    if k < init {
        return Ok(initial_design(problem, state.seed, init)[k].clone());
    }
    for point in &state.points {
        if point.len() != dim {
            return Err(BoError::DimensionMismatch {
                got: point.len(),
                expected: dim,
            });
        }
    }

    // Halton fallback keeps exploring when the model cannot be fit.
    let fallback = || scale_to_box(&halton_point(k + 1, dim), problem);

    let mut usable_x = Vec::new();
    let mut usable_y = Vec::new();
    for (p, &v) in state.points.iter().zip(&state.values) {
        if v.is_finite() {
            usable_x.push(p.clone());
            usable_y.push(v);
        }
    }
    if usable_x.len() < dim + 1 {
        return Ok(fallback());
    }
    let incumbent = usable_y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let ts = match TrainingSet::from_xy(usable_x, usable_y) {
        Ok(ts) => ts,
        Err(_) => return Ok(fallback()),
    };
    let std = match standardize_lenient(&ts) {
        Ok(std) => std,
        Err(_) => return Ok(fallback()),
    };
    let gp_seed = state.seed.wrapping_add(k as u64);
    let model = match gp_fit_with_restarts(&std, gp_seed, INNER_GP_RESTARTS) {
        Ok(m) => m,
        Err(_) => return Ok(fallback()),
    };
    let acquisition = |point: &[f64]| -> f64 {
        let (mean, variance) = model.predict(point);
        expected_improvement(mean, variance.max(0.0).sqrt(), incumbent)
    };

    // Score the candidate set, then refine from the best candidate; the
    // refinement starts there, so it can only match or beat every raw
    // candidate.
    let offset = 1 + k * EI_CANDIDATES;
    let mut best_point = fallback();
    let mut best_ei = f64::NEG_INFINITY;
    for j in 0..EI_CANDIDATES {
        let candidate = scale_to_box(&halton_point(offset + j, dim), problem);
        let ei = acquisition(&candidate);
        if ei > best_ei {
            best_ei = ei;
            best_point = candidate;
        }
    }
    let (refined, refined_ei) = compass_maximize(
        acquisition,
        &best_point,
        &problem.lower,
        &problem.upper,
        0.05,
        1e-6,
        120,
    );
    let suggestion = if refined_ei >= best_ei { refined } else { best_point };
    debug_assert!(problem.contains(&suggestion));
    Ok(suggestion)
}

/// Runs the full loop: exactly `budget` objective evaluations starting
/// from the space-filling design. Non-finite objective values are
/// recorded as `-inf` and excluded from the model fit.
pub fn optimize<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    problem: &BoProblem,
    budget: usize,
    seed: u64,
) -> Result<BoState, BoError> {
    if budget < 5 {
        return Err(BoError::BudgetTooSmall { got: budget, need: 5 });
    }
    let mut state = BoState::new(seed);
    while state.points.len() < budget {
        let suggestion = suggest_next(&state, problem)?;
        let point = problem.snap(suggestion);
        let raw = objective(&point);
        let value = if raw.is_finite() { raw } else { f64::NEG_INFINITY };
        state.push(point, value);
    }
    Ok(state)
}
