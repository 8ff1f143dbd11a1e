//! Derivative-free local maximization over a box: compass (coordinate
//! pattern) search with per-dimension step halving.

/// Maximizes `f` over `[lower, upper]` starting from `start`.
///
/// Steps are fractions of each dimension's range, halved whenever no axis
/// move improves; terminates once steps fall below `min_step` of the range
/// or the evaluation budget runs out. Returns the best point and value.
pub(crate) fn compass_maximize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    init_step: f64,
    min_step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let dim = start.len();
    let range: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| u - l).collect();
    let mut steps: Vec<f64> = range.iter().map(|r| r * init_step).collect();
    let floor: Vec<f64> = range.iter().map(|r| r * min_step).collect();

    let mut best: Vec<f64> = start
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (l, u))| v.clamp(*l, *u))
        .collect();
    let mut best_val = f(&best);
    let mut evals = 1usize;

    loop {
        let mut improved = false;
        for d in 0..dim {
            for dir in [1.0, -1.0] {
                if evals >= max_evals {
                    return (best, best_val);
                }
                let mut candidate = best.clone();
                candidate[d] = (candidate[d] + dir * steps[d]).clamp(lower[d], upper[d]);
                if candidate[d] == best[d] {
                    continue;
                }
                let val = f(&candidate);
                evals += 1;
                if val > best_val {
                    best = candidate;
                    best_val = val;
                    improved = true;
                }
            }
        }
        if !improved {
            for s in steps.iter_mut() {
                *s *= 0.5;
            }
            if steps.iter().zip(&floor).all(|(s, f)| s < f) {
                return (best, best_val);
            }
        }
    }
}
