//! Brute-force references for tests and benchmarks. Nothing here shares code
//! with the solvers it is used to check.

use thiserror::Error;

use crate::gsa::{FnObjective, Objective};
use crate::minnorm::GradientBundle;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("empty input")]
    Empty,
    #[error("quantile level must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("simplex grid would need {0} evaluations")]
    GridTooLarge(u128),
    #[error("resolution must lie in (0, 1], got {0}")]
    InvalidResolution(f64),
}

/// Left-continuous inverse ECDF: the smallest order statistic `y_(k)` with
/// `k/n ≥ alpha`.
pub fn empirical_quantile(values: &[f64], alpha: f64) -> Result<f64, OracleError> {
    if values.is_empty() {
        return Err(OracleError::Empty);
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(OracleError::InvalidAlpha(alpha));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // smallest k with k >= alpha·n, guarded against alpha·n landing just
    // above an integer through rounding
    let target = alpha * n as f64;
    let mut k = target.ceil() as usize;
    if k > 1 && ((k - 1) as f64) >= target - 1e-12 * target {
        k -= 1;
    }
    Ok(sorted[k.clamp(1, n) - 1])
}

const GRID_LIMIT: u128 = 200_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Minimum-norm convex combination found by exhaustive search over a
/// simplex grid with step `resolution`.
///
/// By Carathéodory, the optimum is a combination of at most `dim + 1`
/// points, so every subset of that size is gridded separately.
pub fn simplex_grid_min_norm(bundle: &GradientBundle, resolution: f64) -> Result<Vec<f64>, OracleError> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(OracleError::InvalidResolution(resolution));
    }
    let pts = bundle.points();
    let m = pts.len();
    let dim = bundle.dim();
    let size = m.min(dim + 1);
    let steps = (1.0 / resolution).round() as usize;
    let per_subset = binomial((steps + size - 1) as u128, (size - 1) as u128);
    let total = per_subset * binomial(m as u128, size as u128);
    if total > GRID_LIMIT {
        return Err(OracleError::GridTooLarge(total));
    }

    let mut best = pts[0].clone();
    let mut best_sq = f64::INFINITY;
    let mut subset: Vec<usize> = (0..size).collect();
    let mut counts = vec![0usize; size];
    let mut v = vec![0.0; dim];
    loop {
        for_each_composition(steps, &mut counts, 0, &mut |counts| {
            v.fill(0.0);
            for (c, &s) in counts.iter().zip(&subset) {
                if *c > 0 {
                    let w = *c as f64 / steps as f64;
                    for (vi, pi) in v.iter_mut().zip(&pts[s]) {
                        *vi += w * pi;
                    }
                }
            }
            let sq: f64 = v.iter().map(|x| x * x).sum();
            if sq < best_sq {
                best_sq = sq;
                best.clone_from(&v);
            }
        });
        if !next_subset(&mut subset, m) {
            break;
        }
    }
    Ok(best)
}

/// Calls `f` on every split of `remaining` into `counts[idx..]`.
fn for_each_composition(remaining: usize, counts: &mut [usize], idx: usize, f: &mut impl FnMut(&[usize])) {
    if idx == counts.len() - 1 {
        counts[idx] = remaining;
        f(counts);
        return;
    }
    for c in 0..=remaining {
        counts[idx] = c;
        for_each_composition(remaining - c, counts, idx + 1, f);
    }
}

fn next_subset(s: &mut [usize], m: usize) -> bool {
    let k = s.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if s[i] < m - k + i {
            s[i] += 1;
            for j in i + 1..k {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Central-difference gradient.
pub fn fd_gradient<O: Objective + ?Sized>(obj: &O, x: &[f64], step: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + step;
            let up = obj.value(&y);
            y[i] = x[i] - step;
            let down = obj.value(&y);
            y[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Test problem with a known minimiser.
pub struct BenchmarkObjective {
    pub name: &'static str,
    pub objective: Box<dyn Objective + Send + Sync>,
    pub minimizer: Vec<f64>,
    pub minimum: f64,
    /// Where the function fails to be differentiable.
    pub nonsmooth_set: &'static str,
    /// Standard starting point.
    pub start: Vec<f64>,
}

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `10|x₂ − x₁²| + (1 − x₁)²`, minimum 0 at `(1, 1)`.
pub fn valley_benchmark() -> BenchmarkObjective {
    BenchmarkObjective {
        name: "abs-valley",
        objective: Box::new(FnObjective::new(
            2,
            |x: &[f64]| 10.0 * (x[1] - x[0] * x[0]).abs() + (1.0 - x[0]).powi(2),
            |x: &[f64]| {
                let s = sign(x[1] - x[0] * x[0]);
                vec![-20.0 * x[0] * s - 2.0 * (1.0 - x[0]), 10.0 * s]
            },
        )),
        minimizer: vec![1.0, 1.0],
        minimum: 0.0,
        nonsmooth_set: "x2 = x1^2",
        start: vec![-1.0, 2.0],
    }
}

/// `|x₁| + 10|x₂|`, minimum 0 at the origin.
pub fn weighted_l1_benchmark() -> BenchmarkObjective {
    BenchmarkObjective {
        name: "weighted-l1",
        objective: Box::new(FnObjective::new(
            2,
            |x: &[f64]| x[0].abs() + 10.0 * x[1].abs(),
            |x: &[f64]| vec![sign(x[0]), 10.0 * sign(x[1])],
        )),
        minimizer: vec![0.0, 0.0],
        minimum: 0.0,
        nonsmooth_set: "x1 = 0 or x2 = 0",
        start: vec![3.0, 3.0],
    }
}

/// `‖x − c‖²` with `c = (1, −2, 3)`.
pub fn quadratic_benchmark() -> BenchmarkObjective {
    const C: [f64; 3] = [1.0, -2.0, 3.0];
    BenchmarkObjective {
        name: "quadratic",
        objective: Box::new(FnObjective::new(
            3,
            |x: &[f64]| x.iter().zip(&C).map(|(a, b)| (a - b).powi(2)).sum(),
            |x: &[f64]| x.iter().zip(&C).map(|(a, b)| 2.0 * (a - b)).collect(),
        )),
        minimizer: C.to_vec(),
        minimum: 0.0,
        nonsmooth_set: "none",
        start: vec![-4.0, 5.0, 0.0],
    }
}
