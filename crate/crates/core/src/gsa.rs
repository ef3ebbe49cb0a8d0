//! Gradient sampling descent for locally Lipschitz objectives.
//!
//! Each iteration samples `m` points in the `ε`-ball around the iterate,
//! collects their gradients together with the gradient at the iterate, and
//! reduces the bundle to a single vector `ĝ` (min-norm point or average).
//! A small `‖ĝ‖` means the iterate is approximately `ε`-stationary and the
//! radius `ε` and tolerance `τ` shrink; otherwise a backtracking line search
//! runs along `-ĝ/‖ĝ‖` with sufficient decrease `f(x+td) < f(x) − βt‖ĝ‖`.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::minnorm::{self, average_point, min_norm_point, GradientBundle, MinNormError};

#[derive(Debug, Error, PartialEq)]
pub enum GsaError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("starting point has dimension {got}, objective expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error("min-norm subproblem failed: {0}")]
    MinNorm(#[from] MinNormError),
}

/// A function with an almost-everywhere gradient.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }
}

/// [`Objective`] from a pair of closures.
pub struct FnObjective<F, G> {
    dim: usize,
    f: F,
    g: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(dim: usize, f: F, g: G) -> Self {
        Self { dim, f, g }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.g)(x)
    }
}

/// How the sampled gradients are reduced to one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleMode {
    /// Min-norm point of the convex hull.
    Qp,
    /// Plain average of the bundle.
    Avg,
}

impl FromStr for BundleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qp" => Ok(Self::Qp),
            "avg" | "average" => Ok(Self::Avg),
            _ => Err(format!("unknown bundle mode `{s}` (expected qp or avg)")),
        }
    }
}

impl fmt::Display for BundleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Qp => "qp",
            Self::Avg => "avg",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsaParams {
    /// Number of sampled points per iteration.
    pub m: usize,
    /// Sufficient-decrease parameter.
    pub beta: f64,
    /// Radius reduction factor.
    pub mu: f64,
    /// Tolerance reduction factor.
    pub lambda: f64,
    pub eps0: f64,
    pub tau0: f64,
    pub eps_min: f64,
    pub tau_min: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub bundle_mode: BundleMode,
    /// In `Qp` mode, use the bundle average when the min-norm solve fails.
    pub fallback_to_average: bool,
}

impl GsaParams {
    /// Defaults for a problem of dimension `dim`: `m = dim + 1` (at most 100)
    /// in `Qp` mode, `m = 20` in `Avg` mode.
    pub fn new(dim: usize, mode: BundleMode) -> Self {
        let m = match mode {
            BundleMode::Qp => (dim + 1).min(100),
            BundleMode::Avg => 20,
        };
        Self {
            m,
            beta: 1e-4,
            mu: 0.5,
            lambda: 0.5,
            eps0: 0.1,
            tau0: 1e-2,
            eps_min: 1e-6,
            tau_min: 1e-6,
            max_iter: 10_000,
            seed: 1,
            bundle_mode: mode,
            fallback_to_average: true,
        }
    }

    pub fn validate(&self) -> Result<(), GsaError> {
        let open01 = |v: f64| v > 0.0 && v < 1.0;
        let bad = |msg: String| Err(GsaError::InvalidParams(msg));
        if self.m == 0 {
            return bad("m must be >= 1".into());
        }
        if !open01(self.beta) {
            return bad(format!("beta = {} not in (0, 1)", self.beta));
        }
        if !open01(self.mu) {
            return bad(format!("mu = {} not in (0, 1)", self.mu));
        }
        if !open01(self.lambda) {
            return bad(format!("lambda = {} not in (0, 1)", self.lambda));
        }
        if !(self.eps_min > 0.0 && self.eps0 > self.eps_min) {
            return bad(format!("need eps0 > eps_min > 0, got {} and {}", self.eps0, self.eps_min));
        }
        if !(self.tau_min > 0.0 && self.tau0 > self.tau_min) {
            return bad(format!("need tau0 > tau_min > 0, got {} and {}", self.tau0, self.tau_min));
        }
        Ok(())
    }
}

/// `m` independent draws, uniform on the closed unit ball of `ℝⁿ`.
pub fn sample_unit_ball<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| {
            let mut u = vec![0.0; n];
            fill_unit_ball(&mut u, rng);
            u
        })
        .collect()
}

/// Overwrites `u` with one uniform draw from the unit ball.
pub(crate) fn fill_unit_ball<R: Rng + ?Sized>(u: &mut [f64], rng: &mut R) {
    let n = u.len();
    loop {
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let len = minnorm::norm(u);
        if len > 0.0 {
            let radius = rng.random::<f64>().powf(1.0 / n as f64);
            let s = radius / len;
            u.iter_mut().for_each(|v| *v *= s);
            return;
        }
    }
}

/// The reduced bundle vector `ĝ` and what produced it.
#[derive(Debug, Clone)]
pub struct SubgradientEstimate {
    pub g: Vec<f64>,
    pub norm: f64,
    pub bundle: GradientBundle,
    /// The min-norm solve failed and the average was used instead.
    pub fallback: bool,
}

/// Reduces a bundle per `mode`, falling back to the average on failure when
/// allowed.
pub(crate) fn reduce_bundle(
    bundle: &GradientBundle,
    mode: BundleMode,
    fallback_to_average: bool,
) -> Result<(Vec<f64>, bool), MinNormError> {
    match mode {
        BundleMode::Avg => Ok((average_point(bundle), false)),
        BundleMode::Qp => match min_norm_point(bundle, minnorm::DEFAULT_TOL) {
            Ok(r) => Ok((r.point, false)),
            Err(e) if fallback_to_average => {
                log::warn!("min-norm solve failed ({e}), using bundle average");
                Ok((average_point(bundle), true))
            }
            Err(e) => Err(e),
        },
    }
}

/// Samples the gradient bundle at `x` with radius `eps` and reduces it.
pub fn approximate_subgradient<O: Objective + ?Sized, R: Rng + ?Sized>(
    obj: &O,
    x: &[f64],
    eps: f64,
    params: &GsaParams,
    rng: &mut R,
) -> Result<SubgradientEstimate, GsaError> {
    let n = x.len();
    let mut points = Vec::with_capacity(params.m + 1);
    points.push(obj.gradient(x));
    let mut u = vec![0.0; n];
    let mut y = vec![0.0; n];
    for _ in 0..params.m {
        fill_unit_ball(&mut u, rng);
        for ((yi, xi), ui) in y.iter_mut().zip(x).zip(&u) {
            *yi = xi + eps * ui;
        }
        points.push(obj.gradient(&y));
    }
    let bundle = GradientBundle::new(points)?;
    let (g, fallback) = reduce_bundle(&bundle, params.bundle_mode, params.fallback_to_average)?;
    let norm = minnorm::norm(&g);
    Ok(SubgradientEstimate {
        g,
        norm,
        bundle,
        fallback,
    })
}

/// Smallest step tried by the backtracking search.
pub const MIN_STEP_EXPONENT: i32 = 30;

/// Backtracks `t = 1, 1/2, …, 2⁻³⁰` until `eval(t) < f0 − β·t·gnorm`.
/// Returns the accepted step and its value.
pub(crate) fn backtrack(f0: f64, gnorm: f64, beta: f64, mut eval: impl FnMut(f64) -> f64) -> Option<(f64, f64)> {
    let mut t = 1.0;
    for _ in 0..=MIN_STEP_EXPONENT {
        let ft = eval(t);
        if ft < f0 - beta * t * gnorm {
            return Some((t, ft));
        }
        t *= 0.5;
    }
    None
}

/// Largest `t ∈ {1, 1/2, …, 2⁻³⁰}` with `f(x+td) < f(x) − β·t·gnorm`, or 0.
pub fn line_search<O: Objective + ?Sized>(obj: &O, x: &[f64], d: &[f64], gnorm: f64, beta: f64) -> f64 {
    let f0 = obj.value(x);
    let mut y = vec![0.0; x.len()];
    backtrack(f0, gnorm, beta, |t| {
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(d) {
            *yi = xi + t * di;
        }
        obj.value(&y)
    })
    .map_or(0.0, |(t, _)| t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEvent {
    /// Line search accepted a step.
    Step,
    /// `‖ĝ‖ ≤ τ`: radius and tolerance shrank.
    Shrink,
    /// Line search failed; radius and tolerance shrank.
    NullStep,
}

impl fmt::Display for StepEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Step => "step",
            Self::Shrink => "shrink",
            Self::NullStep => "null",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Objective at the start of the iteration.
    pub f: f64,
    pub gnorm: f64,
    /// Radius and tolerance used in this iteration.
    pub eps: f64,
    pub tau: f64,
    /// Accepted step, 0 unless `event == Step`.
    pub step: f64,
    /// Objective after the iteration.
    pub f_next: f64,
    pub best_f: f64,
    pub event: StepEvent,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
    pub warnings: Vec<String>,
    /// Both `ε` and `τ` reached their thresholds before the iteration cap.
    pub converged: bool,
}

impl IterationLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iteration,f,gnorm,eps,tau,step,best_f,event")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.iteration, r.f, r.gnorm, r.eps, r.tau, r.step, r.best_f, r.event
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GsaResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub log: IterationLog,
}

/// Runs gradient sampling from `x0` until `ε ≤ eps_min` and `τ ≤ tau_min`,
/// or `max_iter` iterations. Returns the best iterate visited.
pub fn gsa_minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], params: &GsaParams) -> Result<GsaResult, GsaError> {
    params.validate()?;
    if x0.len() != obj.dim() {
        return Err(GsaError::DimensionMismatch {
            expected: obj.dim(),
            got: x0.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut x = x0.to_vec();
    let mut fx = obj.value(&x);
    if !fx.is_finite() {
        return Err(GsaError::NonFiniteStart);
    }
    let mut x_best = x.clone();
    let mut f_best = fx;
    let (mut eps, mut tau) = (params.eps0, params.tau0);
    let mut log = IterationLog::default();
    let mut trial = vec![0.0; x.len()];

    for iteration in 0..params.max_iter {
        if eps <= params.eps_min && tau <= params.tau_min {
            log.converged = true;
            break;
        }
        let est = approximate_subgradient(obj, &x, eps, params, &mut rng)?;
        if est.fallback {
            log.warnings.push(format!("iteration {iteration}: min-norm fallback to average"));
        }
        let f_start = fx;
        let (event, step) = if est.norm <= tau {
            (StepEvent::Shrink, 0.0)
        } else {
            let inv = 1.0 / est.norm;
            let found = backtrack(fx, est.norm, params.beta, |t| {
                for ((yi, xi), gi) in trial.iter_mut().zip(&x).zip(&est.g) {
                    *yi = xi - t * inv * gi;
                }
                obj.value(&trial)
            });
            match found {
                Some((t, ft)) => {
                    for (xi, gi) in x.iter_mut().zip(&est.g) {
                        *xi -= t * inv * gi;
                    }
                    fx = ft;
                    (StepEvent::Step, t)
                }
                None => (StepEvent::NullStep, 0.0),
            }
        };
        if fx < f_best {
            f_best = fx;
            x_best.clone_from(&x);
        }
        log.records.push(IterationRecord {
            iteration,
            f: f_start,
            gnorm: est.norm,
            eps,
            tau,
            step,
            f_next: fx,
            best_f: f_best,
            event,
        });
        if event != StepEvent::Step {
            eps *= params.mu;
            tau *= params.lambda;
        }
    }
    if !log.converged && eps <= params.eps_min && tau <= params.tau_min {
        log.converged = true;
    }
    Ok(GsaResult { x_best, f_best, log })
}

/// Raw trace of plain subgradient descent.
#[derive(Debug, Clone)]
pub struct SubgradientTrace {
    /// Objective at each iterate, starting with `x0`.
    pub values: Vec<f64>,
    pub x_best: Vec<f64>,
    pub f_best: f64,
}

impl SubgradientTrace {
    /// Number of iterations where the raw objective went up.
    pub fn increases(&self) -> usize {
        self.values.windows(2).filter(|w| w[1] > w[0]).count()
    }
}

/// Normalised subgradient steps `x ← x − s₀/√(k+1) · g/‖g‖` with no line
/// search, tracking the best value seen. Used as a contrast to
/// [`gsa_minimize`].
pub fn subgradient_descent<O: Objective + ?Sized>(obj: &O, x0: &[f64], step0: f64, iters: usize) -> SubgradientTrace {
    let mut x = x0.to_vec();
    let mut values = vec![obj.value(&x)];
    let mut x_best = x.clone();
    let mut f_best = values[0];
    for k in 0..iters {
        let g = obj.gradient(&x);
        let gn = minnorm::norm(&g);
        if gn == 0.0 {
            break;
        }
        let s = step0 / ((k + 1) as f64).sqrt() / gn;
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= s * gi;
        }
        let f = obj.value(&x);
        values.push(f);
        if f < f_best {
            f_best = f;
            x_best.clone_from(&x);
        }
    }
    SubgradientTrace { values, x_best, f_best }
}
