//! Quantile additive model `q(t; j) = β₀ + h_j(t)` fitted by gradient
//! sampling with a local-scoring projection.
//!
//! The optimisation variable is the per-observation vector `q`, one entry per
//! flattened panel observation. Each iteration:
//!
//! 1. samples `u₁…u_m` on the unit ball of observation space,
//! 2. reduces `{∇ρ(q), ∇ρ(q+εu₁), …, ∇ρ(q+εu_m)}` to `ĝ` (average by
//!    default, min-norm point in `Qp` mode),
//! 3. shrinks `ε` and `τ` when `‖ĝ‖ ≤ τ`, otherwise
//! 4. smooths `-ĝ` per day class, normalises it to `d`, backtracks
//!    `t = 1, ½, …` until `L(q+td) < L(q) − βt‖ĝ‖` and moves.
//!
//! The initial vector and every smoothed direction are constant within each
//! `(t, j)` cell, so the iterate is too and the fitted grid is read off the
//! first observation of each cell.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::gsa::{self, fill_unit_ball, BundleMode, GsaError, GsaParams, IterationLog, IterationRecord, StepEvent};
use crate::loss::{LossError, PinballLoss};
use crate::minnorm::{self, GradientBundle, MinNormError};
use crate::panel::SalesPanel;
use crate::smoother::{GroupSmoother, SmootherError, SmootherSpec};

#[derive(Debug, Error, PartialEq)]
pub enum QamError {
    #[error("panel has no observations")]
    EmptyPanel,
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Smoother(#[from] SmootherError),
    #[error(transparent)]
    Gsa(#[from] GsaError),
    #[error("min-norm subproblem failed: {0}")]
    MinNorm(#[from] MinNormError),
    #[error("day class {0} has no fitted hours")]
    UnknownDay(usize),
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
}

/// Starting surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// Pooled empirical quantile everywhere.
    #[default]
    GlobalConstant,
    /// Empirical quantile of each day class.
    PerDayConstant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QamConfig {
    pub alpha: f64,
    pub gsa: GsaParams,
    pub smoother: SmootherSpec,
    pub init: InitMode,
    /// Interpret `gsa.eps0` in units of the pooled interquartile range of the
    /// observations.
    pub eps0_in_iqr_units: bool,
    /// Worker threads for the bundle gradients; 0 uses the ambient rayon pool.
    pub threads: usize,
}

impl QamConfig {
    /// Averaged bundle with `m = 20`, `ε₀ = 0.1·IQR`, LOESS span 0.75.
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            gsa: GsaParams::new(0, BundleMode::Avg),
            smoother: SmootherSpec::default(),
            init: InitMode::GlobalConstant,
            eps0_in_iqr_units: true,
            threads: 0,
        }
    }

    /// Switches to min-norm bundles with `m = n + 1` capped at 100.
    pub fn with_qp(mut self, n_obs: usize) -> Self {
        self.gsa.bundle_mode = BundleMode::Qp;
        self.gsa.m = (n_obs + 1).min(100);
        self
    }
}

/// `β₀ + offset_j + h_j(t)` reproduces the grid; each `h_j` sums to zero
/// over the observed hours of day `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub beta0: f64,
    /// `mean_t q(t, j) − β₀`, `None` for days without observations.
    pub day_offsets: Vec<Option<f64>>,
    /// `curves[j-1][t-1]`, `None` where the cell is unobserved.
    pub curves: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSurface {
    pub alpha: f64,
    t_count: usize,
    j_count: usize,
    /// `grid[(j-1)*T + (t-1)]`, `None` for empty cells.
    grid: Vec<Option<f64>>,
    /// Fitted value per observation, flat panel order.
    pub obs_vector: Vec<f64>,
    pub fit_log: IterationLog,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub decomposition: Option<Decomposition>,
}

impl QuantileSurface {
    /// Builds a surface directly from grid values, e.g. one read back from CSV.
    pub fn from_grid(alpha: f64, t_count: usize, j_count: usize, grid: Vec<Option<f64>>) -> Self {
        assert_eq!(grid.len(), t_count * j_count, "grid size");
        Self {
            alpha,
            t_count,
            j_count,
            grid,
            obs_vector: Vec::new(),
            fit_log: IterationLog::default(),
            initial_loss: f64::NAN,
            final_loss: f64::NAN,
            decomposition: None,
        }
    }

    pub fn t_count(&self) -> usize {
        self.t_count
    }

    pub fn j_count(&self) -> usize {
        self.j_count
    }

    pub fn converged(&self) -> bool {
        self.fit_log.converged
    }

    /// Fitted value of cell `(t, j)`, if it was observed.
    pub fn value(&self, t: usize, j: usize) -> Option<f64> {
        if !(1..=self.t_count).contains(&t) || !(1..=self.j_count).contains(&j) {
            return None;
        }
        self.grid[(j - 1) * self.t_count + (t - 1)]
    }

    /// `(t, j, value)` for every observed cell, day-major.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.grid
            .iter()
            .enumerate()
            .filter_map(move |(c, v)| v.map(|v| (c % self.t_count + 1, c / self.t_count + 1, v)))
    }
}

/// Type-1 sample quantile by selection.
fn sample_quantile(values: &mut [f64], alpha: f64) -> f64 {
    let n = values.len();
    let target = alpha * n as f64;
    let mut k = target.ceil() as usize;
    if k > 1 && ((k - 1) as f64) >= target - 1e-12 * target {
        k -= 1;
    }
    let k = k.clamp(1, n) - 1;
    *values.select_nth_unstable_by(k, f64::total_cmp).1
}

/// Constant starting vector for `qam_fit`.
pub fn init_surface(panel: &SalesPanel, config: &QamConfig) -> Result<Vec<f64>, QamError> {
    if panel.is_empty() {
        return Err(QamError::EmptyPanel);
    }
    let loss = PinballLoss::new(config.alpha)?;
    let alpha = loss.alpha();
    match config.init {
        InitMode::GlobalConstant => {
            let q = sample_quantile(&mut panel.values().to_vec(), alpha);
            Ok(vec![q; panel.len()])
        }
        InitMode::PerDayConstant => {
            let mut out = vec![0.0; panel.len()];
            for j in 1..=panel.j_count() {
                let range = panel.day_range(j);
                if range.is_empty() {
                    continue;
                }
                let q = sample_quantile(&mut panel.values()[range.clone()].to_vec(), alpha);
                out[range].fill(q);
            }
            Ok(out)
        }
    }
}

fn pooled_iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    sample_quantile(&mut v, 0.75) - sample_quantile(&mut v, 0.25)
}

/// Fits the `alpha`-quantile surface of `panel`.
pub fn qam_fit(panel: &SalesPanel, config: &QamConfig) -> Result<QuantileSurface, QamError> {
    if config.threads == 0 {
        return fit_inner(panel, config);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| QamError::ThreadPool(e.to_string()))?;
    pool.install(|| fit_inner(panel, config))
}

fn fit_inner(panel: &SalesPanel, config: &QamConfig) -> Result<QuantileSurface, QamError> {
    let loss = PinballLoss::new(config.alpha)?;
    if panel.is_empty() {
        return Err(QamError::EmptyPanel);
    }
    let smoother = GroupSmoother::new(panel, &config.smoother)?;
    let mut params = config.gsa.clone();
    if config.eps0_in_iqr_units {
        let iqr = pooled_iqr(panel.values());
        params.eps0 *= if iqr > 0.0 { iqr } else { 1.0 };
    }
    params.validate()?;

    let y = panel.values();
    let n = y.len();
    let mut log = IterationLog::default();
    log.warnings
        .extend(smoother.warnings().iter().map(|w| format!("smoother: {w}")));

    let mut q = init_surface(panel, config)?;
    let mut fq = loss.sum_loss(&q, y);
    let initial_loss = fq;
    let mut q_best = q.clone();
    let mut f_best = fq;
    let (mut eps, mut tau) = (params.eps0, params.tau0);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut g_hat = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut smoothed_trial = vec![0.0; n];

    for iteration in 0..params.max_iter {
        if eps <= params.eps_min && tau <= params.tau_min {
            log.converged = true;
            break;
        }
        let fallback = sampled_subgradient(&loss, y, &q, eps, &params, &mut rng, &mut g_hat)?;
        if fallback {
            log.warnings
                .push(format!("iteration {iteration}: min-norm fallback to average"));
        }
        let gnorm = minnorm::norm(&g_hat);
        let f_start = fq;

        let (event, step) = if gnorm <= tau {
            (StepEvent::Shrink, 0.0)
        } else {
            smoother.apply_into(&g_hat, &mut d);
            let dnorm = minnorm::norm(&d);
            if dnorm > 0.0 && dnorm.is_finite() {
                let scale = -1.0 / dnorm;
                d.iter_mut().for_each(|v| *v *= scale);
                let found = gsa::backtrack(fq, gnorm, params.beta, |t| {
                    for ((c, qi), di) in trial.iter_mut().zip(&q).zip(&d) {
                        *c = qi + t * di;
                    }
                    if config.smoother.resmooth_iterate {
                        smoother.apply_into(&trial, &mut smoothed_trial);
                        std::mem::swap(&mut trial, &mut smoothed_trial);
                    }
                    loss.sum_loss(&trial, y)
                });
                match found {
                    Some((t, ft)) => {
                        // `trial` holds the last evaluated (accepted) candidate
                        std::mem::swap(&mut q, &mut trial);
                        fq = ft;
                        (StepEvent::Step, t)
                    }
                    None => (StepEvent::NullStep, 0.0),
                }
            } else {
                log.warnings
                    .push(format!("iteration {iteration}: smoothed direction vanished"));
                (StepEvent::NullStep, 0.0)
            }
        };
        if fq < f_best {
            f_best = fq;
            q_best.clone_from(&q);
        }
        log.records.push(IterationRecord {
            iteration,
            f: f_start,
            gnorm,
            eps,
            tau,
            step,
            f_next: fq,
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
    if !log.converged {
        log::warn!("quantile fit stopped at the iteration cap before convergence");
    }

    let mut grid = vec![None; panel.t_count() * panel.j_count()];
    for (t, j, range) in panel.cells() {
        grid[(j - 1) * panel.t_count() + (t - 1)] = Some(q_best[range.start]);
    }
    let mut surface = QuantileSurface {
        alpha: config.alpha,
        t_count: panel.t_count(),
        j_count: panel.j_count(),
        grid,
        obs_vector: q_best,
        fit_log: log,
        initial_loss,
        final_loss: f_best,
        decomposition: None,
    };
    surface.decomposition = Some(decompose(&surface));
    Ok(surface)
}

/// Fills `out` with `ĝ_ε(q)`; returns whether the min-norm solve fell back to
/// the average.
///
/// Each perturbation draws from its own generator seeded from `rng`, so the
/// result does not depend on how the gradients are scheduled across threads.
fn sampled_subgradient(
    loss: &PinballLoss,
    y: &[f64],
    q: &[f64],
    eps: f64,
    params: &GsaParams,
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) -> Result<bool, QamError> {
    let n = q.len();
    let seeds: Vec<u64> = (0..params.m).map(|_| rng.next_u64()).collect();
    let perturbed = |seed: u64| {
        let mut sample_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = vec![0.0; n];
        fill_unit_ball(&mut u, &mut sample_rng);
        for ((ui, &qi), &yi) in u.iter_mut().zip(q).zip(y) {
            *ui = loss.rho_grad(qi + eps * *ui, yi);
        }
        u
    };
    let mut center = vec![0.0; n];
    loss.grad_into(q, y, &mut center);

    match params.bundle_mode {
        BundleMode::Avg => {
            let grads: Vec<Vec<f64>> = seeds.par_iter().map(|&s| perturbed(s)).collect();
            out.copy_from_slice(&center);
            for g in &grads {
                for (o, v) in out.iter_mut().zip(g) {
                    *o += v;
                }
            }
            let w = 1.0 / (params.m + 1) as f64;
            out.iter_mut().for_each(|o| *o *= w);
            Ok(false)
        }
        BundleMode::Qp => {
            let mut points = Vec::with_capacity(params.m + 1);
            points.push(center);
            points.extend(seeds.par_iter().map(|&s| perturbed(s)).collect::<Vec<_>>());
            let bundle = GradientBundle::new(points)?;
            let (g, fallback) = gsa::reduce_bundle(&bundle, BundleMode::Qp, params.fallback_to_average)?;
            out.copy_from_slice(&g);
            Ok(fallback)
        }
    }
}

/// Prediction at a possibly fractional hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    /// `t` fell outside the observed hours and the nearest endpoint was used.
    pub extrapolated: bool,
}

/// Fitted quantile at hour `t` of day class `j`, interpolating linearly
/// between observed hours.
pub fn qam_predict(surface: &QuantileSurface, t: f64, j: usize) -> Result<Prediction, QamError> {
    let hours: Vec<(f64, f64)> = (1..=surface.t_count)
        .filter_map(|h| surface.value(h, j).map(|v| (h as f64, v)))
        .collect();
    let (&(t_first, v_first), &(t_last, v_last)) = match (hours.first(), hours.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(QamError::UnknownDay(j)),
    };
    if t <= t_first || t >= t_last {
        let (edge, v) = if t <= t_first { (t_first, v_first) } else { (t_last, v_last) };
        let extrapolated = t != edge;
        if extrapolated {
            log::warn!("hour {t} outside the fitted range {t_first}..={t_last} of day {j}; using nearest endpoint");
        }
        return Ok(Prediction { value: v, extrapolated });
    }
    let i = hours.partition_point(|&(h, _)| h <= t);
    let (h0, v0) = hours[i - 1];
    if h0 == t {
        return Ok(Prediction {
            value: v0,
            extrapolated: false,
        });
    }
    let (h1, v1) = hours[i];
    let w = (t - h0) / (h1 - h0);
    Ok(Prediction {
        value: v0 + w * (v1 - v0),
        extrapolated: false,
    })
}

/// Splits the grid into a grand mean, per-day offsets and centred curves.
pub fn decompose(surface: &QuantileSurface) -> Decomposition {
    let observed: Vec<f64> = surface.cells().map(|(_, _, v)| v).collect();
    let beta0 = if observed.is_empty() {
        0.0
    } else {
        observed.iter().sum::<f64>() / observed.len() as f64
    };
    let mut day_offsets = Vec::with_capacity(surface.j_count);
    let mut curves = Vec::with_capacity(surface.j_count);
    for j in 1..=surface.j_count {
        let vals: Vec<Option<f64>> = (1..=surface.t_count).map(|t| surface.value(t, j)).collect();
        let present: Vec<f64> = vals.iter().flatten().copied().collect();
        if present.is_empty() {
            day_offsets.push(None);
            curves.push(vals);
            continue;
        }
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        day_offsets.push(Some(mean - beta0));
        curves.push(vals.iter().map(|v| v.map(|v| v - mean)).collect());
    }
    Decomposition {
        beta0,
        day_offsets,
        curves,
    }
}
