//! LOESS smoothing, alone and grouped by day class.
//!
//! Fits are computed on the distinct covariate values: replicated `x` share a
//! fitted value, and the weighted least-squares problem at each target only
//! depends on per-`x` response sums and counts. With the covariate layout
//! fixed, the smoother is a linear map from those sums to fitted values, which
//! [`GroupSmoother`] precomputes once per panel.
//!
//! Neighbourhoods follow the classical definition: with `N` observations the
//! bandwidth at `x₀` is the distance to the `⌊span·N⌋`-th nearest observation
//! (ties counted individually), and weights are tricube in distance/bandwidth.

use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::panel::SalesPanel;

#[derive(Debug, Error, PartialEq)]
pub enum SmootherError {
    #[error("span must lie in (0, 1], got {0}")]
    InvalidSpan(f64),
    #[error("local degree must be 0, 1 or 2, got {0}")]
    InvalidDegree(usize),
    #[error("x has {x} entries but z has {z}")]
    LengthMismatch { x: usize, z: usize },
    #[error("need at least {needed} distinct x values for degree {degree}, got {got}")]
    TooFewPoints {
        needed: usize,
        got: usize,
        degree: usize,
    },
    #[error("non-finite covariate value")]
    NonFinite,
}

/// Which observations are smoothed together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupKey {
    /// One independent fit per day class (`lo(t, by = day)`).
    #[default]
    Day,
    /// A single fit over hours, pooling all day classes.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherSpec {
    pub span: f64,
    pub degree: usize,
    pub group_key: GroupKey,
    /// Also smooth the updated iterate, not only the descent direction.
    pub resmooth_iterate: bool,
}

impl Default for SmootherSpec {
    fn default() -> Self {
        Self {
            span: 0.75,
            degree: 1,
            group_key: GroupKey::Day,
            resmooth_iterate: false,
        }
    }
}

impl SmootherSpec {
    pub fn validate(&self) -> Result<(), SmootherError> {
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(SmootherError::InvalidSpan(self.span));
        }
        if self.degree > 2 {
            return Err(SmootherError::InvalidDegree(self.degree));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SmootherWarning {
    /// The span neighbourhood at `x` held fewer than `degree + 1` distinct
    /// points with positive weight and was widened.
    WidenedNeighborhood { x: f64 },
    /// The local system at `x` was singular; a weighted mean was used.
    LocalMeanFallback { x: f64 },
    /// Day class `group` has too few distinct hours; its mean was used.
    GroupMeanFallback { group: usize },
}

impl fmt::Display for SmootherWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WidenedNeighborhood { x } => write!(f, "neighbourhood widened at x = {x}"),
            Self::LocalMeanFallback { x } => write!(f, "singular local fit at x = {x}, used weighted mean"),
            Self::GroupMeanFallback { group } => {
                write!(f, "day class {group} has too few distinct hours, used group mean")
            }
        }
    }
}

/// Smoothed values plus any degenerate-neighbourhood warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub values: Vec<f64>,
    pub warnings: Vec<SmootherWarning>,
}

#[inline]
fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let v = 1.0 - u * u * u;
        v * v * v
    }
}

/// LOESS as a dense linear map from per-`x` response sums to fitted values
/// at each distinct `x`.
#[derive(Debug, Clone)]
struct LoessOperator {
    k: usize,
    /// Row-major `k × k`; row = target, column = source sum.
    coef: Vec<f64>,
}

impl LoessOperator {
    /// `xs` sorted ascending and distinct, `counts[b] >= 1`.
    fn new(xs: &[f64], counts: &[usize], span: f64, degree: usize, warnings: &mut Vec<SmootherWarning>) -> Self {
        let k = xs.len();
        debug_assert!(k > degree);
        let total: usize = counts.iter().sum();
        let q = (((span * total as f64) + 1e-10).floor() as usize).max(1);
        let p = degree + 1;
        let mut coef = vec![0.0; k * k];
        let mut order: Vec<usize> = (0..k).collect();
        let mut weights = vec![0.0; k];

        for a in 0..k {
            let x0 = xs[a];
            order.sort_by(|&u, &v| (xs[u] - x0).abs().total_cmp(&(xs[v] - x0).abs()));
            let mut cum = 0;
            let mut bandwidth = 0.0;
            for &b in &order {
                cum += counts[b];
                if cum >= q {
                    bandwidth = (xs[b] - x0).abs();
                    break;
                }
            }
            let inside = order
                .iter()
                .filter(|&&b| (xs[b] - x0).abs() < bandwidth)
                .count();
            if inside < p {
                // smallest bandwidth giving p distinct points positive weight
                let dp = (xs[order[p - 1]] - x0).abs();
                bandwidth = order
                    .iter()
                    .map(|&b| (xs[b] - x0).abs())
                    .find(|&d| d > dp)
                    .unwrap_or(if dp > 0.0 { 2.0 * dp } else { 1.0 });
                warnings.push(SmootherWarning::WidenedNeighborhood { x: x0 });
            }

            for b in 0..k {
                weights[b] = tricube((xs[b] - x0).abs() / bandwidth);
            }

            let row = &mut coef[a * k..(a + 1) * k];
            if !local_polynomial_row(xs, counts, &weights, x0, bandwidth, p, row) {
                let denom: f64 = (0..k).map(|b| weights[b] * counts[b] as f64).sum();
                for b in 0..k {
                    row[b] = weights[b] / denom;
                }
                warnings.push(SmootherWarning::LocalMeanFallback { x: x0 });
            }
        }
        Self { k, coef }
    }

    fn apply(&self, sums: &[f64], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate().take(self.k) {
            let row = &self.coef[a * self.k..(a + 1) * self.k];
            *o = row.iter().zip(sums).map(|(c, s)| c * s).sum();
        }
    }
}

/// Row of the local hat matrix at `x0`: fills `row[b]` so that the fitted
/// intercept equals `Σ_b row[b]·S_b`, with `S_b` the response sum at `xs[b]`.
/// Returns false if the local normal equations are singular.
fn local_polynomial_row(
    xs: &[f64],
    counts: &[usize],
    weights: &[f64],
    x0: f64,
    scale: f64,
    p: usize,
    row: &mut [f64],
) -> bool {
    let basis = |x: f64| {
        let u = (x - x0) / scale;
        let mut v = [1.0, u, u * u];
        v[p..].fill(0.0);
        v
    };
    let mut m = DMatrix::<f64>::zeros(p, p);
    for b in 0..xs.len() {
        let w = weights[b] * counts[b] as f64;
        if w == 0.0 {
            continue;
        }
        let v = basis(xs[b]);
        for r in 0..p {
            for c in 0..p {
                m[(r, c)] += w * v[r] * v[c];
            }
        }
    }
    let mut e0 = DVector::<f64>::zeros(p);
    e0[0] = 1.0;
    let Some(c) = m.lu().solve(&e0) else {
        return false;
    };
    if c.iter().any(|v| !v.is_finite()) {
        return false;
    }
    for b in 0..xs.len() {
        let v = basis(xs[b]);
        row[b] = weights[b] * (0..p).map(|r| c[r] * v[r]).sum::<f64>();
    }
    true
}

/// LOESS fit of `z` on `x`, evaluated at every `x_i`.
pub fn loess_fit(x: &[f64], z: &[f64], spec: &SmootherSpec) -> Result<Smoothed, SmootherError> {
    spec.validate()?;
    if x.len() != z.len() {
        return Err(SmootherError::LengthMismatch { x: x.len(), z: z.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SmootherError::NonFinite);
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut xs: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut slot = vec![0usize; x.len()];
    for &i in &idx {
        if xs.last() != Some(&x[i]) {
            xs.push(x[i]);
            counts.push(0);
        }
        *counts.last_mut().unwrap() += 1;
        slot[i] = xs.len() - 1;
    }
    if xs.len() < spec.degree + 1 {
        return Err(SmootherError::TooFewPoints {
            needed: spec.degree + 1,
            got: xs.len(),
            degree: spec.degree,
        });
    }
    let mut warnings = Vec::new();
    let op = LoessOperator::new(&xs, &counts, spec.span, spec.degree, &mut warnings);
    let mut sums = vec![0.0; xs.len()];
    for (i, &zi) in z.iter().enumerate() {
        sums[slot[i]] += zi;
    }
    let mut fitted = vec![0.0; xs.len()];
    op.apply(&sums, &mut fitted);
    Ok(Smoothed {
        values: slot.iter().map(|&s| fitted[s]).collect(),
        warnings,
    })
}

#[derive(Debug, Clone)]
enum GroupFit {
    Loess(LoessOperator),
    Mean,
}

#[derive(Debug, Clone)]
struct Group {
    /// Flat ranges holding each distinct hour's observations, hours ascending.
    members: Vec<Vec<Range<usize>>>,
    fit: GroupFit,
}

/// Precomputed [`smooth_by_group`] for one panel layout.
#[derive(Debug, Clone)]
pub struct GroupSmoother {
    n: usize,
    groups: Vec<Group>,
    warnings: Vec<SmootherWarning>,
}

impl GroupSmoother {
    pub fn new(panel: &SalesPanel, spec: &SmootherSpec) -> Result<Self, SmootherError> {
        spec.validate()?;
        let t_count = panel.t_count();
        let day_sets: Vec<Vec<usize>> = match spec.group_key {
            GroupKey::Day => (1..=panel.j_count()).map(|j| vec![j]).collect(),
            GroupKey::Pooled => vec![(1..=panel.j_count()).collect()],
        };
        let mut groups = Vec::new();
        let mut warnings = Vec::new();
        for (g, days) in day_sets.iter().enumerate() {
            let mut xs = Vec::new();
            let mut counts = Vec::new();
            let mut members = Vec::new();
            for t in 1..=t_count {
                let ranges: Vec<Range<usize>> = days
                    .iter()
                    .map(|&j| panel.cell_range(t, j))
                    .filter(|r| !r.is_empty())
                    .collect();
                let count: usize = ranges.iter().map(|r| r.len()).sum();
                if count > 0 {
                    xs.push(t as f64);
                    counts.push(count);
                    members.push(ranges);
                }
            }
            if members.is_empty() {
                continue;
            }
            let fit = if xs.len() < spec.degree + 1 {
                warnings.push(SmootherWarning::GroupMeanFallback { group: g + 1 });
                GroupFit::Mean
            } else {
                GroupFit::Loess(LoessOperator::new(&xs, &counts, spec.span, spec.degree, &mut warnings))
            };
            groups.push(Group { members, fit });
        }
        for w in &warnings {
            log::warn!("smoother: {w}");
        }
        Ok(Self {
            n: panel.len(),
            groups,
            warnings,
        })
    }

    pub fn warnings(&self) -> &[SmootherWarning] {
        &self.warnings
    }

    /// Smooths `values` (flat panel order) into `out`.
    pub fn apply_into(&self, values: &[f64], out: &mut [f64]) {
        assert_eq!(values.len(), self.n, "vector does not match panel");
        assert_eq!(out.len(), self.n, "output does not match panel");
        let mut sums = Vec::new();
        let mut fitted = Vec::new();
        for group in &self.groups {
            sums.clear();
            sums.extend(group.members.iter().map(|ranges| {
                ranges
                    .iter()
                    .map(|r| values[r.clone()].iter().sum::<f64>())
                    .sum::<f64>()
            }));
            fitted.clear();
            fitted.resize(sums.len(), 0.0);
            match &group.fit {
                GroupFit::Loess(op) => op.apply(&sums, &mut fitted),
                GroupFit::Mean => {
                    let count: usize = group.members.iter().flatten().map(|r| r.len()).sum();
                    fitted.fill(sums.iter().sum::<f64>() / count as f64);
                }
            }
            for (ranges, &v) in group.members.iter().zip(&fitted) {
                for r in ranges {
                    out[r.clone()].fill(v);
                }
            }
        }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        self.apply_into(values, &mut out);
        out
    }
}

/// Smooths `values` against hour, independently per day class.
/// Observations sharing a `(t, j)` cell receive identical outputs.
pub fn smooth_by_group(values: &[f64], panel: &SalesPanel, spec: &SmootherSpec) -> Result<Smoothed, SmootherError> {
    if values.len() != panel.len() {
        return Err(SmootherError::LengthMismatch {
            x: panel.len(),
            z: values.len(),
        });
    }
    let smoother = GroupSmoother::new(panel, spec)?;
    Ok(Smoothed {
        values: smoother.apply(values),
        warnings: smoother.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(span: f64, degree: usize) -> SmootherSpec {
        SmootherSpec {
            span,
            degree,
            ..SmootherSpec::default()
        }
    }

    #[test]
    fn constant_is_reproduced() {
        let x: Vec<f64> = (0..30).map(|i| (i % 7) as f64 * 0.5).collect();
        let z = vec![3.25; 30];
        for degree in 0..=2 {
            for span in [0.2, 0.5, 1.0] {
                let out = loess_fit(&x, &z, &spec(span, degree)).unwrap();
                assert!(out.values.iter().all(|v| (v - 3.25).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn affine_is_reproduced_with_degree_one() {
        let x: Vec<f64> = (0..25).map(|i| i as f64 * 0.37).collect();
        let z: Vec<f64> = x.iter().map(|x| 2.0 * x + 1.0).collect();
        for span in [0.1, 0.3, 0.75, 1.0] {
            let out = loess_fit(&x, &z, &spec(span, 1)).unwrap();
            for (f, e) in out.values.iter().zip(&z) {
                assert!((f - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quadratic_is_reproduced_with_degree_two() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let z: Vec<f64> = x.iter().map(|x| 0.5 * x * x - 3.0 * x + 2.0).collect();
        let out = loess_fit(&x, &z, &spec(0.4, 2)).unwrap();
        for (f, e) in out.values.iter().zip(&z) {
            assert!((f - e).abs() < 1e-9);
        }
    }

    #[test]
    fn tiny_span_widens_neighbourhood() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let z = [1.0, 3.0, 5.0, 7.0];
        let out = loess_fit(&x, &z, &spec(0.1, 1)).unwrap();
        assert!(!out.warnings.is_empty());
        for (f, e) in out.values.iter().zip(&z) {
            assert!((f - e).abs() < 1e-10);
        }
    }

    #[test]
    fn too_few_distinct_points() {
        let err = loess_fit(&[1.0, 1.0], &[0.0, 1.0], &spec(0.5, 1)).unwrap_err();
        assert!(matches!(err, SmootherError::TooFewPoints { needed: 2, got: 1, .. }));
        assert!(matches!(
            loess_fit(&[1.0], &[0.0, 1.0], &spec(0.5, 1)),
            Err(SmootherError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn invalid_spec() {
        assert_eq!(spec(0.0, 1).validate(), Err(SmootherError::InvalidSpan(0.0)));
        assert_eq!(spec(0.5, 3).validate(), Err(SmootherError::InvalidDegree(3)));
    }

    #[test]
    fn replicated_x_matches_expanded_fit() {
        // a fit on replicated x equals the fit on the flattened replicates
        let x = [1.0, 1.0, 2.0, 3.0, 3.0, 3.0, 4.0, 5.0];
        let z = [1.0, 2.0, 0.5, 4.0, 3.0, 2.0, 6.0, 1.0];
        let out = loess_fit(&x, &z, &spec(1.0, 1)).unwrap();
        assert_eq!(out.values[0], out.values[1]);
        assert_eq!(out.values[3], out.values[5]);
        // brute force: weighted least squares over all 8 points at x0 = 3
        let q = (1.0f64 * 8.0).floor() as usize;
        let mut d: Vec<f64> = x.iter().map(|v| (v - 3.0f64).abs()).collect();
        d.sort_by(f64::total_cmp);
        let h = d[q - 1];
        let (mut sw, mut swx, mut swxx, mut swy, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &zi) in x.iter().zip(&z) {
            let u = (xi - 3.0f64).abs() / h;
            let w = if u < 1.0 { (1.0 - u.powi(3)).powi(3) } else { 0.0 };
            sw += w;
            swx += w * xi;
            swxx += w * xi * xi;
            swy += w * zi;
            swxy += w * xi * zi;
        }
        let slope = (sw * swxy - swx * swy) / (sw * swxx - swx * swx);
        let icpt = (swy - slope * swx) / sw;
        assert!((out.values[3] - (icpt + slope * 3.0)).abs() < 1e-12);
    }
}
