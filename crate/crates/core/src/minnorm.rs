//! Minimum-norm point in the convex hull of a gradient bundle.
//!
//! [`min_norm_point`] is Wolfe's method: an active set ("corral") on the
//! unit simplex, alternating between adding the most violating point and
//! moving to the affine minimiser of the corral. All work happens on the
//! Gram matrix, so the cost beyond its construction does not grow with the
//! ambient dimension.
//!
//! No extreme-point extraction is done first: the minimum over the hull of
//! all points equals the minimum over its vertices.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MinNormError {
    #[error("gradient bundle is empty")]
    Empty,
    #[error("bundle point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("bundle contains non-finite values")]
    NonFinite,
    #[error("corral system is numerically singular")]
    GramBreakdown,
    #[error("no convergence within {0} iterations")]
    IterationLimit(usize),
}

/// Gradients at a point and at its sampled perturbations.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    points: Vec<Vec<f64>>,
}

impl GradientBundle {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, MinNormError> {
        let first = points.first().ok_or(MinNormError::Empty)?;
        let dim = first.len();
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(MinNormError::DimensionMismatch {
                    index,
                    expected: dim,
                    got: p.len(),
                });
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// `Σ weights[k]·points[k]`.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (w, p) in weights.iter().zip(&self.points) {
            if *w != 0.0 {
                for (o, v) in out.iter_mut().zip(p) {
                    *o += w * v;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormResult {
    /// Convex weights, one per bundle point.
    pub weights: Vec<f64>,
    pub point: Vec<f64>,
    pub norm: f64,
}

pub const DEFAULT_TOL: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Projects the origin onto `conv(bundle)`.
///
/// `tol` bounds the Wolfe optimality gap `‖g‖² − min_k gᵀz_k`, relative to
/// `max(1, max_k ‖z_k‖²)`.
pub fn min_norm_point(bundle: &GradientBundle, tol: f64) -> Result<MinNormResult, MinNormError> {
    let pts = bundle.points();
    if pts.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MinNormError::NonFinite);
    }
    let m = pts.len();
    let mut gram = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let v = dot(&pts[a], &pts[b]);
            gram[a * m + b] = v;
            gram[b * m + a] = v;
        }
    }
    let g = |a: usize, b: usize| gram[a * m + b];
    let scale = (0..m).map(|a| g(a, a)).fold(1.0, f64::max);
    let gap_tol = tol * scale;

    let start = (0..m).min_by(|&a, &b| g(a, a).total_cmp(&g(b, b))).unwrap();
    let mut corral = vec![start];
    let mut lambda = vec![1.0];
    let max_iter = 100 * m + 100;
    let mut iter = 0;

    loop {
        // xᵀz_j and ‖x‖² from the Gram matrix
        let xz: Vec<f64> = (0..m)
            .map(|j| corral.iter().zip(&lambda).map(|(&s, l)| l * g(s, j)).sum())
            .collect();
        let xx: f64 = corral.iter().zip(&lambda).map(|(&s, l)| l * xz[s]).sum();
        let (jmin, &zmin) = xz
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        if zmin >= xx - gap_tol || corral.contains(&jmin) {
            break;
        }
        corral.push(jmin);
        lambda.push(0.0);

        loop {
            iter += 1;
            if iter > max_iter {
                return Err(MinNormError::IterationLimit(max_iter));
            }
            let alpha = affine_minimizer(&corral, &g)?;
            if alpha.iter().all(|&a| a > 0.0) {
                lambda = alpha;
                break;
            }
            let mut theta = f64::INFINITY;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            // drop the points the step drove to zero, at least the blocking one
            let blocking = lambda
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            let mut keep_c = Vec::with_capacity(corral.len());
            let mut keep_l = Vec::with_capacity(corral.len());
            for (i, (&s, &l)) in corral.iter().zip(&lambda).enumerate() {
                if i != blocking && l > 0.0 {
                    keep_c.push(s);
                    keep_l.push(l);
                }
            }
            if keep_c.is_empty() {
                return Err(MinNormError::GramBreakdown);
            }
            let total: f64 = keep_l.iter().sum();
            keep_l.iter_mut().for_each(|l| *l /= total);
            corral = keep_c;
            lambda = keep_l;
        }
    }

    let mut weights = vec![0.0; m];
    for (&s, &l) in corral.iter().zip(&lambda) {
        weights[s] += l;
    }
    let point = bundle.combine(&weights);
    let norm = norm(&point);
    Ok(MinNormResult { weights, point, norm })
}

/// Weights `α` with `Σα = 1` minimising `‖Σ α_i z_{c_i}‖` over the affine hull
/// of the corral.
fn affine_minimizer(corral: &[usize], g: &impl Fn(usize, usize) -> f64) -> Result<Vec<f64>, MinNormError> {
    let k = corral.len();
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let s0 = corral[0];
    let d = DMatrix::from_fn(k - 1, k - 1, |a, b| {
        let (sa, sb) = (corral[a + 1], corral[b + 1]);
        g(sa, sb) - g(sa, s0) - g(s0, sb) + g(s0, s0)
    });
    let rhs = DVector::from_fn(k - 1, |a, _| g(s0, s0) - g(corral[a + 1], s0));
    let beta = d
        .cholesky()
        .ok_or(MinNormError::GramBreakdown)?
        .solve(&rhs);
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(MinNormError::GramBreakdown);
    }
    let mut alpha = Vec::with_capacity(k);
    alpha.push(1.0 - beta.sum());
    alpha.extend(beta.iter().copied());
    Ok(alpha)
}

/// Arithmetic mean of the bundle, the cheap stand-in for the min-norm point.
pub fn average_point(bundle: &GradientBundle) -> Vec<f64> {
    let w = 1.0 / bundle.len() as f64;
    let mut out = vec![0.0; bundle.dim()];
    for p in bundle.points() {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o *= w);
    out
}

/// Wolfe optimality gap check: `gᵀz_k ≥ ‖g‖² − tol·max(1, max‖z_k‖²)` for all `k`.
pub fn satisfies_wolfe_criterion(bundle: &GradientBundle, point: &[f64], tol: f64) -> bool {
    let scale = bundle.points().iter().map(|p| dot(p, p)).fold(1.0, f64::max);
    let gg = dot(point, point);
    bundle.points().iter().all(|z| dot(point, z) >= gg - tol * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(points: &[&[f64]]) -> GradientBundle {
        GradientBundle::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn two_orthogonal_units() {
        let b = bundle(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = min_norm_point(&b, DEFAULT_TOL).unwrap();
        assert!(close(&r.point, &[0.5, 0.5], 1e-12));
        assert!((r.norm - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn collinear_nearer_point_wins() {
        let b = bundle(&[&[2.0, 0.0], &[1.0, 0.0]]);
        let r = min_norm_point(&b, DEFAULT_TOL).unwrap();
        assert_eq!(r.point, vec![1.0, 0.0]);
        assert_eq!(r.weights, vec![0.0, 1.0]);
    }

    #[test]
    fn edge_of_a_triangle() {
        // brute force over the 2-simplex puts the minimum at r = (1/2, 1/2, 0)
        let b = bundle(&[&[1.0, 1.0], &[-1.0, 1.0], &[0.0, 3.0]]);
        let r = min_norm_point(&b, DEFAULT_TOL).unwrap();
        assert!(close(&r.point, &[0.0, 1.0], 1e-12));
        assert!(close(&r.weights, &[0.5, 0.5, 0.0], 1e-12));
    }

    #[test]
    fn origin_inside_hull() {
        let b = bundle(&[&[1.0, 0.0], &[-1.0, 1.0], &[-1.0, -1.0]]);
        let r = min_norm_point(&b, DEFAULT_TOL).unwrap();
        assert!(r.norm < 1e-12);
        let b = bundle(&[&[3.0, 1.0], &[0.0, 0.0]]);
        let r = min_norm_point(&b, DEFAULT_TOL).unwrap();
        assert_eq!(r.point, vec![0.0, 0.0]);
    }

    #[test]
    fn weights_form_a_convex_combination() {
        let b = bundle(&[&[2.0, 1.0, 0.5], &[-1.0, 2.0, 1.0], &[0.5, -2.0, 1.0], &[1.0, 1.0, -3.0]]);
        let r = min_norm_point(&b, DEFAULT_TOL).unwrap();
        assert!(r.weights.iter().all(|&w| w >= 0.0));
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert!(close(&b.combine(&r.weights), &r.point, 1e-8));
        assert!(satisfies_wolfe_criterion(&b, &r.point, DEFAULT_TOL));
    }

    #[test]
    fn averages() {
        let b = bundle(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(average_point(&b), vec![0.5, 0.5]);
        let b = bundle(&[&[1.5, -2.0], &[1.5, -2.0], &[1.5, -2.0]]);
        assert!(close(&average_point(&b), &[1.5, -2.0], 1e-15));
        let b = bundle(&[&[1.0, 3.0], &[-2.0, 0.5], &[0.0, -1.0]]);
        assert!(satisfies_wolfe_criterion(&b, &average_point(&b), f64::INFINITY));
    }

    #[test]
    fn invalid_bundles() {
        assert_eq!(GradientBundle::new(vec![]), Err(MinNormError::Empty));
        assert!(matches!(
            GradientBundle::new(vec![vec![1.0], vec![1.0, 2.0]]),
            Err(MinNormError::DimensionMismatch { index: 1, .. })
        ));
        let b = bundle(&[&[f64::NAN, 1.0]]);
        assert_eq!(min_norm_point(&b, DEFAULT_TOL), Err(MinNormError::NonFinite));
    }

    #[test]
    fn high_dimensional_bundle() {
        // sign patterns of a pinball-like gradient in 50 dimensions
        let pts: Vec<Vec<f64>> = (0..21)
            .map(|k| (0..50).map(|i| if (i * 7 + k * 3) % 5 < 2 { 0.1 } else { -0.9 }).collect())
            .collect();
        let b = GradientBundle::new(pts).unwrap();
        let r = min_norm_point(&b, DEFAULT_TOL).unwrap();
        assert!(satisfies_wolfe_criterion(&b, &r.point, DEFAULT_TOL));
        assert!(r.norm <= norm(&average_point(&b)) + 1e-12);
    }
}
