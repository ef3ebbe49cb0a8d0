//! Pinball (check) loss.

use thiserror::Error;

use crate::panel::SalesPanel;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("quantile level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("vector has {got} entries but the panel has {expected} observations")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Pinball loss at quantile level `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinballLoss {
    alpha: f64,
}

impl PinballLoss {
    pub fn new(alpha: f64) -> Result<Self, LossError> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha })
        } else {
            Err(LossError::InvalidAlpha(alpha))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `(1-α)(q-y)₊ + α(y-q)₊`.
    #[inline]
    pub fn rho(&self, q: f64, y: f64) -> f64 {
        let r = y - q;
        if r > 0.0 {
            self.alpha * r
        } else {
            (1.0 - self.alpha) * (q - y)
        }
    }

    /// `∂ρ/∂q`: `1-α` above the observation, `-α` below. At `q == y` this
    /// returns `1-α`, which is a valid subgradient.
    #[inline]
    pub fn rho_grad(&self, q: f64, y: f64) -> f64 {
        if y - q > 0.0 {
            -self.alpha
        } else {
            1.0 - self.alpha
        }
    }

    fn check_len(panel: &SalesPanel, q: &[f64]) -> Result<(), LossError> {
        if q.len() != panel.len() {
            return Err(LossError::DimensionMismatch {
                expected: panel.len(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Sum of `rho` over every observation, each against its own entry of `q`.
    pub fn panel_loss(&self, q: &[f64], panel: &SalesPanel) -> Result<f64, LossError> {
        Self::check_len(panel, q)?;
        Ok(self.sum_loss(q, panel.values()))
    }

    /// Coordinatewise `rho_grad`.
    pub fn panel_grad(&self, q: &[f64], panel: &SalesPanel) -> Result<Vec<f64>, LossError> {
        Self::check_len(panel, q)?;
        let mut out = vec![0.0; q.len()];
        self.grad_into(q, panel.values(), &mut out);
        Ok(out)
    }

    pub(crate) fn sum_loss(&self, q: &[f64], y: &[f64]) -> f64 {
        q.iter().zip(y).map(|(&q, &y)| self.rho(q, y)).sum()
    }

    pub(crate) fn grad_into(&self, q: &[f64], y: &[f64], out: &mut [f64]) {
        for ((o, &q), &y) in out.iter_mut().zip(q).zip(y) {
            *o = self.rho_grad(q, y);
        }
    }
}
