//! Lagrange multiplier updates for the per-constraint power budgets.

use crate::error::{Error, Result};

/// Multipliers never drop below this value, so that `Σ_m λ_m Φ_m` stays
/// invertible whenever `Σ_m Φ_m` is.
pub const LAMBDA_FLOOR: f64 = 1e-9;

/// Multipliers above this value are treated as divergence.
pub const LAMBDA_CEILING: f64 = 1e12;

const STALL_WINDOW: usize = 50;

/// Scaled subgradient ascent on the dual function,
///
/// `λ_m ← max(λ_floor, λ_m + δ_j·λ_m·(u_m − P_m)/P_m)`,
///
/// where `u_m − P_m` is a supergradient of the dual function at `λ`. Scaling by
/// `λ_m/P_m` makes the step dimensionless and keeps multipliers positive; with
/// `δ = 1` the rule is the multiplicative update `λ_m ← λ_m·u_m/P_m`.
///
/// The step is constant until the largest budget mismatch has not improved for
/// 50 consecutive updates, after which it diminishes as `δ/√j`.
#[derive(Debug, Clone)]
pub struct SubgradientSchedule {
    step: f64,
    best_residual: f64,
    stalled: usize,
    diminishing_from: Option<usize>,
    updates: usize,
}

impl SubgradientSchedule {
    pub fn new(step: f64) -> Self {
        Self { step, best_residual: f64::INFINITY, stalled: 0, diminishing_from: None, updates: 0 }
    }

    /// Step size that the next update will use.
    pub fn current_step(&self) -> f64 {
        match self.diminishing_from {
            Some(j0) => self.step / ((self.updates - j0 + 1) as f64).sqrt(),
            None => self.step,
        }
    }

    pub fn is_diminishing(&self) -> bool {
        self.diminishing_from.is_some()
    }

    pub fn update(&mut self, lambda: &mut [f64], usage: &[f64], budgets: &[f64]) -> Result<()> {
        let residual = budget_mismatch(lambda, usage, budgets);
        if residual < self.best_residual * (1.0 - 1e-3) {
            self.best_residual = residual;
            self.stalled = 0;
        } else {
            self.stalled += 1;
            if self.stalled >= STALL_WINDOW && self.diminishing_from.is_none() {
                log::debug!("multiplier update stalled at mismatch {residual:e}; switching to diminishing steps");
                self.diminishing_from = Some(self.updates);
            }
        }
        let delta = self.current_step();
        for ((l, &u), &p) in lambda.iter_mut().zip(usage).zip(budgets) {
            let next = *l + delta * *l * (u - p) / p;
            *l = next.max(LAMBDA_FLOOR);
        }
        self.updates += 1;
        check_divergence(lambda, usage, budgets)
    }
}

/// Largest relative budget mismatch, ignoring slack budgets whose multiplier
/// has already reached the floor.
pub fn budget_mismatch(lambda: &[f64], usage: &[f64], budgets: &[f64]) -> f64 {
    lambda
        .iter()
        .zip(usage)
        .zip(budgets)
        .map(|((&l, &u), &p)| if u <= p && l <= LAMBDA_FLOOR * 1.000001 { 0.0 } else { (u / p - 1.0).abs() })
        .fold(0.0, f64::max)
}

/// Whether every budget is met within `tol` (relative) and every slack budget
/// has a multiplier that is numerically zero.
pub fn budgets_settled(lambda: &[f64], usage: &[f64], budgets: &[f64], tol: f64) -> bool {
    let lmax = lambda.iter().copied().fold(0.0, f64::max);
    lambda.iter().zip(usage).zip(budgets).all(|((&l, &u), &p)| {
        let rel = u / p - 1.0;
        rel <= tol && (rel >= -tol || l <= LAMBDA_FLOOR * 1.000001 || l <= 1e-6 * lmax)
    })
}

pub(crate) fn check_divergence(lambda: &[f64], usage: &[f64], budgets: &[f64]) -> Result<()> {
    if let Some(m) = lambda.iter().position(|l| !l.is_finite() || *l > LAMBDA_CEILING) {
        return Err(Error::Numerical(format!("multiplier {m} diverged to {:e} (usage {:e}, budget {:e})", lambda[m], usage[m], budgets[m])));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_step_is_multiplicative() {
        let mut s = SubgradientSchedule::new(1.0);
        let mut lambda = vec![3.0];
        s.update(&mut lambda, &[2.0], &[1.0]).unwrap();
        assert_eq!(lambda, vec![6.0]);
    }

    #[test]
    fn floor_and_divergence() {
        let mut s = SubgradientSchedule::new(1.0);
        let mut lambda = vec![1.0];
        s.update(&mut lambda, &[0.0], &[1.0]).unwrap();
        assert_eq!(lambda, vec![LAMBDA_FLOOR]);
        let mut lambda = vec![1e11];
        assert!(matches!(s.update(&mut lambda, &[100.0], &[1.0]), Err(Error::Numerical(_))));
    }

    #[test]
    fn stalls_switch_to_diminishing() {
        let mut s = SubgradientSchedule::new(0.5);
        let mut lambda = vec![1.0];
        for _ in 0..60 {
            lambda[0] = 1.0;
            s.update(&mut lambda, &[2.0], &[1.0]).unwrap();
        }
        assert!(s.is_diminishing());
        assert!(s.current_step() < 0.5);
    }

    #[test]
    fn settled_budgets() {
        assert!(budgets_settled(&[1.0, LAMBDA_FLOOR], &[1.005, 0.2], &[1.0, 1.0], 0.01));
        assert!(!budgets_settled(&[1.0, 0.5], &[1.005, 0.2], &[1.0, 1.0], 0.01));
        assert!(!budgets_settled(&[1.0], &[1.02], &[1.0], 0.01));
    }
}
