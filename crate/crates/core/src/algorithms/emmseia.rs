//! Alternating MMSE design: equalizers are set to their MMSE solution, then the
//! precoders solve the (convex) constrained weighted-MSE problem for those
//! equalizers,
//!
//! `B_k = (Σ_l H_{l,k}ᴴA_lW_lA_lᴴH_{l,k} + Σ_m μ_mΦ_{k,m})⁻¹ H_{k,k}ᴴA_kW_k`,
//!
//! with multipliers `μ` searched until the KKT conditions hold.

use crate::error::Result;
use crate::linalg::{cplx, hermitian_part, hpd_inverse, hpd_solve, zeros, CMatrix};
use crate::model::{
    constraint_usage_unchecked, interference_covariance_unchecked, mmse_equalizer_with, mse_matrix_mmse_with, mse_matrix_with, relative_violation, sum_rate,
    BeamformerSolution, IfcGcProblem, TraceEntry,
};
use crate::multipliers::{budgets_settled, SubgradientSchedule, LAMBDA_FLOOR};

use super::{initial_precoders, scale_to_feasible, settled, AlgorithmConfig, Objective};

/// Budget mismatch accepted by the multiplier search, relative to the
/// configured constraint tolerance.
const KKT_FRACTION: f64 = 1e-2;

fn equalizers(prob: &IfcGcProblem, b: &[CMatrix]) -> Result<Vec<CMatrix>> {
    (0..prob.num_users()).map(|k| mmse_equalizer_with(prob, b, k, &interference_covariance_unchecked(prob, b, k))).collect()
}

/// `Σ_k tr(W_k E_k(A_k, B))`.
fn weighted_mse(prob: &IfcGcProblem, b: &[CMatrix], a: &[CMatrix], w: &[CMatrix]) -> f64 {
    (0..prob.num_users())
        .map(|k| {
            let omega = interference_covariance_unchecked(prob, b, k);
            (&w[k] * mse_matrix_with(prob, b, &a[k], k, &omega)).trace().re
        })
        .sum()
}

/// Constrained precoder update for fixed equalizers. Multipliers are
/// warm-started from `mu` and updated in place; the returned precoders are
/// scaled onto the feasible set if the search stopped short.
pub(crate) fn precoder_step(prob: &IfcGcProblem, a: &[CMatrix], w: &[CMatrix], mu: &mut [f64], cfg: &AlgorithmConfig) -> Result<(Vec<CMatrix>, usize)> {
    let k_users = prob.num_users();
    let mut gram = Vec::with_capacity(k_users);
    let mut rhs = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let mt = prob.tx_dim(k);
        let mut s = zeros(mt, mt);
        for l in 0..k_users {
            let x = prob.channels[l][k].adjoint() * &a[l];
            s += &x * &w[l] * x.adjoint();
        }
        gram.push(hermitian_part(&s));
        rhs.push(prob.channels[k][k].adjoint() * &a[k] * &w[k]);
    }
    let solve = |mu: &[f64]| -> Result<Vec<CMatrix>> {
        (0..k_users)
            .map(|k| {
                let mut t = gram[k].clone();
                for (m, &mm) in mu.iter().enumerate() {
                    if prob.constrains(k, m) {
                        t += &prob.weight_matrices[k][m] * cplx(mm, 0.0);
                    }
                }
                hpd_solve(&hermitian_part(&t), &rhs[k])
            })
            .collect()
    };
    let mut schedule = SubgradientSchedule::new(cfg.subgradient_step);
    let mut b = solve(mu)?;
    let mut steps = 1;
    while steps < cfg.max_inner {
        let usage = constraint_usage_unchecked(prob, &b);
        if budgets_settled(mu, &usage, &prob.budgets, cfg.constraint_tol * KKT_FRACTION) {
            break;
        }
        schedule.update(mu, &usage, &prob.budgets)?;
        b = solve(mu)?;
        steps += 1;
    }
    scale_to_feasible(prob, &mut b);
    Ok((b, steps))
}

/// Alternating MMSE design in weighted-MSE or sum-rate mode.
///
/// A new precoder set is only accepted if it does not increase the weighted MSE
/// for the current equalizers, so in weighted-MSE mode the recorded objective
/// `Σ_k tr(W_k E_k)` (MMSE receivers) is non-increasing. In sum-rate mode the
/// weights become `E_k⁻¹` before every precoder step and the objective is the
/// sum rate.
pub fn emmseia_solve(prob: &IfcGcProblem, cfg: &AlgorithmConfig) -> Result<BeamformerSolution> {
    cfg.validate()?;
    prob.validate()?;
    let k_users = prob.num_users();
    let mut b = initial_precoders(prob, cfg.initialization);
    let mut w = prob.mse_weights.clone();
    let mut mu = vec![cfg.lambda_init.max(LAMBDA_FLOOR); prob.num_constraints()];
    let mut trace = Vec::new();
    let mut values = Vec::new();
    let mut inner_total = 0;
    let mut converged = false;
    for round in 0..cfg.max_outer {
        let a = equalizers(prob, &b)?;
        if cfg.objective == Objective::Srm {
            for (k, wk) in w.iter_mut().enumerate().take(k_users) {
                let omega = interference_covariance_unchecked(prob, &b, k);
                *wk = hpd_inverse(&mse_matrix_mmse_with(prob, &b, k, &omega)?)?;
            }
        }
        let (candidate, steps) = precoder_step(prob, &a, &w, &mut mu, cfg)?;
        inner_total += steps;
        if weighted_mse(prob, &candidate, &a, &w) <= weighted_mse(prob, &b, &a, &w) {
            b = candidate;
        }
        let a_new = equalizers(prob, &b)?;
        let usage = constraint_usage_unchecked(prob, &b);
        let wsmse = weighted_mse(prob, &b, &a_new, &prob.mse_weights);
        let objective = match cfg.objective {
            Objective::Wsmmse => wsmse,
            Objective::Srm => sum_rate(prob, &b)?,
        };
        values.push(objective);
        trace.push(TraceEntry { outer: round, inner: inner_total, objective, wsmse, max_violation: relative_violation(&usage, &prob.budgets) });
        if settled(&values, cfg.inner_tol) {
            converged = true;
            break;
        }
    }
    let a = equalizers(prob, &b)?;
    Ok(BeamformerSolution { precoders: b, equalizers: a, multipliers: mu, iterations: trace.len(), trace, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, cplx(x, 0.0))
    }

    #[test]
    fn scalar_precoder_formula() {
        let prob = IfcGcProblem::new(vec![vec![scalar(1.0)]], vec![vec![scalar(1.0)]], vec![1.0], vec![1]).unwrap();
        let cfg = AlgorithmConfig { max_inner: 1, ..AlgorithmConfig::default() };
        let mut mu = vec![0.25];
        let (b, _) = precoder_step(&prob, &[scalar(0.5)], &[scalar(1.0)], &mut mu, &cfg).unwrap();
        assert!((b[0][(0, 0)].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_channels_give_zero_precoders() {
        let prob = IfcGcProblem::new(vec![vec![zeros(2, 2)]], vec![vec![identity(2)]], vec![1.0], vec![2]).unwrap();
        let sol = emmseia_solve(&prob, &AlgorithmConfig::default()).unwrap();
        assert_eq!(crate::linalg::frobenius(&sol.precoders[0]), 0.0);
        assert_eq!(sum_rate(&prob, &sol.precoders).unwrap(), 0.0);
    }
}
