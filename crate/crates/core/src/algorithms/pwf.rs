//! Polite waterfilling for sum-rate maximization.
//!
//! Each transmit covariance is a waterfilling solution over the channel whitened
//! on both sides: by the receiver's noise-plus-interference `Ω_k` and by the
//! interference `Ω̂_k` its own receiver would see in the dual network, where
//! transmitters and receivers swap roles:
//!
//! `Ω̂_k = Σ_m λ_mΦ_{k,m} + Σ_{j≠k} H_{j,k}ᴴ Σ̂_j H_{j,k}`,
//! `Σ̂_k = (Ω_k⁻¹ − (Ω_k + H_{k,k}Σ_kH_{k,k}ᴴ)⁻¹)/μ`,
//! `Σ_k = Ω̂_k^{-1/2} V_k diag([1/μ − 1/γ_{k,i}]⁺) V_kᴴ Ω̂_k^{-1/2}`.
//!
//! One iteration runs the forward update for all users (with the level `μ` fixed
//! by `Σ_m λ_m Σ_k tr(Φ_{k,m}Σ_k) = Σ_m λ_m P_m`), then the dual covariances,
//! then the multiplicative multiplier update `λ_m ← λ_m·(u_m/P_m)^η`, damped by
//! `η ≤ 1` once the plain update starts to oscillate.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, cplx, frobenius, hermitian_part, hpd_inverse, lower_adjoint_solve, lower_solve, zeros, CMatrix};
use crate::model::{
    constraint_usage_unchecked, interference_covariance_unchecked, mmse_equalizer_with, relative_violation, sum_rate, BeamformerSolution, IfcGcProblem,
    TraceEntry,
};
use crate::multipliers::{budgets_settled, check_divergence, LAMBDA_FLOOR};
use crate::single_user::whitened_modes;

use super::{scale_to_feasible, AlgorithmConfig};

/// Relative change of the transmit covariances regarded as a fixed point.
const STATE_TOL: f64 = 1e-10;

/// Smallest exponent of the damped multiplier update `λ ← λ·(u/P)^η`. The
/// exponent starts at 1, is halved whenever the budget violation grows, which
/// breaks the period-two cycles of the plain update, and recovers by 25% per
/// improving step.
const MIN_EXPONENT: f64 = 1.0 / 64.0;

/// Result of [`pwf_solve`] together with the forward and dual covariances.
#[derive(Debug, Clone)]
pub struct PwfSolution {
    pub solution: BeamformerSolution,
    /// Transmit covariances `Σ_k`.
    pub covariances: Vec<CMatrix>,
    /// Dual-network covariances `Σ̂_k`.
    pub dual_covariances: Vec<CMatrix>,
    /// Waterfilling level `μ` of the last forward update.
    pub level: f64,
}

/// Forward update: returns the precoder factors (`Σ_k = B_kB_kᴴ`) and `μ`.
pub(crate) fn forward(prob: &IfcGcProblem, lambda: &[f64], omega: &[CMatrix], omega_hat: &[CMatrix]) -> Result<(Vec<CMatrix>, f64)> {
    let k_users = prob.num_users();
    let mut shapes = Vec::with_capacity(k_users);
    let mut items: Vec<(usize, usize, f64, f64)> = Vec::new();
    for k in 0..k_users {
        let d = prob.streams[k];
        let c = cholesky_lower(&omega[k])?;
        let l = cholesky_lower(&omega_hat[k])?;
        let (gains, modes) = whitened_modes(&lower_solve(&c, &prob.channels[k][k]), &l, d)?;
        let t = lower_adjoint_solve(&l, &modes);
        let cost = weighted_constraint(prob, lambda, k);
        let gmax = gains.first().copied().unwrap_or(0.0);
        for i in 0..d {
            if gmax > 0.0 && gains[i] > 1e-12 * gmax {
                let ti = t.column(i).into_owned();
                let ci = (ti.adjoint() * &cost * &ti)[(0, 0)].re;
                items.push((k, i, ci, 1.0 / gains[i]));
            }
        }
        shapes.push(t);
    }
    let target: f64 = lambda.iter().zip(&prob.budgets).map(|(l, p)| l * p).sum();
    let inv_level = water_level(&items, target)?;
    let mut factors: Vec<CMatrix> = (0..k_users).map(|k| zeros(prob.tx_dim(k), prob.streams[k])).collect();
    for &(k, i, _, floor) in &items {
        let p = (inv_level - floor).max(0.0);
        if p > 0.0 {
            let col = shapes[k].column(i) * cplx(p.sqrt(), 0.0);
            factors[k].set_column(i, &col);
        }
    }
    let mu = if inv_level > 0.0 { 1.0 / inv_level } else { f64::INFINITY };
    Ok((factors, mu))
}

/// `Σ_m λ_m Φ_{k,m}`.
fn weighted_constraint(prob: &IfcGcProblem, lambda: &[f64], k: usize) -> CMatrix {
    let mt = prob.tx_dim(k);
    let mut f = zeros(mt, mt);
    for (m, &l) in lambda.iter().enumerate() {
        if prob.constrains(k, m) {
            f += &prob.weight_matrices[k][m] * cplx(l, 0.0);
        }
    }
    hermitian_part(&f)
}

/// Solves `Σ_i c_i [x − t_i]⁺ = target` for `x = 1/μ` by scanning the
/// breakpoints `t_i = 1/γ_i` in increasing order.
fn water_level(items: &[(usize, usize, f64, f64)], target: f64) -> Result<f64> {
    if items.is_empty() {
        return Ok(0.0);
    }
    let mut sorted: Vec<(f64, f64)> = items.iter().map(|&(_, _, c, t)| (c, t)).collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (mut sc, mut sct) = (0.0, 0.0);
    for n in 0..sorted.len() {
        sc += sorted[n].0;
        sct += sorted[n].0 * sorted[n].1;
        let x = (target + sct) / sc;
        if n + 1 == sorted.len() || x <= sorted[n + 1].1 {
            if !x.is_finite() || sc <= 0.0 {
                return Err(Error::Numerical(format!("polite waterfilling level is not finite (weight sum {sc:e})")));
            }
            return Ok(x);
        }
    }
    unreachable!("the last breakpoint always terminates the scan")
}

/// Dual-network covariances `Σ̂_k = (Ω_k⁻¹ − (Ω_k + H_{k,k}Σ_kH_{k,k}ᴴ)⁻¹)/μ`.
pub(crate) fn backward(prob: &IfcGcProblem, factors: &[CMatrix], mu: f64) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    let mut omega = Vec::with_capacity(prob.num_users());
    let mut dual = Vec::with_capacity(prob.num_users());
    for k in 0..prob.num_users() {
        let om = interference_covariance_unchecked(prob, factors, k);
        let hb = &prob.channels[k][k] * &factors[k];
        let total = hermitian_part(&(&om + &hb * hb.adjoint()));
        let s = if mu.is_finite() { (hpd_inverse(&om)? - hpd_inverse(&total)?) * cplx(1.0 / mu, 0.0) } else { zeros(om.nrows(), om.nrows()) };
        dual.push(hermitian_part(&s));
        omega.push(om);
    }
    Ok((omega, dual))
}

/// `Ω̂_k` for given dual covariances and multipliers.
pub(crate) fn dual_interference(prob: &IfcGcProblem, dual: &[CMatrix], lambda: &[f64]) -> Vec<CMatrix> {
    (0..prob.num_users())
        .map(|k| {
            let mut om = weighted_constraint(prob, lambda, k);
            for (j, s) in dual.iter().enumerate() {
                if j != k {
                    let h = &prob.channels[j][k];
                    om += h.adjoint() * s * h;
                }
            }
            hermitian_part(&om)
        })
        .collect()
}

fn covariances(factors: &[CMatrix]) -> Vec<CMatrix> {
    factors.iter().map(|b| hermitian_part(&(b * b.adjoint()))).collect()
}

fn relative_change(old: &[CMatrix], new: &[CMatrix]) -> f64 {
    let num: f64 = old.iter().zip(new).map(|(a, b)| frobenius(&(a - b)).powi(2)).sum();
    let den: f64 = new.iter().map(|b| frobenius(b).powi(2)).sum();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

/// Polite waterfilling. Stream counts follow the problem; when `d_k` is below
/// `min(m_{t,k}, m_{r,k})` only the `d_k` strongest modes are kept.
pub fn pwf_solve(prob: &IfcGcProblem, cfg: &AlgorithmConfig) -> Result<PwfSolution> {
    cfg.validate()?;
    prob.validate()?;
    let k_users = prob.num_users();
    let mut lambda = vec![cfg.lambda_init.max(LAMBDA_FLOOR); prob.num_constraints()];
    let mut factors: Vec<CMatrix> = (0..k_users).map(|k| zeros(prob.tx_dim(k), prob.streams[k])).collect();
    let mut dual: Vec<CMatrix> = (0..k_users).map(|k| zeros(prob.rx_dim(k), prob.rx_dim(k))).collect();
    let mut omega: Vec<CMatrix> = (0..k_users).map(|k| crate::linalg::identity(prob.rx_dim(k))).collect();
    let mut level = f64::INFINITY;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut exponent: f64 = 1.0;
    let mut last_violation = f64::INFINITY;
    for outer in 0..cfg.max_outer {
        let omega_hat = dual_interference(prob, &dual, &lambda);
        let (next, mu) = forward(prob, &lambda, &omega, &omega_hat)?;
        let change = relative_change(&covariances(&factors), &covariances(&next));
        factors = next;
        level = mu;
        let (om, du) = backward(prob, &factors, mu)?;
        omega = om;
        dual = du;
        let usage = constraint_usage_unchecked(prob, &factors);
        trace.push(TraceEntry {
            outer,
            inner: outer + 1,
            objective: sum_rate(prob, &factors)?,
            wsmse: f64::NAN,
            max_violation: relative_violation(&usage, &prob.budgets),
        });
        if change <= STATE_TOL && budgets_settled(&lambda, &usage, &prob.budgets, cfg.constraint_tol) {
            converged = true;
            break;
        }
        if outer + 1 == cfg.max_outer {
            break;
        }
        let violation = relative_violation(&usage, &prob.budgets);
        exponent = if violation > last_violation { (exponent * 0.5).max(MIN_EXPONENT) } else { (exponent * 1.25).min(1.0) };
        last_violation = violation;
        for ((l, u), p) in lambda.iter_mut().zip(&usage).zip(&prob.budgets) {
            *l *= (u / p).powf(exponent);
        }
        // The iteration is unchanged by scaling λ and Σ̂ together, so the
        // common scale is pinned to Σ_m λ_m P_m = Σ_m P_m.
        let weighted: f64 = lambda.iter().zip(&prob.budgets).map(|(l, p)| l * p).sum();
        let scale = prob.budgets.iter().sum::<f64>() / weighted;
        if scale.is_finite() && scale > 0.0 {
            for l in lambda.iter_mut() {
                *l = (*l * scale).max(LAMBDA_FLOOR);
            }
            for s in dual.iter_mut() {
                *s *= cplx(scale, 0.0);
            }
        }
        check_divergence(&lambda, &usage, &prob.budgets)?;
    }
    if !converged {
        scale_to_feasible(prob, &mut factors);
    }
    let equalizers =
        (0..k_users).map(|k| mmse_equalizer_with(prob, &factors, k, &interference_covariance_unchecked(prob, &factors, k))).collect::<Result<Vec<_>>>()?;
    let wsmse = crate::model::wsmse_objective(prob, &factors, &equalizers)?;
    for t in trace.iter_mut() {
        t.wsmse = wsmse;
    }
    Ok(PwfSolution {
        covariances: covariances(&factors),
        dual_covariances: dual,
        level,
        solution: BeamformerSolution { iterations: trace.len(), precoders: factors, equalizers, multipliers: lambda, trace, converged },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, cplx(x, 0.0))
    }

    #[test]
    fn scalar_closed_form() {
        let prob = IfcGcProblem::new(vec![vec![scalar(2.0)]], vec![vec![scalar(1.0)]], vec![1.0], vec![1]).unwrap();
        let (b, mu) = forward(&prob, &[1.0], &[identity(1)], &[identity(1)]).unwrap();
        assert!((mu - 0.8).abs() < 1e-14);
        assert!((b[0][(0, 0)].norm_sqr() - 1.0).abs() < 1e-14);
        let (_, dual) = backward(&prob, &b, mu).unwrap();
        assert!((dual[0][(0, 0)].re - 1.0).abs() < 1e-14);
        let sol = pwf_solve(&prob, &AlgorithmConfig::default()).unwrap();
        assert!(sol.solution.converged);
        assert!((sum_rate(&prob, &sol.solution.precoders).unwrap() - 5f64.log2()).abs() < 1e-10);
    }

    #[test]
    fn level_scan() {
        // c = (1, 1), t = (0.25, 1), target 1: x = 1.125 > t_2, so both active.
        let x = water_level(&[(0, 0, 1.0, 0.25), (0, 1, 1.0, 1.0)], 1.0).unwrap();
        assert!((x - 1.125).abs() < 1e-15);
        let x = water_level(&[(0, 0, 1.0, 0.25), (0, 1, 1.0, 1.0)], 0.5).unwrap();
        assert!((x - 0.75).abs() < 1e-15);
    }
}
