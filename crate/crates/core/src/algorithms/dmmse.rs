//! Diagonalized MMSE design.
//!
//! At fixed multipliers `λ`, each user's precoder minimizes the Lagrangian
//!
//! `J(A, B) = Σ_k tr(W_k E_k(A_k, B)) + Σ_m λ_m (Σ_k tr(Φ_{k,m}B_kB_kᴴ) − P_m)`
//!
//! over `B_k` (with its own MMSE equalizer) while the other users' equalizers are
//! held fixed. The interference it causes enters through
//! `Υ_k = Σ_{l≠k} H_{l,k}ᴴA_lW_lA_lᴴH_{l,k}`, so the step is the single-user
//! Lagrangian minimizer with aggregate weight `F_k = Υ_k + Σ_m λ_mΦ_{k,m}`, and
//! the resulting MSE matrix is diagonal. Users are updated one after another,
//! which makes `J` non-increasing; multipliers then follow the scaled
//! subgradient rule of [`SubgradientSchedule`].

use crate::error::{ensure, Result};
use crate::linalg::{cholesky_lower, cplx, diag_real, hermitian_eigs, hermitian_part, lower_solve, zeros, CMatrix};
use crate::model::{
    constraint_usage_unchecked, interference_covariance_unchecked, mmse_equalizer_with, mse_matrix_mmse_with, mse_matrix_with, relative_violation, sum_rate,
    BeamformerSolution, IfcGcProblem, TraceEntry,
};
use crate::multipliers::{budgets_settled, SubgradientSchedule, LAMBDA_FLOOR};
use crate::single_user::{eigen_precoder, Level};

use super::{initial_precoders, scale_to_feasible, settled, AlgorithmConfig, Objective};

/// Inner passes stop early once the Lagrangian changes by less than this
/// (relative) during the final refinement.
const POLISH_TOL: f64 = 1e-13;

struct State {
    b: Vec<CMatrix>,
    a: Vec<CMatrix>,
    /// Diagonal MSE weights per user.
    w: Vec<Vec<f64>>,
    lambda: Vec<f64>,
}

impl State {
    fn refresh_equalizers(&mut self, prob: &IfcGcProblem) -> Result<()> {
        for k in 0..prob.num_users() {
            let omega = interference_covariance_unchecked(prob, &self.b, k);
            self.a[k] = mmse_equalizer_with(prob, &self.b, k, &omega)?;
        }
        Ok(())
    }

    /// Precoder update of user `k` followed by its MMSE equalizer.
    fn user_step(&mut self, prob: &IfcGcProblem, k: usize) -> Result<()> {
        let omega = interference_covariance_unchecked(prob, &self.b, k);
        let whitened = lower_solve(&cholesky_lower(&omega)?, &prob.channels[k][k]);
        let mt = prob.tx_dim(k);
        let mut f = zeros(mt, mt);
        for l in 0..prob.num_users() {
            if l == k {
                continue;
            }
            let x = prob.channels[l][k].adjoint() * &self.a[l];
            f += &x * diag_real(&self.w[l]) * x.adjoint();
        }
        for (m, &lm) in self.lambda.iter().enumerate() {
            if prob.constrains(k, m) {
                f += &prob.weight_matrices[k][m] * cplx(lm, 0.0);
            }
        }
        let f = hermitian_part(&f);
        self.b[k] = eigen_precoder(&whitened, &f, &self.w[k], Level::Unit)?.precoder;
        self.a[k] = mmse_equalizer_with(prob, &self.b, k, &omega)?;
        Ok(())
    }

    fn pass(&mut self, prob: &IfcGcProblem) -> Result<()> {
        for k in 0..prob.num_users() {
            self.user_step(prob, k)?;
        }
        self.refresh_equalizers(prob)
    }

    fn wsmse(&self, prob: &IfcGcProblem) -> f64 {
        (0..prob.num_users())
            .map(|k| {
                let omega = interference_covariance_unchecked(prob, &self.b, k);
                let e = mse_matrix_with(prob, &self.b, &self.a[k], k, &omega);
                self.w[k].iter().enumerate().map(|(i, w)| w * e[(i, i)].re).sum::<f64>()
            })
            .sum()
    }

    fn lagrangian(&self, prob: &IfcGcProblem, usage: &[f64]) -> f64 {
        let penalty: f64 = self.lambda.iter().zip(usage).zip(&prob.budgets).map(|((l, u), p)| l * (u - p)).sum();
        self.wsmse(prob) + penalty
    }
}

fn diagonal_weights(prob: &IfcGcProblem) -> Result<Vec<Vec<f64>>> {
    prob.mse_weights
        .iter()
        .enumerate()
        .map(|(k, w)| {
            ensure!(crate::linalg::offdiag_norm(w) <= 1e-12 * crate::linalg::frobenius(w).max(1.0), "DMMSE needs diagonal MSE weights; W[{k}] is not diagonal");
            Ok((0..w.nrows()).map(|i| w[(i, i)].re).collect())
        })
        .collect()
}

/// Rotates every precoder by the eigenvectors of its MSE matrix so that each
/// `E_k` becomes diagonal, pairing the largest weight with the smallest MSE.
/// Covariances `B_kB_kᴴ` and hence all interference and budgets are unchanged,
/// and the weighted MSE cannot increase.
fn diagonalize(prob: &IfcGcProblem, st: &mut State) -> Result<()> {
    for k in 0..prob.num_users() {
        let omega = interference_covariance_unchecked(prob, &st.b, k);
        let e = mse_matrix_mmse_with(prob, &st.b, k, &omega)?;
        let eig = hermitian_eigs(&e)?;
        let d = prob.streams[k];
        // Ascending MSE for descending weight.
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&x, &y| st.w[k][y].total_cmp(&st.w[k][x]).then(x.cmp(&y)));
        let mut q = zeros(d, d);
        for (r, &s) in order.iter().enumerate() {
            q.set_column(s, &eig.basis.column(d - 1 - r));
        }
        st.b[k] = &st.b[k] * q;
    }
    st.refresh_equalizers(prob)
}

/// Diagonalized MMSE design in weighted-MSE or sum-rate mode.
///
/// In weighted-MSE mode the trace holds one entry per pass with `objective`
/// equal to the Lagrangian at the multipliers of that outer iteration; within
/// an outer iteration it is non-increasing. In sum-rate mode each round updates
/// the weights to `diag(E_k⁻¹)`, runs one pass and one multiplier update, and
/// `objective` is the sum rate.
pub fn dmmse_solve(prob: &IfcGcProblem, cfg: &AlgorithmConfig) -> Result<BeamformerSolution> {
    cfg.validate()?;
    prob.validate()?;
    let b = initial_precoders(prob, cfg.initialization);
    let mut st = State {
        a: vec![zeros(0, 0); prob.num_users()],
        b,
        w: diagonal_weights(prob)?,
        lambda: vec![cfg.lambda_init.max(LAMBDA_FLOOR); prob.num_constraints()],
    };
    st.refresh_equalizers(prob)?;
    let (mut trace, converged) = match cfg.objective {
        Objective::Wsmmse => run_wsmmse(prob, cfg, &mut st)?,
        Objective::Srm => run_srm(prob, cfg, &mut st)?,
    };
    let mut scaled = false;
    if relative_violation(&constraint_usage_unchecked(prob, &st.b), &prob.budgets) > 0.0 && !converged {
        scaled = scale_to_feasible(prob, &mut st.b) < 1.0;
        st.refresh_equalizers(prob)?;
    }
    diagonalize(prob, &mut st)?;
    let usage = constraint_usage_unchecked(prob, &st.b);
    if let Some(last) = trace.last().cloned() {
        let objective = match cfg.objective {
            Objective::Wsmmse => st.lagrangian(prob, &usage),
            Objective::Srm => sum_rate(prob, &st.b)?,
        };
        trace.push(TraceEntry {
            outer: last.outer + usize::from(scaled),
            inner: last.inner + 1,
            objective,
            wsmse: st.wsmse(prob),
            max_violation: relative_violation(&usage, &prob.budgets),
        });
    }
    Ok(BeamformerSolution { iterations: trace.len(), precoders: st.b, equalizers: st.a, multipliers: st.lambda, trace, converged })
}

/// Passes at fixed multipliers until the Lagrangian settles to `tol`.
fn inner_loop(prob: &IfcGcProblem, st: &mut State, outer: usize, max_inner: usize, tol: f64, trace: &mut Vec<TraceEntry>) -> Result<()> {
    let mut prev = st.lagrangian(prob, &constraint_usage_unchecked(prob, &st.b));
    for _ in 0..max_inner {
        st.pass(prob)?;
        let usage = constraint_usage_unchecked(prob, &st.b);
        let wsmse = st.wsmse(prob);
        let penalty: f64 = st.lambda.iter().zip(&usage).zip(&prob.budgets).map(|((l, u), p)| l * (u - p)).sum();
        let objective = wsmse + penalty;
        trace.push(TraceEntry { outer, inner: trace.len() + 1, objective, wsmse, max_violation: relative_violation(&usage, &prob.budgets) });
        let change = (prev - objective).abs();
        prev = objective;
        if change <= tol * objective.abs().max(1e-12) {
            break;
        }
    }
    Ok(())
}

fn run_wsmmse(prob: &IfcGcProblem, cfg: &AlgorithmConfig, st: &mut State) -> Result<(Vec<TraceEntry>, bool)> {
    let mut trace = Vec::new();
    let mut schedule = SubgradientSchedule::new(cfg.subgradient_step);
    let mut history = Vec::new();
    let mut converged = false;
    for outer in 0..cfg.max_outer {
        inner_loop(prob, st, outer, cfg.max_inner, cfg.inner_tol, &mut trace)?;
        let usage = constraint_usage_unchecked(prob, &st.b);
        history.push(st.wsmse(prob));
        let mut usage = usage;
        if budgets_settled(&st.lambda, &usage, &prob.budgets, cfg.constraint_tol) && settled(&history, cfg.inner_tol) {
            // The Lagrangian can be nearly flat along directions that still
            // move power, so budgets are checked again after refining.
            inner_loop(prob, st, outer, cfg.max_inner, POLISH_TOL, &mut trace)?;
            usage = constraint_usage_unchecked(prob, &st.b);
            if budgets_settled(&st.lambda, &usage, &prob.budgets, cfg.constraint_tol) {
                converged = true;
                break;
            }
        }
        if outer + 1 == cfg.max_outer {
            break;
        }
        schedule.update(&mut st.lambda, &usage, &prob.budgets)?;
    }
    if !converged {
        let outer = trace.last().map_or(0, |t| t.outer);
        inner_loop(prob, st, outer, cfg.max_inner, POLISH_TOL, &mut trace)?;
    }
    Ok((trace, converged))
}

fn run_srm(prob: &IfcGcProblem, cfg: &AlgorithmConfig, st: &mut State) -> Result<(Vec<TraceEntry>, bool)> {
    let mut trace = Vec::new();
    let mut schedule = SubgradientSchedule::new(cfg.subgradient_step);
    let mut rates = Vec::new();
    let mut converged = false;
    for round in 0..cfg.max_outer {
        for k in 0..prob.num_users() {
            let omega = interference_covariance_unchecked(prob, &st.b, k);
            let e = mse_matrix_mmse_with(prob, &st.b, k, &omega)?;
            let inv = crate::linalg::hpd_inverse(&e)?;
            st.w[k] = (0..inv.nrows()).map(|i| inv[(i, i)].re).collect();
        }
        st.pass(prob)?;
        let usage = constraint_usage_unchecked(prob, &st.b);
        let rate = sum_rate(prob, &st.b)?;
        rates.push(rate);
        trace.push(TraceEntry {
            outer: round,
            inner: round + 1,
            objective: rate,
            wsmse: st.wsmse(prob),
            max_violation: relative_violation(&usage, &prob.budgets),
        });
        if budgets_settled(&st.lambda, &usage, &prob.budgets, cfg.constraint_tol) && settled(&rates, cfg.inner_tol) {
            converged = true;
            break;
        }
        if round + 1 < cfg.max_outer {
            schedule.update(&mut st.lambda, &usage, &prob.budgets)?;
        }
    }
    Ok((trace, converged))
}

/// Off-diagonal Frobenius mass of `E_k` relative to `‖E_k‖_F`, per user.
pub fn mse_offdiagonal_ratio(prob: &IfcGcProblem, precoders: &[CMatrix]) -> Result<Vec<f64>> {
    (0..prob.num_users())
        .map(|k| {
            let omega = interference_covariance_unchecked(prob, precoders, k);
            let e = mse_matrix_mmse_with(prob, precoders, k, &omega)?;
            Ok(crate::linalg::offdiag_norm(&e) / crate::linalg::frobenius(&e))
        })
        .collect()
}

/// Lagrangian value `Σ_k tr(W_kE_k) + Σ_m λ_m(u_m − P_m)` for given equalizers.
pub fn lagrangian_value(prob: &IfcGcProblem, precoders: &[CMatrix], equalizers: &[CMatrix], lambda: &[f64]) -> Result<f64> {
    let wsmse = crate::model::wsmse_objective(prob, precoders, equalizers)?;
    let usage = constraint_usage_unchecked(prob, precoders);
    Ok(wsmse + lambda.iter().zip(&usage).zip(&prob.budgets).map(|((l, u), p)| l * (u - p)).sum::<f64>())
}
