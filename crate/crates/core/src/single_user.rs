//! Single-user weighted-MMSE precoding under one or several trace constraints.
//!
//! With a single constraint the optimum is closed form: eigenmodes of the
//! whitened channel and waterfilling over their gains. Several constraints are
//! handled through the Lagrangian, whose minimizer has the same structure with
//! the aggregate weight `Σ_m λ_m Φ_m`, and a subgradient search over `λ`.

use crate::error::{ensure, Result};
use crate::linalg::{
    cholesky_lower, frobenius, hermitian_defect, hermitian_eigs, hermitian_part, hpd_inverse, identity, is_finite, lower_adjoint_solve, lower_solve,
    waterfill_budget, waterfill_eval, zeros, CMatrix, PowerAllocation, HERMITIAN_TOL,
};
use crate::model::trace_product;
use crate::multipliers::{budgets_settled, SubgradientSchedule, LAMBDA_FLOOR};

/// Gains below this fraction of the strongest are treated as zero.
const DEAD_GAIN: f64 = 1e-12;

/// One transmitter/receiver pair with noise-plus-interference covariance `Ω`
/// and trace constraints `tr(Φ_m B Bᴴ) ≤ P_m`.
#[derive(Debug, Clone)]
pub struct SingleUserProblem {
    pub channel: CMatrix,
    pub noise_interference: CMatrix,
    pub constraints: Vec<CMatrix>,
    pub budgets: Vec<f64>,
    /// Per-stream MSE weights; its length is the stream count.
    pub weights: Vec<f64>,
}

impl SingleUserProblem {
    pub fn new(channel: CMatrix, noise_interference: CMatrix, constraints: Vec<CMatrix>, budgets: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let p = Self { channel, noise_interference, constraints, budgets, weights };
        p.validate()?;
        Ok(p)
    }

    pub fn streams(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (mr, mt) = self.channel.shape();
        ensure!(is_finite(&self.channel), "channel has non-finite entries");
        ensure!(self.noise_interference.shape() == (mr, mr), "noise covariance must be {mr}x{mr}");
        ensure!(hermitian_defect(&self.noise_interference) <= HERMITIAN_TOL, "noise covariance is not Hermitian");
        cholesky_lower(&self.noise_interference)?;
        ensure!(!self.constraints.is_empty(), "at least one constraint required");
        ensure!(self.constraints.len() == self.budgets.len(), "{} constraints but {} budgets", self.constraints.len(), self.budgets.len());
        let mut total = zeros(mt, mt);
        for (m, phi) in self.constraints.iter().enumerate() {
            ensure!(phi.shape() == (mt, mt), "constraint {m} must be {mt}x{mt}");
            ensure!(hermitian_defect(phi) <= HERMITIAN_TOL, "constraint {m} is not Hermitian");
            total += phi;
        }
        cholesky_lower(&hermitian_part(&total))?;
        for (m, &p) in self.budgets.iter().enumerate() {
            ensure!(p > 0.0 && p.is_finite(), "budget {m} must be positive, got {p}");
        }
        let d = self.streams();
        ensure!(d >= 1 && d <= mt.min(mr), "{d} streams exceed min({mt}, {mr})");
        ensure!(self.weights.iter().all(|w| *w >= 0.0 && w.is_finite()), "weights must be non-negative");
        Ok(())
    }

    /// `Ω^{-1/2}`-whitened channel `C⁻¹H` with `Ω = C·Cᴴ`.
    fn whitened(&self) -> Result<CMatrix> {
        Ok(lower_solve(&cholesky_lower(&self.noise_interference)?, &self.channel))
    }

    /// `R = HᴴΩ⁻¹H`.
    pub fn effective_gain(&self) -> Result<CMatrix> {
        let x = self.whitened()?;
        Ok(hermitian_part(&(x.adjoint() * x)))
    }

    /// `Σ_m λ_m Φ_m`.
    pub fn aggregate(&self, lambda: &[f64]) -> CMatrix {
        let mt = self.channel.ncols();
        let mut f = zeros(mt, mt);
        for (phi, &l) in self.constraints.iter().zip(lambda) {
            f += phi * crate::linalg::cplx(l, 0.0);
        }
        hermitian_part(&f)
    }

    pub fn usage(&self, b: &CMatrix) -> Vec<f64> {
        let cov = b * b.adjoint();
        self.constraints.iter().map(|phi| trace_product(phi, &cov)).collect()
    }

    /// MSE matrix under the MMSE receiver, `(I + BᴴRB)⁻¹`.
    pub fn mse(&self, b: &CMatrix) -> Result<CMatrix> {
        let r = self.effective_gain()?;
        hpd_inverse(&hermitian_part(&(identity(self.streams()) + b.adjoint() * r * b)))
    }

    /// `Σ_i w_i E_ii` with the MMSE receiver.
    pub fn wsmse(&self, b: &CMatrix) -> Result<f64> {
        let e = self.mse(b)?;
        Ok(self.weights.iter().enumerate().map(|(i, w)| w * e[(i, i)].re).sum())
    }

    /// `L(B; λ) = Σ_i w_i E_ii + Σ_m λ_m (tr(Φ_m BBᴴ) − P_m)`.
    pub fn lagrangian(&self, b: &CMatrix, lambda: &[f64]) -> Result<f64> {
        let usage = self.usage(b);
        let penalty: f64 = lambda.iter().zip(&usage).zip(&self.budgets).map(|((l, u), p)| l * (u - p)).sum();
        Ok(self.wsmse(b)? + penalty)
    }
}

/// Eigenmode precoder `B = F^{-1/2}·U·diag(√p)` with per-stream gains and levels.
#[derive(Debug, Clone)]
pub struct EigenPrecoder {
    pub precoder: CMatrix,
    /// Eigen-gain `γ` assigned to each stream (zero for unusable streams).
    pub gains: Vec<f64>,
    pub levels: Vec<f64>,
    pub multiplier: f64,
}

impl EigenPrecoder {
    /// Weighted MSE `Σ_i w_i/(1 + p_iγ_i)` achieved with the MMSE receiver.
    pub fn wsmse(&self, weights: &[f64]) -> f64 {
        weights.iter().zip(&self.gains).zip(&self.levels).map(|((w, g), p)| w / (1.0 + p * g)).sum()
    }
}

pub(crate) enum Level {
    /// Waterfill at `μ = 1` (Lagrangian minimizer).
    Unit,
    /// Waterfill to meet `tr(F BBᴴ) = budget`.
    Budget(f64),
}

/// The `d` strongest right singular directions of `G = X·L⁻ᴴ` and their
/// squared singular values (non-increasing). Directions with zero gain are
/// returned as zero columns. The Gram matrix of the smaller side is
/// decomposed, so the cost follows `min(rows, cols)` of `X`.
pub(crate) fn whitened_modes(x: &CMatrix, l: &CMatrix, d: usize) -> Result<(Vec<f64>, CMatrix)> {
    let (mr, mt) = x.shape();
    let gh = lower_solve(l, &x.adjoint());
    if mt <= mr {
        let eig = hermitian_eigs(&hermitian_part(&(&gh * gh.adjoint())))?;
        return Ok((eig.values[..d].to_vec(), eig.basis.columns(0, d).into_owned()));
    }
    let eig = hermitian_eigs(&hermitian_part(&(gh.adjoint() * &gh)))?;
    let mut modes = zeros(mt, d);
    for i in 0..d {
        let g = eig.values[i];
        if g > 0.0 {
            let v = &gh * eig.basis.column(i) / crate::linalg::cplx(g.sqrt(), 0.0);
            modes.set_column(i, &v);
        }
    }
    Ok((eig.values[..d].to_vec(), modes))
}

/// Weighted-MSE-optimal precoder for the metric `tr(F BBᴴ)`, given the whitened
/// channel `C⁻¹H`.
///
/// Eigenmodes of `F^{-1/2}HᴴΩ⁻¹HF^{-1/2}` are obtained from the smaller Gram
/// matrix of `G = C⁻¹HL⁻ᴴ` (`F = LLᴴ`), so the cost scales with the receive
/// dimension when that is the smaller one. Streams are paired with eigenmodes
/// by weight: the largest weight gets the strongest mode.
pub(crate) fn eigen_precoder(whitened: &CMatrix, f: &CMatrix, weights: &[f64], level: Level) -> Result<EigenPrecoder> {
    let mt = whitened.ncols();
    let d = weights.len();
    let l = cholesky_lower(f)?;
    let (gains_sorted, modes) = whitened_modes(whitened, &l, d)?;
    let gmax = gains_sorted.first().copied().unwrap_or(0.0).max(0.0);
    let gains_sorted: Vec<f64> = gains_sorted.iter().map(|&g| if gmax > 0.0 && g > DEAD_GAIN * gmax { g } else { 0.0 }).collect();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut rank = vec![0; d];
    for (r, &s) in order.iter().enumerate() {
        rank[s] = r;
    }
    let gains: Vec<f64> = (0..d).map(|s| gains_sorted[rank[s]]).collect();

    let active: Vec<usize> = (0..d).filter(|&s| gains[s] > 0.0).collect();
    let w_act: Vec<f64> = active.iter().map(|&s| weights[s]).collect();
    let g_act: Vec<f64> = active.iter().map(|&s| gains[s]).collect();
    let alloc = if active.is_empty() || w_act.iter().all(|&w| w == 0.0) {
        PowerAllocation { levels: vec![0.0; active.len()], multiplier: 0.0 }
    } else {
        match level {
            Level::Unit => waterfill_eval(&w_act, &g_act, 1.0)?,
            Level::Budget(p) => waterfill_budget(&w_act, &g_act, p)?,
        }
    };
    let mut levels = vec![0.0; d];
    for (i, &s) in active.iter().enumerate() {
        levels[s] = alloc.levels[i];
    }
    let mut shaped = zeros(mt, d);
    for s in 0..d {
        if levels[s] > 0.0 {
            shaped.set_column(s, &(modes.column(rank[s]) * crate::linalg::cplx(levels[s].sqrt(), 0.0)));
        }
    }
    Ok(EigenPrecoder { precoder: lower_adjoint_solve(&l, &shaped), gains, levels, multiplier: alloc.multiplier })
}

/// Closed-form optimum for a single constraint `tr(Φ BBᴴ) ≤ P`.
pub fn solve_single_constraint(p: &SingleUserProblem) -> Result<EigenPrecoder> {
    ensure!(p.constraints.len() == 1, "solve_single_constraint needs exactly one constraint, got {}", p.constraints.len());
    eigen_precoder(&p.whitened()?, &p.constraints[0], &p.weights, Level::Budget(p.budgets[0]))
}

/// Minimizer of the Lagrangian `Σ_i w_i E_ii + tr(Φ_agg BBᴴ)` for a positive
/// definite aggregate weight `Φ_agg`.
pub fn lagrangian_minimizer(p: &SingleUserProblem, phi_agg: &CMatrix) -> Result<CMatrix> {
    Ok(eigen_precoder(&p.whitened()?, phi_agg, &p.weights, Level::Unit)?.precoder)
}

/// Settings of the dual subgradient search.
#[derive(Debug, Clone)]
pub struct DualConfig {
    pub step: f64,
    pub max_outer: usize,
    pub lambda_init: f64,
    /// Relative budget violation accepted at convergence.
    pub constraint_tol: f64,
    /// Relative WSMSE change accepted over the last five iterations.
    pub objective_tol: f64,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self { step: 0.5, max_outer: 2000, lambda_init: 1.0, constraint_tol: 0.01, objective_tol: 1e-6 }
    }
}

/// State after one multiplier update.
#[derive(Debug, Clone)]
pub struct DualIterate {
    pub multipliers: Vec<f64>,
    /// Dual function value `L(B(λ); λ)`, a lower bound on the optimum.
    pub dual_value: f64,
    pub wsmse: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone)]
pub struct MultiConstraintSolution {
    pub precoder: CMatrix,
    pub multipliers: Vec<f64>,
    pub usage: Vec<f64>,
    pub wsmse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// All multipliers strictly positive and all budgets tight, the setting in
    /// which the dual optimum equals the primal one.
    pub zero_gap_conditions: bool,
    pub history: Vec<DualIterate>,
}

/// Dual subgradient method for several trace constraints: the precoder is the
/// Lagrangian minimizer at the current `λ`, and `λ` follows
/// [`SubgradientSchedule`].
pub fn solve_multi_constraint(p: &SingleUserProblem, cfg: &DualConfig) -> Result<MultiConstraintSolution> {
    ensure!(cfg.step > 0.0 && cfg.lambda_init > 0.0, "step and initial multiplier must be positive");
    let whitened = p.whitened()?;
    let mut lambda = vec![cfg.lambda_init.max(LAMBDA_FLOOR); p.constraints.len()];
    let mut schedule = SubgradientSchedule::new(cfg.step);
    let mut history: Vec<DualIterate> = Vec::new();
    let mut converged = false;
    let mut design;
    let mut usage;
    loop {
        design = eigen_precoder(&whitened, &p.aggregate(&lambda), &p.weights, Level::Unit)?;
        usage = p.usage(&design.precoder);
        let wsmse = design.wsmse(&p.weights);
        let penalty: f64 = lambda.iter().zip(&usage).zip(&p.budgets).map(|((l, u), b)| l * (u - b)).sum();
        history.push(DualIterate {
            multipliers: lambda.clone(),
            dual_value: wsmse + penalty,
            wsmse,
            max_violation: crate::model::relative_violation(&usage, &p.budgets),
        });
        if budgets_settled(&lambda, &usage, &p.budgets, cfg.constraint_tol) && objective_settled(&history, cfg.objective_tol) {
            converged = true;
            break;
        }
        if history.len() >= cfg.max_outer {
            break;
        }
        schedule.update(&mut lambda, &usage, &p.budgets)?;
    }
    let last = history.last().expect("at least one iterate");
    let zero_gap_conditions =
        lambda.iter().all(|&l| l > 10.0 * LAMBDA_FLOOR) && usage.iter().zip(&p.budgets).all(|(u, b)| (u / b - 1.0).abs() <= cfg.constraint_tol);
    Ok(MultiConstraintSolution {
        wsmse: last.wsmse,
        iterations: history.len(),
        precoder: design.precoder,
        multipliers: lambda,
        usage,
        converged,
        zero_gap_conditions,
        history,
    })
}

fn objective_settled(history: &[DualIterate], tol: f64) -> bool {
    if history.len() < 6 {
        return false;
    }
    let window = &history[history.len() - 6..];
    let last = window[5].wsmse;
    window.iter().all(|it| (it.wsmse - last).abs() <= tol * last.abs().max(1e-12))
}

/// Stationarity plus complementary-slackness residual of the Lagrangian,
///
/// `‖−RBEWE + (Σ_m λ_m Φ_m)B‖_F / max(1, ‖B‖_F) + Σ_m |λ_m (P_m − tr(Φ_m BBᴴ))| / max(1, P_m)`
///
/// with `R = HᴴΩ⁻¹H` and `E = (I + BᴴRB)⁻¹`.
pub fn kkt_residual(p: &SingleUserProblem, b: &CMatrix, lambda: &[f64]) -> Result<f64> {
    ensure!(b.shape() == (p.channel.ncols(), p.streams()), "precoder must be {}x{}", p.channel.ncols(), p.streams());
    ensure!(lambda.len() == p.constraints.len(), "{} multipliers for {} constraints", lambda.len(), p.constraints.len());
    let r = p.effective_gain()?;
    let e = hpd_inverse(&hermitian_part(&(identity(p.streams()) + b.adjoint() * &r * b)))?;
    let w = crate::linalg::diag_real(&p.weights);
    let grad = -(&r * b * &e * w * &e) + p.aggregate(lambda) * b;
    let stationarity = frobenius(&grad) / frobenius(b).max(1.0);
    let slackness: f64 = lambda.iter().zip(p.usage(b)).zip(&p.budgets).map(|((l, u), pb)| (l * (pb - u)).abs() / pb.max(1.0)).sum();
    Ok(stationarity + slackness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cplx, diag_real, offdiag_norm};

    fn simple(h: CMatrix, budget: f64, d: usize) -> SingleUserProblem {
        let (mr, mt) = h.shape();
        SingleUserProblem::new(h, identity(mr), vec![identity(mt)], vec![budget], vec![1.0; d]).unwrap()
    }

    #[test]
    fn symmetric_waterfill() {
        let p = simple(identity(2), 2.0, 2);
        let s = solve_single_constraint(&p).unwrap();
        assert!(s.levels.iter().all(|l| (l - 1.0).abs() < 1e-12));
        assert!((s.wsmse(&p.weights) - 1.0).abs() < 1e-12);
        assert!((p.wsmse(&s.precoder).unwrap() - 1.0).abs() < 1e-12);
        assert!((p.usage(&s.precoder)[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn diagonal_channel_waterfill() {
        let p = simple(diag_real(&[2.0, 1.0]), 1.0, 2);
        let s = solve_single_constraint(&p).unwrap();
        assert!(s.levels.iter().all(|l| (l - 0.5).abs() < 1e-12));
        assert!((s.wsmse(&p.weights) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_channel() {
        let p = simple(zeros(2, 3), 1.0, 2);
        let s = solve_single_constraint(&p).unwrap();
        assert_eq!(frobenius(&s.precoder), 0.0);
        assert_eq!(s.wsmse(&p.weights), 2.0);
    }

    #[test]
    fn lagrangian_minimizer_examples() {
        let p = SingleUserProblem::new(identity(1), identity(1), vec![identity(1)], vec![1.0], vec![4.0]).unwrap();
        let b = lagrangian_minimizer(&p, &identity(1)).unwrap();
        assert!((frobenius(&b) - 1.0).abs() < 1e-14);
        let b = lagrangian_minimizer(&p, &(identity(1) * cplx(4.0, 0.0))).unwrap();
        assert_eq!(frobenius(&b), 0.0);
    }

    #[test]
    fn single_constraint_is_stationary_and_diagonalizing() {
        let h = CMatrix::from_row_slice(2, 3, &[cplx(1.0, 0.2), cplx(-0.3, 0.5), cplx(0.7, 0.0), cplx(0.1, -0.4), cplx(0.9, 0.3), cplx(-0.2, 0.6)]);
        let p = SingleUserProblem::new(h, identity(2), vec![diag_real(&[1.0, 2.0, 0.5])], vec![3.0], vec![1.0, 0.6]).unwrap();
        let s = solve_single_constraint(&p).unwrap();
        assert!(s.levels.iter().all(|&l| l > 0.0));
        assert!(kkt_residual(&p, &s.precoder, &[s.multiplier]).unwrap() < 1e-8);
        assert!(offdiag_norm(&p.mse(&s.precoder).unwrap()) < 1e-10);
    }

    #[test]
    fn trivial_kkt_point() {
        let p = simple(identity(2), 1.0, 2);
        assert_eq!(kkt_residual(&p, &zeros(2, 2), &[0.0]).unwrap(), 0.0);
        assert!(kkt_residual(&p, &identity(2), &[0.0]).unwrap() > 1e-3);
    }

    #[test]
    fn symmetric_block_constraints() {
        let phi1 = diag_real(&[1.0, 1.0, 0.0, 0.0]);
        let phi2 = diag_real(&[0.0, 0.0, 1.0, 1.0]);
        let p = SingleUserProblem::new(identity(4), identity(4), vec![phi1, phi2], vec![2.0, 2.0], vec![1.0; 4]).unwrap();
        let s = solve_multi_constraint(&p, &DualConfig::default()).unwrap();
        assert!(s.converged);
        assert!((s.multipliers[0] - s.multipliers[1]).abs() < 1e-9 * s.multipliers[0]);
        assert!((s.usage[0] - s.usage[1]).abs() < 1e-9);
        assert!(s.zero_gap_conditions);
    }
}
