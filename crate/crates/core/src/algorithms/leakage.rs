//! Interference-leakage minimization on the per-base-station blocks.
//!
//! Every serving station `m` of user `k` sends along orthonormal columns `B̄_{k,m}`
//! with the equal power split `B_{k,m} = √(P_m/(K_m d_k))·B̄_{k,m}`, where `K_m`
//! is the number of users station `m` serves, so each station spends exactly
//! `P_m`. Receivers project onto orthonormal subspaces `A_k`. The leakage
//!
//! `I = Σ_k Σ_{j≠k} Σ_{m∈M_j} c_{j,m} ‖A_kᴴH̃_{k,m}B̄_{j,m}‖²_F`, `c_{j,m} = P_m/(K_m d_j)`,
//!
//! is minimized alternately over the receive subspaces (smallest eigenvectors of
//! `Q_k`, the interference covariance at user `k`) and over every precoder block
//! (smallest eigenvectors of `Q̂_{j,m}`, the leakage that block causes at all
//! other users). Each half-step is an exact minimization, so `I` never
//! increases.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{ensure, Result};
use crate::linalg::{cplx, frobenius, hermitian_bottom_eigs, hermitian_part, identity, zeros, CMatrix};
use crate::model::{build_ifc_gc, constraint_usage_unchecked, mmse_equalizers, relative_violation, BeamformerSolution, PartialCooperationSystem, TraceEntry};

use super::{orthonormal_columns, settled, AlgorithmConfig, Initialization};

/// Result of [`min_leakage_solve`].
#[derive(Debug, Clone)]
pub struct LeakageSolution {
    /// Stacked precoders with MMSE equalizers, for rate evaluation.
    pub solution: BeamformerSolution,
    /// `factors[k][i]` is `B̄_{k,m}` for the `i`-th serving station of user `k`.
    pub factors: Vec<Vec<CMatrix>>,
    /// Orthonormal receive subspaces `A_k`.
    pub subspaces: Vec<CMatrix>,
    /// Leakage at the start and after every half-step.
    pub leakage_trace: Vec<f64>,
    /// Largest `‖XᴴX − I‖_F` over all factors and subspaces seen during the run.
    pub max_orthonormality_defect: f64,
}

struct Blocks {
    /// `chan[k][j][i]`: columns of `H̃_{k,m}` carrying user `j` at its `i`-th
    /// serving station `m`.
    chan: Vec<Vec<Vec<CMatrix>>>,
    /// `coef[j][i] = P_m/(K_m d_j)`.
    coef: Vec<Vec<f64>>,
}

impl Blocks {
    fn new(sys: &PartialCooperationSystem) -> Self {
        let k_users = sys.num_users();
        let chan = (0..k_users)
            .map(|k| (0..k_users).map(|j| sys.serving_sets[j].iter().map(|&m| sys.serving_channel(k, j, m).expect("serving station")).collect()).collect())
            .collect();
        let served: Vec<usize> = (0..sys.num_bs).map(|m| sys.users_of_bs(m).len()).collect();
        let coef = (0..k_users).map(|j| sys.serving_sets[j].iter().map(|&m| sys.per_bs_power[m] / (served[m] * sys.streams[j]) as f64).collect()).collect();
        Self { chan, coef }
    }

    /// Interference covariance at user `k`.
    fn q(&self, factors: &[Vec<CMatrix>], k: usize, nr: usize) -> CMatrix {
        let mut q = zeros(nr, nr);
        for (j, fj) in factors.iter().enumerate() {
            if j == k {
                continue;
            }
            for (i, bbar) in fj.iter().enumerate() {
                let g = &self.chan[k][j][i] * bbar;
                q += &g * g.adjoint() * cplx(self.coef[j][i], 0.0);
            }
        }
        hermitian_part(&q)
    }

    /// Leakage caused by block `i` of user `j` at all other users.
    fn q_hat(&self, subspaces: &[CMatrix], j: usize, i: usize) -> CMatrix {
        let n = self.chan[0][j][i].ncols();
        let mut q = zeros(n, n);
        for (k, a) in subspaces.iter().enumerate() {
            if k == j {
                continue;
            }
            let g = self.chan[k][j][i].adjoint() * a;
            q += &g * g.adjoint();
        }
        hermitian_part(&(q * cplx(self.coef[j][i], 0.0)))
    }

    fn leakage(&self, factors: &[Vec<CMatrix>], subspaces: &[CMatrix]) -> f64 {
        let mut total = 0.0;
        for (k, a) in subspaces.iter().enumerate() {
            for (j, fj) in factors.iter().enumerate() {
                if j == k {
                    continue;
                }
                for (i, bbar) in fj.iter().enumerate() {
                    total += self.coef[j][i] * frobenius(&(a.adjoint() * &self.chan[k][j][i] * bbar)).powi(2);
                }
            }
        }
        total
    }
}

/// Total interference leakage for given precoder blocks and receive subspaces.
pub fn interference_leakage(sys: &PartialCooperationSystem, factors: &[Vec<CMatrix>], subspaces: &[CMatrix]) -> f64 {
    Blocks::new(sys).leakage(factors, subspaces)
}

fn orthonormality_defect(x: &CMatrix) -> f64 {
    frobenius(&(x.adjoint() * x - identity(x.ncols())))
}

/// Stacks the scaled blocks into per-user precoders of the equivalent
/// interference channel.
pub fn stack_precoders(sys: &PartialCooperationSystem, factors: &[Vec<CMatrix>]) -> Vec<CMatrix> {
    let blocks = Blocks::new(sys);
    (0..sys.num_users())
        .map(|k| {
            let mut b = zeros(sys.tx_dim(k), sys.streams[k]);
            for (i, &m) in sys.serving_sets[k].iter().enumerate() {
                let off = sys.block_offset(k, m).expect("serving station");
                let block = &factors[k][i] * cplx(blocks.coef[k][i].sqrt(), 0.0);
                b.rows_mut(off, block.nrows()).copy_from(&block);
            }
            b
        })
        .collect()
}

/// Alternating leakage minimization.
pub fn min_leakage_solve(sys: &PartialCooperationSystem, cfg: &AlgorithmConfig) -> Result<LeakageSolution> {
    cfg.validate()?;
    sys.validate()?;
    let k_users = sys.num_users();
    for k in 0..k_users {
        for (i, ants) in sys.serving_antennas[k].iter().enumerate() {
            ensure!(
                ants.len() >= sys.streams[k],
                "user {k}: {} antennas at serving station {} cannot carry {} orthonormal streams",
                ants.len(),
                sys.serving_sets[k][i],
                sys.streams[k]
            );
        }
    }
    let blocks = Blocks::new(sys);
    let mut rng = match cfg.initialization {
        Initialization::ScaledIdentity => None,
        Initialization::RandomOrthonormal { seed } => Some(ChaCha20Rng::seed_from_u64(seed)),
    };
    let mut factors: Vec<Vec<CMatrix>> =
        (0..k_users).map(|k| sys.serving_antennas[k].iter().map(|ants| orthonormal_columns(ants.len(), sys.streams[k], rng.as_mut())).collect()).collect();
    let mut subspaces: Vec<CMatrix> = (0..k_users).map(|k| orthonormal_columns(sys.nr, sys.streams[k], rng.as_mut())).collect();

    let mut defect = factors.iter().flatten().chain(&subspaces).map(orthonormality_defect).fold(0.0, f64::max);
    let mut leakage_trace = vec![blocks.leakage(&factors, &subspaces)];
    let mut trace = Vec::new();
    let mut per_iteration = vec![leakage_trace[0]];
    let mut converged = false;
    for outer in 0..cfg.max_outer {
        for k in 0..k_users {
            subspaces[k] = hermitian_bottom_eigs(&blocks.q(&factors, k, sys.nr), sys.streams[k])?.basis;
        }
        leakage_trace.push(blocks.leakage(&factors, &subspaces));
        for j in 0..k_users {
            for i in 0..factors[j].len() {
                factors[j][i] = hermitian_bottom_eigs(&blocks.q_hat(&subspaces, j, i), sys.streams[j])?.basis;
            }
        }
        let value = blocks.leakage(&factors, &subspaces);
        leakage_trace.push(value);
        defect = factors.iter().flatten().chain(&subspaces).map(orthonormality_defect).fold(defect, f64::max);
        trace.push(TraceEntry { outer, inner: 2 * (outer + 1), objective: value, wsmse: f64::NAN, max_violation: 0.0 });
        per_iteration.push(value);
        let scale = per_iteration[0].max(f64::MIN_POSITIVE);
        if value <= 1e-14 * scale || settled(&per_iteration, cfg.inner_tol) {
            converged = true;
            break;
        }
    }

    let prob = build_ifc_gc(sys)?;
    let precoders = stack_precoders(sys, &factors);
    let equalizers = mmse_equalizers(&prob, &precoders)?;
    let wsmse = crate::model::wsmse_objective(&prob, &precoders, &equalizers)?;
    let violation = relative_violation(&constraint_usage_unchecked(&prob, &precoders), &prob.budgets);
    for t in trace.iter_mut() {
        t.wsmse = wsmse;
        t.max_violation = violation;
    }
    Ok(LeakageSolution {
        solution: BeamformerSolution { iterations: trace.len(), precoders, equalizers, multipliers: vec![0.0; sys.num_bs], trace, converged },
        factors,
        subspaces,
        leakage_trace,
        max_orthonormality_defect: defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_user_has_no_leakage() {
        let h = CMatrix::from_fn(2, 2, |i, j| cplx(1.0 + i as f64, j as f64));
        let sys = PartialCooperationSystem::new(2, 2, vec![vec![0]], vec![1.0], vec![vec![h]], vec![1]).unwrap();
        let sol = min_leakage_solve(&sys, &AlgorithmConfig::default()).unwrap();
        assert_eq!(sol.leakage_trace[0], 0.0);
        assert!(sol.solution.converged);
    }

    #[test]
    fn aligns_receiver_away_from_interference() {
        // User 1 sees user 0's station only on its first receive antenna.
        let h00 = CMatrix::from_fn(2, 2, |i, j| cplx((i + j) as f64 + 1.0, 0.0));
        let h10 = CMatrix::from_fn(2, 2, |i, _| if i == 0 { cplx(1.0, 0.0) } else { cplx(0.0, 0.0) });
        let h01 = zeros(2, 2);
        let h11 = identity(2);
        let sys = PartialCooperationSystem::new(2, 2, vec![vec![0], vec![1]], vec![1.0, 1.0], vec![vec![h00, h01], vec![h10, h11]], vec![1, 1]).unwrap();
        let sol = min_leakage_solve(&sys, &AlgorithmConfig::default()).unwrap();
        assert!(sol.leakage_trace.last().unwrap().abs() < 1e-14);
        let a = &sol.subspaces[1];
        assert!(a[(0, 0)].norm() < 1e-12 && (a[(1, 0)].norm() - 1.0).abs() < 1e-12);
        let usage = constraint_usage_unchecked(&build_ifc_gc(&sys).unwrap(), &sol.solution.precoders);
        assert!(usage.iter().all(|u| (u - 1.0).abs() < 1e-12));
    }
}
