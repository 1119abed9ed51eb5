//! Multiuser transceiver design for the interference channel with generalized
//! constraints.
//!
//! - [`dmmse`]: per-user Lagrangian minimizers that diagonalize the MSE matrices,
//!   with a subgradient search over the per-constraint multipliers.
//! - [`emmseia`]: alternating MMSE equalizers and constrained MMSE precoders.
//! - [`pwf`]: polite waterfilling on the forward and dual networks (sum rate).
//! - [`leakage`]: alternating minimization of interference leakage with equal
//!   per-BS power splits.
//!
//! [`dmmse`] and [`emmseia`] also run in sum-rate mode, where the MSE weights
//! follow `W_k = E_k⁻¹` between passes.

pub mod dmmse;
pub mod emmseia;
pub mod leakage;
pub mod pwf;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cplx, CMatrix};
use crate::model::{constraint_usage_unchecked, BeamformerSolution, IfcGcProblem, PartialCooperationSystem};

pub use dmmse::dmmse_solve;
pub use emmseia::emmseia_solve;
pub use leakage::{min_leakage_solve, LeakageSolution};
pub use pwf::{pwf_solve, PwfSolution};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    #[default]
    Dmmse,
    Emmseia,
    Pwf,
    MinLeakage,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] = [Self::Dmmse, Self::Emmseia, Self::Pwf, Self::MinLeakage];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dmmse => "dmmse",
            Self::Emmseia => "emmseia",
            Self::Pwf => "pwf",
            Self::MinLeakage => "min_leakage",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}` (expected dmmse, emmseia, pwf or min_leakage)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Weighted sum-MSE with the problem's fixed weights.
    Wsmmse,
    /// Sum rate, through `W_k = E_k⁻¹` weight updates.
    Srm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// `B_k = c_k·[I 0]ᵀ`, each user drawing at most `0.9/K` of every budget.
    ScaledIdentity,
    /// Random orthonormal columns with the same power scaling.
    RandomOrthonormal { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    /// Chosen per run; configuration files list algorithms elsewhere.
    #[serde(skip)]
    pub algorithm: AlgorithmKind,
    pub objective: Objective,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Relative objective change accepted over the last five iterations.
    pub inner_tol: f64,
    /// Relative budget violation accepted at convergence.
    pub constraint_tol: f64,
    pub subgradient_step: f64,
    pub lambda_init: f64,
    pub initialization: Initialization,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            algorithm: AlgorithmKind::Dmmse,
            objective: Objective::Wsmmse,
            max_inner: 500,
            max_outer: 2000,
            inner_tol: 1e-6,
            constraint_tol: 0.01,
            subgradient_step: 0.5,
            lambda_init: 1.0,
            initialization: Initialization::ScaledIdentity,
        }
    }
}

impl AlgorithmConfig {
    pub fn new(algorithm: AlgorithmKind) -> Self {
        Self { algorithm, ..Self::default() }
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.inner_tol > 0.0) || !(self.constraint_tol > 0.0) {
            return bad("inner_tol and constraint_tol must be positive");
        }
        if !(self.subgradient_step > 0.0) || !(self.lambda_init > 0.0) {
            return bad("subgradient_step and lambda_init must be positive");
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return bad("max_inner and max_outer must be positive");
        }
        if self.algorithm == AlgorithmKind::MinLeakage && self.objective == Objective::Srm {
            return bad("min_leakage minimizes interference leakage and cannot run with objective = \"srm\"");
        }
        Ok(())
    }
}

/// Runs the configured algorithm. Leakage minimization works on the
/// per-base-station blocks and therefore needs the partial-cooperation system
/// the problem was built from.
pub fn run_algorithm(sys: &PartialCooperationSystem, prob: &IfcGcProblem, cfg: &AlgorithmConfig) -> Result<BeamformerSolution> {
    cfg.validate()?;
    match cfg.algorithm {
        AlgorithmKind::Dmmse => dmmse_solve(prob, cfg),
        AlgorithmKind::Emmseia => emmseia_solve(prob, cfg),
        AlgorithmKind::Pwf => Ok(pwf_solve(prob, cfg)?.solution),
        AlgorithmKind::MinLeakage => Ok(min_leakage_solve(sys, cfg)?.solution),
    }
}

/// Sum-rate iteration: alternates `W_k ← E_k⁻¹` with one pass of the chosen
/// weighted-MSE algorithm.
pub fn srm_outer_loop(prob: &IfcGcProblem, cfg: &AlgorithmConfig, inner: AlgorithmKind) -> Result<BeamformerSolution> {
    let cfg = AlgorithmConfig { algorithm: inner, objective: Objective::Srm, ..cfg.clone() };
    match inner {
        AlgorithmKind::Dmmse => dmmse_solve(prob, &cfg),
        AlgorithmKind::Emmseia => emmseia_solve(prob, &cfg),
        other => Err(Error::Config(format!("{other} has no weighted-MSE inner step for the sum-rate loop"))),
    }
}

/// Orthonormal `rows × cols` columns: the leading identity columns, or the
/// Q factor of a Gaussian matrix.
pub(crate) fn orthonormal_columns(rows: usize, cols: usize, rng: Option<&mut ChaCha20Rng>) -> CMatrix {
    match rng {
        None => CMatrix::identity(rows, cols),
        Some(rng) => {
            let g = DMatrix::from_fn(rows, cols, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                cplx(re, im)
            });
            g.qr().q()
        }
    }
}

/// Initial precoders: orthonormal columns scaled so that user `k` uses at most
/// `0.9/K` of every budget.
pub fn initial_precoders(prob: &IfcGcProblem, init: Initialization) -> Vec<CMatrix> {
    let k_users = prob.num_users();
    let mut rng = match init {
        Initialization::ScaledIdentity => None,
        Initialization::RandomOrthonormal { seed } => Some(ChaCha20Rng::seed_from_u64(seed)),
    };
    (0..k_users)
        .map(|k| {
            let e = orthonormal_columns(prob.tx_dim(k), prob.streams[k], rng.as_mut());
            let cov = &e * e.adjoint();
            let worst =
                (0..prob.num_constraints()).map(|m| crate::model::trace_product(&prob.weight_matrices[k][m], &cov) / prob.budgets[m]).fold(0.0, f64::max);
            let c = (0.9 / k_users as f64 / worst).sqrt();
            e * cplx(c, 0.0)
        })
        .collect()
}

/// Scales all precoders by `min(1, min_m √(P_m/u_m))`, returning the factor.
pub(crate) fn scale_to_feasible(prob: &IfcGcProblem, precoders: &mut [CMatrix]) -> f64 {
    let usage = constraint_usage_unchecked(prob, precoders);
    let c = usage.iter().zip(&prob.budgets).filter(|(u, _)| **u > 0.0).map(|(u, p)| (p / u).sqrt()).fold(1.0, f64::min);
    if c < 1.0 {
        for b in precoders.iter_mut() {
            *b *= cplx(c, 0.0);
        }
    }
    c
}

/// Whether the last six values agree within `tol` relative to the last one.
pub(crate) fn settled(values: &[f64], tol: f64) -> bool {
    if values.len() < 6 {
        return false;
    }
    let window = &values[values.len() - 6..];
    let last = window[5];
    window.iter().all(|v| (v - last).abs() <= tol * last.abs().max(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, zeros};

    #[test]
    fn config_rejects_srm_leakage() {
        let cfg = AlgorithmConfig::new(AlgorithmKind::MinLeakage).with_objective(Objective::Srm);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(AlgorithmConfig::default().validate().is_ok());
    }

    #[test]
    fn names_round_trip() {
        for a in AlgorithmKind::ALL {
            assert_eq!(a.name().parse::<AlgorithmKind>().unwrap(), a);
        }
        assert!("mmse".parse::<AlgorithmKind>().is_err());
    }

    #[test]
    fn initialization_is_feasible() {
        let phi = vec![vec![identity(3)], vec![identity(3)]];
        let h = vec![vec![zeros(2, 3), zeros(2, 3)], vec![zeros(2, 3), zeros(2, 3)]];
        let prob = IfcGcProblem::new(h, phi, vec![2.0], vec![2, 1]).unwrap();
        for init in [Initialization::ScaledIdentity, Initialization::RandomOrthonormal { seed: 3 }] {
            let b = initial_precoders(&prob, init);
            let u = constraint_usage_unchecked(&prob, &b);
            assert!((u[0] - 0.9 * 2.0).abs() < 1e-12);
            let gram = b[0].adjoint() * &b[0];
            assert!(crate::linalg::offdiag_norm(&gram) < 1e-12);
        }
    }
}
