//! The interference channel with generalized linear constraints and the
//! performance algebra shared by every solver.
//!
//! A network with partial message sharing ([`PartialCooperationSystem`]) is turned
//! into an equivalent [`IfcGcProblem`] by [`build_ifc_gc`]: every user becomes a
//! virtual transmitter whose antennas are the stacked antennas of its serving base
//! stations, and each base-station power budget becomes a trace constraint with a
//! block-selector weight matrix.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::{
    cplx, frobenius, hermitian_defect, hermitian_eigs, hermitian_part, hpd_inverse, hpd_solve, identity, is_finite, log_det_hpd, real_trace, zeros, CMatrix,
    HERMITIAN_TOL,
};

/// Base stations sharing user data with one another.
///
/// `raw_channels[k][m]` is the `nr × nt` channel from base station `m` to user `k`
/// (noise already whitened). User `k` is jointly served by the ordered set
/// `serving_sets[k]`; by default all `nt` antennas of each serving station carry
/// its signal, while `serving_antennas` restricts this to a subset (one sector).
#[derive(Debug, Clone)]
pub struct PartialCooperationSystem {
    pub num_bs: usize,
    pub nt: usize,
    pub nr: usize,
    pub serving_sets: Vec<Vec<usize>>,
    /// `serving_antennas[k][l]` lists the antennas of BS `serving_sets[k][l]`
    /// that carry user `k`.
    pub serving_antennas: Vec<Vec<Vec<usize>>>,
    pub per_bs_power: Vec<f64>,
    pub raw_channels: Vec<Vec<CMatrix>>,
    pub streams: Vec<usize>,
}

impl PartialCooperationSystem {
    /// System in which every serving station uses all of its antennas.
    pub fn new(
        nt: usize,
        nr: usize,
        serving_sets: Vec<Vec<usize>>,
        per_bs_power: Vec<f64>,
        raw_channels: Vec<Vec<CMatrix>>,
        streams: Vec<usize>,
    ) -> Result<Self> {
        let serving_antennas = serving_sets.iter().map(|set| vec![(0..nt).collect(); set.len()]).collect();
        let sys = Self { num_bs: per_bs_power.len(), nt, nr, serving_sets, serving_antennas, per_bs_power, raw_channels, streams };
        sys.validate()?;
        Ok(sys)
    }

    pub fn num_users(&self) -> usize {
        self.serving_sets.len()
    }

    /// Stacked transmit dimension of user `k`.
    pub fn tx_dim(&self, k: usize) -> usize {
        self.serving_antennas[k].iter().map(Vec::len).sum()
    }

    /// Users whose data is known at BS `m`.
    pub fn users_of_bs(&self, m: usize) -> Vec<usize> {
        (0..self.num_users()).filter(|&k| self.serving_sets[k].contains(&m)).collect()
    }

    /// Row offset of BS `m`'s antenna block inside user `k`'s stacked precoder,
    /// or `None` when `m` does not serve `k`.
    pub fn block_offset(&self, k: usize, m: usize) -> Option<usize> {
        let pos = self.serving_sets[k].iter().position(|&b| b == m)?;
        Some(self.serving_antennas[k][..pos].iter().map(Vec::len).sum())
    }

    /// Columns of `H̃_{k,m}` belonging to the antennas that carry user `l`.
    pub fn serving_channel(&self, k: usize, l: usize, m: usize) -> Option<CMatrix> {
        let pos = self.serving_sets[l].iter().position(|&b| b == m)?;
        let ants = &self.serving_antennas[l][pos];
        let h = &self.raw_channels[k][m];
        Some(CMatrix::from_fn(self.nr, ants.len(), |r, c| h[(r, ants[c])]))
    }

    pub fn validate(&self) -> Result<()> {
        let k_users = self.num_users();
        ensure!(self.num_bs >= 1, "at least one base station required");
        ensure!(self.nt >= 1 && self.nr >= 1, "antenna counts must be positive (nt = {}, nr = {})", self.nt, self.nr);
        ensure!(k_users >= 1, "at least one user required");
        ensure!(self.per_bs_power.len() == self.num_bs, "{} budgets for {} base stations", self.per_bs_power.len(), self.num_bs);
        for (m, &p) in self.per_bs_power.iter().enumerate() {
            ensure!(p > 0.0 && p.is_finite(), "budget of BS {m} must be positive, got {p}");
        }
        ensure!(self.streams.len() == k_users, "{} stream counts for {k_users} users", self.streams.len());
        ensure!(self.serving_antennas.len() == k_users, "antenna subsets given for {} of {k_users} users", self.serving_antennas.len());
        ensure!(self.raw_channels.len() == k_users, "channels given for {} of {k_users} users", self.raw_channels.len());
        for k in 0..k_users {
            let set = &self.serving_sets[k];
            ensure!(!set.is_empty() && set.len() <= self.num_bs, "user {k}: serving set size {} outside 1..={}", set.len(), self.num_bs);
            for (i, &m) in set.iter().enumerate() {
                ensure!(m < self.num_bs, "user {k}: BS index {m} out of range");
                ensure!(!set[..i].contains(&m), "user {k}: BS {m} listed twice");
            }
            ensure!(self.serving_antennas[k].len() == set.len(), "user {k}: antenna subsets do not match serving set");
            for ants in &self.serving_antennas[k] {
                ensure!(!ants.is_empty(), "user {k}: empty antenna subset");
                ensure!(ants.iter().all(|&a| a < self.nt), "user {k}: antenna index out of range");
            }
            ensure!(self.raw_channels[k].len() == self.num_bs, "user {k}: {} channels for {} base stations", self.raw_channels[k].len(), self.num_bs);
            for (m, h) in self.raw_channels[k].iter().enumerate() {
                ensure!(h.shape() == (self.nr, self.nt), "H[{k}][{m}] is {}x{}, expected {}x{}", h.nrows(), h.ncols(), self.nr, self.nt);
                ensure!(is_finite(h), "H[{k}][{m}] has non-finite entries");
            }
            let d = self.streams[k];
            let cap = self.tx_dim(k).min(self.nr);
            ensure!(d >= 1 && d <= cap, "user {k}: {d} streams exceed min(transmit dim, nr) = {cap}");
        }
        Ok(())
    }
}

/// A complete instance of the interference channel with generalized linear
/// constraints: `K` transmitter/receiver pairs, `M` trace constraints
/// `Σ_k tr(Φ_{k,m} B_k B_kᴴ) ≤ P_m`, and per-user MSE weights.
#[derive(Debug, Clone, PartialEq)]
pub struct IfcGcProblem {
    /// `channels[k][l]` maps transmitter `l` to receiver `k` (`m_{r,k} × m_{t,l}`).
    pub channels: Vec<Vec<CMatrix>>,
    /// `weight_matrices[k][m]` is `Φ_{k,m}` (`m_{t,k} × m_{t,k}`, PSD).
    pub weight_matrices: Vec<Vec<CMatrix>>,
    pub budgets: Vec<f64>,
    pub streams: Vec<usize>,
    /// `W_k`, Hermitian PSD `d_k × d_k`. Diagonal for plain weighted-MSE design;
    /// sum-rate iterations may install full matrices.
    pub mse_weights: Vec<CMatrix>,
}

impl IfcGcProblem {
    /// Validated instance with unit MSE weights.
    pub fn new(channels: Vec<Vec<CMatrix>>, weight_matrices: Vec<Vec<CMatrix>>, budgets: Vec<f64>, streams: Vec<usize>) -> Result<Self> {
        let mse_weights = streams.iter().map(|&d| identity(d)).collect();
        let p = Self { channels, weight_matrices, budgets, streams, mse_weights };
        p.validate()?;
        Ok(p)
    }

    pub fn num_users(&self) -> usize {
        self.channels.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.budgets.len()
    }

    pub fn tx_dim(&self, k: usize) -> usize {
        self.channels[0][k].ncols()
    }

    pub fn rx_dim(&self, k: usize) -> usize {
        self.channels[k][0].nrows()
    }

    /// `Φ_{k,m} ≠ 0`, i.e. user `k` draws on budget `m`.
    pub fn constrains(&self, k: usize, m: usize) -> bool {
        self.weight_matrices[k][m].iter().any(|z| z.norm_sqr() > 0.0)
    }

    /// Same instance with different MSE weights.
    pub fn with_weights(&self, weights: Vec<CMatrix>) -> Result<Self> {
        let mut p = self.clone();
        p.mse_weights = weights;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let k_users = self.channels.len();
        ensure!(k_users >= 1, "at least one user required");
        let m = self.budgets.len();
        ensure!(m >= 1, "at least one constraint required");
        ensure!(self.streams.len() == k_users, "{} stream counts for {k_users} users", self.streams.len());
        ensure!(self.weight_matrices.len() == k_users, "constraint weights for {} of {k_users} users", self.weight_matrices.len());
        ensure!(self.mse_weights.len() == k_users, "MSE weights for {} of {k_users} users", self.mse_weights.len());
        for (i, &p) in self.budgets.iter().enumerate() {
            ensure!(p > 0.0 && p.is_finite(), "budget {i} must be positive, got {p}");
        }
        for row in &self.channels {
            ensure!(row.len() == k_users, "channel row has {} entries for {k_users} users", row.len());
        }
        let mt: Vec<usize> = (0..k_users).map(|l| self.channels[0][l].ncols()).collect();
        let mr: Vec<usize> = (0..k_users).map(|k| self.channels[k][0].nrows()).collect();
        for k in 0..k_users {
            for l in 0..k_users {
                let h = &self.channels[k][l];
                ensure!(h.shape() == (mr[k], mt[l]), "H[{k}][{l}] is {}x{}, expected {}x{}", h.nrows(), h.ncols(), mr[k], mt[l]);
                ensure!(is_finite(h), "H[{k}][{l}] has non-finite entries");
            }
            ensure!(self.weight_matrices[k].len() == m, "user {k}: {} constraint weights for {m} constraints", self.weight_matrices[k].len());
            let mut total = zeros(mt[k], mt[k]);
            for (i, phi) in self.weight_matrices[k].iter().enumerate() {
                ensure!(phi.shape() == (mt[k], mt[k]), "Phi[{k}][{i}] has wrong shape {}x{}", phi.nrows(), phi.ncols());
                ensure!(is_finite(phi) && hermitian_defect(phi) <= HERMITIAN_TOL, "Phi[{k}][{i}] is not Hermitian");
                let min_eig = hermitian_eigs(phi)?.values.last().copied().unwrap_or(0.0);
                ensure!(min_eig >= -1e-10 * frobenius(phi).max(1.0), "Phi[{k}][{i}] is not positive semidefinite");
                total += phi;
            }
            let eig = hermitian_eigs(&total)?;
            let (hi, lo) = (eig.values[0], *eig.values.last().unwrap());
            ensure!(hi > 0.0 && lo > 1e-12 * hi, "user {k}: sum of constraint weights is not positive definite");
            let d = self.streams[k];
            ensure!(d >= 1 && d <= mt[k].min(mr[k]), "user {k}: {d} streams exceed min({}, {})", mt[k], mr[k]);
            let w = &self.mse_weights[k];
            ensure!(w.shape() == (d, d), "W[{k}] is {}x{}, expected {d}x{d}", w.nrows(), w.ncols());
            ensure!(is_finite(w) && hermitian_defect(w) <= HERMITIAN_TOL, "W[{k}] is not Hermitian");
            let wmin = hermitian_eigs(w)?.values.last().copied().unwrap_or(0.0);
            ensure!(wmin >= -1e-10 * frobenius(w).max(1.0), "W[{k}] is not positive semidefinite");
        }
        Ok(())
    }

    fn check_precoders(&self, precoders: &[CMatrix]) -> Result<()> {
        ensure!(precoders.len() == self.num_users(), "{} precoders for {} users", precoders.len(), self.num_users());
        for (k, b) in precoders.iter().enumerate() {
            ensure!(b.shape() == (self.tx_dim(k), self.streams[k]), "B[{k}] is {}x{}, expected {}x{}", b.nrows(), b.ncols(), self.tx_dim(k), self.streams[k]);
        }
        Ok(())
    }

    fn check_equalizers(&self, equalizers: &[CMatrix]) -> Result<()> {
        ensure!(equalizers.len() == self.num_users(), "{} equalizers for {} users", equalizers.len(), self.num_users());
        for (k, a) in equalizers.iter().enumerate() {
            ensure!(a.shape() == (self.rx_dim(k), self.streams[k]), "A[{k}] is {}x{}, expected {}x{}", a.nrows(), a.ncols(), self.rx_dim(k), self.streams[k]);
        }
        Ok(())
    }
}

/// One row of a convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Outer (multiplier or weight) iteration.
    pub outer: usize,
    /// Total inner iterations so far.
    pub inner: usize,
    /// Value of the quantity the algorithm decreases (see each solver).
    pub objective: f64,
    pub wsmse: f64,
    pub max_violation: f64,
}

/// Precoders, equalizers and multipliers returned by a solver.
#[derive(Debug, Clone)]
pub struct BeamformerSolution {
    pub precoders: Vec<CMatrix>,
    pub equalizers: Vec<CMatrix>,
    pub multipliers: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub converged: bool,
}

/// `Ω_k = I + Σ_{l≠k} H_{k,l} B_l B_lᴴ H_{k,l}ᴴ`.
pub fn interference_covariance(prob: &IfcGcProblem, precoders: &[CMatrix], k: usize) -> Result<CMatrix> {
    prob.check_precoders(precoders)?;
    ensure!(k < prob.num_users(), "user index {k} out of range");
    Ok(interference_covariance_unchecked(prob, precoders, k))
}

pub(crate) fn interference_covariance_unchecked(prob: &IfcGcProblem, precoders: &[CMatrix], k: usize) -> CMatrix {
    let mut omega = identity(prob.rx_dim(k));
    for (l, b) in precoders.iter().enumerate() {
        if l != k {
            let hb = &prob.channels[k][l] * b;
            omega += &hb * hb.adjoint();
        }
    }
    hermitian_part(&omega)
}

/// `A_k = (H_{k,k}B_kB_kᴴH_{k,k}ᴴ + Ω_k)⁻¹ H_{k,k}B_k`.
pub fn mmse_equalizer(prob: &IfcGcProblem, precoders: &[CMatrix], k: usize) -> Result<CMatrix> {
    let omega = interference_covariance(prob, precoders, k)?;
    mmse_equalizer_with(prob, precoders, k, &omega)
}

pub(crate) fn mmse_equalizer_with(prob: &IfcGcProblem, precoders: &[CMatrix], k: usize, omega: &CMatrix) -> Result<CMatrix> {
    let hb = &prob.channels[k][k] * &precoders[k];
    let total = hermitian_part(&(&hb * hb.adjoint() + omega));
    hpd_solve(&total, &hb)
}

/// MMSE equalizers for all users.
pub fn mmse_equalizers(prob: &IfcGcProblem, precoders: &[CMatrix]) -> Result<Vec<CMatrix>> {
    prob.check_precoders(precoders)?;
    (0..prob.num_users()).map(|k| mmse_equalizer_with(prob, precoders, k, &interference_covariance_unchecked(prob, precoders, k))).collect()
}

/// MSE matrix for an arbitrary equalizer:
/// `E_k = AᴴHBBᴴHᴴA − AᴴHB − BᴴHᴴA + AᴴΩA + I`.
pub fn mse_matrix(prob: &IfcGcProblem, precoders: &[CMatrix], equalizers: &[CMatrix], k: usize) -> Result<CMatrix> {
    prob.check_equalizers(equalizers)?;
    let omega = interference_covariance(prob, precoders, k)?;
    Ok(mse_matrix_with(prob, precoders, &equalizers[k], k, &omega))
}

pub(crate) fn mse_matrix_with(prob: &IfcGcProblem, precoders: &[CMatrix], a: &CMatrix, k: usize, omega: &CMatrix) -> CMatrix {
    let ahb = a.adjoint() * (&prob.channels[k][k] * &precoders[k]);
    let e = &ahb * ahb.adjoint() - &ahb - ahb.adjoint() + a.adjoint() * omega * a + identity(prob.streams[k]);
    hermitian_part(&e)
}

/// MSE matrix under the MMSE equalizer, `(I + BᴴHᴴΩ⁻¹HB)⁻¹`.
pub fn mse_matrix_mmse(prob: &IfcGcProblem, precoders: &[CMatrix], k: usize) -> Result<CMatrix> {
    let omega = interference_covariance(prob, precoders, k)?;
    mse_matrix_mmse_with(prob, precoders, k, &omega)
}

pub(crate) fn mse_matrix_mmse_with(prob: &IfcGcProblem, precoders: &[CMatrix], k: usize, omega: &CMatrix) -> Result<CMatrix> {
    let hb = &prob.channels[k][k] * &precoders[k];
    let g = hpd_solve(omega, &hb)?;
    let inner = hermitian_part(&(identity(prob.streams[k]) + hb.adjoint() * g));
    hpd_inverse(&inner)
}

/// `Σ_k tr(W_k E_k)` with the problem's MSE weights.
pub fn wsmse_objective(prob: &IfcGcProblem, precoders: &[CMatrix], equalizers: &[CMatrix]) -> Result<f64> {
    prob.check_precoders(precoders)?;
    prob.check_equalizers(equalizers)?;
    Ok((0..prob.num_users())
        .map(|k| {
            let omega = interference_covariance_unchecked(prob, precoders, k);
            let e = mse_matrix_with(prob, precoders, &equalizers[k], k, &omega);
            real_trace(&(&prob.mse_weights[k] * e))
        })
        .sum())
}

/// Achievable sum rate in bits per channel use, `−Σ_k log₂|E_k|` with MMSE
/// receivers.
pub fn sum_rate(prob: &IfcGcProblem, precoders: &[CMatrix]) -> Result<f64> {
    Ok(user_rates(prob, precoders)?.iter().sum())
}

/// Per-user rates in bits per channel use.
pub fn user_rates(prob: &IfcGcProblem, precoders: &[CMatrix]) -> Result<Vec<f64>> {
    prob.check_precoders(precoders)?;
    (0..prob.num_users())
        .map(|k| {
            let omega = interference_covariance_unchecked(prob, precoders, k);
            let e = mse_matrix_mmse_with(prob, precoders, k, &omega)?;
            let ld = log_det_hpd(&e).map_err(|err| Error::Numerical(format!("MSE matrix of user {k} is not positive definite: {err}")))?;
            Ok(-ld / std::f64::consts::LN_2)
        })
        .collect()
}

/// `u_m = Σ_k tr(Φ_{k,m} B_k B_kᴴ)` for every constraint.
pub fn constraint_usage(prob: &IfcGcProblem, precoders: &[CMatrix]) -> Result<Vec<f64>> {
    prob.check_precoders(precoders)?;
    Ok(constraint_usage_unchecked(prob, precoders))
}

pub(crate) fn constraint_usage_unchecked(prob: &IfcGcProblem, precoders: &[CMatrix]) -> Vec<f64> {
    let mut usage = vec![0.0; prob.num_constraints()];
    for (k, b) in precoders.iter().enumerate() {
        let cov = b * b.adjoint();
        for (m, u) in usage.iter_mut().enumerate() {
            if prob.constrains(k, m) {
                *u += trace_product(&prob.weight_matrices[k][m], &cov);
            }
        }
    }
    usage
}

/// `Re tr(X·Y)` for Hermitian `Y` without forming the product.
pub(crate) fn trace_product(x: &CMatrix, y: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            acc += (x[(i, j)] * y[(j, i)]).re;
        }
    }
    acc
}

/// Largest relative constraint violation `max_m max(0, u_m/P_m − 1)`.
pub fn max_violation(prob: &IfcGcProblem, precoders: &[CMatrix]) -> Result<f64> {
    let usage = constraint_usage(prob, precoders)?;
    Ok(relative_violation(&usage, &prob.budgets))
}

pub(crate) fn relative_violation(usage: &[f64], budgets: &[f64]) -> f64 {
    usage.iter().zip(budgets).map(|(u, p)| (u / p - 1.0).max(0.0)).fold(0.0, f64::max)
}

/// Sum-rate weight update `W_k ← E_k⁻¹` (MMSE receivers), kept as full
/// Hermitian matrices.
pub fn srm_weight_update(prob: &IfcGcProblem, precoders: &[CMatrix]) -> Result<Vec<CMatrix>> {
    prob.check_precoders(precoders)?;
    (0..prob.num_users())
        .map(|k| {
            let omega = interference_covariance_unchecked(prob, precoders, k);
            let e = mse_matrix_mmse_with(prob, precoders, k, &omega)?;
            hpd_inverse(&e)
        })
        .collect()
}

/// Equivalent interference channel of a partial-cooperation system.
///
/// User `k` transmits from the stacked antennas of its serving set;
/// `H_{k,l}` stacks the columns `H̃_{k,m}` of the antennas carrying user `l`, and
/// `Φ_{k,m}` selects the block of BS `m` inside user `k`'s stacked vector, so
/// that constraint `m` is exactly the transmit power of BS `m`. MSE weights are
/// set to identity.
pub fn build_ifc_gc(sys: &PartialCooperationSystem) -> Result<IfcGcProblem> {
    sys.validate()?;
    let k_users = sys.num_users();
    let channels = (0..k_users)
        .map(|k| {
            (0..k_users)
                .map(|l| {
                    let mut h = zeros(sys.nr, sys.tx_dim(l));
                    for &m in &sys.serving_sets[l] {
                        let off = sys.block_offset(l, m).expect("serving BS has a block");
                        let block = sys.serving_channel(k, l, m).expect("serving BS has a channel");
                        h.columns_mut(off, block.ncols()).copy_from(&block);
                    }
                    h
                })
                .collect()
        })
        .collect();
    let weight_matrices = (0..k_users)
        .map(|k| {
            let dim = sys.tx_dim(k);
            (0..sys.num_bs)
                .map(|m| {
                    let mut phi = zeros(dim, dim);
                    if let Some(off) = sys.block_offset(k, m) {
                        let pos = sys.serving_sets[k].iter().position(|&b| b == m).unwrap();
                        for i in 0..sys.serving_antennas[k][pos].len() {
                            phi[(off + i, off + i)] = cplx(1.0, 0.0);
                        }
                    }
                    phi
                })
                .collect()
        })
        .collect();
    IfcGcProblem::new(channels, weight_matrices, sys.per_bs_power.clone(), sys.streams.clone())
}

/// Serialized matrix: rows of `[re, im]` pairs.
type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    channels: Vec<Vec<JsonMatrix>>,
    weight_matrices: Vec<Vec<JsonMatrix>>,
    budgets: Vec<f64>,
    streams: Vec<usize>,
    mse_weights: Vec<JsonMatrix>,
}

pub(crate) fn matrix_to_json(a: &CMatrix) -> JsonMatrix {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect()
}

pub(crate) fn matrix_from_json(rows: &JsonMatrix) -> Result<CMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Format("ragged matrix rows".into()));
    }
    Ok(CMatrix::from_fn(r, c, |i, j| cplx(rows[i][j][0], rows[i][j][1])))
}

impl IfcGcProblem {
    /// JSON fixture format: every matrix is a row-major nested array of
    /// `[re, im]` pairs.
    pub fn to_json(&self) -> String {
        let file = ProblemFile {
            channels: self.channels.iter().map(|row| row.iter().map(matrix_to_json).collect()).collect(),
            weight_matrices: self.weight_matrices.iter().map(|row| row.iter().map(matrix_to_json).collect()).collect(),
            budgets: self.budgets.clone(),
            streams: self.streams.clone(),
            mse_weights: self.mse_weights.iter().map(matrix_to_json).collect(),
        };
        serde_json::to_string_pretty(&file).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let conv = |rows: &Vec<Vec<JsonMatrix>>| -> Result<Vec<Vec<CMatrix>>> { rows.iter().map(|row| row.iter().map(matrix_from_json).collect()).collect() };
        let p = Self {
            channels: conv(&file.channels)?,
            weight_matrices: conv(&file.weight_matrices)?,
            budgets: file.budgets,
            streams: file.streams,
            mse_weights: file.mse_weights.iter().map(matrix_from_json).collect::<Result<_>>()?,
        };
        p.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag_real;

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, cplx(x, 0.0))
    }

    fn scalar_problem(h: f64) -> IfcGcProblem {
        IfcGcProblem::new(vec![vec![scalar(h)]], vec![vec![scalar(1.0)]], vec![1.0], vec![1]).unwrap()
    }

    #[test]
    fn mapping_two_stations() {
        let ch = vec![vec![zeros(2, 2), zeros(2, 2)]];
        let sys = PartialCooperationSystem::new(2, 2, vec![vec![0, 1]], vec![1.0, 1.0], ch, vec![2]).unwrap();
        let p = build_ifc_gc(&sys).unwrap();
        assert_eq!(p.tx_dim(0), 4);
        assert_eq!(p.weight_matrices[0][0], diag_real(&[1.0, 1.0, 0.0, 0.0]));
        assert_eq!(p.weight_matrices[0][1], diag_real(&[0.0, 0.0, 1.0, 1.0]));
    }

    #[test]
    fn scalar_interference_covariance() {
        let p = IfcGcProblem::new(
            vec![vec![scalar(1.0), scalar(1.0)], vec![scalar(0.0), scalar(1.0)]],
            vec![vec![scalar(1.0), scalar(0.0)], vec![scalar(0.0), scalar(1.0)]],
            vec![1.0, 1.0],
            vec![1, 1],
        )
        .unwrap();
        let b = vec![scalar(1.0), scalar(1.0)];
        assert_eq!(interference_covariance(&p, &b, 0).unwrap(), scalar(2.0));
        assert_eq!(interference_covariance(&p, &b, 1).unwrap(), scalar(1.0));
    }

    #[test]
    fn scalar_equalizer_and_mse() {
        let p = scalar_problem(1.0);
        let b = vec![scalar(1.0)];
        let a = mmse_equalizer(&p, &b, 0).unwrap();
        assert!((a[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((mse_matrix(&p, &b, std::slice::from_ref(&a), 0).unwrap()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((mse_matrix_mmse(&p, &b, 0).unwrap()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((wsmse_objective(&p, &b, &[a]).unwrap() - 0.5).abs() < 1e-15);
        assert!((sum_rate(&p, &b).unwrap() - 1.0).abs() < 1e-14);

        let p2 = scalar_problem(2.0);
        assert!((mmse_equalizer(&p2, &b, 0).unwrap()[(0, 0)].re - 0.4).abs() < 1e-15);
    }

    #[test]
    fn zero_precoder_mse_is_identity() {
        let p = scalar_problem(1.0);
        let b = vec![scalar(0.0)];
        assert_eq!(mse_matrix(&p, &b, &[scalar(0.0)], 0).unwrap(), scalar(1.0));
        assert_eq!(mse_matrix_mmse(&p, &b, 0).unwrap(), scalar(1.0));
        assert_eq!(sum_rate(&p, &b).unwrap(), 0.0);
        assert_eq!(constraint_usage(&p, &b).unwrap(), vec![0.0]);
    }

    #[test]
    fn diagonal_mmse_mse() {
        let p = IfcGcProblem::new(vec![vec![diag_real(&[2.0, 1.0])]], vec![vec![identity(2)]], vec![2.0], vec![2]).unwrap();
        let e = mse_matrix_mmse(&p, &[identity(2)], 0).unwrap();
        assert!(frobenius(&(e - diag_real(&[0.2, 0.5]))) < 1e-15);
    }

    #[test]
    fn weight_update_inverts_mse() {
        // H = diag(1, √3), B = I gives E = diag(1/2, 1/4).
        let p = IfcGcProblem::new(vec![vec![diag_real(&[1.0, 3f64.sqrt()])]], vec![vec![identity(2)]], vec![2.0], vec![2]).unwrap();
        let w = srm_weight_update(&p, &[identity(2)]).unwrap();
        assert!(frobenius(&(&w[0] - diag_real(&[2.0, 4.0]))) < 1e-12);
        assert!((sum_rate(&p, &[identity(2)]).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        let p = scalar_problem(1.0);
        assert!(matches!(interference_covariance(&p, &[identity(2)], 0), Err(Error::Contract(_))));
        assert!(IfcGcProblem::new(vec![vec![scalar(1.0)]], vec![vec![scalar(0.0)]], vec![1.0], vec![1]).is_err());
        assert!(IfcGcProblem::new(vec![vec![scalar(1.0)]], vec![vec![scalar(1.0)]], vec![1.0], vec![2]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let ch = vec![vec![CMatrix::from_fn(2, 2, |i, j| cplx(i as f64, j as f64 - 0.5))]];
        let sys = PartialCooperationSystem::new(2, 2, vec![vec![0]], vec![3.0], ch, vec![1]).unwrap();
        let p = build_ifc_gc(&sys).unwrap();
        let back = IfcGcProblem::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert!(matches!(IfcGcProblem::from_json("{\"channels\": 3}"), Err(Error::Format(_))));
    }
}
