//! Dense complex-matrix kernels shared by all solvers.
//!
//! Every transceiver design in this crate reduces to a handful of primitives on
//! small Hermitian matrices: ordered eigendecomposition, inverse square roots of
//! positive-definite weighting matrices, thin SVDs of whitened channels, and
//! waterfilling over the resulting eigen-gains. The decompositions are backed by
//! `nalgebra`; this module adds ordering, phase normalisation, input contracts
//! and the waterfilling rules on top.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{ensure, Error, Result};

/// Dense complex matrix. All matrix quantities (channels, precoders, equalizers,
/// weight matrices, covariances) use this representation.
pub type CMatrix = DMatrix<Complex64>;

/// Relative Frobenius tolerance under which a matrix is accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Smallest admissible ratio between the extreme eigenvalues of a matrix that
/// must be positive definite.
pub const PD_RATIO: f64 = 1e-12;

const EIG_MAX_ITER: usize = 10_000;
const WATERFILL_MAX_BISECT: usize = 200;
const WATERFILL_MU_LO: f64 = 1e-12;

/// Eigen- or singular values sorted non-increasing, with one orthonormal basis
/// column per value.
#[derive(Debug, Clone)]
pub struct SpectrumDecomposition {
    pub values: Vec<f64>,
    pub basis: CMatrix,
}

/// Per-stream power levels together with the waterfilling multiplier that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub levels: Vec<f64>,
    /// `f64::INFINITY` when the allocation was forced to zero by a zero budget.
    pub multiplier: f64,
}

impl PowerAllocation {
    pub fn total(&self) -> f64 {
        self.levels.iter().sum()
    }
}

/// Truncated singular value decomposition `a ≈ left · diag(singular) · rightᴴ`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub left: CMatrix,
    pub singular: Vec<f64>,
    pub right: CMatrix,
}

#[inline]
pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Real diagonal matrix.
pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { cplx(values[i], 0.0) } else { Complex64::default() })
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.norm()
}

pub fn real_trace(a: &CMatrix) -> f64 {
    a.trace().re
}

/// Frobenius norm of the off-diagonal part.
pub fn offdiag_norm(a: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * cplx(0.5, 0.0)
}

/// `‖a − aᴴ‖_F / max(1, ‖a‖_F)`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    frobenius(&(a - a.adjoint())) / frobenius(a).max(1.0)
}

fn check_hermitian(a: &CMatrix, what: &str) -> Result<()> {
    ensure!(a.is_square(), "{what}: expected a square matrix, got {}x{}", a.nrows(), a.ncols());
    if !is_finite(a) {
        return Err(Error::Numerical(format!("{what}: non-finite entries in {}x{} matrix", a.nrows(), a.ncols())));
    }
    let defect = hermitian_defect(a);
    ensure!(defect <= HERMITIAN_TOL, "{what}: matrix is not Hermitian (relative defect {defect:e})");
    Ok(())
}

/// Rotate the phase of each column so that its largest-magnitude entry is real
/// and positive. Eigenvectors are only defined up to a phase; fixing it makes
/// iterates reproducible and comparable between iterations.
fn normalize_column_phases(basis: &mut CMatrix, partner: Option<&mut CMatrix>) {
    let mut phases = Vec::with_capacity(basis.ncols());
    for j in 0..basis.ncols() {
        let col = basis.column(j);
        let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pivot = col.iter().find(|z| z.norm() >= max * (1.0 - 1e-9)).copied().unwrap_or_default();
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { cplx(1.0, 0.0) };
        for z in basis.column_mut(j).iter_mut() {
            *z *= phase;
        }
        phases.push(phase);
    }
    if let Some(p) = partner {
        for (j, phase) in phases.into_iter().enumerate() {
            for z in p.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
    }
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues non-increasing.
pub fn hermitian_eigs(a: &CMatrix) -> Result<SpectrumDecomposition> {
    check_hermitian(a, "hermitian_eigs")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(SpectrumDecomposition { values: vec![], basis: zeros(0, 0) });
    }
    let eig = SymmetricEigen::try_new(hermitian_part(a), f64::EPSILON, EIG_MAX_ITER)
        .ok_or_else(|| Error::Numerical(format!("Hermitian eigensolver did not converge on a {n}x{n} matrix")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut basis = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    normalize_column_phases(&mut basis, None);
    Ok(SpectrumDecomposition { values, basis })
}

/// The `d` largest eigenvalues of a Hermitian matrix (non-increasing) and their
/// orthonormal eigenvectors.
pub fn hermitian_top_eigs(a: &CMatrix, d: usize) -> Result<SpectrumDecomposition> {
    ensure!(a.is_square(), "hermitian_top_eigs: expected a square matrix, got {}x{}", a.nrows(), a.ncols());
    ensure!(d >= 1 && d <= a.nrows(), "hermitian_top_eigs: d = {d} outside 1..={}", a.nrows());
    let full = hermitian_eigs(a)?;
    Ok(SpectrumDecomposition { values: full.values[..d].to_vec(), basis: full.basis.columns(0, d).into_owned() })
}

/// The `d` smallest eigenvalues of a Hermitian matrix in non-decreasing order.
/// Degenerate eigenvalues keep the solver's column order, which is deterministic.
pub fn hermitian_bottom_eigs(a: &CMatrix, d: usize) -> Result<SpectrumDecomposition> {
    ensure!(a.is_square(), "hermitian_bottom_eigs: expected a square matrix, got {}x{}", a.nrows(), a.ncols());
    ensure!(d >= 1 && d <= a.nrows(), "hermitian_bottom_eigs: d = {d} outside 1..={}", a.nrows());
    let full = hermitian_eigs(a)?;
    let n = a.nrows();
    let values = (0..d).map(|i| full.values[n - 1 - i]).collect();
    let basis = CMatrix::from_fn(n, d, |r, c| full.basis[(r, n - 1 - c)]);
    Ok(SpectrumDecomposition { values, basis })
}

fn pd_spectrum(a: &CMatrix, what: &str) -> Result<SpectrumDecomposition> {
    check_hermitian(a, what)?;
    let eig = hermitian_eigs(a)?;
    let max = eig.values.first().copied().unwrap_or(0.0);
    let min = eig.values.last().copied().unwrap_or(0.0);
    if !(max > 0.0) || !(min > PD_RATIO * max) {
        return Err(Error::Singular { min_eigenvalue: min, max_eigenvalue: max });
    }
    Ok(eig)
}

fn spectral_function(eig: &SpectrumDecomposition, f: impl Fn(f64) -> f64) -> CMatrix {
    let scaled = CMatrix::from_fn(eig.basis.nrows(), eig.basis.ncols(), |r, c| eig.basis[(r, c)] * f(eig.values[c]));
    hermitian_part(&(scaled * eig.basis.adjoint()))
}

/// Hermitian inverse square root `S` of a positive-definite matrix, `S·a·S = I`.
pub fn psd_inv_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let eig = pd_spectrum(a, "psd_inv_sqrt")?;
    Ok(spectral_function(&eig, |v| 1.0 / v.sqrt()))
}

/// Hermitian square root of a positive semidefinite matrix. Tiny negative
/// eigenvalues from round-off are clamped to zero.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    check_hermitian(a, "psd_sqrt")?;
    let eig = hermitian_eigs(a)?;
    Ok(spectral_function(&eig, |v| v.max(0.0).sqrt()))
}

/// Thin SVD keeping the `d` dominant singular triplets, singular values
/// non-increasing.
pub fn thin_svd(a: &CMatrix, d: usize) -> Result<ThinSvd> {
    let (rows, cols) = a.shape();
    ensure!(d >= 1 && d <= rows.min(cols), "thin_svd: d = {d} outside 1..={}", rows.min(cols));
    if !is_finite(a) {
        return Err(Error::Numerical(format!("thin_svd: non-finite entries in {rows}x{cols} matrix")));
    }
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, EIG_MAX_ITER)
        .ok_or_else(|| Error::Numerical(format!("SVD did not converge on a {rows}x{cols} matrix")))?;
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let order = &order[..d];
    let singular = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut right = CMatrix::from_fn(cols, d, |r, c| v_t[(order[c], r)].conj());
    let mut left = CMatrix::from_fn(rows, d, |r, c| u[(r, order[c])]);
    normalize_column_phases(&mut right, Some(&mut left));
    Ok(ThinSvd { left, singular, right })
}

/// Cholesky factorisation of a Hermitian positive-definite matrix, reporting the
/// spectrum extremes on failure.
fn cholesky(a: &CMatrix, what: &str) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    ensure!(a.is_square(), "{what}: expected a square matrix, got {}x{}", a.nrows(), a.ncols());
    if !is_finite(a) {
        return Err(Error::Numerical(format!("{what}: non-finite entries in {}x{} matrix", a.nrows(), a.ncols())));
    }
    match Cholesky::new(hermitian_part(a)) {
        Some(ch) => Ok(ch),
        None => {
            let eig = hermitian_eigs(&hermitian_part(a))?;
            Err(Error::Singular { min_eigenvalue: eig.values.last().copied().unwrap_or(0.0), max_eigenvalue: eig.values.first().copied().unwrap_or(0.0) })
        }
    }
}

pub fn hpd_inverse(a: &CMatrix) -> Result<CMatrix> {
    Ok(hermitian_part(&cholesky(a, "hpd_inverse")?.inverse()))
}

/// Solves `a·x = b` for Hermitian positive-definite `a`.
pub fn hpd_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure!(a.nrows() == b.nrows(), "hpd_solve: {}x{} system with {} right-hand rows", a.nrows(), a.ncols(), b.nrows());
    Ok(cholesky(a, "hpd_solve")?.solve(b))
}

/// Lower-triangular Cholesky factor `L` with `a = L·Lᴴ`.
pub fn cholesky_lower(a: &CMatrix) -> Result<CMatrix> {
    Ok(cholesky(a, "cholesky_lower")?.unpack())
}

/// `L⁻¹·b` for lower-triangular `L`.
pub fn lower_solve(l: &CMatrix, b: &CMatrix) -> CMatrix {
    l.solve_lower_triangular(b).expect("Cholesky factor has a nonzero diagonal")
}

/// `L⁻ᴴ·b` for lower-triangular `L`.
pub fn lower_adjoint_solve(l: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut x = b.clone();
    assert!(l.ad_solve_lower_triangular_mut(&mut x), "Cholesky factor has a nonzero diagonal");
    x
}

/// Natural log-determinant of a Hermitian positive-definite matrix.
pub fn log_det_hpd(a: &CMatrix) -> Result<f64> {
    let ch = cholesky(a, "log_det_hpd")?;
    let l = ch.l_dirty();
    Ok((0..a.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

fn check_waterfill_inputs(weights: &[f64], gains: &[f64]) -> Result<()> {
    ensure!(weights.len() == gains.len(), "waterfill: {} weights but {} gains", weights.len(), gains.len());
    for (i, (&w, &g)) in weights.iter().zip(gains).enumerate() {
        ensure!(g > 0.0 && g.is_finite(), "waterfill: gain {i} = {g} must be positive and finite");
        ensure!(w >= 0.0 && w.is_finite(), "waterfill: weight {i} = {w} must be non-negative and finite");
    }
    Ok(())
}

#[inline]
fn level(w: f64, g: f64, mu: f64) -> f64 {
    ((w / (mu * g)).sqrt() - 1.0 / g).max(0.0)
}

/// Weighted-MSE waterfilling at a given level: `p_i = [√(w_i/(μγ_i)) − 1/γ_i]⁺`.
pub fn waterfill_eval(weights: &[f64], gains: &[f64], mu: f64) -> Result<PowerAllocation> {
    check_waterfill_inputs(weights, gains)?;
    ensure!(mu > 0.0, "waterfill_eval: level mu = {mu} must be positive");
    Ok(PowerAllocation { levels: weights.iter().zip(gains).map(|(&w, &g)| level(w, g, mu)).collect(), multiplier: mu })
}

/// Weighted-MSE waterfilling meeting a total power budget. The level is found by
/// bisection on the non-increasing map `μ ↦ Σ p_i(μ)` and then refined with the
/// closed form on the resulting active set.
///
/// A zero budget returns all-zero levels with an infinite multiplier.
pub fn waterfill_budget(weights: &[f64], gains: &[f64], budget: f64) -> Result<PowerAllocation> {
    check_waterfill_inputs(weights, gains)?;
    ensure!(budget >= 0.0 && budget.is_finite(), "waterfill_budget: budget {budget} must be non-negative");
    if budget == 0.0 {
        return Ok(PowerAllocation { levels: vec![0.0; weights.len()], multiplier: f64::INFINITY });
    }
    let total = |mu: f64| -> f64 { weights.iter().zip(gains).map(|(&w, &g)| level(w, g, mu)).sum() };

    let mut lo = WATERFILL_MU_LO;
    if total(lo) < budget {
        return Err(Error::Numerical(format!(
            "waterfill_budget: bracket does not contain the level (total power {} at mu = {lo:e} is below budget {budget})",
            total(lo)
        )));
    }
    let mut hi: f64 = 1.0;
    let mut doublings = 0;
    while total(hi) >= budget {
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return Err(Error::Numerical("waterfill_budget: could not bracket the waterfilling level".into()));
        }
    }
    for _ in 0..WATERFILL_MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        if total(mid) >= budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let mut mu = 0.5 * (lo + hi);

    // Closed form on the active set: Σ_S √(w/γ)/√μ − Σ_S 1/γ = budget.
    let active: Vec<usize> = (0..weights.len()).filter(|&i| level(weights[i], gains[i], mu) > 0.0).collect();
    if !active.is_empty() {
        let num = budget + active.iter().map(|&i| 1.0 / gains[i]).sum::<f64>();
        let den: f64 = active.iter().map(|&i| (weights[i] / gains[i]).sqrt()).sum();
        let exact = (den / num).powi(2);
        let consistent = (0..weights.len()).all(|i| {
            let thresh = weights[i] * gains[i];
            if active.contains(&i) {
                exact < thresh
            } else {
                exact >= thresh
            }
        });
        if consistent && exact > 0.0 {
            mu = exact;
        }
    }
    let levels: Vec<f64> = weights.iter().zip(gains).map(|(&w, &g)| level(w, g, mu)).collect();
    let sum: f64 = levels.iter().sum();
    if (sum - budget).abs() > 1e-9 * budget.max(1.0) {
        return Err(Error::Numerical(format!("waterfill_budget: allocated {sum} against budget {budget}")));
    }
    Ok(PowerAllocation { levels, multiplier: mu })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm3() -> CMatrix {
        CMatrix::from_row_slice(
            3,
            3,
            &[
                cplx(2.0, 0.0),
                cplx(0.5, -0.3),
                cplx(-0.1, 0.7),
                cplx(0.5, 0.3),
                cplx(1.0, 0.0),
                cplx(0.2, 0.2),
                cplx(-0.1, -0.7),
                cplx(0.2, -0.2),
                cplx(-0.5, 0.0),
            ],
        )
    }

    #[test]
    fn identity_eigs() {
        let e = hermitian_top_eigs(&identity(2), 2).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let gram = e.basis.adjoint() * &e.basis;
        assert!(frobenius(&(gram - identity(2))) < 1e-12);
    }

    #[test]
    fn diagonal_top_eig() {
        let e = hermitian_top_eigs(&diag_real(&[4.0, 1.0]), 1).unwrap();
        assert!((e.values[0] - 4.0).abs() < 1e-14);
        assert!((e.basis[(0, 0)] - cplx(1.0, 0.0)).norm() < 1e-14);
        assert!(e.basis[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn eigs_reject_non_hermitian() {
        let mut a = identity(2);
        a[(0, 1)] = cplx(1.0, 0.0);
        assert!(matches!(hermitian_top_eigs(&a, 1), Err(Error::Contract(_))));
        assert!(matches!(hermitian_top_eigs(&identity(2), 3), Err(Error::Contract(_))));
    }

    #[test]
    fn bottom_eigs_ascending() {
        let e = hermitian_bottom_eigs(&diag_real(&[3.0, 1.0, 2.0]), 2).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0]);
        assert!((e.basis[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigs_reconstruct() {
        let a = herm3();
        let e = hermitian_eigs(&a).unwrap();
        let rec = &e.basis * diag_real(&e.values) * e.basis.adjoint();
        assert!(frobenius(&(rec - &a)) <= 1e-12 * frobenius(&a));
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn inv_sqrt_cases() {
        assert!(frobenius(&(psd_inv_sqrt(&identity(3)).unwrap() - identity(3))) < 1e-14);
        let s = psd_inv_sqrt(&diag_real(&[4.0, 9.0])).unwrap();
        assert!(frobenius(&(s - diag_real(&[0.5, 1.0 / 3.0]))) < 1e-14);
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        match psd_inv_sqrt(&diag_real(&[1.0, 0.0])) {
            Err(Error::Singular { min_eigenvalue, .. }) => assert_eq!(min_eigenvalue, 0.0),
            other => panic!("expected singular error, got {other:?}"),
        }
        assert!(matches!(psd_inv_sqrt(&diag_real(&[1.0, -2.0])), Err(Error::Singular { .. })));
    }

    #[test]
    fn svd_identity_and_rank_one() {
        let s = thin_svd(&identity(2), 2).unwrap();
        assert!((s.singular[0] - 1.0).abs() < 1e-14 && (s.singular[1] - 1.0).abs() < 1e-14);

        let x = CMatrix::from_column_slice(2, 1, &[cplx(2.0, 0.0), cplx(0.0, 0.0)]);
        let y = CMatrix::from_column_slice(3, 1, &[cplx(0.6, 0.0), cplx(0.0, 0.8), cplx(0.0, 0.0)]);
        let s = thin_svd(&(&x * y.adjoint()), 1).unwrap();
        assert!((s.singular[0] - 2.0).abs() < 1e-13);
        assert!(matches!(thin_svd(&identity(2), 3), Err(Error::Contract(_))));
    }

    #[test]
    fn waterfill_eval_examples() {
        assert_eq!(waterfill_eval(&[4.0], &[1.0], 1.0).unwrap().levels, vec![1.0]);
        assert_eq!(waterfill_eval(&[1.0], &[0.5], 4.0).unwrap().levels, vec![0.0]);
        assert_eq!(waterfill_eval(&[1.0], &[4.0], 1.0).unwrap().levels, vec![0.25]);
        assert!(matches!(waterfill_eval(&[1.0], &[0.0], 1.0), Err(Error::Contract(_))));
        assert!(matches!(waterfill_eval(&[1.0, 2.0], &[1.0], 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn waterfill_budget_examples() {
        let p = waterfill_budget(&[1.0, 1.0], &[1.0, 1.0], 2.0).unwrap();
        assert!((p.multiplier - 0.25).abs() < 1e-15);
        assert!(p.levels.iter().all(|&l| (l - 1.0).abs() < 1e-14));

        let p = waterfill_budget(&[1.0, 1.0], &[4.0, 1.0], 1.0).unwrap();
        assert!((p.multiplier - 4.0 / 9.0).abs() < 1e-14);
        assert!(p.levels.iter().all(|&l| (l - 0.5).abs() < 1e-14));

        let p = waterfill_budget(&[3.0, 0.2], &[2.0, 5.0], 0.0).unwrap();
        assert_eq!(p.levels, vec![0.0, 0.0]);
        assert!(p.multiplier.is_infinite());
    }

    #[test]
    fn waterfill_budget_all_zero_weights_fails() {
        assert!(matches!(waterfill_budget(&[0.0, 0.0], &[1.0, 1.0], 1.0), Err(Error::Numerical(_))));
    }
}
