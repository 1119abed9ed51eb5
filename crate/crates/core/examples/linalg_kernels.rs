//! Hermitian eigendecomposition, thin SVD and the two waterfilling forms.

use netmimo::linalg::{cplx, diag_real, frobenius, hermitian_eigs, thin_svd, waterfill_budget, waterfill_eval, CMatrix};

fn main() -> netmimo::Result<()> {
    let a = CMatrix::from_row_slice(2, 2, &[cplx(2.0, 0.0), cplx(0.0, 1.0), cplx(0.0, -1.0), cplx(2.0, 0.0)]);
    let eig = hermitian_eigs(&a)?;
    println!("eigenvalues of [[2, i], [-i, 2]]: {:?}", eig.values);

    let h = CMatrix::from_fn(3, 2, |i, j| cplx((i + 2 * j) as f64, (i as f64 - j as f64) * 0.5));
    let svd = thin_svd(&h, 2)?;
    let rebuilt = &svd.left * diag_real(&svd.singular) * svd.right.adjoint();
    println!("singular values {:?}, reconstruction error {:.1e}", svd.singular, frobenius(&(rebuilt - &h)));

    // Unit weights, gains 4 and 1: powers √(w/(μγ)) − 1/γ.
    let fixed = waterfill_eval(&[1.0, 1.0], &[4.0, 1.0], 0.25)?;
    println!("level μ = 0.25: powers {:?}", fixed.levels);
    let budget = waterfill_budget(&[1.0, 1.0], &[4.0, 1.0], 1.0)?;
    println!("budget 1: powers {:?} (total {:.6}) at μ = {:.6}", budget.levels, budget.total(), budget.multiplier);
    Ok(())
}
