//! One link under several trace constraints: the closed-form eigenmode solution
//! for a single sum-power budget, and the dual subgradient method for
//! per-antenna budgets.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use netmimo::linalg::{cplx, diag_real, identity, CMatrix};
use netmimo::single_user::{kkt_residual, solve_multi_constraint, solve_single_constraint, DualConfig, SingleUserProblem};

fn gaussian(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let (re, im): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        cplx(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

fn main() -> netmimo::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let h = gaussian(&mut rng, 2, 4);
    let weights = vec![2.0, 1.0];

    let sum_power = SingleUserProblem::new(h.clone(), identity(2), vec![identity(4)], vec![4.0], weights.clone())?;
    let eig = solve_single_constraint(&sum_power)?;
    println!("sum power 4: gains {:.4?}, powers {:.4?}, WSMSE {:.6}", eig.gains, eig.levels, eig.wsmse(&weights));

    // Each antenna limited to one unit.
    let per_antenna: Vec<CMatrix> = (0..4).map(|i| diag_real(&(0..4).map(|j| f64::from(u8::from(i == j))).collect::<Vec<_>>())).collect();
    let p = SingleUserProblem::new(h, identity(2), per_antenna, vec![1.0; 4], weights)?;
    let sol = solve_multi_constraint(&p, &DualConfig::default())?;
    println!("per-antenna budgets: WSMSE {:.6} after {} multiplier updates (converged: {})", sol.wsmse, sol.iterations, sol.converged);
    println!("  usage {:.4?}", sol.usage);
    println!("  multipliers {:.4?}", sol.multipliers);
    let last = sol.history.last().expect("at least one iterate");
    println!("  dual bound {:.6} <= primal {:.6}", last.dual_value, sol.wsmse);
    println!("  KKT residual {:.2e}", kkt_residual(&p, &sol.precoder, &sol.multipliers)?);
    Ok(())
}
