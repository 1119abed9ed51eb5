//! Partial base-station cooperation rewritten as an interference channel with
//! generalized constraints, plus the JSON problem format.

use netmimo::linalg::{cplx, CMatrix};
use netmimo::model::{build_ifc_gc, constraint_usage, IfcGcProblem, PartialCooperationSystem};

fn main() -> netmimo::Result<()> {
    // Two stations and two users, all with two antennas. User 0 is served by
    // both stations, user 1 by station 1 alone.
    let ch = |seed: f64| CMatrix::from_fn(2, 2, |i, j| cplx((seed + i as f64).cos(), (seed * (j + 1) as f64).sin()));
    let sys = PartialCooperationSystem::new(2, 2, vec![vec![0, 1], vec![1]], vec![1.0, 2.0], vec![vec![ch(0.3), ch(1.1)], vec![ch(2.0), ch(0.7)]], vec![2, 1])?;
    let prob = build_ifc_gc(&sys)?;
    for k in 0..prob.num_users() {
        println!("user {k}: {} stacked transmit antennas, channel from user 0's transmitter {:?}", prob.tx_dim(k), prob.channels[k][0].shape());
        for m in 0..prob.num_constraints() {
            let phi = &prob.weight_matrices[k][m];
            let diag: Vec<f64> = (0..phi.nrows()).map(|i| phi[(i, i)].re).collect();
            println!("  Φ[{k}][{m}] diagonal {diag:?}");
        }
    }

    // Unit-norm columns on every stacked antenna: station powers add up per block.
    let b: Vec<CMatrix> = (0..2).map(|k| CMatrix::from_element(prob.tx_dim(k), prob.streams[k], cplx(0.5, 0.0))).collect();
    println!("usage per station {:?} against budgets {:?}", constraint_usage(&prob, &b)?, prob.budgets);

    let json = prob.to_json();
    let back = IfcGcProblem::from_json(&json)?;
    println!("JSON round trip: {} bytes, identical: {}", json.len(), back == prob);
    Ok(())
}
