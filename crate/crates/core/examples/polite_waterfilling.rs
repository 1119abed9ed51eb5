//! Polite waterfilling: forward covariances, dual-network covariances and the
//! per-station multipliers at the fixed point.

use netmimo::algorithms::{pwf_solve, AlgorithmConfig, AlgorithmKind};
use netmimo::linalg::{hermitian_eigs, real_trace};
use netmimo::model::{build_ifc_gc, constraint_usage, user_rates};
use netmimo::scenario::{realize_seeded, ScenarioConfig};

fn main() -> netmimo::Result<()> {
    let net = realize_seeded(&ScenarioConfig { seed: 21, ..ScenarioConfig::default() })?;
    let prob = build_ifc_gc(&net.system)?;
    let pwf = pwf_solve(&prob, &AlgorithmConfig::new(AlgorithmKind::Pwf))?;
    let sol = &pwf.solution;

    println!("{} iterations, converged: {}, level μ = {:.6}", sol.iterations, sol.converged, pwf.level);
    for (k, (s, d)) in pwf.covariances.iter().zip(&pwf.dual_covariances).enumerate() {
        let eig = hermitian_eigs(s)?;
        let nonzero: Vec<f64> = eig.values.iter().copied().filter(|v| *v > 1e-12).collect();
        println!("user {k}: transmit power {:.5}, eigenvalues {nonzero:.5?}, dual power {:.5}", real_trace(s), real_trace(d));
    }
    println!("multipliers {:.5?}", sol.multipliers);
    println!("usage {:.5?}", constraint_usage(&prob, &sol.precoders)?);
    let rates = user_rates(&prob, &sol.precoders)?;
    println!("user rates {rates:.4?}, total {:.4}", rates.iter().sum::<f64>());
    Ok(())
}
