//! Weighted sum-MSE design with per-station power budgets on a cellular
//! cluster. The solver drives every MSE matrix diagonal.

use netmimo::algorithms::dmmse::{dmmse_solve, mse_offdiagonal_ratio};
use netmimo::algorithms::{AlgorithmConfig, AlgorithmKind};
use netmimo::model::{build_ifc_gc, constraint_usage, sum_rate};
use netmimo::scenario::{realize_seeded, ScenarioConfig};

fn main() -> netmimo::Result<()> {
    let net = realize_seeded(&ScenarioConfig { seed: 21, ..ScenarioConfig::default() })?;
    let prob = build_ifc_gc(&net.system)?;
    let sol = dmmse_solve(&prob, &AlgorithmConfig::new(AlgorithmKind::Dmmse))?;

    println!("outer  inner  WSMSE         max violation");
    let step = (sol.trace.len() / 10).max(1);
    for t in sol.trace.iter().step_by(step).chain(sol.trace.last()) {
        println!("{:5}  {:5}  {:.10}  {:.2e}", t.outer, t.inner, t.wsmse, t.max_violation);
    }
    println!("converged: {}", sol.converged);
    println!("multipliers {:.5?}", sol.multipliers);
    println!("usage {:.5?} of budgets {:?}", constraint_usage(&prob, &sol.precoders)?, prob.budgets);
    let ratios: Vec<String> = mse_offdiagonal_ratio(&prob, &sol.precoders)?.iter().map(|r| format!("{r:.1e}")).collect();
    println!("off-diagonal MSE mass relative to each E_k: [{}]", ratios.join(", "));
    println!("sum rate {:.4} bit/channel use", sum_rate(&prob, &sol.precoders)?);
    Ok(())
}
