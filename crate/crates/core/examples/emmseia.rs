//! Alternating MMSE equalizers and constrained MMSE precoders, with the KKT
//! multipliers of the per-station budgets.

use netmimo::algorithms::{emmseia_solve, AlgorithmConfig, AlgorithmKind};
use netmimo::model::{build_ifc_gc, constraint_usage, sum_rate};
use netmimo::scenario::{realize_seeded, ScenarioConfig};

fn main() -> netmimo::Result<()> {
    let net = realize_seeded(&ScenarioConfig { seed: 21, ..ScenarioConfig::default() })?;
    let prob = build_ifc_gc(&net.system)?;
    let sol = emmseia_solve(&prob, &AlgorithmConfig::new(AlgorithmKind::Emmseia))?;

    let first = sol.trace.first().expect("one round at least");
    let last = sol.trace.last().expect("one round at least");
    println!("WSMSE {:.8} -> {:.8} over {} rounds (converged: {})", first.wsmse, last.wsmse, sol.iterations, sol.converged);
    let usage = constraint_usage(&prob, &sol.precoders)?;
    for (m, (u, mu)) in usage.iter().zip(&sol.multipliers).enumerate() {
        println!("  station {m}: usage {u:.5} of {}, multiplier {mu:.5}, slackness {:.2e}", prob.budgets[m], mu * (prob.budgets[m] - u));
    }
    println!("sum rate {:.4} bit/channel use", sum_rate(&prob, &sol.precoders)?);
    Ok(())
}
