//! Interference-leakage minimization with equal power splits at every station.

use netmimo::algorithms::{min_leakage_solve, AlgorithmConfig, AlgorithmKind};
use netmimo::model::{build_ifc_gc, sum_rate};
use netmimo::scenario::{realize_seeded, ScenarioConfig};

fn main() -> netmimo::Result<()> {
    // One stream per user leaves room to align interference.
    let cfg = ScenarioConfig { streams: 1, seed: 8, ..ScenarioConfig::default() };
    let net = realize_seeded(&cfg)?;
    let sol = min_leakage_solve(&net.system, &AlgorithmConfig::new(AlgorithmKind::MinLeakage))?;

    println!("leakage after each half-step:");
    for (i, l) in sol.leakage_trace.iter().enumerate().take(12) {
        println!("  {i:3}  {l:.6e}");
    }
    println!("final leakage {:.6e} after {} iterations", sol.leakage_trace.last().unwrap(), sol.solution.iterations);
    println!("largest orthonormality defect {:.1e}", sol.max_orthonormality_defect);
    let prob = build_ifc_gc(&net.system)?;
    println!("sum rate with MMSE receivers {:.4}", sum_rate(&prob, &sol.solution.precoders)?);
    Ok(())
}
