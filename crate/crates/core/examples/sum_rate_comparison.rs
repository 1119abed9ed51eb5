//! All four algorithms on the same realizations, with the diagonal MMSE and
//! alternating MMSE designs run in sum-rate mode (`W_k = E_k⁻¹`).

use netmimo::algorithms::{run_algorithm, AlgorithmConfig, AlgorithmKind, Objective};
use netmimo::model::{build_ifc_gc, max_violation, sum_rate};
use netmimo::scenario::{realize_seeded, ScenarioConfig};

fn main() -> netmimo::Result<()> {
    let trials = 5;
    let mut totals = [0.0; 4];
    for seed in 0..trials {
        let cfg = ScenarioConfig { seed, ..ScenarioConfig::default() };
        let net = realize_seeded(&cfg)?;
        let prob = build_ifc_gc(&net.system)?;
        print!("seed {seed}:");
        for (i, kind) in AlgorithmKind::ALL.into_iter().enumerate() {
            let objective = if kind == AlgorithmKind::MinLeakage { Objective::Wsmmse } else { Objective::Srm };
            let sol = run_algorithm(&net.system, &prob, &AlgorithmConfig::new(kind).with_objective(objective))?;
            let rate = sum_rate(&prob, &sol.precoders)? / cfg.cluster_size as f64;
            assert!(max_violation(&prob, &sol.precoders)? <= 0.01);
            totals[i] += rate;
            print!("  {kind} {rate:.3}");
        }
        println!();
    }
    println!("mean per-cell rate:");
    for (kind, total) in AlgorithmKind::ALL.iter().zip(totals) {
        println!("  {kind:12} {:.4}", total / trials as f64);
    }
    Ok(())
}
