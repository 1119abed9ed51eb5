//! Monte Carlo trials over a sweep.

use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::algorithms::{run_algorithm, AlgorithmKind};
use crate::error::{Error, Result};
use crate::model::{build_ifc_gc, max_violation, sum_rate, wsmse_objective, IfcGcProblem, PartialCooperationSystem};
use crate::scenario::realize;

use super::config::SweepSpec;

/// Outcome of one algorithm on one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub value_index: usize,
    pub value: f64,
    pub trial: usize,
    pub algorithm: AlgorithmKind,
    /// Sum rate over the cluster divided by the number of cluster cells, in
    /// bits per channel use.
    pub per_cell_sum_rate: f64,
    pub wsmse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_constraint_violation: f64,
    /// Seconds spent in the solver.
    pub wall_time: f64,
    /// Set when the scenario or the solver failed; the numeric fields are NaN.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    fn failure(spec: &SweepSpec, value_index: usize, trial: usize, algorithm: AlgorithmKind, err: &Error) -> Self {
        log::warn!("{} = {}, trial {trial}, {algorithm}: {err}", spec.variable.name(), spec.values[value_index]);
        Self {
            value_index,
            value: spec.values[value_index],
            trial,
            algorithm,
            per_cell_sum_rate: f64::NAN,
            wsmse: f64::NAN,
            iterations: 0,
            converged: false,
            max_constraint_violation: f64::NAN,
            wall_time: 0.0,
            error: Some(err.to_string()),
        }
    }
}

/// Generator of trial `trial` at sweep point `value_index`: the master seed
/// selects the key and the pair selects an independent stream, so every trial
/// sees the same channels however the sweep is scheduled. Paired sweeps pass
/// `value_index = 0` for every value.
pub fn trial_rng(master_seed: u64, value_index: usize, trial: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(((value_index as u64) << 32) | trial as u64);
    rng
}

struct Realized {
    system: PartialCooperationSystem,
    problem: IfcGcProblem,
    cells: usize,
}

fn realize_trial(spec: &SweepSpec, value_index: usize, trial: usize) -> Result<Realized> {
    let scenario = spec.scenario_at(value_index)?;
    let net = realize(&scenario, &mut trial_rng(spec.master_seed, spec.stream_value_index(value_index), trial))?;
    let problem = build_ifc_gc(&net.system)?;
    Ok(Realized { system: net.system, problem, cells: scenario.cluster_size })
}

fn solve(spec: &SweepSpec, net: &Realized, value_index: usize, trial: usize, algorithm: AlgorithmKind) -> TrialRecord {
    let start = Instant::now();
    let outcome = run_algorithm(&net.system, &net.problem, &spec.algorithm_config(algorithm)).and_then(|sol| {
        let rate = sum_rate(&net.problem, &sol.precoders)?;
        let wsmse = wsmse_objective(&net.problem, &sol.precoders, &sol.equalizers)?;
        let violation = max_violation(&net.problem, &sol.precoders)?;
        Ok((sol, rate, wsmse, violation))
    });
    let wall_time = start.elapsed().as_secs_f64();
    match outcome {
        Ok((sol, rate, wsmse, violation)) => TrialRecord {
            value_index,
            value: spec.values[value_index],
            trial,
            algorithm,
            per_cell_sum_rate: rate / net.cells as f64,
            wsmse,
            iterations: sol.iterations,
            converged: sol.converged,
            max_constraint_violation: violation,
            wall_time,
            error: None,
        },
        Err(e) => TrialRecord::failure(spec, value_index, trial, algorithm, &e),
    }
}

/// Runs one algorithm on one trial.
pub fn run_trial(spec: &SweepSpec, value_index: usize, trial: usize, algorithm: AlgorithmKind) -> TrialRecord {
    match realize_trial(spec, value_index, trial) {
        Ok(net) => solve(spec, &net, value_index, trial, algorithm),
        Err(e) => TrialRecord::failure(spec, value_index, trial, algorithm, &e),
    }
}

/// All algorithms of the sweep on one realization.
fn run_point(spec: &SweepSpec, value_index: usize, trial: usize) -> Vec<TrialRecord> {
    match realize_trial(spec, value_index, trial) {
        Ok(net) => spec.algorithms.iter().map(|&a| solve(spec, &net, value_index, trial, a)).collect(),
        Err(e) => spec.algorithms.iter().map(|&a| TrialRecord::failure(spec, value_index, trial, a, &e)).collect(),
    }
}

/// Every (value, trial, algorithm) combination, ordered by value, then trial,
/// then the configured algorithm order. `workers` bounds the thread pool;
/// `None` uses one thread per core.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.values.len()).flat_map(|v| (0..spec.trials).map(move |t| (v, t))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let nested: Vec<Vec<TrialRecord>> = pool.install(|| jobs.par_iter().map(|&(v, t)| run_point(spec, v, t)).collect());
    Ok(nested.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::parse_config_str;
    use rand::Rng;

    fn spec(text_extra: &str) -> SweepSpec {
        let text = format!(
            "[sweep]\nvariable = \"snr_db\"\nvalues = [10, 20]\ntrials = 3\nalgorithms = [\"dmmse\", \"pwf\"]\nmaster_seed = 7\n[scenario]\nnt = 2\nnr = 2\n{text_extra}[algorithm]\nobjective = \"srm\"\n"
        );
        parse_config_str(&text).unwrap()
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: u64 = trial_rng(1, 0, 1).random();
        let b: u64 = trial_rng(1, 1, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, trial_rng(1, 0, 1).random::<u64>());
    }

    #[test]
    fn paired_values_share_drops() {
        let drops = |s: &SweepSpec, v: usize| {
            realize(&s.scenario_at(v).unwrap(), &mut trial_rng(s.master_seed, s.stream_value_index(v), 2)).unwrap().geometry.user_positions
        };
        let paired = spec("");
        assert_eq!(drops(&paired, 0), drops(&paired, 1));
        let text = "[sweep]\nvariable = \"snr_db\"\nvalues = [10, 20]\ntrials = 3\npaired = false\n";
        let unpaired = parse_config_str(text).unwrap();
        assert_ne!(drops(&unpaired, 0), drops(&unpaired, 1));
    }

    #[test]
    fn cardinality_and_worker_independence() {
        let s = spec("");
        let serial = run_sweep(&s, Some(1)).unwrap();
        assert_eq!(serial.len(), 12);
        let parallel = run_sweep(&s, Some(3)).unwrap();
        let strip = |r: &[TrialRecord]| r.iter().map(|x| TrialRecord { wall_time: 0.0, ..x.clone() }).collect::<Vec<_>>();
        assert_eq!(strip(&serial), strip(&parallel));
        assert!(serial.iter().all(|r| !r.failed() && r.per_cell_sum_rate > 0.0));
    }

    #[test]
    fn single_cell_rate_is_per_cell_rate() {
        let s = spec("cluster_size = 1\ncooperation = 1\n");
        let r = run_trial(&s, 1, 0, AlgorithmKind::Dmmse);
        let net = realize_trial(&s, 1, 0).unwrap();
        let sol = run_algorithm(&net.system, &net.problem, &s.algorithm_config(AlgorithmKind::Dmmse)).unwrap();
        assert_eq!(r.per_cell_sum_rate, sum_rate(&net.problem, &sol.precoders).unwrap());
        assert!(r.max_constraint_violation <= 0.01);
    }
}
