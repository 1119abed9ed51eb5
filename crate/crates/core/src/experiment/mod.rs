//! Monte Carlo sweeps over cellular scenarios: configuration files, trial
//! execution, rate statistics and CSV output.

pub mod config;
pub mod output;
pub mod stats;
pub mod sweep;

pub use config::{parse_config, parse_config_str, SweepSpec, SweepVariable};
pub use stats::{cdf_series, compute_cdf, mean, summarize, CdfPoint, CdfSeries, SummaryRow};
pub use sweep::{run_sweep, run_trial, trial_rng, TrialRecord};
