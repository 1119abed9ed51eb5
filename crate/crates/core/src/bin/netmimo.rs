use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use netmimo::algorithms::AlgorithmKind;
use netmimo::experiment::output::{format_real, read_records_file, write_cdf, write_records_file, write_summary};
use netmimo::experiment::{cdf_series, parse_config, run_sweep, summarize};

/// Monte Carlo sweeps of multiuser beamforming on cellular clusters.
#[derive(Parser)]
#[command(name = "netmimo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep in a TOML file and write records.csv, summary.csv and cdf.csv.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Worker threads (default: one per core).
        #[arg(long)]
        workers: Option<usize>,
        /// Comma-separated algorithms overriding the file, e.g. `dmmse,pwf`.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<AlgorithmKind>>,
        /// Add a wall_time column to records.csv (breaks byte-identical reruns).
        #[arg(long)]
        wall_time: bool,
    },
    /// Empirical CDFs and means of per-cell rates from a records file.
    Cdf {
        records: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

enum Outcome {
    Clean,
    PartialFailure,
}

/// Prints the summary table. A closed pipe (e.g. `| head`) ends the output
/// quietly.
fn print_summary(records: &[netmimo::experiment::TrialRecord]) {
    let mut out = std::io::stdout().lock();
    let mut emit = || -> std::io::Result<()> {
        writeln!(out, "value,algorithm,completed,failed,mean_rate,std_rate")?;
        for row in summarize(records) {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                format_real(row.value),
                row.algorithm,
                row.completed,
                row.failed,
                format_real(row.mean_rate),
                format_real(row.std_rate)
            )?;
        }
        out.flush()
    };
    if let Err(e) = emit() {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            log::warn!("cannot print summary: {e}");
        }
    }
}

fn run(
    config: &Path,
    seed: Option<u64>,
    out_dir: &Path,
    workers: Option<usize>,
    algorithms: Option<Vec<AlgorithmKind>>,
    wall_time: bool,
) -> netmimo::Result<Outcome> {
    let mut spec = parse_config(config)?;
    if let Some(s) = seed {
        spec.master_seed = s;
    }
    if let Some(a) = algorithms {
        spec.algorithms = a;
    }
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let records = run_sweep(&spec, workers)?;
    write_records_file(&out_dir.join("records.csv"), &records, wall_time)?;
    write_summary(&out_dir.join("summary.csv"), &summarize(&records))?;
    write_cdf(&out_dir.join("cdf.csv"), &cdf_series(&records))?;
    print_summary(&records);
    let failed = records.iter().filter(|r| r.failed()).count();
    for row in summarize(&records).iter().filter(|r| r.all_failed()) {
        log::error!("every trial failed at {} = {} for {}", spec.variable.name(), format_real(row.value), row.algorithm);
    }
    if failed > 0 {
        log::warn!("{failed} of {} runs failed", records.len());
        return Ok(Outcome::PartialFailure);
    }
    Ok(Outcome::Clean)
}

fn cdf(records: &Path, out_dir: &Path) -> netmimo::Result<Outcome> {
    let records = read_records_file(records)?;
    std::fs::create_dir_all(out_dir)?;
    write_cdf(&out_dir.join("cdf.csv"), &cdf_series(&records))?;
    print_summary(&records);
    Ok(if records.iter().any(|r| r.failed()) { Outcome::PartialFailure } else { Outcome::Clean })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out_dir, workers, algorithms, wall_time } => run(&config, seed, &out_dir, workers, algorithms, wall_time),
        Command::Cdf { records, out_dir } => cdf(&records, &out_dir),
    };
    match result {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::PartialFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
