//! The `netmimo` binary: output files and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn netmimo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netmimo")).args(args).arg("--out-dir").arg(dir).output().unwrap()
}

const SMALL: &str = "\
[sweep]
variable = \"snr_db\"
values = [10, 20]
trials = 2
algorithms = [\"dmmse\", \"pwf\"]
master_seed = 1

[scenario]
nt = 2
nr = 2
cooperation = 1

[algorithm]
objective = \"srm\"
";

#[test]
fn run_writes_three_tables_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    std::fs::write(&config, SMALL).unwrap();
    let out = netmimo(&["run", config.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 2 * 2 * 2);
    assert!(records.starts_with("value,trial,algorithm,per_cell_sum_rate,"));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4);
    assert!(dir.path().join("cdf.csv").exists());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("value,algorithm,completed,failed,mean_rate,std_rate"));

    let again = tempfile::tempdir().unwrap();
    let cdf = netmimo(&["cdf", dir.path().join("records.csv").to_str().unwrap()], again.path());
    assert_eq!(cdf.status.code(), Some(0));
    let rows = std::fs::read_to_string(again.path().join("cdf.csv")).unwrap();
    // Two points and a mean row per (value, algorithm).
    assert_eq!(rows.lines().count(), 1 + 4 * 3);
}

#[test]
fn invalid_config_exits_with_one_and_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, SMALL.replace("cooperation = 1", "cooperation = 4")).unwrap();
    let out = netmimo(&["run", config.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 11") && err.contains("cooperation"), "{err}");
    assert!(!dir.path().join("records.csv").exists());

    let missing = netmimo(&["run", dir.path().join("absent.toml").to_str().unwrap()], dir.path());
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn failed_records_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.csv");
    std::fs::write(
        &records,
        "value,trial,algorithm,per_cell_sum_rate,wsmse,iterations,converged,max_constraint_violation,error\n\
         20,0,dmmse,5.5,2,10,true,0,\n\
         20,1,dmmse,nan,nan,0,false,nan,numerical failure: singular\n",
    )
    .unwrap();
    let out = netmimo(&["cdf", records.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("20,dmmse,1,1,5.5,0"), "{stdout}");
}
