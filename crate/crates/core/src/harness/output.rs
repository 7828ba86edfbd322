//! Run artifacts: manifest, report, and per-replica CSV.
//!
//! The report and the CSV are deterministic functions of the config and the
//! master seed, byte for byte, whatever the thread count; everything
//! volatile (wall time, thread count, package version) goes in the manifest
//! so reruns can be compared by hashing the other two files.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentConfig, HarnessError};

pub struct RunArtifacts {
    pub report: serde_json::Value,
    pub csv_header: &'static str,
    pub csv_rows: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    name: &'a str,
    master_seed: u64,
    replicas: usize,
    threads: usize,
    wall_seconds: f64,
    version: &'a str,
    config: &'a ExperimentConfig,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, bytes)
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

/// Writes `manifest.json`, `report.json`, and `replicas.csv` under
/// `out_dir`, creating the directory if needed.
pub fn write_run(
    out_dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    threads: usize,
    wall_seconds: f64,
    artifacts: &RunArtifacts,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|source| HarnessError::Io { path: out_dir.to_path_buf(), source })?;

    let manifest = Manifest {
        command,
        name: &config.name,
        master_seed: config.master_seed,
        replicas: config.replicas,
        threads,
        wall_seconds,
        version: env!("CARGO_PKG_VERSION"),
        config,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&out_dir.join("manifest.json"), format!("{manifest_json}\n").as_bytes())?;

    let report_json =
        serde_json::to_string_pretty(&artifacts.report).expect("report serializes");
    write_file(&out_dir.join("report.json"), format!("{report_json}\n").as_bytes())?;

    let mut csv = String::with_capacity(
        artifacts.csv_header.len() + 1 + artifacts.csv_rows.iter().map(|r| r.len() + 1).sum::<usize>(),
    );
    csv.push_str(artifacts.csv_header);
    csv.push('\n');
    for row in &artifacts.csv_rows {
        csv.push_str(row);
        csv.push('\n');
    }
    write_file(&out_dir.join("replicas.csv"), csv.as_bytes())?;
    Ok(())
}

/// Default output directory for a run: the config's `out_dir` if set, else
/// `runs/<name>/<command>` under the working directory.
pub fn default_out_dir(config: &ExperimentConfig, command: &str) -> PathBuf {
    match &config.out_dir {
        Some(dir) => dir.clone(),
        None => PathBuf::from("runs").join(&config.name).join(command),
    }
}
