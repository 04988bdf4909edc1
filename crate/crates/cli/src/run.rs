//! Run configuration, output emission and the manifest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Fully-resolved run parameters (after flags, environment and defaults).
#[derive(Debug, Clone)]
pub struct Resolved {
    pub seed: u64,
    pub threads: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub emit_plot_script: bool,
}

/// What a command hands back: a JSON report (always printed) and named
/// array files (written when an output directory was given).
pub struct Outputs {
    pub report: serde_json::Value,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn report_only(report: serde_json::Value) -> Self {
        Self {
            report,
            files: Vec::new(),
        }
    }
}

/// Serialized configuration: replaying it reproduces the outputs bitwise.
#[derive(Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub command: super::commands::Module,
    pub seed: u64,
    pub format: Format,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, stosem::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| stosem::Error::Domain(format!("bad config file: {e}")))
    }
}

pub fn error_kind(e: &stosem::Error) -> &'static str {
    use stosem::Error::*;
    match e {
        ShapeMismatch { .. }
        | Domain(_)
        | DegenerateInput(_)
        | Validation { .. }
        | Saturation(_)
        | Reducible { .. }
        | AssumptionViolated { .. }
        | CriticalCase(_) => "model",
        _ => "numerical",
    }
}

pub fn error_exit_code(e: &stosem::Error) -> u8 {
    match error_kind(e) {
        "model" => 3,
        _ => 4,
    }
}

pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({"error": {"kind": kind, "message": message}}).to_string()
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Prints the report and, with an output directory, writes the array files,
/// the resolved configuration and a digest manifest (manifest last, via
/// atomic rename).
pub fn emit(
    command: &super::commands::Module,
    resolved: &Resolved,
    outputs: Outputs,
) -> Result<(), stosem::Error> {
    println!("{}", serde_json::to_string(&outputs.report).unwrap());
    let Some(dir) = &resolved.out else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;

    let mut entries = Vec::new();
    for (name, bytes) in &outputs.files {
        std::fs::write(dir.join(name), bytes)?;
        entries.push(serde_json::json!({"name": name, "sha256": sha256_hex(bytes)}));
    }

    // report as a file too, so replays can be compared wholesale
    let report_bytes = serde_json::to_vec_pretty(&outputs.report).unwrap();
    std::fs::write(dir.join("report.json"), &report_bytes)?;
    entries.push(serde_json::json!({
        "name": "report.json",
        "sha256": sha256_hex(&report_bytes)
    }));

    let config = RunConfig {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.clone(),
        seed: resolved.seed,
        format: resolved.format,
    };
    let config_bytes = serde_json::to_vec_pretty(&config).unwrap();
    std::fs::write(dir.join("config.json"), &config_bytes)?;

    if resolved.emit_plot_script {
        let mut script = String::from(
            "#!/usr/bin/env python3\n# Quick-look plots for the CSV outputs in this directory.\nimport csv\nimport sys\n\nimport matplotlib.pyplot as plt\n\nfiles = [\n",
        );
        for (name, _) in &outputs.files {
            if name.ends_with(".csv") {
                script.push_str(&format!("    {name:?},\n"));
            }
        }
        script.push_str(
            "]\nfor name in files:\n    with open(name) as fh:\n        rows = list(csv.reader(fh))\n    header, data = rows[0], rows[1:]\n    xs = [float(r[0]) for r in data]\n    ys = [float(r[-1]) for r in data]\n    plt.figure()\n    plt.plot(xs, ys)\n    plt.xlabel(header[0])\n    plt.ylabel(header[-1])\n    plt.title(name)\nplt.show()\n",
        );
        std::fs::write(dir.join("plot.py"), script)?;
    }

    // wall time lives only in the manifest, which is metadata: replay
    // compares the output digests, not the manifest bytes
    let manifest = serde_json::json!({
        "config_sha256": sha256_hex(&config_bytes),
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_ms": now_millis(),
        "outputs": entries,
    });
    let tmp = dir.join("manifest.json.tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&serde_json::to_vec_pretty(&manifest).unwrap())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, dir.join("manifest.json"))?;
    Ok(())
}

fn now_millis() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// CSV column writer with the crate-wide conventions: `.` decimal
/// separator, newline-terminated rows, UTF-8.
pub fn csv_table(header: &str, rows: impl Iterator<Item = String>) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out.into_bytes()
}
