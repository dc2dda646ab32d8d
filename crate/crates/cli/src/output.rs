//! Output-file helpers: every command writes its table as CSV plus a JSON
//! sidecar (`<out>.meta.json`) embedding the command, config, and seed, so
//! results stay reproducible from the files alone.

use pushgp::{Error, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

pub fn write_sidecar<C: Serialize>(out: &Path, command: &str, config: &C) -> Result<()> {
    let body = serde_json::json!({
        "command": command,
        "config": config,
        "tool": format!("pushgp {}", env!("CARGO_PKG_VERSION")),
    });
    let f = std::fs::File::create(sidecar_path(out))?;
    serde_json::to_writer_pretty(f, &body)
        .map_err(|e| Error::Format(format!("sidecar write failed: {e}")))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Format(format!("cannot create {}: {e}", path.display())))
}

/// Render an optional float, empty when absent (used for the analytical
/// model's missing NLPD).
pub fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
