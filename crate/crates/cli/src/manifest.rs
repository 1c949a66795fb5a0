//! Run manifest: every resolved setting an invocation used, serialized next
//! to its output artifacts so the run can be replayed bit-for-bit.

use serde::Serialize;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Serialize)]
pub struct RunManifest<C: Serialize> {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: &'static str,
    /// Fully resolved configuration for the run.
    pub config: C,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn write_manifest<C: Serialize>(
    path: &Path,
    command: &'static str,
    config: C,
    started_unix: u64,
) -> memchain::Result<()> {
    let manifest = RunManifest {
        tool: "memchain",
        tool_version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        started_unix,
        finished_unix: now_unix(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(path, json)?;
    Ok(())
}
