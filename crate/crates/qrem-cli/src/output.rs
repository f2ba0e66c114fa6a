use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::commands::Payload;
use crate::config::{Format, RunConfig};

/// Major version bumps on breaking changes to the manifest or payload layout.
pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: String,
    pub tool: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub payload: PathBuf,
    /// Seconds since the Unix epoch at completion.
    pub timestamp: u64,
    pub wall_time_s: f64,
    pub flagged_rows: usize,
    pub summary: Value,
}

#[derive(Serialize)]
struct JsonPayload<'a> {
    schema_version: &'static str,
    command: &'static str,
    #[serde(flatten)]
    payload: &'a Payload,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
}

fn csv_bytes(payload: &Payload) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(payload.columns.iter().map(|c| c.name))?;
    w.write_record(payload.columns.iter().map(|c| c.definition))?;
    for row in &payload.rows {
        w.write_record(row.iter().map(|c| c.csv()))?;
    }
    Ok(w.into_inner()?)
}

/// Writes the payload and then the manifest; returns the manifest path.
pub fn write(config: &RunConfig, payload: &Payload, wall_time_s: f64) -> Result<PathBuf> {
    let out = &config.output;
    fs::create_dir_all(&out.dir).with_context(|| format!("creating {}", out.dir.display()))?;
    let (ext, bytes) = match out.format {
        Format::Json => {
            let doc = JsonPayload { schema_version: SCHEMA_VERSION, command: config.command.name(), payload };
            let mut s = serde_json::to_vec_pretty(&doc)?;
            s.push(b'\n');
            ("json", s)
        }
        Format::Csv => ("csv", csv_bytes(payload)?),
    };
    let name = PathBuf::from(format!("{}.{ext}", out.stem));
    fs::write(out.dir.join(&name), bytes)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION.into(),
        tool: env!("CARGO_PKG_NAME").into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        payload: name,
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        wall_time_s,
        flagged_rows: payload.flagged,
        summary: payload.summary.clone(),
    };
    let path = out.dir.join(format!("{}.manifest.json", out.stem));
    let mut s = serde_json::to_vec_pretty(&manifest)?;
    s.push(b'\n');
    fs::write(&path, s)?;
    Ok(path)
}
