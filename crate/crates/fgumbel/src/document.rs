//! Versioned JSON result documents and atomic file writes.

use std::io::Write;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{AppError, AppResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Seconds since the Unix epoch at start.
    pub started_unix: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDocument {
    pub schema_version: u32,
    /// Subcommand followed by its arguments.
    pub command: Vec<String>,
    pub config: Value,
    pub payload: Value,
    pub timing: Timing,
    pub seed: Option<u64>,
}

/// Started clock for a document.
pub struct Stopwatch {
    start: Instant,
    started_unix: f64,
}

impl Stopwatch {
    pub fn start() -> Self {
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        Stopwatch { start: Instant::now(), started_unix }
    }

    pub fn timing(&self) -> Timing {
        Timing { started_unix: self.started_unix, elapsed_seconds: self.start.elapsed().as_secs_f64() }
    }
}

impl ResultDocument {
    pub fn new<C: Serialize, P: Serialize>(
        command: Vec<String>,
        config: &C,
        payload: &P,
        clock: &Stopwatch,
        seed: Option<u64>,
    ) -> AppResult<Self> {
        Ok(ResultDocument {
            schema_version: SCHEMA_VERSION,
            command,
            config: serde_json::to_value(config)?,
            payload: serde_json::to_value(payload)?,
            timing: clock.timing(),
            seed,
        })
    }

    pub fn to_json(&self) -> AppResult<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> AppResult<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: ResultDocument = serde_json::from_str(&text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(AppError::Data(format!("unsupported schema_version {}", doc.schema_version)));
        }
        Ok(doc)
    }

    /// Deserialize the payload into a concrete type.
    pub fn payload_as<T: for<'de> Deserialize<'de>>(&self) -> AppResult<T> {
        Ok(serde_json::from_value(self.payload.clone())?)
    }
}

/// Write via a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| AppError::Io(e.error))?;
    Ok(())
}
