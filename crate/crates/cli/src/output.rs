use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<markov_diffusion::Error> for CliError {
    fn from(e: markov_diffusion::Error) -> Self {
        match e {
            markov_diffusion::Error::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Effective configuration echoed next to every output.
#[derive(Debug, Serialize)]
pub struct Metadata<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: C,
}

impl<'a, C: Serialize> Metadata<'a, C> {
    pub fn new(command: &'a str, seed: u64, config: C) -> Self {
        Self {
            tool: "mdiff",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("metadata serializes")
    }
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes `body` to `out` (or stdout) and the metadata to a sidecar file
/// (or stderr).
pub fn emit(out: Option<&Path>, body: &[u8], meta: &Value) -> CliResult<()> {
    let meta_text = to_json_pretty(meta);
    match out {
        Some(path) => {
            write_file(path, body)?;
            write_file(&sidecar(path), meta_text.as_bytes())
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(body)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Data(e.to_string()))?;
            eprint!("{meta_text}");
            Ok(())
        }
    }
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}
