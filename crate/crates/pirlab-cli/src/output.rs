//! Provenance header and artifact writing.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "pirlab";

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub input_hash: String,
    pub seed: Option<u64>,
}

/// Collects everything that determines a command's output.
pub struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    pub fn new(command: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        Inputs { hasher }
    }

    pub fn param(mut self, name: &str, value: impl std::fmt::Display) -> Self {
        self.hasher.update(format!("\n{name}={value}").as_bytes());
        self
    }

    pub fn bytes(mut self, name: &str, data: &[u8]) -> Self {
        self.hasher.update(format!("\n{name}:{}:", data.len()).as_bytes());
        self.hasher.update(data);
        self
    }

    pub fn header(mut self, command: &'static str, seed: Option<u64>) -> Header {
        if let Some(s) = seed {
            self.hasher.update(format!("\nseed={s}").as_bytes());
        }
        Header {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command,
            input_hash: hex::encode(self.hasher.finalize()),
            seed,
        }
    }
}

/// `{"header": …}` followed by the fields of `body`.
pub fn with_header<T: Serialize>(header: &Header, body: &T) -> Value {
    let mut out = Map::new();
    out.insert("header".into(), serde_json::to_value(header).expect("header serializes"));
    match serde_json::to_value(body).expect("artifact serializes") {
        Value::Object(m) => out.extend(m),
        other => {
            out.insert("data".into(), other);
        }
    }
    Value::Object(out)
}

pub fn csv_header(h: &Header) -> String {
    let seed = h.seed.map_or("-".to_string(), |s| s.to_string());
    format!("# tool={} version={} command={} input_hash={} seed={}\n", h.tool, h.version, h.command, h.input_hash, seed)
}

pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json renders");
    s.push('\n');
    s
}

/// Writes to `path`, or stdout when absent.
pub fn emit(text: &str, path: Option<&Path>) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

/// Decimal places from `PIRLAB_PRECISION`, else `default`.
pub fn precision(default: usize) -> Result<usize, String> {
    match std::env::var("PIRLAB_PRECISION") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&p| p <= 100)
            .ok_or_else(|| format!("PIRLAB_PRECISION must be an integer in 0..=100, got {v:?}")),
        Err(_) => Ok(default),
    }
}
