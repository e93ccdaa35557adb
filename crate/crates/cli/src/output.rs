//! Output directory bookkeeping and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const MANIFEST: &str = "manifest.json";

/// Normalization note carried in every manifest.
const NORMALIZATION: &str =
    "rates in nats per channel use; bound radii use powers normalized by the noise level";

pub fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Writes files under one directory and remembers their names.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        fs::write(self.root.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(mut self, manifest: Manifest) -> io::Result<()> {
        let manifest = Manifest {
            files: std::mem::take(&mut self.files),
            finished_unix_ms: unix_ms(),
            ..manifest
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST), text)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub core_version: String,
    pub seed: u64,
    pub normalization: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: String, seed: u64, started: u128) -> Self {
        Manifest {
            command: command.to_string(),
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: macalloc::VERSION.to_string(),
            seed,
            normalization: NORMALIZATION.to_string(),
            started_unix_ms: started,
            finished_unix_ms: 0,
            files: Vec::new(),
        }
    }
}

/// Accumulates a CSV table; floats use the shortest round-trip formatting.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        Csv {
            text: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            first = false;
            self.text.push_str(&c);
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// `prefix_1, …, prefix_m`.
pub fn numbered(prefix: &str, m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn floats(values: &[f64]) -> impl Iterator<Item = String> + '_ {
    values.iter().map(|v| {
        let mut s = String::new();
        write!(s, "{v}").unwrap();
        s
    })
}
