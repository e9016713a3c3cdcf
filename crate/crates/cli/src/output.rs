//! CSV/JSON artifacts, the metadata sidecar and file writing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::failure::Failure;

/// A cell of a CSV row.
pub enum Cell {
    F(f64),
    U(u64),
    B(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

/// Header plus rows; floats are printed with 17 significant digits.
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            text,
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.width, "row width must match the header");
        for (i, c) in cells.into_iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(v) => write!(self.text, "{v:.16e}"),
                Cell::U(v) => write!(self.text, "{v}"),
                Cell::B(v) => write!(self.text, "{v}"),
            }
            .expect("write to string");
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// One file produced by a scenario.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn csv(name: impl Into<String>, csv: Csv) -> Self {
        Self {
            name: name.into(),
            bytes: csv.into_bytes(),
        }
    }

    pub fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("summary serializes");
        bytes.push(b'\n');
        Self {
            name: name.into(),
            bytes,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct OutputRecord<'a> {
    file: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ScenarioConfig,
    config_sha256: String,
    outputs: Vec<OutputRecord<'a>>,
}

/// Writes the artifacts and a `<stem>.meta.json` sidecar; returns the written paths.
pub fn write_run(dir: &Path, config: &ScenarioConfig, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, Failure> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(artifacts.len() + 1);
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes)?;
        written.push(path);
    }
    let config_json = serde_json::to_vec(config).expect("config serializes");
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config,
        config_sha256: sha256_hex(&config_json),
        outputs: artifacts
            .iter()
            .map(|a| OutputRecord {
                file: &a.name,
                sha256: sha256_hex(&a.bytes),
            })
            .collect(),
    };
    let path = dir.join(format!("{}.meta.json", config.scenario.stem()));
    let mut bytes = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
    bytes.push(b'\n');
    fs::write(&path, bytes)?;
    written.push(path);
    Ok(written)
}

/// Best-effort `error.json` next to the outputs.
pub fn write_error(dir: &Path, failure: &Failure) {
    let mut bytes = serde_json::to_vec_pretty(&failure.record()).expect("record serializes");
    bytes.push(b'\n');
    if fs::create_dir_all(dir).is_ok() {
        let _ = fs::write(dir.join("error.json"), bytes);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_full_precision_and_lf() {
        let mut csv = Csv::new(&["a", "b", "c"]);
        csv.row(vec![0.1.into(), 3usize.into(), true.into()]);
        let text = String::from_utf8(csv.into_bytes()).unwrap();
        assert_eq!(text, "a,b,c\n1.0000000000000001e-1,3,true\n");
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }
}
