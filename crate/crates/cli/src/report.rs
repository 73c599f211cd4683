//! Run reports and their JSON/CSV rendering.

use std::fs;
use std::io::Write;
use std::path::Path;

use pathnet::io::{manifest_path, load_manifest, Magnitude};
use pathnet::{LogScaled, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// A flat table for `--format csv`.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| escape(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-command result.
pub struct Payload {
    pub outputs: Value,
    pub table: Table,
}

/// SHA-256 over the flags and every input file, each length-prefixed.
#[derive(Default)]
pub struct InputDigest {
    hasher: Sha256,
}

impl InputDigest {
    fn chunk(&mut self, tag: &str, bytes: &[u8]) {
        for part in [tag.as_bytes(), bytes] {
            self.hasher.update((part.len() as u64).to_le_bytes());
            self.hasher.update(part);
        }
    }

    pub fn flags(&mut self, flags: &Value) {
        self.chunk("flags", flags.to_string().as_bytes());
    }

    pub fn model(&mut self, path: &Path) -> Result<()> {
        let manifest = load_manifest(path)?;
        let mpath = manifest_path(path);
        self.chunk("manifest", &fs::read(&mpath)?);
        let dir = mpath.parent().unwrap_or(Path::new("."));
        for file in &manifest.layer_files {
            self.chunk(file, &fs::read(dir.join(file))?);
        }
        Ok(())
    }

    pub fn file(&mut self, tag: &str, path: &Path) -> Result<()> {
        self.chunk(tag, &fs::read(path)?);
        Ok(())
    }

    pub fn finish(self) -> String {
        format!("sha256:{}", hex::encode(self.hasher.finalize()))
    }
}

pub fn magnitude(x: LogScaled) -> Value {
    json!(Magnitude::from(x))
}

/// `value` as a decimal when it fits in `f64`, otherwise `1e<log10>`.
pub fn magnitude_cell(x: LogScaled) -> String {
    match x.try_to_f64() {
        Some(v) => format!("{v}"),
        None => format!("1e{:.6}", x.log10()),
    }
}

pub fn run_report(command: &str, seed: u64, digest: String, outputs: Value, timings: Option<Value>) -> Value {
    let mut report = json!({
        "command": command,
        "seed": seed,
        "rng_algorithm": pathnet::rng::RNG_ALGORITHM,
        "inputs_digest": digest,
        "outputs": outputs,
    });
    if let Some(t) = timings {
        report["timings"] = t;
    }
    report
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}
