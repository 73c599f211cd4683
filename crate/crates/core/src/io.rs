//! On-disk formats: model manifests with little-endian `f64` layer blobs, and
//! dataset CSV files.
//!
//! A model directory holds `manifest.json` plus one blob per layer. Blobs are
//! raw row-major `d_ℓ × d_{ℓ-1}` little-endian doubles with no header.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::net::{Activation, Dataset, Network};
use crate::rng::RNG_ALGORITHM;
use crate::scaled::LogScaled;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub version: u32,
    /// Parsed separately so unknown kinds get a specific error.
    pub activation: serde_json::Value,
    pub dims: Vec<usize>,
    pub layer_files: Vec<String>,
    #[serde(default = "default_rng")]
    pub rng_algorithm: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bias_files: Vec<String>,
}

fn default_rng() -> String {
    RNG_ALGORITHM.to_string()
}

impl ModelManifest {
    pub fn for_network(net: &Network, metadata: BTreeMap<String, serde_json::Value>) -> Self {
        ModelManifest {
            version: MANIFEST_VERSION,
            activation: serde_json::to_value(net.activation()).expect("serialisable"),
            dims: net.dims(),
            layer_files: (1..=net.depth()).map(|l| format!("layer_{l}.f64")).collect(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
            metadata,
            bias_files: Vec::new(),
        }
    }

    pub fn parse_activation(&self) -> Result<Activation> {
        let kind = self.activation.get("kind").and_then(|k| k.as_str()).unwrap_or("<missing>");
        let act: Activation = serde_json::from_value(self.activation.clone()).map_err(|_| {
            Error::InvalidNetwork(format!(
                "unsupported activation '{kind}' (expected relu, leaky-relu or identity)"
            ))
        })?;
        act.validate()?;
        Ok(act)
    }
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    m.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_matrix(bytes: &[u8], rows: usize, cols: usize) -> Result<Matrix> {
    let expected = rows * cols * 8;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "layer blob has {} bytes, expected {expected} for {rows}×{cols}",
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Writes `manifest.json` and the layer blobs into `dir` (created if needed).
pub fn save_model(dir: &Path, net: &Network, metadata: BTreeMap<String, serde_json::Value>) -> Result<ModelManifest> {
    fs::create_dir_all(dir)?;
    let manifest = ModelManifest::for_network(net, metadata);
    for (file, w) in manifest.layer_files.iter().zip(net.layers()) {
        fs::write(dir.join(file), encode_matrix(w))?;
    }
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

/// `path` may be the model directory or its manifest.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn load_manifest(path: &Path) -> Result<ModelManifest> {
    let text = fs::read_to_string(manifest_path(path))?;
    let manifest: ModelManifest = serde_json::from_str(&text)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Format(format!(
            "unsupported manifest version {} (expected {MANIFEST_VERSION})",
            manifest.version
        )));
    }
    if !manifest.bias_files.is_empty() {
        return Err(Error::InvalidNetwork(
            "bias tensors are not supported: networks must be bias-free".into(),
        ));
    }
    if manifest.dims.len() != manifest.layer_files.len() + 1 {
        return Err(Error::Format(format!(
            "manifest lists {} dims for {} layers",
            manifest.dims.len(),
            manifest.layer_files.len()
        )));
    }
    Ok(manifest)
}

pub fn load_model(path: &Path) -> Result<Network> {
    let manifest = load_manifest(path)?;
    let activation = manifest.parse_activation()?;
    let mpath = manifest_path(path);
    let dir = mpath.parent().unwrap_or(Path::new("."));
    let mut layers = Vec::with_capacity(manifest.layer_files.len());
    for (l, file) in manifest.layer_files.iter().enumerate() {
        let bytes = fs::read(dir.join(file))?;
        layers.push(decode_matrix(&bytes, manifest.dims[l + 1], manifest.dims[l])?);
    }
    Network::new(layers, activation)
}

/// Reads a dataset CSV: header `f0,…,f{d-1}` and an optional 1-based `label`.
pub fn read_dataset<R: Read>(r: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = reader.headers()?.clone();
    let label_col = header.iter().position(|h| h == "label");
    let d = header.len() - usize::from(label_col.is_some());
    for (j, name) in header.iter().filter(|&h| h != "label").enumerate() {
        if name != format!("f{j}") {
            return Err(Error::Format(format!("expected column f{j}, found '{name}'")));
        }
    }
    if d == 0 {
        return Err(Error::InvalidDataset("no feature columns".into()));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        for (j, field) in rec.iter().enumerate() {
            if Some(j) == label_col {
                let y: i64 = field
                    .parse()
                    .map_err(|_| Error::Format(format!("row {}: label '{field}' is not an integer", i + 1)))?;
                if y < 1 {
                    return Err(Error::InvalidDataset(format!(
                        "row {}: label {y} out of range (labels are 1-based)",
                        i + 1
                    )));
                }
                labels.push(y as usize - 1);
            } else {
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("row {}: '{field}' is not a number", i + 1)))?,
                );
            }
        }
    }
    let n = values.len() / d;
    Dataset::new(Matrix::from_vec(n, d, values)?, label_col.map(|_| labels))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(fs::File::open(path)?)
}

/// Writes features with shortest round-trip formatting and 1-based labels.
pub fn write_dataset<W: Write>(data: &Dataset, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    if data.labels().is_some() {
        header.push("label".into());
    }
    out.write_record(&header)?;
    for (i, x) in data.rows().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        if let Some(labels) = data.labels() {
            rec.push((labels[i] + 1).to_string());
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_dataset(data, fs::File::create(path)?)
}

/// A magnitude as `(value, log10)`; `value` is `None` when it overflows `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Magnitude {
    pub value: Option<f64>,
    pub log10: f64,
}

impl From<LogScaled> for Magnitude {
    fn from(x: LogScaled) -> Self {
        Magnitude {
            value: x.try_to_f64(),
            log10: x.log10(),
        }
    }
}
