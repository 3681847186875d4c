//! Network checkpoints.
//!
//! Binary layout (little endian):
//!
//! ```text
//! magic   b"RGNC"
//! version u32 (= 1)
//! layers  u32
//! per layer: input_dim u32, output_dim u32, activation tag u8
//! per layer: (input_dim + 1) * output_dim f64 weights, row-major, bias row last
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayerSpec, Network};
use crate::error::{Error, Result};
use crate::math::{Activation, Matrix};

const MAGIC: &[u8; 4] = b"RGNC";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointFormat {
    Binary,
    Json,
}

impl CheckpointFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => CheckpointFormat::Json,
            _ => CheckpointFormat::Binary,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonLayer {
    input_dim: usize,
    output_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JsonCheckpoint {
    version: u32,
    layers: Vec<JsonLayer>,
}

impl Network {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.parameter_count() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.specs.len() as u32).to_le_bytes());
        for s in &self.specs {
            out.extend_from_slice(&(s.input_dim as u32).to_le_bytes());
            out.extend_from_slice(&(s.output_dim as u32).to_le_bytes());
            out.push(s.activation.tag());
        }
        for w in &self.weights {
            for v in w.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = cursor.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let layers = cursor.u32()? as usize;
        let mut specs = Vec::with_capacity(layers);
        for _ in 0..layers {
            let input_dim = cursor.u32()? as usize;
            let output_dim = cursor.u32()? as usize;
            let tag = cursor.take(1)?[0];
            let activation = Activation::from_tag(tag)
                .ok_or_else(|| Error::Checkpoint(format!("unknown activation tag {tag}")))?;
            specs.push(LayerSpec::new(input_dim, output_dim, activation));
        }
        let mut weights = Vec::with_capacity(layers);
        for s in &specs {
            let n = (s.input_dim + 1) * s.output_dim;
            let raw = cursor.take(n * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            weights.push(Matrix::from_vec(s.input_dim + 1, s.output_dim, data)?);
        }
        if cursor.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Network::from_parts(specs, weights)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = JsonCheckpoint {
            version: VERSION,
            layers: self
                .specs
                .iter()
                .zip(&self.weights)
                .map(|(s, w)| JsonLayer {
                    input_dim: s.input_dim,
                    output_dim: s.output_dim,
                    activation: s.activation,
                    weights: w.data().to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: JsonCheckpoint = serde_json::from_str(text)?;
        if doc.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                doc.version
            )));
        }
        let mut specs = Vec::new();
        let mut weights = Vec::new();
        for l in doc.layers {
            specs.push(LayerSpec::new(l.input_dim, l.output_dim, l.activation));
            weights.push(Matrix::from_vec(l.input_dim + 1, l.output_dim, l.weights)?);
        }
        Network::from_parts(specs, weights)
    }
}

pub fn save_checkpoint(net: &Network, path: &Path, format: CheckpointFormat) -> Result<()> {
    match format {
        CheckpointFormat::Binary => fs::write(path, net.to_bytes())?,
        CheckpointFormat::Json => fs::write(path, net.to_json()?)?,
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    match CheckpointFormat::from_path(path) {
        CheckpointFormat::Binary => Network::from_bytes(&fs::read(path)?),
        CheckpointFormat::Json => Network::from_json(&fs::read_to_string(path)?),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated: needed {end} bytes, have {}",
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
