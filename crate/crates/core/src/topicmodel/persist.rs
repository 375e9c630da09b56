//! Model files.
//!
//! JSON is authoritative. The binary sidecar carries phi only:
//!
//! ```text
//! offset  size   field
//! 0       4      magic "CRLM"
//! 4       4      format version (u32 LE)
//! 8       4      K (u32 LE)
//! 12      4      V (u32 LE)
//! 16      8*K*V  phi, row-major f64 LE
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LdaModel, TrainConfig};
use crate::{Error, Result, FORMAT_VERSION};

pub const BINARY_MAGIC: &[u8; 4] = b"CRLM";
const MODEL_FORMAT: &str = "concept-realm-model";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    config: TrainConfig,
    terms: Vec<String>,
    phi: Vec<Vec<f64>>,
}

impl LdaModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_owned(),
            version: FORMAT_VERSION,
            k: self.k(),
            alpha: self.alpha,
            beta: self.beta(),
            seed: self.seed(),
            config: self.config,
            terms: self.terms.clone(),
            phi: self.phi.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::json("model file", e))?;
        if file.format != MODEL_FORMAT || file.version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format {:?} version {}",
                file.format, file.version
            )));
        }
        if file.k != file.config.k || file.alpha != file.config.resolved_alpha() || file.beta != file.config.beta {
            return Err(Error::invalid("model header disagrees with its training config"));
        }
        LdaModel::from_parts(file.terms, file.phi, file.config)
    }

    /// SHA-256 of the JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn write_binary(model: &LdaModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * model.k() * model.vocab_size());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.k() as u32).to_le_bytes());
    out.extend_from_slice(&(model.vocab_size() as u32).to_le_bytes());
    for row in model.phi() {
        for p in row {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out
}

/// Decodes a binary sidecar into its phi rows.
pub fn read_binary(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes"));
    if bytes.len() < 16 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::invalid("not a CRLM model sidecar"));
    }
    if u32_at(4) != FORMAT_VERSION {
        return Err(Error::invalid(format!("unsupported sidecar version {}", u32_at(4))));
    }
    let (k, v) = (u32_at(8) as usize, u32_at(12) as usize);
    if bytes.len() != 16 + 8 * k * v {
        return Err(Error::invalid("sidecar length does not match its header"));
    }
    Ok(bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect::<Vec<_>>()
        .chunks(v.max(1))
        .take(k)
        .map(<[f64]>::to_vec)
        .collect())
}
