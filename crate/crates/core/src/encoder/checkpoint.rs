//! Binary checkpoint container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! u8      version (= 1)
//! [u8;4]  magic "XENC"
//! u64 ×7  vocab_size max_len d_model n_heads n_layers d_ff n_classes
//! f64     dropout_rate
//! u64     seed
//! u32     tensor count
//! per tensor, in Params::names() order:
//!   u64   element count
//!   f64 × element count
//! ```

use std::path::Path;

use super::{ClassifierModel, ModelConfig, Params};

pub const CHECKPOINT_VERSION: u8 = 1;
const MAGIC: &[u8; 4] = b"XENC";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported checkpoint version {0}")]
    Version(u8),
    #[error("not a checkpoint (bad magic)")]
    Magic,
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint has {0} trailing bytes")]
    Trailing(usize),
    #[error("checkpoint config is invalid: {0}")]
    Config(String),
    #[error("tensor {index} holds {found} values, config implies {expected}")]
    Shape {
        index: usize,
        expected: usize,
        found: usize,
    },
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() < n {
            return Err(CheckpointError::Truncated);
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize, CheckpointError> {
        usize::try_from(self.u64()?).map_err(|_| CheckpointError::Config("dimension overflows usize".into()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl ClassifierModel {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(64 + 8 * self.params.num_parameters());
        out.push(CHECKPOINT_VERSION);
        out.extend_from_slice(MAGIC);
        for dim in [
            c.vocab_size,
            c.max_len,
            c.d_model,
            c.n_heads,
            c.n_layers,
            c.d_ff,
            c.n_classes,
        ] {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        out.extend_from_slice(&c.dropout_rate.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        let tensors = self.params.slices();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in tensors {
            out.extend_from_slice(&(t.len() as u64).to_le_bytes());
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes };
        let version = r.u8()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        if r.take(4)? != MAGIC {
            return Err(CheckpointError::Magic);
        }
        let config = ModelConfig {
            vocab_size: r.usize()?,
            max_len: r.usize()?,
            d_model: r.usize()?,
            n_heads: r.usize()?,
            n_layers: r.usize()?,
            d_ff: r.usize()?,
            n_classes: r.usize()?,
            dropout_rate: r.f64()?,
        };
        config.validate().map_err(|e| CheckpointError::Config(e.to_string()))?;
        let seed = r.u64()?;

        let mut params = Params::zeros(&config);
        let mut tensors = params.slices_mut();
        let count = r.u32()? as usize;
        if count != tensors.len() {
            return Err(CheckpointError::Config(format!(
                "{count} tensors stored, config implies {}",
                tensors.len()
            )));
        }
        for (index, t) in tensors.iter_mut().enumerate() {
            let found = r.usize()?;
            if found != t.len() {
                return Err(CheckpointError::Shape {
                    index,
                    expected: t.len(),
                    found,
                });
            }
            for v in t.iter_mut() {
                *v = r.f64()?;
            }
        }
        if !r.bytes.is_empty() {
            return Err(CheckpointError::Trailing(r.bytes.len()));
        }
        Ok(ClassifierModel { config, seed, params })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_checkpoint_bytes(&bytes)
    }
}
