//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic "JIECKPT\0" | u32 version | 32-byte SHA-256 of the config JSON
//! u64 header length | header JSON (config, schema, vocabulary, counters)
//! tensor block: parameters | tensor block: first moments | tensor block: second moments
//! 32-byte SHA-256 of everything above
//! ```
//!
//! A tensor block is a `u64` count followed by, per tensor, a `u32` name
//! length, the UTF-8 name, a `u32` rank, `u64` dimensions and `f64` data.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::SettingConfig;
use super::model::{build_model, JointModel};
use super::optim::OptimizerState;
use super::train::TrainState;
use crate::corpus::RelationSchema;
use crate::encoding::Vocabulary;
use crate::error::{Error, Result};
use crate::nn::NamedTensor;

pub const MAGIC: &[u8; 8] = b"JIECKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: SettingConfig,
    pub schema: RelationSchema,
    pub vocabulary: Vocabulary,
    pub state: TrainState,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: SettingConfig,
    schema: RelationSchema,
    vocabulary: Vocabulary,
    seed: u64,
    epoch: usize,
    best_epoch: usize,
    best_dev_f1: Option<f64>,
    optimizer_step: u64,
}

fn config_digest(config: &SettingConfig) -> [u8; 32] {
    Sha256::digest(serde_json::to_vec(config).expect("config serialises")).into()
}

impl Checkpoint {
    /// Captures the model's current parameters together with `state`'s
    /// counters and optimizer moments.
    pub fn from_model(model: &JointModel, state: &TrainState) -> Result<Self> {
        Ok(Checkpoint {
            config: model.config().clone(),
            schema: model.schema().clone(),
            vocabulary: model.vocabulary().clone(),
            state: TrainState {
                params: model.store().snapshot()?,
                ..state.clone()
            },
        })
    }

    /// Rebuilds the model and loads the stored parameters.
    pub fn into_model(&self) -> Result<JointModel> {
        let mut model = build_model(&self.config, &self.schema, &self.vocabulary, self.state.seed)?;
        model.store().restore(&self.state.params)?;
        if let Some(gc) = &self.config.gc {
            if gc.freeze_beta {
                model.store_mut().freeze("compatibility.beta");
            }
        }
        Ok(model)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.config.clone(),
            schema: self.schema.clone(),
            vocabulary: self.vocabulary.clone(),
            seed: self.state.seed,
            epoch: self.state.epoch,
            best_epoch: self.state.best_epoch,
            best_dev_f1: self.state.best_dev_f1,
            optimizer_step: self.state.optimizer.step,
        };
        let header = serde_json::to_vec(&header).map_err(|source| Error::Parse {
            what: "checkpoint header".into(),
            source,
        })?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&config_digest(&self.config));
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        write_block(&mut out, &self.state.params);
        write_block(&mut out, &self.state.optimizer.first_moment);
        write_block(&mut out, &self.state.optimizer.second_moment);
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 32 + 8 + 32 {
            return Err(Error::Checkpoint("file too short".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if !body.starts_with(MAGIC) {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let mut r = Reader {
            bytes: body,
            pos: MAGIC.len(),
        };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Checkpoint("checksum mismatch; file is corrupt".into()));
        }
        let stored_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let header_len = r.u64()? as usize;
        let header: Header = serde_json::from_slice(r.take(header_len)?).map_err(|source| Error::Parse {
            what: "checkpoint header".into(),
            source,
        })?;
        if config_digest(&header.config) != stored_hash {
            return Err(Error::Checkpoint(
                "embedded config does not match its recorded hash".into(),
            ));
        }
        header.config.validate()?;
        let params = r.block()?;
        let first_moment = r.block()?;
        let second_moment = r.block()?;
        if r.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes after tensor blocks".into()));
        }
        Ok(Checkpoint {
            config: header.config,
            schema: header.schema,
            vocabulary: header.vocabulary,
            state: TrainState {
                seed: header.seed,
                epoch: header.epoch,
                best_epoch: header.best_epoch,
                best_dev_f1: header.best_dev_f1,
                params,
                optimizer: OptimizerState {
                    step: header.optimizer_step,
                    first_moment,
                    second_moment,
                },
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

fn write_block(out: &mut Vec<u8>, tensors: &[NamedTensor]) {
    out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in &t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn block(&mut self) -> Result<Vec<NamedTensor>> {
        let count = self.u64()? as usize;
        let mut out = Vec::new();
        for _ in 0..count {
            let len = self.u32()? as usize;
            let name = std::str::from_utf8(self.take(len)?)
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = self.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(self.u64()? as usize);
            }
            let numel: usize = shape.iter().product();
            let raw = self.take(
                numel
                    .checked_mul(8)
                    .ok_or_else(|| Error::Checkpoint(format!("tensor {name} is too large")))?,
            )?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            out.push(NamedTensor { name, shape, data });
        }
        Ok(out)
    }
}
