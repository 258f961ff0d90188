//! Binary container: magic, format version, a JSON header, then named
//! tensors with little-endian f64 payloads.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::ArchitectureConfig;
use super::params::ModelParams;
use super::ModelError;
use crate::frontend::{KeepList, Vocabulary};
use crate::nn::Tensor;

const MAGIC: &[u8; 8] = b"DTCKPT\r\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    arch: ArchitectureConfig,
    arch_hash: String,
    vocab_version: String,
    vocab: String,
    keep: String,
}

/// Everything needed to run a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub arch: ArchitectureConfig,
    pub vocab: Vocabulary,
    pub keep: KeepList,
    pub params: ModelParams<Tensor>,
}

fn bad(m: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(m.into())
}

pub fn write_checkpoint(w: &mut dyn Write, ck: &Classifier) -> Result<(), ModelError> {
    if ck.arch.vocab_size != ck.vocab.len() {
        return Err(ModelError::ConfigMismatch(format!(
            "architecture sized for {} ids, vocabulary has {}",
            ck.arch.vocab_size,
            ck.vocab.len()
        )));
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        arch: ck.arch.clone(),
        arch_hash: ck.arch.hash(),
        vocab_version: ck.vocab.version().to_string(),
        vocab: ck.vocab.to_text(),
        keep: ck.keep.to_text(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let names = ck.params.names();
    let tensors = ck.params.tensors();
    w.write_all(&(names.len() as u64).to_le_bytes())?;
    for (name, t) in names.iter().zip(tensors) {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        w.write_all(&(t.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * t.len());
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_u32(r: &mut dyn Read) -> Result<u32, ModelError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut dyn Read) -> Result<u64, ModelError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len(r: &mut dyn Read, limit: u64, what: &str) -> Result<usize, ModelError> {
    let n = read_u64(r)?;
    if n > limit {
        return Err(bad(format!("{what} length {n} is implausible")));
    }
    Ok(n as usize)
}

pub fn read_checkpoint(r: &mut dyn Read) -> Result<Classifier, ModelError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("file too short"))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    let hlen = read_len(r, 1 << 30, "header")?;
    let mut json = vec![0u8; hlen];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| bad(format!("header: {e}")))?;
    header.arch.validate()?;
    if header.arch.hash() != header.arch_hash {
        return Err(bad("architecture hash does not match the stored configuration"));
    }
    let vocab = Vocabulary::parse(&header.vocab).map_err(|e| bad(e.to_string()))?;
    if vocab.version() != header.vocab_version {
        return Err(bad(format!("vocabulary version {} != recorded {}", vocab.version(), header.vocab_version)));
    }
    if vocab.len() != header.arch.vocab_size {
        return Err(bad("vocabulary size differs from the architecture"));
    }
    let keep = KeepList::parse(&header.keep).map_err(bad)?;

    let expected = ModelParams::expected_shapes(&header.arch);
    let count = read_len(r, 1 << 20, "tensor count")?;
    if count != expected.len() {
        return Err(bad(format!("{count} tensors stored, {} expected", expected.len())));
    }
    let mut tensors = Vec::with_capacity(count);
    for (want_name, want_shape) in &expected {
        let nlen = read_u32(r)? as usize;
        if nlen > 4096 {
            return Err(bad("tensor name too long"));
        }
        let mut name = vec![0u8; nlen];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
        if &name != want_name {
            return Err(bad(format!("found tensor {name}, expected {want_name}")));
        }
        let ndim = read_u32(r)? as usize;
        if ndim > 8 {
            return Err(bad(format!("{name}: {ndim} dimensions")));
        }
        let shape = (0..ndim).map(|_| read_u64(r).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if &shape != want_shape {
            return Err(bad(format!("{name}: shape {shape:?}, expected {want_shape:?}")));
        }
        let n = read_len(r, 1 << 32, "payload")?;
        if n != shape.iter().product::<usize>() {
            return Err(bad(format!("{name}: {n} values for shape {shape:?}")));
        }
        let mut raw = vec![0u8; 8 * n];
        r.read_exact(&mut raw)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        tensors.push(Tensor::new(&shape, data)?);
    }
    let mut params = ModelParams::init_shapes(&header.arch);
    for (slot, t) in params.tensors_mut().into_iter().zip(tensors) {
        *slot = t;
    }
    Ok(Classifier { arch: header.arch, vocab, keep, params })
}

impl Classifier {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        write_checkpoint(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let f =
            std::fs::File::open(path).map_err(|e| ModelError::MissingCheckpoint(format!("{}: {e}", path.display())))?;
        read_checkpoint(&mut BufReader::new(f))
    }
}
