//! Checkpoint container: a binary file of named tensors plus a JSON
//! sidecar holding the run config, a hash of that config, and the
//! vocabulary fingerprints the tables were built against.
//!
//! Binary layout, all integers little-endian u32: format version,
//! tensor count, then per tensor a name length, the UTF-8 name bytes,
//! the rank, the dims, and the row-major f32 data. Loading verifies
//! the sidecar hash and, when the caller supplies its current
//! fingerprints, refuses tables built for different vocabularies.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::hash::fnv1a64;
use crate::optim::ParameterStore;
use crate::tensor::Tensor;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

// sanity bounds so a corrupt length prefix fails fast instead of
// attempting a huge allocation
const MAX_TENSORS: u32 = 10_000;
const MAX_NAME_LEN: u32 = 4_096;
const MAX_RANK: u32 = 8;
const MAX_ELEMENTS: u64 = 400_000_000;

/// Fingerprints of the vocabularies the embedding tables index into.
/// A checkpoint is only meaningful against the exact vocabularies it
/// was trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabFingerprints {
    pub word: u64,
    pub entity: u64,
    pub category: u64,
    pub subcategory: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint io at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt checkpoint at byte offset {offset}: {message}")]
    Corrupt { offset: u64, message: String },
    #[error("sidecar config hash mismatch: stored {stored}, recomputed {recomputed}")]
    ConfigHash { stored: String, recomputed: String },
    #[error("{which} vocabulary fingerprint mismatch: checkpoint has {got:#018x}, current data has {expected:#018x}")]
    VocabMismatch {
        which: &'static str,
        expected: u64,
        got: u64,
    },
    #[error("sidecar at {path} is invalid: {message}")]
    Sidecar { path: String, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// The JSON sidecar lives next to the binary file, named by appending
/// ".json" to the full checkpoint file name.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    path.with_file_name(name)
}

/// Hash of the canonical JSON serialization of a config, hex encoded.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    format!("{:016x}", fnv1a64(json.as_bytes()))
}

#[derive(Serialize, Deserialize)]
struct SidecarFile<C> {
    format_version: u32,
    config: C,
    config_hash: String,
    vocabs: VocabFingerprints,
}

/// Writes the store's tensors (in store order) and the sidecar.
pub fn save_checkpoint<C: Serialize>(
    path: &Path,
    store: &ParameterStore,
    config: &C,
    vocabs: &VocabFingerprints,
) -> Result<(), CheckpointError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_u32::<LittleEndian>(CHECKPOINT_FORMAT_VERSION)
        .map_err(|e| io_err(path, e))?;
    w.write_u32::<LittleEndian>(store.len() as u32)
        .map_err(|e| io_err(path, e))?;
    for p in store.iter() {
        let name = p.name.as_bytes();
        w.write_u32::<LittleEndian>(name.len() as u32)
            .map_err(|e| io_err(path, e))?;
        w.write_all(name).map_err(|e| io_err(path, e))?;
        w.write_u32::<LittleEndian>(p.value.rank() as u32)
            .map_err(|e| io_err(path, e))?;
        for &d in p.value.shape() {
            w.write_u32::<LittleEndian>(d as u32).map_err(|e| io_err(path, e))?;
        }
        for &v in p.value.data() {
            w.write_f32::<LittleEndian>(v).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))?;

    let sidecar = SidecarFile {
        format_version: CHECKPOINT_FORMAT_VERSION,
        config,
        config_hash: config_hash(config),
        vocabs: *vocabs,
    };
    let sp = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&sp, json).map_err(|e| io_err(&sp, e))?;
    Ok(())
}

/// A loaded checkpoint: tensors in file order plus the verified
/// sidecar contents.
pub struct LoadedCheckpoint<C> {
    pub tensors: Vec<(String, Tensor)>,
    pub config: C,
    pub vocabs: VocabFingerprints,
}

struct CountingReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.offset += n as u64;
        Ok(n)
    }
}

impl<R: Read> CountingReader<R> {
    fn corrupt(&self, message: impl Into<String>) -> CheckpointError {
        CheckpointError::Corrupt {
            offset: self.offset,
            message: message.into(),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        let at = self.offset;
        self.read_u32::<LittleEndian>().map_err(|e| CheckpointError::Corrupt {
            offset: at,
            message: format!("failed reading {what}: {e}"),
        })
    }
}

/// Reads a checkpoint and its sidecar. `expected_vocabs` are the
/// fingerprints of the vocabularies the caller is about to pair the
/// tensors with; a mismatch refuses the load.
pub fn load_checkpoint<C: Serialize + DeserializeOwned>(
    path: &Path,
    expected_vocabs: Option<&VocabFingerprints>,
) -> Result<LoadedCheckpoint<C>, CheckpointError> {
    let sp = sidecar_path(path);
    let sidecar_text = std::fs::read_to_string(&sp).map_err(|e| io_err(&sp, e))?;
    let sidecar: SidecarFile<C> = serde_json::from_str(&sidecar_text).map_err(|e| CheckpointError::Sidecar {
        path: sp.display().to_string(),
        message: e.to_string(),
    })?;
    if sidecar.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(CheckpointError::Sidecar {
            path: sp.display().to_string(),
            message: format!(
                "format version {} unsupported, expected {}",
                sidecar.format_version, CHECKPOINT_FORMAT_VERSION
            ),
        });
    }
    let recomputed = config_hash(&sidecar.config);
    if recomputed != sidecar.config_hash {
        return Err(CheckpointError::ConfigHash {
            stored: sidecar.config_hash,
            recomputed,
        });
    }
    if let Some(expected) = expected_vocabs {
        let pairs = [
            ("word", expected.word, sidecar.vocabs.word),
            ("entity", expected.entity, sidecar.vocabs.entity),
            ("category", expected.category, sidecar.vocabs.category),
            ("subcategory", expected.subcategory, sidecar.vocabs.subcategory),
        ];
        for (which, exp, got) in pairs {
            if exp != got {
                return Err(CheckpointError::VocabMismatch {
                    which,
                    expected: exp,
                    got,
                });
            }
        }
    }

    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = CountingReader {
        inner: BufReader::new(file),
        offset: 0,
    };
    let version = r.u32("format version")?;
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(r.corrupt(format!(
            "format version {version} unsupported, expected {CHECKPOINT_FORMAT_VERSION}"
        )));
    }
    let count = r.u32("tensor count")?;
    if count > MAX_TENSORS {
        return Err(r.corrupt(format!("implausible tensor count {count}")));
    }
    let mut tensors = Vec::with_capacity(count as usize);
    for i in 0..count {
        let name_len = r.u32("name length")?;
        if name_len > MAX_NAME_LEN {
            return Err(r.corrupt(format!("implausible name length {name_len} for tensor {i}")));
        }
        let mut name_buf = vec![0u8; name_len as usize];
        let at = r.offset;
        r.read_exact(&mut name_buf).map_err(|e| CheckpointError::Corrupt {
            offset: at,
            message: format!("failed reading name of tensor {i}: {e}"),
        })?;
        let name = String::from_utf8(name_buf)
            .map_err(|e| r.corrupt(format!("tensor {i} name is not UTF-8: {e}")))?;
        let rank = r.u32("rank")?;
        if rank > MAX_RANK {
            return Err(r.corrupt(format!("implausible rank {rank} for tensor {name:?}")));
        }
        let mut shape = Vec::with_capacity(rank as usize);
        let mut elements: u64 = 1;
        for _ in 0..rank {
            let d = r.u32("dimension")?;
            elements = elements.saturating_mul(d as u64);
            shape.push(d as usize);
        }
        if elements > MAX_ELEMENTS {
            return Err(r.corrupt(format!("implausible element count {elements} for tensor {name:?}")));
        }
        let mut data = vec![0f32; elements as usize];
        let at = r.offset;
        r.read_f32_into::<LittleEndian>(&mut data)
            .map_err(|e| CheckpointError::Corrupt {
                offset: at,
                message: format!("failed reading data of tensor {name:?}: {e}"),
            })?;
        tensors.push((name, Tensor::new(shape, data)));
    }
    let mut trailing = [0u8; 1];
    let n = r.read(&mut trailing).map_err(|e| r.corrupt(format!("probing end of file: {e}")))?;
    if n != 0 {
        return Err(r.corrupt("trailing bytes after final tensor"));
    }
    Ok(LoadedCheckpoint {
        tensors,
        config: sidecar.config,
        vocabs: sidecar.vocabs,
    })
}
