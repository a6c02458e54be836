//! Model persistence.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! "RVQM"            4 bytes
//! version           u32 (currently 1)
//! sample_rate       u32
//! frame_size        u64
//! stages            u64
//! entries           u64
//! seed              u64
//! window            frame_size x f64
//! codebooks         stages x entries x frame_size x f64
//! training_stats    stages x f64
//! ```
//!
//! The JSON twin carries the same fields for inspection.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{Codebook, Model};
use super::RvqError;
use crate::Real;

const MAGIC: &[u8; 4] = b"RVQM";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelJson {
    version: u32,
    model_id: String,
    sample_rate: u32,
    frame_size: usize,
    stages: usize,
    entries: usize,
    seed: u64,
    window: Vec<f64>,
    codebooks: Vec<Vec<Vec<f64>>>,
    training_stats: Vec<f64>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Option<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8)?)?;
        Some(
            bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        )
    }
}

impl<T: Real> Model<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        for v in [self.frame_size, self.stages(), self.entries()] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        let floats = self
            .window
            .iter()
            .chain(self.codebooks.iter().flat_map(|b| b.data.iter()))
            .map(|v| v.as_f64())
            .chain(self.training_stats.iter().copied());
        for v in floats {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let mut c = Cursor { buf: bytes, pos: 0 };
        let short = || "truncated".to_string();
        if c.take(4) != Some(MAGIC.as_slice()) {
            return Err("missing RVQM magic".into());
        }
        let version = c.u32().ok_or_else(short)?;
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let sample_rate = c.u32().ok_or_else(short)?;
        let frame_size = c.u64().ok_or_else(short)? as usize;
        let stages = c.u64().ok_or_else(short)? as usize;
        let entries = c.u64().ok_or_else(short)? as usize;
        let seed = c.u64().ok_or_else(short)?;
        if sample_rate == 0 || frame_size == 0 || stages == 0 || entries < 2 {
            return Err("invalid dimensions".into());
        }
        let window = c.f64s(frame_size).ok_or_else(short)?;
        let mut codebooks = Vec::with_capacity(stages);
        for _ in 0..stages {
            let n = entries.checked_mul(frame_size).ok_or("size overflow")?;
            let data = c.f64s(n).ok_or_else(short)?;
            codebooks.push(data);
        }
        let stats = c.f64s(stages).ok_or_else(short)?;
        if c.pos != bytes.len() {
            return Err("trailing bytes".into());
        }
        Self::from_parts(sample_rate, frame_size, seed, window, codebooks, stats)
    }

    fn from_parts(
        sample_rate: u32,
        frame_size: usize,
        seed: u64,
        window: Vec<f64>,
        codebooks: Vec<Vec<f64>>,
        stats: Vec<f64>,
    ) -> Result<Self, String> {
        let all_finite = window
            .iter()
            .chain(codebooks.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite || window.contains(&0.0) {
            return Err("non-finite codebook entry or zero window weight".into());
        }
        let cast = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
        let books = codebooks
            .into_iter()
            .map(|d| Codebook {
                dim: frame_size,
                data: cast(d),
            })
            .collect();
        Ok(Self::assemble(frame_size, sample_rate, cast(window), books, seed, stats))
    }

    pub(crate) fn content_id(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RvqError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RvqError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes).map_err(|msg| RvqError::Format {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = ModelJson {
            version: VERSION,
            model_id: self.id.clone(),
            sample_rate: self.sample_rate,
            frame_size: self.frame_size,
            stages: self.stages(),
            entries: self.entries(),
            seed: self.seed,
            window: self.window.iter().map(|v| v.as_f64()).collect(),
            codebooks: self
                .codebooks
                .iter()
                .map(|b| {
                    b.data
                        .chunks_exact(self.frame_size)
                        .map(|e| e.iter().map(|v| v.as_f64()).collect())
                        .collect()
                })
                .collect(),
            training_stats: self.training_stats.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let doc: ModelJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if doc.version != VERSION {
            return Err(format!("unsupported version {}", doc.version));
        }
        let consistent = doc.codebooks.len() == doc.stages
            && doc.training_stats.len() == doc.stages
            && doc.window.len() == doc.frame_size
            && doc.codebooks.iter().all(|b| {
                b.len() == doc.entries && b.iter().all(|e| e.len() == doc.frame_size)
            });
        if !consistent || doc.stages == 0 || doc.entries < 2 || doc.sample_rate == 0 {
            return Err("inconsistent dimensions".into());
        }
        let books = doc.codebooks.into_iter().map(|b| b.concat()).collect();
        Self::from_parts(
            doc.sample_rate,
            doc.frame_size,
            doc.seed,
            doc.window,
            books,
            doc.training_stats,
        )
    }
}
