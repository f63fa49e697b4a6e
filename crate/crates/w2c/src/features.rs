//! `W2CE`: per-sentence encoder hidden states exported by an external tool.
//!
//! ```text
//! "W2CE" | version u32 | h u32 | count u64 | count × (id u64, d u32, d·h f32 row-major)
//! ```

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use w2c_core::corpus::Sentence;
use w2c_core::encoder::{FeatureBatch, FeatureSource};
use w2c_core::Tensor2;

use crate::binio::{open, put_f32s, write_atomic, FieldReader};
use crate::error::{Result, W2cError};

pub const FEATURES_MAGIC: &[u8; 4] = b"W2CE";
pub const FEATURES_VERSION: u32 = 1;

/// Streams batches in stored order. A record is only yielded once it has
/// been read completely and validated.
pub struct FeatureReader {
    r: FieldReader<BufReader<File>>,
    hidden: usize,
    remaining: u64,
    failed: bool,
}

impl FeatureReader {
    /// Opens a feature file; `expected_hidden` rejects files produced for a
    /// different hidden size.
    pub fn open(path: &Path, expected_hidden: Option<usize>) -> Result<Self> {
        let mut r = FieldReader::new(BufReader::new(open(path)?), path);
        r.magic(FEATURES_MAGIC)?;
        r.version(FEATURES_VERSION)?;
        let h_at = r.offset();
        let hidden = r.u32("hidden size")? as usize;
        if hidden == 0 {
            return Err(r.error(h_at, "hidden size is 0"));
        }
        if let Some(want) = expected_hidden {
            if want != hidden {
                return Err(W2cError::Mismatch(format!(
                    "{} has hidden size {hidden}, configured {want}",
                    path.display()
                )));
            }
        }
        let remaining = r.u64("sentence count")?;
        Ok(Self { r, hidden, remaining, failed: false })
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    fn next_batch(&mut self) -> Result<FeatureBatch> {
        let at = self.r.offset();
        let sentence_id = self.r.u64("sentence id")?;
        let d = self.r.u32("token count")? as usize;
        if d == 0 {
            return Err(self.r.error(at, format!("sentence {sentence_id} has no tokens")));
        }
        let values = self.r.f32s(d * self.hidden, "feature block")?;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(self.r.error(at + 12 + 4 * bad as u64, format!("non-finite feature in sentence {sentence_id}")));
        }
        let features = Tensor2::from_vec(d, self.hidden, values)?;
        self.remaining -= 1;
        if self.remaining == 0 {
            self.r.expect_end()?;
        }
        Ok(FeatureBatch { sentence_id, features })
    }
}

impl Iterator for FeatureReader {
    type Item = Result<FeatureBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.remaining == 0 {
            return None;
        }
        let out = self.next_batch();
        self.failed = out.is_err();
        Some(out)
    }
}

pub fn read_features(path: &Path, expected_hidden: Option<usize>) -> Result<Vec<FeatureBatch>> {
    FeatureReader::open(path, expected_hidden)?.collect()
}

pub fn write_features_to(hidden: usize, batches: &[FeatureBatch], out: &mut dyn Write) -> std::io::Result<()> {
    out.write_all(FEATURES_MAGIC)?;
    out.write_all(&FEATURES_VERSION.to_le_bytes())?;
    out.write_all(&(hidden as u32).to_le_bytes())?;
    out.write_all(&(batches.len() as u64).to_le_bytes())?;
    let mut buf = Vec::new();
    for b in batches {
        buf.clear();
        buf.extend_from_slice(&b.sentence_id.to_le_bytes());
        buf.extend_from_slice(&(b.tokens() as u32).to_le_bytes());
        put_f32s(&mut buf, b.features.data());
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn write_features(path: &Path, hidden: usize, batches: &[FeatureBatch]) -> Result<()> {
    if let Some(b) = batches.iter().find(|b| b.hidden() != hidden || b.tokens() == 0) {
        return Err(W2cError::Config(format!(
            "sentence {} has shape {:?}, expected d×{hidden} with d > 0",
            b.sentence_id,
            b.features.shape()
        )));
    }
    write_atomic(path, |w| write_features_to(hidden, batches, w))
}

/// Features loaded from a file, addressed by dataset position.
#[derive(Clone, Debug)]
pub struct FileFeatures {
    hidden: usize,
    batches: Vec<Tensor2>,
}

impl FileFeatures {
    /// Loads every batch and checks it lines up with `sentences`: same
    /// count, and the same token count at every position.
    pub fn load(path: &Path, hidden: Option<usize>, sentences: &[&Sentence]) -> Result<Self> {
        let reader = FeatureReader::open(path, hidden)?;
        let h = reader.hidden_size();
        let batches: Vec<Tensor2> = reader.map(|b| b.map(|b| b.features)).collect::<Result<_>>()?;
        if batches.len() != sentences.len() {
            return Err(W2cError::Mismatch(format!(
                "{} holds {} sentences, the dataset has {}",
                path.display(),
                batches.len(),
                sentences.len()
            )));
        }
        for (i, (b, s)) in batches.iter().zip(sentences).enumerate() {
            if b.rows() != s.len() {
                return Err(W2cError::Mismatch(format!(
                    "{}: sentence {i} has {} feature rows but {} tokens",
                    path.display(),
                    b.rows(),
                    s.len()
                )));
            }
        }
        Ok(Self { hidden: h, batches })
    }

    pub fn from_tensors(hidden: usize, batches: Vec<Tensor2>) -> Self {
        Self { hidden, batches }
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }
}

impl FeatureSource for FileFeatures {
    fn hidden_size(&self) -> usize {
        self.hidden
    }

    fn features(&self, index: usize, sent: &Sentence) -> w2c_core::Result<Tensor2> {
        let t = self.batches.get(index).ok_or(w2c_core::Error::IdOutOfRange {
            id: index as u32,
            size: self.batches.len(),
        })?;
        if t.rows() != sent.len() {
            return Err(w2c_core::Error::Shape {
                op: "FileFeatures",
                expected: (sent.len(), self.hidden),
                found: t.shape(),
            });
        }
        Ok(t.clone())
    }
}
