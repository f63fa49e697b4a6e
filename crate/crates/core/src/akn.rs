//! Associative knowledge network: a sparse, symmetric token-pair score
//! table accumulated from reciprocal in-sentence distances with per-sentence
//! exponential decay, and the bounded per-sentence association matrices
//! sampled from it.
//!
//! Each processed sentence first shrinks every existing score by the shrink
//! rate, then adds `1 / |p - q|` for every pair of positions `p != q`. The
//! decay is kept as a single running factor so an update only touches the
//! pairs of the sentence itself.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::numkernel::{sigmoid, Tensor2};

pub const DEFAULT_SHRINK_RATE: f64 = 0.95;

/// Largest `f64` strictly below one half.
const BELOW_HALF: f64 = 0.5 - 1.0 / (1u64 << 54) as f64;

/// Below this running factor the stored values are rescaled.
const RESCALE_AT: f64 = 1e-150;

#[derive(Clone, Debug)]
pub struct AssocNetwork {
    vocab_size: usize,
    shrink_rate: f64,
    /// Product of all decays not yet folded into `raw`.
    scale: f64,
    /// Upper triangle, keyed `(i, j)` with `i <= j`.
    raw: BTreeMap<(u32, u32), f64>,
}

#[inline]
fn key(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl AssocNetwork {
    pub fn new(vocab_size: usize, shrink_rate: f64) -> Result<Self> {
        if !(shrink_rate > 0.0 && shrink_rate <= 1.0) {
            return Err(Error::Invalid(format!(
                "shrink rate must lie in (0, 1], got {shrink_rate}"
            )));
        }
        if vocab_size > u32::MAX as usize {
            return Err(Error::Invalid(format!("vocabulary size {vocab_size} exceeds u32")));
        }
        Ok(Self {
            vocab_size,
            shrink_rate,
            scale: 1.0,
            raw: BTreeMap::new(),
        })
    }

    /// Rebuilds a network from materialized upper-triangle triples.
    pub fn from_triples(
        vocab_size: usize,
        shrink_rate: f64,
        triples: impl IntoIterator<Item = (u32, u32, f64)>,
    ) -> Result<Self> {
        let mut net = Self::new(vocab_size, shrink_rate)?;
        for (i, j, s) in triples {
            if i > j {
                return Err(Error::Invalid(format!("triple ({i}, {j}) is below the diagonal")));
            }
            if j as usize >= vocab_size {
                return Err(Error::IdOutOfRange {
                    id: j,
                    size: vocab_size,
                });
            }
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Invalid(format!("score {s} at ({i}, {j}) is not a finite nonnegative value")));
            }
            if net.raw.insert((i, j), s).is_some() {
                return Err(Error::Invalid(format!("duplicate triple ({i}, {j})")));
            }
        }
        Ok(net)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn shrink_rate(&self) -> f64 {
        self.shrink_rate
    }

    /// Number of stored pairs.
    pub fn nnz(&self) -> usize {
        self.raw.len()
    }

    /// Score of the unordered pair `(i, j)`; absent pairs score 0.
    pub fn score(&self, i: u32, j: u32) -> f64 {
        self.raw.get(&key(i, j)).map_or(0.0, |r| r * self.scale)
    }

    /// Materialized `(i, j, score)` with `i <= j`, sorted by `(i, j)`.
    pub fn triples(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.raw.iter().map(move |(&(i, j), &r)| (i, j, r * self.scale))
    }

    /// Decays all scores, then adds the reciprocal-distance contributions of
    /// `sent`. Rejects the sentence without touching the network if any id
    /// is out of range.
    pub fn update(&mut self, sent: &Sentence) -> Result<()> {
        sent.check_range(self.vocab_size)?;
        self.scale *= self.shrink_rate;
        if self.scale < RESCALE_AT {
            self.fold_scale();
        }
        let ids = sent.ids();
        let inv_scale = 1.0 / self.scale;
        for p in 0..ids.len() {
            for q in p + 1..ids.len() {
                let add = inv_scale / (q - p) as f64;
                *self.raw.entry(key(ids[p], ids[q])).or_insert(0.0) += add;
            }
        }
        Ok(())
    }

    fn fold_scale(&mut self) {
        let s = self.scale;
        self.raw.retain(|_, r| {
            *r *= s;
            *r > 0.0
        });
        self.scale = 1.0;
    }

    /// Association matrix of a sentence: for positions `p, q`,
    /// `sigmoid(A[p][q] / mean_q A[p][q]) - 0.5`, where `A` holds the scores
    /// between the sentence's tokens. Rows whose mean is zero are all zero.
    pub fn sample(&self, sent: &Sentence) -> Result<AssocMatrix> {
        sent.check_range(self.vocab_size)?;
        let ids = sent.ids();
        let d = ids.len();
        let mut m = Tensor2::zeros(d, d);
        let mut row = Vec::with_capacity(d);
        for p in 0..d {
            row.clear();
            row.extend(ids.iter().map(|&q| self.score(ids[p], q)));
            let avg = row.iter().sum::<f64>() / d as f64;
            if avg > 0.0 {
                for (q, &a) in row.iter().enumerate() {
                    // the exact value is always below 0.5; keep it so after rounding
                    m.set(p, q, (sigmoid(a / avg) - 0.5).min(BELOW_HALF));
                }
            }
        }
        Ok(AssocMatrix { entries: m })
    }
}

impl PartialEq for AssocNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.vocab_size == other.vocab_size
            && self.shrink_rate == other.shrink_rate
            && self.triples().eq(other.triples())
    }
}

/// Per-sentence d×d association targets, every entry in (−0.5, 0.5).
#[derive(Clone, Debug, PartialEq)]
pub struct AssocMatrix {
    entries: Tensor2,
}

impl AssocMatrix {
    pub fn from_tensor(entries: Tensor2) -> Result<Self> {
        if entries.rows() != entries.cols() {
            return Err(Error::Shape {
                op: "AssocMatrix",
                expected: (entries.rows(), entries.rows()),
                found: entries.shape(),
            });
        }
        if entries.data().iter().any(|v| !(v.abs() < 0.5)) {
            return Err(Error::Invalid("association entries must lie in (-0.5, 0.5)".into()));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.rows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(i, j)
    }

    pub fn as_tensor(&self) -> &Tensor2 {
        &self.entries
    }
}
