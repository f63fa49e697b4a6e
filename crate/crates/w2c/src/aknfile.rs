//! `W2CA`: the association network as sorted sparse upper-triangle triples.
//!
//! ```text
//! "W2CA" | version u32 | v u32 | shrink rate f64 | count u64 | count × (i u32, j u32, score f64)
//! ```
//! All little-endian, triples sorted by (i, j) with i <= j.

use std::io::{BufReader, Write};
use std::path::Path;

use w2c_core::akn::AssocNetwork;

use crate::binio::{open, write_atomic, FieldReader};
use crate::error::Result;

pub const AKN_MAGIC: &[u8; 4] = b"W2CA";
pub const AKN_VERSION: u32 = 1;
const TRIPLE_BYTES: u64 = 16;

pub fn write_akn(net: &AssocNetwork, out: &mut dyn Write) -> std::io::Result<()> {
    out.write_all(AKN_MAGIC)?;
    out.write_all(&AKN_VERSION.to_le_bytes())?;
    out.write_all(&(net.vocab_size() as u32).to_le_bytes())?;
    out.write_all(&net.shrink_rate().to_le_bytes())?;
    out.write_all(&(net.nnz() as u64).to_le_bytes())?;
    for (i, j, s) in net.triples() {
        out.write_all(&i.to_le_bytes())?;
        out.write_all(&j.to_le_bytes())?;
        out.write_all(&s.to_le_bytes())?;
    }
    Ok(())
}

pub fn save_akn(net: &AssocNetwork, path: &Path) -> Result<()> {
    write_atomic(path, |w| write_akn(net, w))
}

pub fn load_akn(path: &Path) -> Result<AssocNetwork> {
    let file = open(path)?;
    let len = file.metadata().map(|m| m.len()).ok();
    let mut r = FieldReader::new(BufReader::new(file), path);
    r.magic(AKN_MAGIC)?;
    r.version(AKN_VERSION)?;
    let v = r.u32("vocabulary size")? as usize;
    let sr = r.f64("shrink rate")?;
    let count_at = r.offset();
    let count = r.u64("triple count")?;
    if let Some(len) = len {
        let expected = count.checked_mul(TRIPLE_BYTES).and_then(|b| b.checked_add(r.offset()));
        if expected != Some(len) {
            return Err(r.error(count_at, format!("{count} triples do not fit a {len}-byte file")));
        }
    }
    let mut triples = Vec::with_capacity(count as usize);
    let mut prev: Option<(u32, u32)> = None;
    for _ in 0..count {
        let at = r.offset();
        let i = r.u32("triple row")?;
        let j = r.u32("triple column")?;
        let s = r.f64("triple score")?;
        if prev.is_some_and(|p| p >= (i, j)) {
            return Err(r.error(at, format!("triple ({i}, {j}) is out of order")));
        }
        prev = Some((i, j));
        triples.push((i, j, s));
    }
    r.expect_end()?;
    let at = r.offset();
    AssocNetwork::from_triples(v, sr, triples).map_err(|e| r.error(at, e.to_string()))
}
