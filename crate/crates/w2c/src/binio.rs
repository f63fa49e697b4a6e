//! Little-endian primitives, atomic file replacement and content hashes.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Result, W2cError};

/// Reads fixed-width little-endian fields while tracking the byte offset,
/// so format errors can say where they happened.
pub struct FieldReader<R> {
    inner: R,
    offset: u64,
    path: PathBuf,
}

impl<R: Read> FieldReader<R> {
    pub fn new(inner: R, path: impl Into<PathBuf>) -> Self {
        Self { inner, offset: 0, path: path.into() }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn error(&self, offset: u64, msg: impl Into<String>) -> W2cError {
        W2cError::format(&self.path, offset, msg)
    }

    pub fn bytes(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(self.error(
                        self.offset,
                        format!("truncated {what}: needed {} bytes, found {filled}", buf.len()),
                    ))
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(W2cError::io(&self.path, e)),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let mut m = [0u8; 4];
        self.bytes(&mut m, "magic")?;
        if &m != expected {
            return Err(self.error(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(&m),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    pub fn version(&mut self, supported: u32) -> Result<u32> {
        let at = self.offset;
        let v = self.u32("version")?;
        if v != supported {
            return Err(self.error(at, format!("unsupported version {v}, expected {supported}")));
        }
        Ok(v)
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }

    /// Reads `count` f32 values, widened to f64.
    pub fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let mut buf = vec![0u8; count * 4];
        self.bytes(&mut buf, what)?;
        Ok(buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }

    /// Fails unless the input is exhausted.
    pub fn expect_end(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        loop {
            match self.inner.read(&mut b) {
                Ok(0) => return Ok(()),
                Ok(_) => return Err(self.error(self.offset, "trailing bytes after the last record")),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(W2cError::io(&self.path, e)),
            }
        }
    }
}

pub fn put_f32s(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| W2cError::io(path, e))
}

/// Writes `path` through a temporary file in the same directory, renamed
/// into place only after `fill` succeeds and the data is flushed.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| W2cError::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).and_then(|_| w.flush()).map_err(|e| W2cError::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| W2cError::io(path, e))?;
    tmp.persist(path).map_err(|e| W2cError::io(path, e.error))?;
    Ok(())
}

pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |w| w.write_all(bytes))
}

/// Hex sha256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| W2cError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_reports_offset() {
        let data = [1u8, 0, 0, 0, 7];
        let mut r = FieldReader::new(&data[..], "x.bin");
        assert_eq!(r.u32("a").unwrap(), 1);
        let err = r.u32("b").unwrap_err();
        assert!(matches!(err, W2cError::Format { offset: 4, .. }), "{err}");
    }

    #[test]
    fn failed_write_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out.bin");
        let err = write_atomic(&target, |w| {
            w.write_all(b"partial")?;
            Err(io::Error::other("interrupted"))
        });
        assert!(err.is_err());
        assert!(!target.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out.bin");
        write_bytes_atomic(&target, b"one").unwrap();
        write_bytes_atomic(&target, b"two").unwrap();
        assert_eq!(std::fs::read(&target).unwrap(), b"two");
        assert_eq!(
            sha256_file(&target).unwrap(),
            "3fc4ccfe745870e2c0d99f71f30ff0656c8dedd41cc1d7d3d376b0dbe685e2f3"
        );
    }
}
