//! Parameter checkpoints: a JSON header followed by an f32 blob.
//!
//! ```text
//! magic [4] | version u32 | header length u64 | header (JSON, UTF-8) | f32 values
//! ```
//! The header lists every tensor by name and shape in blob order. Values
//! are stored as f32; anything representable in f32 round-trips bitwise.

use std::collections::BTreeMap;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use w2c_core::contextspace::ContextSpace;
use w2c_core::encoder::{ToyEncoder, ToyEncoderConfig};
use w2c_core::lmhead::{HeadKind, TaskHead};
use w2c_core::mapper::{MapperConfig, MapperNet, ReconNet};
use w2c_core::numkernel::ParamStore;
use w2c_core::Tensor2;

use crate::binio::{open, put_f32s, write_atomic, FieldReader};
use crate::error::{Result, W2cError};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MAPPER_MAGIC: &[u8; 4] = b"W2CM";
pub const SPACE_MAGIC: &[u8; 4] = b"W2CS";
pub const ENCODER_MAGIC: &[u8; 4] = b"W2CT";
pub const HEAD_MAGIC: &[u8; 4] = b"W2CH";

/// Where an artifact came from: the run seed, the resolved run
/// configuration and the sha256 of every input file, keyed by role.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub run_config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: String,
    pub config: serde_json::Value,
    pub provenance: Provenance,
    pub tensors: Vec<TensorEntry>,
}

/// Raw checkpoint contents, tensors in header order.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub tensors: Vec<Tensor2>,
}

impl Checkpoint {
    fn new(kind: &str, config: serde_json::Value, provenance: Provenance, named: Vec<(String, Tensor2)>) -> Self {
        let (entries, tensors) = named
            .into_iter()
            .map(|(name, t)| (TensorEntry { name, rows: t.rows(), cols: t.cols() }, t))
            .unzip();
        Self {
            header: Header { kind: kind.to_string(), config, provenance, tensors: entries },
            tensors,
        }
    }

    pub fn write_to(&self, magic: &[u8; 4], out: &mut dyn Write) -> std::io::Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        out.write_all(magic)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&(header.len() as u64).to_le_bytes())?;
        out.write_all(&header)?;
        let mut buf = Vec::new();
        for t in &self.tensors {
            buf.clear();
            put_f32s(&mut buf, t.data());
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn save(&self, magic: &[u8; 4], path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_to(magic, w))
    }

    pub fn load(magic: &[u8; 4], kind: &str, path: &Path) -> Result<Self> {
        let mut r = FieldReader::new(BufReader::new(open(path)?), path);
        r.magic(magic)?;
        r.version(CHECKPOINT_VERSION)?;
        let len_at = r.offset();
        let len = r.u64("header length")?;
        if len > (1 << 30) {
            return Err(r.error(len_at, format!("implausible header length {len}")));
        }
        let mut raw = vec![0u8; len as usize];
        r.bytes(&mut raw, "header")?;
        let header: Header =
            serde_json::from_slice(&raw).map_err(|source| W2cError::Json { path: path.to_path_buf(), source })?;
        if header.kind != kind {
            return Err(r.error(len_at + 8, format!("checkpoint holds a {}, expected a {kind}", header.kind)));
        }
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in &header.tensors {
            let at = r.offset();
            let values = r.f32s(e.rows * e.cols, &format!("tensor {}", e.name))?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(r.error(at, format!("non-finite value in tensor {}", e.name)));
            }
            tensors.push(Tensor2::from_vec(e.rows, e.cols, values)?);
        }
        r.expect_end()?;
        Ok(Self { header, tensors })
    }

    fn config<T: for<'de> Deserialize<'de>>(&self, path: &Path) -> Result<T> {
        serde_json::from_value(self.header.config.clone())
            .map_err(|source| W2cError::Json { path: path.to_path_buf(), source })
    }

    /// Tensors whose names start with `prefix`, prefix stripped, in order.
    fn store(&self, prefix: &str) -> ParamStore {
        let mut store = ParamStore::new();
        for (e, t) in self.header.tensors.iter().zip(&self.tensors) {
            if let Some(name) = e.name.strip_prefix(prefix) {
                store.add(name, t.clone());
            }
        }
        store
    }

    fn tensor(&self, name: &str, path: &Path) -> Result<&Tensor2> {
        self.header
            .tensors
            .iter()
            .position(|e| e.name == name)
            .map(|i| &self.tensors[i])
            .ok_or_else(|| W2cError::format(path, 0, format!("missing tensor {name}")))
    }
}

fn named<'a>(prefix: &'a str, store: &'a ParamStore) -> impl Iterator<Item = (String, Tensor2)> + 'a {
    store.ids().map(move |id| (format!("{prefix}{}", store.name(id)), store.get(id).clone()))
}

fn layout_error(path: &Path, e: w2c_core::Error) -> W2cError {
    W2cError::format(path, 0, format!("parameter layout: {e}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapperHeader {
    pub hidden: usize,
    pub coords: usize,
    pub channels: usize,
    pub widths: Vec<usize>,
    pub seed: u64,
}

impl From<&MapperConfig> for MapperHeader {
    fn from(c: &MapperConfig) -> Self {
        Self { hidden: c.hidden, coords: c.coords, channels: c.channels, widths: c.widths.clone(), seed: c.seed }
    }
}

impl From<MapperHeader> for MapperConfig {
    fn from(h: MapperHeader) -> Self {
        Self { hidden: h.hidden, coords: h.coords, channels: h.channels, widths: h.widths, seed: h.seed }
    }
}

/// Mapping network plus its reconstruction network.
#[derive(Clone, Debug, PartialEq)]
pub struct MapperArtifact {
    pub mapper: MapperNet,
    pub recon: ReconNet,
    pub provenance: Provenance,
}

impl MapperArtifact {
    pub fn save(&self, path: &Path) -> Result<()> {
        let config = serde_json::to_value(MapperHeader::from(self.mapper.config())).expect("plain struct");
        let tensors = named("mapper.", self.mapper.params()).chain(named("recon.", self.recon.params())).collect();
        Checkpoint::new("mapper", config, self.provenance.clone(), tensors).save(MAPPER_MAGIC, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck = Checkpoint::load(MAPPER_MAGIC, "mapper", path)?;
        let config: MapperConfig = ck.config::<MapperHeader>(path)?.into();
        let mapper = MapperNet::from_params(config.clone(), &ck.store("mapper.")).map_err(|e| layout_error(path, e))?;
        let recon = ReconNet::from_params(config, &ck.store("recon.")).map_err(|e| layout_error(path, e))?;
        Ok(Self { mapper, recon, provenance: ck.header.provenance })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceHeader {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
}

/// Context centroids `X` and merge matrix `M_M`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceArtifact {
    pub space: ContextSpace,
    pub seed: u64,
    pub provenance: Provenance,
}

impl SpaceArtifact {
    pub fn save(&self, path: &Path) -> Result<()> {
        let config = SpaceHeader { k: self.space.k(), n: self.space.coords(), seed: self.seed };
        let tensors = vec![
            ("centroids".to_string(), self.space.centroids().clone()),
            ("merge".to_string(), self.space.merge().clone()),
        ];
        Checkpoint::new("space", serde_json::to_value(config).expect("plain struct"), self.provenance.clone(), tensors)
            .save(SPACE_MAGIC, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck = Checkpoint::load(SPACE_MAGIC, "space", path)?;
        let h: SpaceHeader = ck.config(path)?;
        let x = ck.tensor("centroids", path)?.clone();
        let m = ck.tensor("merge", path)?.clone();
        if x.shape() != (h.k, h.n) || m.shape() != (h.k, h.k) {
            return Err(W2cError::format(
                path,
                0,
                format!("tensor shapes {:?}, {:?} disagree with k = {}, n = {}", x.shape(), m.shape(), h.k, h.n),
            ));
        }
        let space = ContextSpace::new(x, m).map_err(|e| layout_error(path, e))?;
        Ok(Self { space, seed: h.seed, provenance: ck.header.provenance })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderHeader {
    pub vocab_size: usize,
    pub hidden: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderArtifact {
    pub encoder: ToyEncoder,
    pub provenance: Provenance,
}

impl EncoderArtifact {
    pub fn save(&self, path: &Path) -> Result<()> {
        let c = self.encoder.config();
        let config = EncoderHeader { vocab_size: c.vocab_size, hidden: c.hidden, seed: c.seed };
        let tensors = named("", self.encoder.params()).collect();
        Checkpoint::new("toy-encoder", serde_json::to_value(config).expect("plain struct"), self.provenance.clone(), tensors)
            .save(ENCODER_MAGIC, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck = Checkpoint::load(ENCODER_MAGIC, "toy-encoder", path)?;
        let h: EncoderHeader = ck.config(path)?;
        let config = ToyEncoderConfig { vocab_size: h.vocab_size, hidden: h.hidden, seed: h.seed };
        let store = ck.store("");
        let fresh = ToyEncoder::new(config.clone()).map_err(|e| layout_error(path, e))?;
        for (id, e) in fresh.params().ids().zip(&ck.header.tensors) {
            let want = fresh.params().get(id).shape();
            if fresh.params().name(id) != e.name || want != (e.rows, e.cols) {
                return Err(W2cError::format(path, 0, format!("unexpected tensor {} {:?}", e.name, (e.rows, e.cols))));
            }
        }
        let encoder = ToyEncoder::from_params(config, store).map_err(|e| layout_error(path, e))?;
        Ok(Self { encoder, provenance: ck.header.provenance })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadHeader {
    pub kind: String,
    pub contexts: usize,
    pub outputs: usize,
}

fn kind_name(kind: HeadKind) -> &'static str {
    match kind {
        HeadKind::Sequence => "sequence",
        HeadKind::Token => "token",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadArtifact {
    pub head: TaskHead,
    pub provenance: Provenance,
}

impl HeadArtifact {
    pub fn save(&self, path: &Path) -> Result<()> {
        let h = &self.head;
        let config = HeadHeader { kind: kind_name(h.kind()).into(), contexts: h.contexts(), outputs: h.outputs() };
        let tensors = named("", h.params()).collect();
        Checkpoint::new("head", serde_json::to_value(config).expect("plain struct"), self.provenance.clone(), tensors)
            .save(HEAD_MAGIC, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck = Checkpoint::load(HEAD_MAGIC, "head", path)?;
        let h: HeadHeader = ck.config(path)?;
        let kind = match h.kind.as_str() {
            "sequence" => HeadKind::Sequence,
            "token" => HeadKind::Token,
            other => return Err(W2cError::format(path, 0, format!("unknown head kind {other:?}"))),
        };
        let head = TaskHead::from_params(kind, ck.store("")).map_err(|e| layout_error(path, e))?;
        if (head.contexts(), head.outputs()) != (h.contexts, h.outputs) {
            return Err(W2cError::format(path, 0, "head tensors disagree with the header"));
        }
        Ok(Self { head, provenance: ck.header.provenance })
    }
}

/// Reads only the header of a checkpoint file.
pub fn read_header(path: &Path) -> Result<Header> {
    let mut f = open(path)?;
    let mut prefix = [0u8; 16];
    f.read_exact(&mut prefix).map_err(|e| W2cError::io(path, e))?;
    let len = u64::from_le_bytes(prefix[8..16].try_into().expect("8 bytes"));
    let mut raw = vec![0u8; len.min(1 << 30) as usize];
    f.read_exact(&mut raw).map_err(|e| W2cError::io(path, e))?;
    serde_json::from_slice(&raw).map_err(|source| W2cError::Json { path: path.to_path_buf(), source })
}
