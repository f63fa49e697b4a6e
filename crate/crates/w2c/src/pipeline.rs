//! The pipeline stages behind each command. Every stage reads its inputs
//! from files, writes its outputs atomically and returns a JSON report
//! that echoes the resolved configuration and the hashes of its inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use w2c_core::akn::AssocNetwork;
use w2c_core::contextspace::{kmeans_cluster, ContextSpace};
use w2c_core::corpus::{LabeledExample, Sentence, TaskKind, TokenizeMode, Vocab};
use w2c_core::encoder::{FeatureSource, ToyEncoder, ToyEncoderConfig};
use w2c_core::interp::{rank_contexts, reversal_metrics, reverse_context_space};
use w2c_core::lmhead::{predict, train_downstream, HeadKind, TaskHead};
use w2c_core::mapper::{train_mapper as fit_mapper, MapperConfig, MapperNet, MapperSample, ReconNet};
use w2c_core::metrics::{evaluate_classification, evaluate_correction};
use w2c_core::Tensor2;

use crate::aknfile::{load_akn, save_akn};
use crate::binio::{sha256_file, write_atomic, write_bytes_atomic};
use crate::checkpoint::{EncoderArtifact, HeadArtifact, MapperArtifact, Provenance, SpaceArtifact};
use crate::config::{EncoderSource, RunConfig};
use crate::dataset::{encode_corpus, load_corpus, load_labeled, load_raw, load_vocab, save_vocab};
use crate::error::{Result, W2cError};
use crate::features::FileFeatures;

/// Hashes of the files a stage read, keyed by role.
#[derive(Clone, Debug, Default)]
struct Inputs(BTreeMap<String, String>);

impl Inputs {
    fn add(&mut self, role: &str, path: &Path) -> Result<()> {
        self.0.insert(role.to_string(), sha256_file(path)?);
        Ok(())
    }

    fn provenance(&self, cfg: &RunConfig) -> Provenance {
        Provenance { seed: cfg.seed, run_config: cfg.to_json(), inputs: self.0.clone() }
    }
}

/// Full result of one command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub config: Value,
    pub inputs: BTreeMap<String, String>,
    pub results: Value,
}

impl Report {
    fn new(command: &str, cfg: &RunConfig, inputs: &Inputs, results: Value) -> Self {
        Self { command: command.into(), config: cfg.to_json(), inputs: inputs.0.clone(), results }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_bytes_atomic(path, self.to_json().as_bytes())
    }
}

/// Where hidden features come from for one dataset.
#[derive(Clone, Debug)]
pub enum Encoder {
    /// A toy encoder checkpoint.
    Toy(PathBuf),
    /// A W2CE file aligned with the dataset.
    File(PathBuf),
}

impl Encoder {
    pub fn pick(cfg: &RunConfig, checkpoint: Option<&Path>, features: Option<&Path>) -> Result<Self> {
        match (cfg.encoder, checkpoint, features) {
            (EncoderSource::Toy, Some(p), _) => Ok(Encoder::Toy(p.to_path_buf())),
            (EncoderSource::File, _, Some(p)) => Ok(Encoder::File(p.to_path_buf())),
            (EncoderSource::Toy, None, _) => Err(W2cError::Config("toy encoder selected but no --encoder checkpoint given".into())),
            (EncoderSource::File, _, None) => Err(W2cError::Config("file encoder selected but no --features file given".into())),
        }
    }

    fn open(&self, role: &str, inputs: &mut Inputs, vocab: &Vocab, sentences: &[&Sentence]) -> Result<Box<dyn FeatureSource>> {
        match self {
            Encoder::Toy(p) => {
                inputs.add("encoder", p)?;
                let enc = EncoderArtifact::load(p)?.encoder;
                if enc.config().vocab_size != vocab.len() {
                    return Err(W2cError::Mismatch(format!(
                        "encoder {} was built for {} tokens, vocabulary has {}",
                        p.display(),
                        enc.config().vocab_size,
                        vocab.len()
                    )));
                }
                Ok(Box::new(enc))
            }
            Encoder::File(p) => {
                inputs.add(role, p)?;
                Ok(Box::new(FileFeatures::load(p, None, sentences)?))
            }
        }
    }
}

fn check_hidden(source: &dyn FeatureSource, mapper: &MapperNet) -> Result<()> {
    if source.hidden_size() != mapper.config().hidden {
        return Err(W2cError::Mismatch(format!(
            "features have h = {}, mapper expects h = {}",
            source.hidden_size(),
            mapper.config().hidden
        )));
    }
    Ok(())
}

fn check_space(space: &ContextSpace, mapper: &MapperNet) -> Result<()> {
    if space.coords() != mapper.config().coords {
        return Err(W2cError::Mismatch(format!(
            "space has n = {}, mapper has n = {}",
            space.coords(),
            mapper.config().coords
        )));
    }
    Ok(())
}

fn check_head(head: &TaskHead, space: &ContextSpace, cfg: &RunConfig, vocab: &Vocab) -> Result<()> {
    if head.contexts() != space.k() {
        return Err(W2cError::Mismatch(format!("head has k = {}, space has k = {}", head.contexts(), space.k())));
    }
    let want = head_shape(cfg, vocab);
    if (head.kind(), head.outputs()) != want {
        return Err(W2cError::Mismatch(format!(
            "head is {:?} with {} outputs, task needs {:?} with {}",
            head.kind(),
            head.outputs(),
            want.0,
            want.1
        )));
    }
    Ok(())
}

fn head_shape(cfg: &RunConfig, vocab: &Vocab) -> (HeadKind, usize) {
    let task = TaskKind::from(cfg.task);
    let outputs = match task {
        TaskKind::Sentiment => 2,
        TaskKind::Correction => vocab.len(),
    };
    (HeadKind::for_task(task), outputs)
}

fn mode(cfg: &RunConfig) -> TokenizeMode {
    cfg.tokenizer.into()
}

fn labeled(cfg: &RunConfig, path: &Path, role: &str, inputs: &mut Inputs, vocab: &Vocab) -> Result<Vec<LabeledExample>> {
    inputs.add(role, path)?;
    let data = load_labeled(path, cfg.task.into(), vocab, mode(cfg))?;
    if data.is_empty() {
        return Err(W2cError::Dataset { path: path.to_path_buf(), line: 0, msg: "no examples".into() });
    }
    Ok(data)
}

fn sentences(data: &[LabeledExample]) -> Vec<&Sentence> {
    data.iter().map(|e| &e.sentence).collect()
}

/// Word elements of `sentences` in order, stopping at `cap` rows.
pub fn collect_elements(
    mapper: &MapperNet,
    source: &dyn FeatureSource,
    sentences: &[&Sentence],
    cap: usize,
) -> Result<Tensor2> {
    let n = mapper.config().coords;
    let mut data = Vec::new();
    for (i, s) in sentences.iter().enumerate() {
        let c = mapper.map(&source.features(i, s)?)?;
        let room = cap - data.len() / n;
        data.extend_from_slice(&c.0.data()[..c.len().min(room) * n]);
        if data.len() / n == cap {
            break;
        }
    }
    Ok(Tensor2::from_vec(data.len() / n, n, data)?)
}

pub struct BuildAkn<'a> {
    pub corpus: &'a Path,
    pub out: &'a Path,
    pub vocab_out: &'a Path,
    /// Labeled datasets whose texts also feed the vocabulary.
    pub vocab_from: &'a [PathBuf],
}

pub fn build_akn(cfg: &RunConfig, a: &BuildAkn) -> Result<Report> {
    let mut inputs = Inputs::default();
    inputs.add("corpus", a.corpus)?;
    let texts = load_corpus(a.corpus)?;
    let mut extra = Vec::new();
    for (i, p) in a.vocab_from.iter().enumerate() {
        inputs.add(&format!("vocab_from.{i}"), p)?;
        extra.extend(load_raw(p, cfg.task.into(), mode(cfg))?);
    }
    let all = texts.iter().map(String::as_str).chain(extra.iter().flat_map(|r| r.texts()));
    let vocab = Vocab::build(all, cfg.min_count, mode(cfg))?;
    let sents = encode_corpus(&texts, &vocab, mode(cfg))?;
    let mut net = AssocNetwork::new(vocab.len(), cfg.shrink_rate)?;
    for s in &sents {
        net.update(s)?;
    }
    save_akn(&net, a.out)?;
    save_vocab(&vocab, a.vocab_out)?;
    Ok(Report::new(
        "build-akn",
        cfg,
        &inputs,
        json!({"vocab_size": vocab.len(), "sentences": sents.len(), "pairs": net.nnz(), "shrink_rate": net.shrink_rate()}),
    ))
}

pub struct TrainMapper<'a> {
    pub corpus: &'a Path,
    pub akn: &'a Path,
    pub vocab: &'a Path,
    /// Labeled data the toy encoder is fine-tuned on.
    pub train: Option<&'a Path>,
    /// Encoder checkpoint written (toy) or features read (file).
    pub encoder_out: Option<&'a Path>,
    pub features: Option<&'a Path>,
    pub out: &'a Path,
}

pub fn train_mapper(cfg: &RunConfig, a: &TrainMapper) -> Result<Report> {
    let mut inputs = Inputs::default();
    inputs.add("vocab", a.vocab)?;
    inputs.add("akn", a.akn)?;
    inputs.add("corpus", a.corpus)?;
    let vocab = load_vocab(a.vocab)?;
    let net = load_akn(a.akn)?;
    if net.vocab_size() != vocab.len() {
        return Err(W2cError::Mismatch(format!(
            "AKN covers {} tokens, vocabulary has {}",
            net.vocab_size(),
            vocab.len()
        )));
    }
    let sents = encode_corpus(&load_corpus(a.corpus)?, &vocab, mode(cfg))?;
    let refs: Vec<&Sentence> = sents.iter().collect();

    let mut results = serde_json::Map::new();
    let source: Box<dyn FeatureSource> = match cfg.encoder {
        EncoderSource::Toy => {
            let (train, out) = match (a.train, a.encoder_out) {
                (Some(t), Some(o)) => (t, o),
                _ => return Err(W2cError::Config("the toy encoder needs --train and --encoder-out".into())),
            };
            let data = labeled(cfg, train, "train", &mut inputs, &vocab)?;
            let mut enc = ToyEncoder::new(ToyEncoderConfig { vocab_size: vocab.len(), hidden: cfg.hidden, seed: cfg.seed })?;
            let (_, outputs) = head_shape(cfg, &vocab);
            let rep = enc.fine_tune(&data, cfg.task.into(), outputs, cfg.encoder_epochs, cfg.encoder_lr)?;
            results.insert("encoder".into(), json!({"epoch_losses": rep.epoch_losses, "train_accuracy": rep.train_accuracy}));
            EncoderArtifact { encoder: enc, provenance: inputs.provenance(cfg) }.save(out)?;
            // continue with the stored precision so later stages see the same values
            Box::new(EncoderArtifact::load(out)?.encoder)
        }
        EncoderSource::File => {
            let p = a.features.ok_or_else(|| W2cError::Config("file encoder selected but no --features file given".into()))?;
            inputs.add("features", p)?;
            Box::new(FileFeatures::load(p, None, &refs)?)
        }
    };

    let h = source.hidden_size();
    let samples = refs
        .iter()
        .enumerate()
        .map(|(i, s)| MapperSample::new(i as u64, source.features(i, s)?, &net, s))
        .collect::<w2c_core::Result<Vec<_>>>()?;
    let mc = MapperConfig::new(h, cfg.n, cfg.seed);
    let mut mapper = MapperNet::new(mc.clone())?;
    let mut recon = ReconNet::new(mc)?;
    let trace = fit_mapper(&mut mapper, &mut recon, &samples, cfg.mapper_epochs, cfg.mapper_lr)?;
    MapperArtifact { mapper, recon, provenance: inputs.provenance(cfg) }.save(a.out)?;
    results.insert(
        "mapper".into(),
        json!({
            "hidden": h,
            "n": cfg.n,
            "sentences": samples.len(),
            "epoch_total": trace.iter().map(|t| t.total).collect::<Vec<_>>(),
            "epoch_alignment": trace.iter().map(|t| t.alignment).collect::<Vec<_>>(),
            "epoch_reconstruction": trace.iter().map(|t| t.reconstruction).collect::<Vec<_>>(),
        }),
    );
    Ok(Report::new("train-mapper", cfg, &inputs, Value::Object(results)))
}

pub struct Cluster<'a> {
    pub mapper: &'a Path,
    pub corpus: &'a Path,
    pub vocab: &'a Path,
    pub encoder: Encoder,
    pub out: &'a Path,
}

fn cluster_report(cfg: &RunConfig, inputs: &Inputs, elements: &Tensor2, out: &Path) -> Result<Report> {
    let run = kmeans_cluster(elements, cfg.contexts(), cfg.kmeans_max_iter, cfg.kmeans_restarts, cfg.seed)?;
    let mut sizes = vec![0usize; cfg.contexts()];
    for &a in &run.assignments {
        sizes[a] += 1;
    }
    let results = json!({
        "elements": elements.rows(),
        "k": run.space.k(),
        "n": run.space.coords(),
        "objective": run.objective(),
        "iterations": run.objective_trace.len(),
        "converged": run.converged,
        "cluster_sizes": sizes,
    });
    SpaceArtifact { space: run.space, seed: cfg.seed, provenance: inputs.provenance(cfg) }.save(out)?;
    Ok(Report::new("cluster", cfg, inputs, results))
}

pub fn cluster(cfg: &RunConfig, a: &Cluster) -> Result<Report> {
    let mut inputs = Inputs::default();
    inputs.add("mapper", a.mapper)?;
    inputs.add("vocab", a.vocab)?;
    inputs.add("corpus", a.corpus)?;
    let mapper = MapperArtifact::load(a.mapper)?.mapper;
    let vocab = load_vocab(a.vocab)?;
    let sents = encode_corpus(&load_corpus(a.corpus)?, &vocab, mode(cfg))?;
    let refs: Vec<&Sentence> = sents.iter().collect();
    let source = a.encoder.open("features", &mut inputs, &vocab, &refs)?;
    check_hidden(source.as_ref(), &mapper)?;
    let elements = collect_elements(&mapper, source.as_ref(), &refs, cfg.kmeans_max_elements)?;
    cluster_report(cfg, &inputs, &elements, a.out)
}

/// Reads whitespace-separated points, one per line.
pub fn load_points(path: &Path) -> Result<Tensor2> {
    let text = std::fs::read_to_string(path).map_err(|e| W2cError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| W2cError::Dataset { path: path.to_path_buf(), line: i + 1, msg: "expected finite numbers".into() })?;
        if rows.first().is_some_and(|r: &Vec<f64>| r.len() != row.len()) {
            return Err(W2cError::Dataset { path: path.to_path_buf(), line: i + 1, msg: "point dimension changes".into() });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(W2cError::Dataset { path: path.to_path_buf(), line: 0, msg: "no points".into() });
    }
    Ok(Tensor2::from_rows(&rows)?)
}

/// Clusters explicit points instead of mapped word elements.
pub fn cluster_points(cfg: &RunConfig, points: &Path, out: &Path) -> Result<Report> {
    let mut inputs = Inputs::default();
    inputs.add("elements", points)?;
    let elements = load_points(points)?;
    cluster_report(cfg, &inputs, &elements, out)
}

pub struct Train<'a> {
    pub space: &'a Path,
    pub mapper: &'a Path,
    pub vocab: &'a Path,
    pub train: &'a Path,
    pub encoder: Encoder,
    pub space_out: &'a Path,
    pub head_out: &'a Path,
}

pub fn train(cfg: &RunConfig, a: &Train) -> Result<Report> {
    let mut inputs = Inputs::default();
    inputs.add("space", a.space)?;
    inputs.add("mapper", a.mapper)?;
    inputs.add("vocab", a.vocab)?;
    let mut space = SpaceArtifact::load(a.space)?.space;
    let mapper = MapperArtifact::load(a.mapper)?.mapper;
    check_space(&space, &mapper)?;
    let vocab = load_vocab(a.vocab)?;
    let data = labeled(cfg, a.train, "train", &mut inputs, &vocab)?;
    let source = a.encoder.open("features", &mut inputs, &vocab, &sentences(&data))?;
    check_hidden(source.as_ref(), &mapper)?;
    let (kind, outputs) = head_shape(cfg, &vocab);
    let mut head = TaskHead::new(kind, space.k(), outputs)?;
    let rep = train_downstream(&mut space, &mapper, source.as_ref(), &mut head, &data, cfg.epochs(), cfg.downstream_lr)?;
    let prov = inputs.provenance(cfg);
    SpaceArtifact { space, seed: cfg.seed, provenance: prov.clone() }.save(a.space_out)?;
    HeadArtifact { head, provenance: prov }.save(a.head_out)?;
    Ok(Report::new(
        "train",
        cfg,
        &inputs,
        json!({"examples": data.len(), "epoch_losses": rep.epoch_losses, "epoch_accuracy": rep.epoch_accuracy}),
    ))
}

/// Loaded model pieces shared by `eval` and `interpret`.
struct Model {
    space: ContextSpace,
    mapper: MapperNet,
    head: TaskHead,
    vocab: Vocab,
}

fn load_model(cfg: &RunConfig, inputs: &mut Inputs, space: &Path, mapper: &Path, head: &Path, vocab: &Path) -> Result<Model> {
    inputs.add("space", space)?;
    inputs.add("mapper", mapper)?;
    inputs.add("head", head)?;
    inputs.add("vocab", vocab)?;
    let space = SpaceArtifact::load(space)?.space;
    let mapper = MapperArtifact::load(mapper)?.mapper;
    check_space(&space, &mapper)?;
    let vocab = load_vocab(vocab)?;
    let head = HeadArtifact::load(head)?.head;
    check_head(&head, &space, cfg, &vocab)?;
    Ok(Model { space, mapper, head, vocab })
}

pub struct Eval<'a> {
    pub space: &'a Path,
    pub mapper: &'a Path,
    pub head: &'a Path,
    pub vocab: &'a Path,
    pub data: &'a Path,
    pub encoder: Encoder,
}

pub fn eval(cfg: &RunConfig, a: &Eval) -> Result<Report> {
    let mut inputs = Inputs::default();
    let m = load_model(cfg, &mut inputs, a.space, a.mapper, a.head, a.vocab)?;
    let data = labeled(cfg, a.data, "data", &mut inputs, &m.vocab)?;
    let source = a.encoder.open("features", &mut inputs, &m.vocab, &sentences(&data))?;
    check_hidden(source.as_ref(), &m.mapper)?;
    let pred = predict(&m.space, &m.mapper, source.as_ref(), &m.head, &data)?;
    let results = match TaskKind::from(cfg.task) {
        TaskKind::Sentiment => {
            let p: Vec<usize> = pred.iter().map(|r| r[0] as usize).collect();
            let l: Vec<usize> = data.iter().filter_map(|e| e.class_label()).collect();
            json!({"examples": data.len(), "accuracy": evaluate_classification(&p, &l)?})
        }
        TaskKind::Correction => {
            let src: Vec<&[u32]> = data.iter().map(|e| e.sentence.ids()).collect();
            let tgt: Vec<&[u32]> = data.iter().filter_map(|e| e.target_tokens()).collect();
            let pr: Vec<&[u32]> = pred.iter().map(Vec::as_slice).collect();
            let m = evaluate_correction(&src, &tgt, &pr)?;
            let prf = |p: &w2c_core::metrics::Prf| json!({"precision": p.precision, "recall": p.recall, "f1": p.f1});
            json!({
                "examples": data.len(),
                "word": {"detection": prf(&m.word.detection), "correction": prf(&m.word.correction)},
                "sentence": {"detection": prf(&m.sentence.detection), "correction": prf(&m.sentence.correction)},
            })
        }
    };
    Ok(Report::new("eval", cfg, &inputs, results))
}

pub struct Interpret<'a> {
    pub space: &'a Path,
    pub mapper: &'a Path,
    pub head: &'a Path,
    pub vocab: &'a Path,
    /// Labeled data the contexts are ranked on.
    pub rank_data: &'a Path,
    pub rank_encoder: Encoder,
    /// Labeled data the predictions are compared on.
    pub data: &'a Path,
    pub encoder: Encoder,
    pub csv: Option<&'a Path>,
}

pub fn interpret(cfg: &RunConfig, a: &Interpret) -> Result<Report> {
    if TaskKind::from(cfg.task) != TaskKind::Sentiment {
        return Err(W2cError::Config("reversal analysis needs the sentiment task".into()));
    }
    let mut inputs = Inputs::default();
    let m = load_model(cfg, &mut inputs, a.space, a.mapper, a.head, a.vocab)?;
    let rank = labeled(cfg, a.rank_data, "rank_data", &mut inputs, &m.vocab)?;
    let rank_source = a.rank_encoder.open("rank_features", &mut inputs, &m.vocab, &sentences(&rank))?;
    check_hidden(rank_source.as_ref(), &m.mapper)?;
    let data = labeled(cfg, a.data, "data", &mut inputs, &m.vocab)?;
    let source = a.encoder.open("features", &mut inputs, &m.vocab, &sentences(&data))?;
    check_hidden(source.as_ref(), &m.mapper)?;

    let ranking = rank_contexts(&m.space, &m.mapper, rank_source.as_ref(), &rank)?;
    let reversed = reverse_context_space(&m.space, &ranking)?;
    let classes = |space: &ContextSpace| -> Result<Vec<usize>> {
        Ok(predict(space, &m.mapper, source.as_ref(), &m.head, &data)?.iter().map(|r| r[0] as usize).collect())
    };
    let original = classes(&m.space)?;
    let modified = classes(&reversed)?;
    let labels: Vec<usize> = data.iter().filter_map(|e| e.class_label()).collect();
    let rep = reversal_metrics(&original, &modified, &labels)?;
    let after = rank_contexts(&reversed, &m.mapper, rank_source.as_ref(), &rank)?;

    if let Some(csv) = a.csv {
        write_atomic(csv, |w| {
            writeln!(w, "context,rank,positive,negative,affinity")?;
            for (r, &c) in ranking.order.iter().enumerate() {
                writeln!(w, "{c},{r},{},{},{}", ranking.positive[c], ranking.negative[c], ranking.affinity(c))?;
            }
            Ok(())
        })?;
    }
    Ok(Report::new(
        "interpret",
        cfg,
        &inputs,
        json!({
            "examples": data.len(),
            "oa": rep.oa,
            "ca": rep.ca,
            "ra": rep.ra,
            "ranking_before": ranking.order,
            "ranking_after": after.order,
            "affinity_before": (0..ranking.len()).map(|c| ranking.affinity(c)).collect::<Vec<_>>(),
            "affinity_after": (0..after.len()).map(|c| after.affinity(c)).collect::<Vec<_>>(),
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_cap_truncates_in_order() {
        let mapper = MapperNet::new(MapperConfig::new(4, 2, 0)).unwrap();
        let enc = ToyEncoder::new(ToyEncoderConfig { vocab_size: 6, hidden: 4, seed: 0 }).unwrap();
        let s: Vec<Sentence> = [vec![2u32, 3, 4], vec![5, 2]].iter().map(|i| Sentence::from_ids(i).unwrap()).collect();
        let refs: Vec<&Sentence> = s.iter().collect();
        let all = collect_elements(&mapper, &enc, &refs, 100).unwrap();
        assert_eq!(all.rows(), 5);
        let some = collect_elements(&mapper, &enc, &refs, 4).unwrap();
        assert_eq!(some.rows(), 4);
        assert_eq!(some.data(), &all.data()[..8]);
    }

    #[test]
    fn points_parse() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.txt");
        std::fs::write(&p, "1 0\n0.5, 0.5\n\n").unwrap();
        assert_eq!(load_points(&p).unwrap().shape(), (2, 2));
        std::fs::write(&p, "1 0\n1 0 0\n").unwrap();
        assert!(matches!(load_points(&p), Err(W2cError::Dataset { line: 2, .. })));
        std::fs::write(&p, "1 nan\n").unwrap();
        assert!(load_points(&p).is_err());
    }
}
