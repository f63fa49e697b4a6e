//! Precomputed W2CE features versus the built-in toy encoder.

use std::path::Path;
use std::process::Command;

use w2c::checkpoint::{EncoderArtifact, HeadArtifact, MapperArtifact, SpaceArtifact};
use w2c::dataset::{encode_corpus, load_corpus, load_labeled, load_vocab};
use w2c::features::{write_features, FileFeatures};
use w2c::synth::{sentiment_lines, TopicMixture};
use w2c_core::corpus::{LabeledExample, Sentence, TaskKind, TokenizeMode};
use w2c_core::encoder::{FeatureBatch, FeatureSource, ToyEncoder};
use w2c_core::interp::rank_contexts;
use w2c_core::lmhead::predict;
use w2c_core::Tensor2;

const CFG: &str = "--tokenizer whitespace --hidden 12 --n 6 --k 4 --seed 5";

fn ok(dir: &Path, args: &str) -> serde_json::Value {
    let out = Command::new(env!("CARGO_BIN_EXE_w2c"))
        .args(args.split_whitespace())
        .args(CFG.split_whitespace())
        .args(["--report", "r.json"])
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "`{args}`: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(&std::fs::read_to_string(dir.join("r.json")).unwrap()).unwrap()
}

/// The toy encoder with its outputs rounded to f32, as an exporter would store them.
struct Rounded(ToyEncoder);

impl FeatureSource for Rounded {
    fn hidden_size(&self) -> usize {
        self.0.hidden_size()
    }

    fn features(&self, index: usize, sent: &Sentence) -> w2c_core::Result<Tensor2> {
        Ok(self.0.features(index, sent)?.round_f32())
    }
}

fn refs(v: &[LabeledExample]) -> Vec<&Sentence> {
    v.iter().map(|e| &e.sentence).collect()
}

fn export(enc: &ToyEncoder, sents: &[&Sentence], path: &Path) {
    let batches: Vec<FeatureBatch> = sents
        .iter()
        .enumerate()
        .map(|(i, s)| FeatureBatch { sentence_id: i as u64, features: enc.encode(s).unwrap() })
        .collect();
    write_features(path, enc.config().hidden, &batches).unwrap();
}

#[test]
fn file_features_match_the_toy_encoder() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (train, test) = TopicMixture::default().split(5, 400, 100);
    std::fs::write(d.join("train.tsv"), sentiment_lines(&train)).unwrap();
    std::fs::write(d.join("test.tsv"), sentiment_lines(&test)).unwrap();
    std::fs::write(d.join("corpus.txt"), train.iter().map(|(_, t)| format!("{t}\n")).collect::<String>()).unwrap();

    // toy run; its fine-tuned encoder is what gets exported
    ok(d, "build-akn --corpus corpus.txt --out akn.w2ca --vocab v.txt --vocab-from test.tsv");
    ok(d, "train-mapper --corpus corpus.txt --akn akn.w2ca --vocab v.txt --train train.tsv --encoder-out e.w2ct --out m.w2cm");
    ok(d, "cluster --space s0.w2cs --mapper m.w2cm --corpus corpus.txt --vocab v.txt --encoder e.w2ct");
    ok(d, "train --space s0.w2cs --mapper m.w2cm --vocab v.txt --train train.tsv --encoder e.w2ct --space-out s.w2cs --head h.w2ch");
    let toy_acc = ok(d, "eval --space s.w2cs --mapper m.w2cm --head h.w2ch --vocab v.txt --data test.tsv --encoder e.w2ct")
        ["results"]["accuracy"]
        .as_f64()
        .unwrap();

    let enc = EncoderArtifact::load(&d.join("e.w2ct")).unwrap().encoder;
    let vocab = load_vocab(&d.join("v.txt")).unwrap();
    let mode = TokenizeMode::Whitespace;
    let corpus = encode_corpus(&load_corpus(&d.join("corpus.txt")).unwrap(), &vocab, mode).unwrap();
    let tr = load_labeled(&d.join("train.tsv"), TaskKind::Sentiment, &vocab, mode).unwrap();
    let te = load_labeled(&d.join("test.tsv"), TaskKind::Sentiment, &vocab, mode).unwrap();
    export(&enc, &corpus.iter().collect::<Vec<_>>(), &d.join("corpus.w2ce"));
    export(&enc, &refs(&tr), &d.join("train.w2ce"));
    export(&enc, &refs(&te), &d.join("test.w2ce"));

    // the same trained model sees bitwise identical inputs either way
    let space = SpaceArtifact::load(&d.join("s.w2cs")).unwrap().space;
    let mapper = MapperArtifact::load(&d.join("m.w2cm")).unwrap().mapper;
    let head = HeadArtifact::load(&d.join("h.w2ch")).unwrap().head;
    let file = FileFeatures::load(&d.join("test.w2ce"), Some(12), &refs(&te)).unwrap();
    let rounded = Rounded(enc.clone());
    assert_eq!(
        predict(&space, &mapper, &file, &head, &te).unwrap(),
        predict(&space, &mapper, &rounded, &head, &te).unwrap()
    );
    let file = FileFeatures::load(&d.join("train.w2ce"), Some(12), &refs(&tr)).unwrap();
    assert_eq!(
        rank_contexts(&space, &mapper, &file, &tr).unwrap(),
        rank_contexts(&space, &mapper, &rounded, &tr).unwrap()
    );

    // a full pipeline driven only by feature files
    let r = ok(d, "train-mapper --corpus corpus.txt --akn akn.w2ca --vocab v.txt --features corpus.w2ce --encoder-source file --out fm.w2cm");
    assert!(r["inputs"].get("features").is_some(), "{r}");
    ok(d, "cluster --space fs0.w2cs --mapper fm.w2cm --corpus corpus.txt --vocab v.txt --features corpus.w2ce --encoder-source file");
    ok(d, "train --space fs0.w2cs --mapper fm.w2cm --vocab v.txt --train train.tsv --features train.w2ce --encoder-source file --space-out fs.w2cs --head fh.w2ch");
    let file_acc = ok(d, "eval --space fs.w2cs --mapper fm.w2cm --head fh.w2ch --vocab v.txt --data test.tsv --features test.w2ce --encoder-source file")
        ["results"]["accuracy"]
        .as_f64()
        .unwrap();
    assert!(file_acc >= 90.0 && (file_acc - toy_acc).abs() <= 5.0, "file {file_acc} vs toy {toy_acc}");
    let r = ok(
        d,
        "interpret --space fs.w2cs --mapper fm.w2cm --head fh.w2ch --vocab v.txt --rank-data train.tsv --rank-features train.w2ce --data test.tsv --features test.w2ce --encoder-source file",
    );
    assert!(r["results"]["ra"].as_f64().unwrap() >= 90.0, "{r}");

    // features exported for another dataset are rejected
    let out = Command::new(env!("CARGO_BIN_EXE_w2c"))
        .args("eval --space fs.w2cs --mapper fm.w2cm --head fh.w2ch --vocab v.txt --data test.tsv --features train.w2ce --encoder-source file".split_whitespace())
        .args(CFG.split_whitespace())
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
}
