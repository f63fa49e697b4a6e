use std::path::Path;
use std::process::Command;

use w2c::checkpoint::{EncoderArtifact, HeadArtifact, MapperArtifact, SpaceArtifact};
use w2c::dataset::{load_labeled, load_vocab};
use w2c::synth::correction_pairs;
use w2c_core::corpus::{TaskKind, TokenizeMode};
use w2c_core::lmhead::{predict, HeadKind};

const CFG: &str = "--task correction --tokenizer whitespace --hidden 16 --n 8 --k 24 --lr 1e-2 --epochs 5";

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

fn tsv(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(s, t)| format!("{s}\t{t}\n")).collect()
}

#[test]
fn synthetic_correction_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let train = correction_pairs(0, 2000, 10, 8, 0.15);
    std::fs::write(d.join("train.tsv"), tsv(&train)).unwrap();
    std::fs::write(d.join("test.tsv"), tsv(&correction_pairs(1, 300, 10, 8, 0.15))).unwrap();
    std::fs::write(d.join("corpus.txt"), train.iter().map(|(_, t)| format!("{t}\n")).collect::<String>()).unwrap();

    ok(d, "build-akn --corpus corpus.txt --out a.w2ca --vocab v.txt --vocab-from train.tsv --vocab-from test.tsv");
    ok(d, "train-mapper --corpus corpus.txt --akn a.w2ca --vocab v.txt --train train.tsv --encoder-out e.w2ct --out m.w2cm");
    ok(d, "cluster --space s0.w2cs --mapper m.w2cm --corpus corpus.txt --vocab v.txt --encoder e.w2ct");
    ok(d, "train --space s0.w2cs --mapper m.w2cm --vocab v.txt --train train.tsv --encoder e.w2ct --space-out s.w2cs --head h.w2ch");
    let r = ok(d, "eval --space s.w2cs --mapper m.w2cm --head h.w2ch --vocab v.txt --data test.tsv --encoder e.w2ct");
    for level in ["word", "sentence"] {
        let f1 = r["results"][level]["correction"]["f1"].as_f64().unwrap();
        assert!(f1 >= 95.0, "{level}: {}", r["results"]);
    }

    // token-level agreement with the targets, through the library
    let vocab = load_vocab(&d.join("v.txt")).unwrap();
    let head = HeadArtifact::load(&d.join("h.w2ch")).unwrap().head;
    assert_eq!((head.kind(), head.outputs()), (HeadKind::Token, vocab.len()));
    let test = load_labeled(&d.join("test.tsv"), TaskKind::Correction, &vocab, TokenizeMode::Whitespace).unwrap();
    let pred = predict(
        &SpaceArtifact::load(&d.join("s.w2cs")).unwrap().space,
        &MapperArtifact::load(&d.join("m.w2cm")).unwrap().mapper,
        &EncoderArtifact::load(&d.join("e.w2ct")).unwrap().encoder,
        &head,
        &test,
    )
    .unwrap();
    let (mut hit, mut total) = (0, 0);
    for (p, e) in pred.iter().zip(&test) {
        let t = e.target_tokens().unwrap();
        assert_eq!(p.len(), t.len());
        hit += p.iter().zip(t).filter(|(a, b)| a == b).count();
        total += t.len();
    }
    assert!(hit as f64 >= 0.95 * total as f64, "{hit}/{total}");

    // interpretation only applies to sentiment heads
    let out = Command::new(env!("CARGO_BIN_EXE_w2c"))
        .args("interpret --space s.w2cs --mapper m.w2cm --head h.w2ch --vocab v.txt --rank-data train.tsv --data test.tsv --encoder e.w2ct".split_whitespace())
        .args(CFG.split_whitespace())
        .current_dir(d)
        .output()
        .unwrap();
    assert!(!out.status.success());
}
