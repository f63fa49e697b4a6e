use std::path::Path;
use std::process::{Command, Output};

use w2c::checkpoint::SpaceArtifact;
use w2c::synth::{sentiment_lines, TopicMixture};

fn w2c(dir: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_w2c")).args(args.split_whitespace()).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &str) -> String {
    let out = w2c(dir, args);
    assert!(out.status.success(), "`{args}`: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn clusters_explicit_points() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.txt"), "1 0\n1 0\n\n0 1\n0 1\n").unwrap();
    let stdout = ok(dir.path(), "cluster --elements p.txt --space s.w2cs --k 2 --seed 3");
    assert!(stdout.contains("k=2"), "{stdout}");
    let space = SpaceArtifact::load(&dir.path().join("s.w2cs")).unwrap().space;
    let mut rows: Vec<Vec<f64>> = space.centroids().iter_rows().map(|r| r.to_vec()).collect();
    rows.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert_eq!(rows, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    assert_eq!(space.merge(), &w2c_core::Tensor2::identity(2));
}

#[test]
fn missing_input_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = w2c(dir.path(), "build-akn --corpus nope.txt --out a.w2ca");
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));
    assert!(!dir.path().join("a.w2ca").exists());
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"colour": 1}"#).unwrap();
    std::fs::write(dir.path().join("corpus.txt"), "a b\n").unwrap();
    let out = w2c(dir.path(), "build-akn --corpus corpus.txt --out a.w2ca --config c.json");
    assert_ne!(out.status.code(), Some(0));
    let out = w2c(dir.path(), "build-akn --corpus corpus.txt --out a.w2ca --sr 1.5");
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn space_and_mapper_disagreeing_on_n_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (train, test) = TopicMixture::default().split(1, 200, 50);
    std::fs::write(d.join("train.tsv"), sentiment_lines(&train)).unwrap();
    std::fs::write(d.join("test.tsv"), sentiment_lines(&test)).unwrap();
    std::fs::write(d.join("corpus.txt"), train.iter().map(|(_, t)| format!("{t}\n")).collect::<String>()).unwrap();
    let cfg = "--tokenizer whitespace --hidden 8 --n 4 --k 3";
    ok(d, &format!("build-akn --corpus corpus.txt --out akn.w2ca --vocab v.txt --vocab-from test.tsv {cfg}"));
    ok(
        d,
        &format!("train-mapper --corpus corpus.txt --akn akn.w2ca --vocab v.txt --train train.tsv --encoder-out e.w2ct --out m.w2cm {cfg}"),
    );
    ok(d, &format!("cluster --space s0.w2cs --mapper m.w2cm --corpus corpus.txt --vocab v.txt --encoder e.w2ct {cfg}"));
    ok(
        d,
        &format!("train --space s0.w2cs --mapper m.w2cm --vocab v.txt --train train.tsv --encoder e.w2ct --space-out s.w2cs --head h.w2ch --epochs 1 {cfg}"),
    );
    let stdout =
        ok(d, &format!("eval --space s.w2cs --mapper m.w2cm --head h.w2ch --vocab v.txt --data test.tsv --encoder e.w2ct {cfg}"));
    assert!(stdout.contains("accuracy="), "{stdout}");

    std::fs::write(d.join("p.txt"), "1 0 0\n0 1 0\n0 0 1\n").unwrap();
    ok(d, "cluster --elements p.txt --space s3.w2cs --k 3");
    let out = w2c(d, &format!("eval --space s3.w2cs --mapper m.w2cm --head h.w2ch --vocab v.txt --data test.tsv --encoder e.w2ct {cfg}"));
    assert_eq!(out.status.code(), Some(6));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("n = 3") && err.contains("n = 4"), "{err}");
}
