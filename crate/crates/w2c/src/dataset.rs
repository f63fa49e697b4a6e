//! Line-oriented text inputs and the vocabulary sidecar.
//!
//! Blank lines are skipped everywhere; line numbers in errors are 1-based
//! and count every physical line.

use std::io::{BufRead, BufReader};
use std::path::Path;

use w2c_core::corpus::{tokenize, LabeledExample, Sentence, TaskKind, TokenizeMode, Vocab};

use crate::binio::{open, write_atomic};
use crate::error::{Result, W2cError};

/// One dataset line before encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawExample {
    Sentiment { label: usize, text: String },
    Correction { source: String, target: String },
}

impl RawExample {
    /// Texts that should contribute to a vocabulary.
    pub fn texts(&self) -> Vec<&str> {
        match self {
            RawExample::Sentiment { text, .. } => vec![text],
            RawExample::Correction { source, target } => vec![source, target],
        }
    }

    pub fn input(&self) -> &str {
        match self {
            RawExample::Sentiment { text, .. } => text,
            RawExample::Correction { source, .. } => source,
        }
    }
}

fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(open(path)?).lines().enumerate() {
        let line = line.map_err(|e| W2cError::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if !line.trim().is_empty() {
            out.push((i + 1, line.to_string()));
        }
    }
    Ok(out)
}

/// One sentence per non-blank line.
pub fn load_corpus(path: &Path) -> Result<Vec<String>> {
    Ok(lines(path)?.into_iter().map(|(_, l)| l).collect())
}

pub fn load_raw(path: &Path, task: TaskKind, mode: TokenizeMode) -> Result<Vec<RawExample>> {
    let bad = |line, msg: String| W2cError::Dataset { path: path.to_path_buf(), line, msg };
    lines(path)?
        .into_iter()
        .map(|(no, l)| {
            let (a, b) = l
                .split_once('\t')
                .ok_or_else(|| bad(no, "expected two tab-separated fields".into()))?;
            if b.contains('\t') {
                return Err(bad(no, "expected two tab-separated fields, found more".into()));
            }
            match task {
                TaskKind::Sentiment => {
                    let label = match a.trim() {
                        "0" => 0,
                        "1" => 1,
                        other => return Err(bad(no, format!("unknown label {other:?}, expected 0 or 1"))),
                    };
                    if tokenize(b, mode).is_empty() {
                        return Err(bad(no, "empty text".into()));
                    }
                    Ok(RawExample::Sentiment { label, text: b.to_string() })
                }
                TaskKind::Correction => {
                    let (ns, nt) = (tokenize(a, mode).len(), tokenize(b, mode).len());
                    if ns != nt {
                        return Err(bad(no, format!("source has {ns} tokens, target has {nt}")));
                    }
                    if ns == 0 {
                        return Err(bad(no, "empty source".into()));
                    }
                    Ok(RawExample::Correction { source: a.to_string(), target: b.to_string() })
                }
            }
        })
        .collect()
}

pub fn encode_examples(raw: &[RawExample], vocab: &Vocab, mode: TokenizeMode) -> Result<Vec<LabeledExample>> {
    raw.iter()
        .map(|r| {
            Ok(match r {
                RawExample::Sentiment { label, text } => LabeledExample::class(vocab.encode(text, mode)?, *label),
                RawExample::Correction { source, target } => {
                    let target = vocab.encode(target, mode)?.ids().to_vec();
                    LabeledExample::correction(vocab.encode(source, mode)?, target)?
                }
            })
        })
        .collect()
}

/// Loads a labeled dataset, encoding it with `vocab`.
pub fn load_labeled(path: &Path, task: TaskKind, vocab: &Vocab, mode: TokenizeMode) -> Result<Vec<LabeledExample>> {
    encode_examples(&load_raw(path, task, mode)?, vocab, mode)
}

pub fn encode_corpus(texts: &[String], vocab: &Vocab, mode: TokenizeMode) -> Result<Vec<Sentence>> {
    texts
        .iter()
        .filter(|t| !tokenize(t, mode).is_empty())
        .map(|t| Ok(vocab.encode(t, mode)?))
        .collect()
}

/// One token per line, in id order.
pub fn save_vocab(vocab: &Vocab, path: &Path) -> Result<()> {
    if let Some(t) = vocab.tokens().iter().find(|t| t.contains(['\n', '\r']) || t.is_empty()) {
        return Err(W2cError::Config(format!("token {t:?} cannot be stored one per line")));
    }
    write_atomic(path, |w| {
        for t in vocab.tokens() {
            writeln!(w, "{t}")?;
        }
        Ok(())
    })
}

pub fn load_vocab(path: &Path) -> Result<Vocab> {
    let mut tokens = Vec::new();
    for line in BufReader::new(open(path)?).lines() {
        tokens.push(line.map_err(|e| W2cError::io(path, e))?);
    }
    Vocab::from_tokens(tokens).map_err(|e| W2cError::Dataset { path: path.to_path_buf(), line: 1, msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use w2c_core::corpus::Label;

    fn file(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn sentiment_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(dir.path(), "s.tsv", "1\t这个酒店很好\n\n0\tbad hotel\r\n");
        let raw = load_raw(&p, TaskKind::Sentiment, TokenizeMode::Cjk).unwrap();
        assert_eq!(raw.len(), 2);
        let vocab = Vocab::build(raw.iter().flat_map(|r| r.texts()), 1, TokenizeMode::Cjk).unwrap();
        let ex = encode_examples(&raw, &vocab, TokenizeMode::Cjk).unwrap();
        assert_eq!(ex[0].label, Label::Class(1));
        assert_eq!(ex[0].sentence.len(), 6);
        assert_eq!(ex[1].sentence.len(), 2);

        let p = file(dir.path(), "bad.tsv", "1\tok\n2\tnope\n");
        match load_raw(&p, TaskKind::Sentiment, TokenizeMode::Cjk) {
            Err(W2cError::Dataset { line: 2, msg, .. }) => assert!(msg.contains("label"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn correction_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(dir.path(), "c.tsv", "你号\t你好\n");
        let raw = load_raw(&p, TaskKind::Correction, TokenizeMode::Cjk).unwrap();
        let vocab = Vocab::build(raw.iter().flat_map(|r| r.texts()), 1, TokenizeMode::Cjk).unwrap();
        let ex = &encode_examples(&raw, &vocab, TokenizeMode::Cjk).unwrap()[0];
        let (src, tgt) = (ex.sentence.ids(), ex.target_tokens().unwrap());
        assert_eq!(src[0], tgt[0]);
        assert_ne!(src[1], tgt[1]);

        let p = file(dir.path(), "bad.tsv", "你号\t你好\n\n你\t你好\n");
        match load_raw(&p, TaskKind::Correction, TokenizeMode::Cjk) {
            Err(W2cError::Dataset { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(dir.path(), "e.tsv", "");
        assert!(load_raw(&p, TaskKind::Sentiment, TokenizeMode::Cjk).unwrap().is_empty());
    }

    #[test]
    fn vocab_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let vocab = Vocab::build(["a b", "a c", "你好"], 1, TokenizeMode::Cjk).unwrap();
        let p = dir.path().join("v.txt");
        save_vocab(&vocab, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "<pad>\n<unk>\na\nb\nc\n你\n好\n");
        assert_eq!(load_vocab(&p).unwrap(), vocab);
        let bad = file(dir.path(), "bad.txt", "a\nb\n");
        assert!(matches!(load_vocab(&bad), Err(W2cError::Dataset { .. })));
    }
}
