//! Tokenization, vocabulary and labeled examples.
//!
//! CJK characters are tokens on their own; everything else is split on
//! whitespace. A vocabulary reserves id 0 for padding and id 1 for unknown
//! tokens.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TokenizeMode {
    /// One token per CJK character, whitespace splitting elsewhere.
    #[default]
    Cjk,
    /// Whitespace splitting only.
    Whitespace,
}

/// Ideographs, CJK punctuation, kana and full-width forms.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3000..=0x303F
        | 0x3040..=0x30FF
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0xFF00..=0xFFEF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x2F800..=0x2FA1F
        | 0x30000..=0x3134F)
}

pub fn tokenize(text: &str, mode: TokenizeMode) -> Vec<&str> {
    match mode {
        TokenizeMode::Whitespace => text.split_whitespace().collect(),
        TokenizeMode::Cjk => {
            let mut out = Vec::new();
            let mut run_start: Option<usize> = None;
            for (i, c) in text.char_indices() {
                if c.is_whitespace() || is_cjk(c) {
                    if let Some(s) = run_start.take() {
                        out.push(&text[s..i]);
                    }
                    if is_cjk(c) {
                        out.push(&text[i..i + c.len_utf8()]);
                    }
                } else if run_start.is_none() {
                    run_start = Some(i);
                }
            }
            if let Some(s) = run_start {
                out.push(&text[s..]);
            }
            out
        }
    }
}

/// Bijective token ↔ id map with dense ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    ids: BTreeMap<String, u32>,
    tokens: Vec<String>,
}

impl Vocab {
    /// Counts tokens over `sentences` and assigns ids by descending
    /// frequency, ties broken by first occurrence. Tokens seen fewer than
    /// `min_count` times are left out and will map to [`UNK`].
    pub fn build<'a, I>(sentences: I, min_count: usize, mode: TokenizeMode) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        let mut order = 0usize;
        let mut any = false;
        for s in sentences {
            any = true;
            for tok in tokenize(s, mode) {
                let e = counts.entry(tok).or_insert_with(|| {
                    order += 1;
                    (0, order)
                });
                e.0 += 1;
            }
        }
        if !any {
            return Err(Error::Empty("corpus"));
        }
        let mut kept: Vec<(&str, usize, usize)> = counts
            .into_iter()
            .filter(|(t, (c, _))| *c >= min_count.max(1) && *t != PAD_TOKEN && *t != UNK_TOKEN)
            .map(|(t, (c, o))| (t, c, o))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        Self::from_tokens(
            [PAD_TOKEN, UNK_TOKEN]
                .into_iter()
                .chain(kept.into_iter().map(|(t, _, _)| t))
                .map(ToString::to_string)
                .collect(),
        )
    }

    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::Invalid("vocabulary must start with <pad>, <unk>".to_string()));
        }
        let mut ids = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Invalid(format!("duplicate token {t:?} in vocabulary")));
            }
        }
        Ok(Self { ids, tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, text: &str, mode: TokenizeMode) -> Result<Sentence> {
        let ids: Vec<u32> = tokenize(text, mode).into_iter().map(|t| self.id(t)).collect();
        Sentence::new(ids, text.to_string())
    }
}

/// Token ids of one sentence with its raw text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    ids: Vec<u32>,
    text: String,
}

impl Sentence {
    pub fn new(ids: Vec<u32>, text: String) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        Ok(Self { ids, text })
    }

    pub fn from_ids(ids: &[u32]) -> Result<Self> {
        Self::new(ids.to_vec(), String::new())
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn check_range(&self, v: usize) -> Result<()> {
        match self.ids.iter().find(|&&id| id as usize >= v) {
            Some(&id) => Err(Error::IdOutOfRange { id, size: v }),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    /// Binary sequence classification.
    Sentiment,
    /// Per-token correction.
    Correction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Label {
    Class(usize),
    Tokens(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledExample {
    pub sentence: Sentence,
    pub label: Label,
}

impl LabeledExample {
    pub fn class(sentence: Sentence, class: usize) -> Self {
        Self {
            sentence,
            label: Label::Class(class),
        }
    }

    pub fn correction(source: Sentence, target: Vec<u32>) -> Result<Self> {
        if target.len() != source.len() {
            return Err(Error::Invalid(format!(
                "correction target has {} tokens, source has {}",
                target.len(),
                source.len()
            )));
        }
        Ok(Self {
            sentence: source,
            label: Label::Tokens(target),
        })
    }

    pub fn class_label(&self) -> Option<usize> {
        match self.label {
            Label::Class(c) => Some(c),
            Label::Tokens(_) => None,
        }
    }

    pub fn target_tokens(&self) -> Option<&[u32]> {
        match &self.label {
            Label::Tokens(t) => Some(t),
            Label::Class(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("你好 world", TokenizeMode::Cjk), vec!["你", "好", "world"]);
        assert_eq!(tokenize("你好world", TokenizeMode::Cjk), vec!["你", "好", "world"]);
        assert!(tokenize("", TokenizeMode::Cjk).is_empty());
        assert_eq!(tokenize("abc", TokenizeMode::Cjk), vec!["abc"]);
        assert_eq!(tokenize("这个酒店很好", TokenizeMode::Cjk).len(), 6);
        assert_eq!(tokenize("你好 world", TokenizeMode::Whitespace), vec!["你好", "world"]);
        assert_eq!(tokenize("很好，不错。", TokenizeMode::Cjk).len(), 6);
    }

    #[test]
    fn build_vocab_orders_by_frequency_then_first_seen() {
        let v = Vocab::build(["a b", "a c"], 1, TokenizeMode::Cjk).unwrap();
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "a", "b", "c"]);
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("zzz"), UNK);

        let v = Vocab::build(["a b"], 3, TokenizeMode::Cjk).unwrap();
        assert_eq!(v.len(), 2);

        let c = ["x y y", "z x y"];
        assert_eq!(
            Vocab::build(c, 1, TokenizeMode::Cjk).unwrap(),
            Vocab::build(c, 1, TokenizeMode::Cjk).unwrap()
        );
        assert_eq!(
            Vocab::build(c, 1, TokenizeMode::Cjk).unwrap().tokens()[2..],
            ["y", "x", "z"]
        );
    }

    #[test]
    fn build_vocab_rejects_empty_corpus() {
        let none: [&str; 0] = [];
        assert_eq!(Vocab::build(none, 1, TokenizeMode::Cjk), Err(Error::Empty("corpus")));
    }

    #[test]
    fn correction_requires_equal_lengths() {
        let s = Sentence::from_ids(&[2, 3]).unwrap();
        assert!(LabeledExample::correction(s.clone(), vec![2]).is_err());
        assert!(LabeledExample::correction(s, vec![2, 4]).is_ok());
        assert!(Sentence::from_ids(&[]).is_err());
    }

    proptest! {
        #[test]
        fn encode_round_trips_ids(text in "[a-c 你好我]{0,20}") {
            let v = Vocab::build([text.as_str(), "a 你"], 1, TokenizeMode::Cjk).unwrap();
            if let Ok(s) = v.encode(&text, TokenizeMode::Cjk) {
                for &id in s.ids() {
                    prop_assert_eq!(v.id(v.token(id).unwrap()), id);
                }
            }
            prop_assert_eq!(tokenize(&text, TokenizeMode::Cjk), tokenize(&text, TokenizeMode::Cjk));
        }
    }
}
