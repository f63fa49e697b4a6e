//! Small synthetic corpora with known structure, for smoke runs and tests.

use rand::seq::index::sample;
use rand::Rng;
use w2c_core::seed::{stage_rng, Stage};

/// Sentences drawn from two disjoint token communities. Community `c` owns
/// ids `2 + c·per .. 2 + (c+1)·per`; each sentence takes `len` distinct ids
/// from one community, communities alternating.
pub fn community_corpus(seed: u64, sentences: usize, per: usize, len: usize) -> Vec<(usize, Vec<u32>)> {
    assert!(len <= per, "sentence length {len} exceeds community size {per}");
    let mut rng = stage_rng(seed, Stage::Data);
    (0..sentences)
        .map(|i| {
            let c = i % 2;
            let base = 2 + (c * per) as u32;
            let ids = sample(&mut rng, per, len).into_iter().map(|j| base + j as u32).collect();
            (c, ids)
        })
        .collect()
}

/// Binary sentiment as a topic mixture: class `c` owns topics `2c` and
/// `2c+1`. A sentence picks one topic of its class and a length in
/// `min_len..=max_len`; each token comes from that topic with probability
/// `topic_prob` and uniformly from all topic tokens otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicMixture {
    pub per_topic: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub topic_prob: f64,
}

impl Default for TopicMixture {
    fn default() -> Self {
        Self { per_topic: 6, min_len: 6, max_len: 12, topic_prob: 0.8 }
    }
}

pub const TOPICS: usize = 4;

impl TopicMixture {
    pub fn token(topic: usize, j: usize) -> String {
        format!("t{topic}w{j}")
    }

    /// `count` labeled sentences; labels are balanced in expectation.
    pub fn generate(&self, rng: &mut impl Rng, count: usize) -> Vec<(usize, String)> {
        (0..count)
            .map(|i| {
                let class = (i + rng.random_range(0..2)) % 2;
                let topic = 2 * class + rng.random_range(0..2);
                let len = rng.random_range(self.min_len..=self.max_len);
                let words: Vec<String> = (0..len)
                    .map(|_| {
                        let t = if rng.random_bool(self.topic_prob) { topic } else { rng.random_range(0..TOPICS) };
                        Self::token(t, rng.random_range(0..self.per_topic))
                    })
                    .collect();
                (class, words.join(" "))
            })
            .collect()
    }

    /// Train and test splits from one seeded stream.
    pub fn split(&self, seed: u64, train: usize, test: usize) -> (Vec<(usize, String)>, Vec<(usize, String)>) {
        let mut rng = stage_rng(seed, Stage::Data);
        let a = self.generate(&mut rng, train);
        let b = self.generate(&mut rng, test);
        (a, b)
    }
}

/// `label\ttext` lines.
pub fn sentiment_lines(rows: &[(usize, String)]) -> String {
    rows.iter().map(|(l, t)| format!("{l}\t{t}\n")).collect()
}

/// Correction pairs over whitespace tokens `w0..w{vocab}`. Each source
/// position is misspelled as `x{j}` with probability `error_prob`, so every
/// error token has exactly one correction.
pub fn correction_pairs(seed: u64, count: usize, vocab: usize, len: usize, error_prob: f64) -> Vec<(String, String)> {
    let mut rng = stage_rng(seed, Stage::Data);
    (0..count)
        .map(|_| {
            let target: Vec<usize> = (0..len).map(|_| rng.random_range(0..vocab)).collect();
            let source: Vec<String> = target
                .iter()
                .map(|&t| if rng.random_bool(error_prob) { format!("x{t}") } else { format!("w{t}") })
                .collect();
            let target: Vec<String> = target.iter().map(|t| format!("w{t}")).collect();
            (source.join(" "), target.join(" "))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn communities_are_disjoint_and_repeat_free() {
        let c = community_corpus(3, 10, 8, 5);
        for (i, (comm, ids)) in c.iter().enumerate() {
            assert_eq!(*comm, i % 2);
            let mut s = ids.clone();
            s.sort();
            s.dedup();
            assert_eq!(s.len(), 5);
            assert!(ids.iter().all(|&id| (id as usize - 2) / 8 == *comm));
        }
        assert_eq!(c, community_corpus(3, 10, 8, 5));
    }

    #[test]
    fn topic_mixture_shape() {
        let m = TopicMixture::default();
        let (train, test) = m.split(1, 200, 50);
        assert_eq!((train.len(), test.len()), (200, 50));
        let ones = train.iter().filter(|(l, _)| *l == 1).count();
        assert!((60..140).contains(&ones), "{ones}");
        for (_, t) in &train {
            let n = t.split_whitespace().count();
            assert!((6..=12).contains(&n));
        }
        assert_eq!(m.split(1, 200, 50).0, train);
    }

    #[test]
    fn correction_pairs_align() {
        for (s, t) in correction_pairs(2, 20, 10, 7, 0.3) {
            assert_eq!(s.split_whitespace().count(), t.split_whitespace().count());
            for (a, b) in s.split_whitespace().zip(t.split_whitespace()) {
                assert!(a == b || a == format!("x{}", &b[1..]), "{a} {b}");
            }
        }
    }
}
