//! Per-token hidden features `F_B` (d×h) for a sentence.
//!
//! Features come either from an exported pre-trained encoder (read by the
//! `w2c` crate) or from [`ToyEncoder`], a deterministic embedding plus a
//! single width-3 convolutional mixing layer and tanh. Everything past this
//! module only sees [`FeatureSource`].

use alloc::format;
use alloc::vec::Vec;

use crate::corpus::{LabeledExample, Sentence, TaskKind};
use crate::error::{Error, Result};
use crate::numkernel::{uniform, Adam, Bound, Graph, ParamId, ParamStore, Tensor2, Var};
use crate::seed::{stage_rng, Stage};

/// Features of one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBatch {
    pub sentence_id: u64,
    pub features: Tensor2,
}

impl FeatureBatch {
    pub fn tokens(&self) -> usize {
        self.features.rows()
    }

    pub fn hidden(&self) -> usize {
        self.features.cols()
    }
}

/// Anything that can produce d×h features for the `index`-th sentence of a
/// dataset.
pub trait FeatureSource {
    fn hidden_size(&self) -> usize;
    fn features(&self, index: usize, sent: &Sentence) -> Result<Tensor2>;
}

pub const TOY_MIX_WIDTH: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ToyEncoderConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyEncoder {
    config: ToyEncoderConfig,
    params: ParamStore,
    layout: Layout,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layout {
    vocab_size: usize,
    embed: ParamId,
    mix: ParamId,
    mix_bias: ParamId,
}

impl Layout {
    fn forward(self, g: &mut Graph, b: &Bound, sent: &Sentence) -> Result<Var> {
        sent.check_range(self.vocab_size)?;
        let ids: Vec<usize> = sent.ids().iter().map(|&i| i as usize).collect();
        let e = g.gather(b.var(self.embed), &ids)?;
        let u = g.unfold(e, TOY_MIX_WIDTH)?;
        let m = g.matmul(u, b.var(self.mix))?;
        let m = g.add_row(m, b.var(self.mix_bias))?;
        let s = g.add(e, m)?;
        Ok(g.tanh(s))
    }
}

/// Per-epoch mean loss of a fine-tuning run plus final training accuracy.
#[derive(Clone, Debug, PartialEq)]
pub struct FineTuneReport {
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
}

impl ToyEncoder {
    pub fn new(config: ToyEncoderConfig) -> Result<Self> {
        if config.vocab_size == 0 || config.hidden == 0 {
            return Err(Error::Invalid("toy encoder needs vocab_size > 0 and hidden > 0".into()));
        }
        let mut rng = stage_rng(config.seed, Stage::Encoder);
        let h = config.hidden;
        let mut params = ParamStore::new();
        let embed = params.add("embed", uniform(&mut rng, config.vocab_size, h, 1.0));
        let bound = 1.0 / libm::sqrt((TOY_MIX_WIDTH * h) as f64);
        let mix = params.add("mix", uniform(&mut rng, TOY_MIX_WIDTH * h, h, bound));
        let mix_bias = params.add("mix_bias", Tensor2::zeros(1, h));
        Ok(Self {
            layout: Layout {
                vocab_size: config.vocab_size,
                embed,
                mix,
                mix_bias,
            },
            config,
            params,
        })
    }

    /// Restores an encoder from stored parameters (checkpoint order:
    /// `embed`, `mix`, `mix_bias`).
    pub fn from_params(config: ToyEncoderConfig, params: ParamStore) -> Result<Self> {
        let mut fresh = Self::new(config)?;
        if params.len() != fresh.params.len() {
            return Err(Error::Invalid(format!(
                "toy encoder expects {} tensors, got {}",
                fresh.params.len(),
                params.len()
            )));
        }
        for id in fresh.params.ids().collect::<Vec<_>>() {
            fresh.params.set(id, params.get(id).clone())?;
        }
        Ok(fresh)
    }

    pub fn config(&self) -> &ToyEncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn encode(&self, sent: &Sentence) -> Result<Tensor2> {
        let mut g = Graph::new();
        let b = self.params.bind(&mut g);
        let out = self.layout.forward(&mut g, &b, sent)?;
        Ok(g.value(out).clone())
    }

    /// Trains the encoder together with a throwaway linear head on the
    /// downstream task. `classes` is the class count for sentiment and the
    /// vocabulary size for correction.
    pub fn fine_tune(
        &mut self,
        data: &[LabeledExample],
        task: TaskKind,
        classes: usize,
        epochs: usize,
        lr: f64,
    ) -> Result<FineTuneReport> {
        let h = self.config.hidden;
        let mut rng = stage_rng(self.config.seed, Stage::Heads);
        let mut head = ParamStore::new();
        let w = head.add("w", uniform(&mut rng, h, classes, 1.0 / libm::sqrt(h as f64)));
        let bias = head.add("b", Tensor2::zeros(1, classes));
        let mut enc_opt = Adam::new(&self.params, lr);
        let mut head_opt = Adam::new(&head, lr);

        let layout = self.layout;
        let step = |g: &mut Graph, eb: &Bound, hb: &Bound, ex: &LabeledExample| -> Result<(Var, Var)> {
            let f = layout.forward(g, eb, &ex.sentence)?;
            let (input, targets): (Var, Vec<usize>) = match (task, &ex.label) {
                (TaskKind::Sentiment, crate::corpus::Label::Class(c)) => (g.mean_rows(f)?, alloc::vec![*c]),
                (TaskKind::Correction, crate::corpus::Label::Tokens(t)) => {
                    (f, t.iter().map(|&x| x as usize).collect())
                }
                _ => return Err(Error::Invalid("label does not match task".into())),
            };
            let logits = g.matmul(input, hb.var(w))?;
            let logits = g.add_row(logits, hb.var(bias))?;
            let loss = g.softmax_xent(logits, &targets)?;
            Ok((logits, loss))
        };

        let mut epoch_losses = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            let mut total = 0.0;
            for (i, ex) in data.iter().enumerate() {
                let mut g = Graph::new();
                let eb = self.params.bind(&mut g);
                let hb = head.bind(&mut g);
                let (_, loss) = step(&mut g, &eb, &hb, ex)?;
                let lv = g.value(loss).item();
                if !lv.is_finite() {
                    return Err(Error::NonFinite(format!("encoder loss at epoch {epoch}, example {i}")));
                }
                total += lv;
                let grads = g.backward(loss)?;
                self.params.accumulate(&grads, &eb);
                head.accumulate(&grads, &hb);
                enc_opt.step(&mut self.params)?;
                head_opt.step(&mut head)?;
            }
            epoch_losses.push(if data.is_empty() { 0.0 } else { total / data.len() as f64 });
        }

        let (mut correct, mut count) = (0usize, 0usize);
        for ex in data {
            let mut g = Graph::new();
            let eb = self.params.bind(&mut g);
            let hb = head.bind(&mut g);
            let (logits, _) = step(&mut g, &eb, &hb, ex)?;
            let lv = g.value(logits);
            let targets: Vec<usize> = match &ex.label {
                crate::corpus::Label::Class(c) => alloc::vec![*c],
                crate::corpus::Label::Tokens(t) => t.iter().map(|&x| x as usize).collect(),
            };
            for (r, t) in targets.iter().enumerate() {
                count += 1;
                if argmax(lv.row(r)) == *t {
                    correct += 1;
                }
            }
        }
        Ok(FineTuneReport {
            epoch_losses,
            train_accuracy: if count == 0 { 0.0 } else { 100.0 * correct as f64 / count as f64 },
        })
    }
}

impl FeatureSource for ToyEncoder {
    fn hidden_size(&self) -> usize {
        self.config.hidden
    }

    fn features(&self, _index: usize, sent: &Sentence) -> Result<Tensor2> {
        self.encode(sent)
    }
}

/// Index of the largest entry; the first wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::grad_check;
    use alloc::vec;
    use rand::Rng;

    fn enc(seed: u64) -> ToyEncoder {
        ToyEncoder::new(ToyEncoderConfig {
            vocab_size: 10,
            hidden: 16,
            seed,
        })
        .unwrap()
    }

    fn s(ids: &[u32]) -> Sentence {
        Sentence::from_ids(ids).unwrap()
    }

    #[test]
    fn deterministic_and_shaped() {
        let e = enc(3);
        let a = e.encode(&s(&[2, 3, 4])).unwrap();
        let b = enc(3).encode(&s(&[2, 3, 4])).unwrap();
        assert_eq!(a.shape(), (3, 16));
        assert_eq!(a.data(), b.data());
        assert!(a.data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn context_changes_token_vector() {
        let e = enc(3);
        let x = e.encode(&s(&[2, 3, 4])).unwrap();
        let y = e.encode(&s(&[5, 3, 6])).unwrap();
        assert_ne!(x.row(1), y.row(1));
    }

    #[test]
    fn out_of_range_ids_rejected() {
        assert!(enc(1).encode(&s(&[2, 30])).is_err());
    }

    #[test]
    fn encoder_gradients_match_finite_differences() {
        let e = ToyEncoder::new(ToyEncoderConfig {
            vocab_size: 5,
            hidden: 4,
            seed: 9,
        })
        .unwrap();
        let sent = s(&[1, 3, 3, 4]);
        let err = grad_check(&[e.params().clone()], 1e-5, |g, b| {
            let f = e.layout.forward(g, &b[0], &sent)?;
            let m = g.mean_rows(f)?;
            let t = g.leaf(Tensor2::filled(1, 4, 0.2));
            g.mse(m, t)
        })
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    fn separable(n: usize) -> Vec<LabeledExample> {
        let mut rng = stage_rng(11, Stage::Data);
        (0..n)
            .map(|i| {
                let class = i % 2;
                let base = if class == 0 { 2 } else { 6 };
                let len = rng.random_range(3..7);
                let ids: Vec<u32> = (0..len).map(|_| base + rng.random_range(0..4)).collect();
                LabeledExample::class(s(&ids), class)
            })
            .collect()
    }

    #[test]
    fn fine_tune_separates_toy_classes() {
        let mut e = enc(5);
        let data = separable(60);
        let rep = e.fine_tune(&data, TaskKind::Sentiment, 2, 10, 1e-2).unwrap();
        assert!(rep.train_accuracy >= 95.0, "{rep:?}");
        for w in rep.epoch_losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", rep.epoch_losses);
        }
    }

    #[test]
    fn zero_epochs_or_zero_lr_leave_encoder_unchanged() {
        let data = separable(10);
        let mut e = enc(5);
        let before = e.clone();
        e.fine_tune(&data, TaskKind::Sentiment, 2, 0, 1e-2).unwrap();
        assert_eq!(e, before);
        e.fine_tune(&data, TaskKind::Sentiment, 2, 3, 0.0).unwrap();
        assert_eq!(e, before);
    }

    #[test]
    fn task_label_mismatch_is_an_error() {
        let mut e = enc(5);
        let data = vec![LabeledExample::class(s(&[2, 3]), 0)];
        assert!(e.fine_tune(&data, TaskKind::Correction, 10, 1, 1e-2).is_err());
    }

    #[test]
    fn correction_fine_tune_runs_per_token() {
        let mut e = enc(5);
        let data = vec![LabeledExample::correction(s(&[2, 3, 4]), vec![2, 5, 4]).unwrap()];
        let rep = e.fine_tune(&data, TaskKind::Correction, 10, 30, 5e-2).unwrap();
        assert_eq!(rep.train_accuracy, 100.0);
    }
}
