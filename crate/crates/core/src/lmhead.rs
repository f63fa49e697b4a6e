//! Context-relative distance features and the task heads on top of them.
//!
//! A sentence's word elements `C` (d×n) are compared with the merged contexts
//! `M_M · X` (k×n) by cosine similarity, giving `D` (d×k). The token head maps
//! every row of `D` to a vocabulary distribution; the sequence head mean-pools
//! `D` over tokens first. Downstream training updates only `M_M` and the head.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::contextspace::ContextSpace;
use crate::corpus::{Label, LabeledExample, TaskKind};
use crate::encoder::{argmax, FeatureSource};
use crate::error::{Error, Result};
use crate::mapper::{MapperNet, WordElements};
use crate::numkernel::{norm, softmax_rows, Adam, Bound, Graph, ParamId, ParamStore, Tensor2, Var};

/// `D`: cosine similarity of every token to every merged context.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceFeature(pub Tensor2);

impl DistanceFeature {
    pub fn as_tensor(&self) -> &Tensor2 {
        &self.0
    }

    /// Mean of `D` over tokens, a 1×k row.
    pub fn pooled(&self) -> Tensor2 {
        let (d, k) = self.0.shape();
        let mut out = Tensor2::zeros(1, k);
        for row in self.0.iter_rows() {
            for (o, v) in out.data_mut().iter_mut().zip(row) {
                *o += v;
            }
        }
        out.data_mut().iter_mut().for_each(|v| *v /= d as f64);
        out
    }
}

fn check_rows(t: &Tensor2, what: &'static str) -> Result<()> {
    if t.iter_rows().any(|r| !(norm(r) > 0.0)) {
        return Err(Error::Degenerate(what));
    }
    Ok(())
}

pub fn context_relative_distance(space: &ContextSpace, elements: &WordElements) -> Result<DistanceFeature> {
    let c = elements.as_tensor();
    if c.cols() != space.coords() {
        return Err(Error::Shape {
            op: "context_relative_distance",
            expected: (c.rows(), space.coords()),
            found: c.shape(),
        });
    }
    let merged = space.merged();
    check_rows(&merged, "merged context")?;
    check_rows(c, "word element")?;
    let mut g = Graph::new();
    let cv = g.leaf(c.clone());
    let mv = g.leaf(merged);
    let d = g.cosine(cv, mv)?;
    Ok(DistanceFeature(g.value(d).clone()))
}

/// Graph form of the distance feature, differentiable in `merge` (and in
/// `centroids`, though downstream training keeps those fixed).
pub fn distance_graph(g: &mut Graph, elements: Var, merge: Var, centroids: Var) -> Result<Var> {
    let merged = g.matmul(merge, centroids)?;
    check_rows(g.value(merged), "merged context")?;
    g.cosine(elements, merged)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    /// Per-token distribution over the vocabulary.
    Token,
    /// One distribution per sentence over classes, from mean-pooled `D`.
    Sequence,
}

impl HeadKind {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Sentiment => HeadKind::Sequence,
            TaskKind::Correction => HeadKind::Token,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskHead {
    kind: HeadKind,
    contexts: usize,
    outputs: usize,
    params: ParamStore,
    weight: ParamId,
    bias: ParamId,
}

impl TaskHead {
    /// Zero-initialized head. The first updates then follow the class
    /// evidence in `D` instead of a random starting direction, and the merge
    /// matrix gets no gradient until the head has one.
    pub fn new(kind: HeadKind, contexts: usize, outputs: usize) -> Result<Self> {
        if contexts == 0 || outputs == 0 {
            return Err(Error::Invalid(format!("head needs k > 0 and outputs > 0, got {contexts}, {outputs}")));
        }
        let mut params = ParamStore::new();
        let weight = params.add("head.weight", Tensor2::zeros(contexts, outputs));
        let bias = params.add("head.bias", Tensor2::zeros(1, outputs));
        Ok(Self { kind, contexts, outputs, params, weight, bias })
    }

    /// Rebuilds a head from stored parameters, checking names and shapes.
    pub fn from_params(kind: HeadKind, stored: ParamStore) -> Result<Self> {
        let weight = stored.id_of("head.weight").ok_or(Error::Invalid("missing head.weight".into()))?;
        let bias = stored.id_of("head.bias").ok_or(Error::Invalid("missing head.bias".into()))?;
        let (contexts, outputs) = stored.get(weight).shape();
        if stored.len() != 2 || stored.get(bias).shape() != (1, outputs) {
            return Err(Error::Shape { op: "TaskHead", expected: (1, outputs), found: stored.get(bias).shape() });
        }
        if contexts == 0 || outputs == 0 {
            return Err(Error::Empty("head weight"));
        }
        Ok(Self { kind, contexts, outputs, params: stored, weight, bias })
    }

    pub fn kind(&self) -> HeadKind {
        self.kind
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Logits for `D`: d×outputs for the token head, 1×outputs for the
    /// sequence head.
    pub fn logits_graph(&self, g: &mut Graph, b: &Bound, distance: Var) -> Result<Var> {
        let (_, k) = g.value(distance).shape();
        if k != self.contexts {
            return Err(Error::Shape {
                op: "TaskHead",
                expected: (g.value(distance).rows(), self.contexts),
                found: g.value(distance).shape(),
            });
        }
        let input = match self.kind {
            HeadKind::Token => distance,
            HeadKind::Sequence => g.mean_rows(distance)?,
        };
        let z = g.matmul(input, b.var(self.weight))?;
        g.add_row(z, b.var(self.bias))
    }

    fn distribution(&self, distance: &DistanceFeature) -> Result<Tensor2> {
        if distance.0.rows() == 0 {
            return Err(Error::Empty("distance feature"));
        }
        let mut g = Graph::new();
        let b = self.params.bind(&mut g);
        let d = g.leaf(distance.0.clone());
        let z = self.logits_graph(&mut g, &b, d)?;
        Ok(softmax_rows(g.value(z)))
    }
}

/// Per-token distributions over the vocabulary (d×V, rows sum to 1).
pub fn token_classify(head: &TaskHead, distance: &DistanceFeature) -> Result<Tensor2> {
    if head.kind != HeadKind::Token {
        return Err(Error::Invalid("token_classify needs a token head".into()));
    }
    head.distribution(distance)
}

/// Class distribution for a sentence.
pub fn sequence_classify(head: &TaskHead, distance: &DistanceFeature) -> Result<Vec<f64>> {
    if head.kind != HeadKind::Sequence {
        return Err(Error::Invalid("sequence_classify needs a sequence head".into()));
    }
    Ok(head.distribution(distance)?.into_data())
}

/// Maps a sentence's features through the frozen mapper and measures them
/// against the space.
pub fn sentence_distance(space: &ContextSpace, mapper: &MapperNet, features: &Tensor2) -> Result<DistanceFeature> {
    context_relative_distance(space, &mapper.map(features)?)
}

/// Predicted class per example (sequence head) or predicted tokens per
/// example (token head).
pub fn predict(
    space: &ContextSpace,
    mapper: &MapperNet,
    source: &dyn FeatureSource,
    head: &TaskHead,
    data: &[LabeledExample],
) -> Result<Vec<Vec<u32>>> {
    data.iter()
        .enumerate()
        .map(|(i, ex)| {
            let d = sentence_distance(space, mapper, &source.features(i, &ex.sentence)?)?;
            let dist = head.distribution(&d)?;
            Ok(dist.iter_rows().map(|r| argmax(r) as u32).collect())
        })
        .collect()
}

/// Per-epoch mean cross-entropy and training accuracy (percent of targets
/// predicted correctly during the pass).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DownstreamReport {
    pub epoch_losses: Vec<f64>,
    pub epoch_accuracy: Vec<f64>,
}

fn targets(head: &TaskHead, ex: &LabeledExample) -> Result<Vec<usize>> {
    let t: Vec<usize> = match (head.kind, &ex.label) {
        (HeadKind::Sequence, Label::Class(c)) => vec![*c],
        (HeadKind::Token, Label::Tokens(t)) => t.iter().map(|&x| x as usize).collect(),
        _ => return Err(Error::Invalid("label does not match head".into())),
    };
    if let Some(&bad) = t.iter().find(|&&x| x >= head.outputs) {
        return Err(Error::IdOutOfRange { id: bad as u32, size: head.outputs });
    }
    Ok(t)
}

/// Trains the merge matrix and the head by cross-entropy, one Adam step per
/// example, in data order. The mapper, the centroids and the encoder are
/// only read.
pub fn train_downstream(
    space: &mut ContextSpace,
    mapper: &MapperNet,
    source: &dyn FeatureSource,
    head: &mut TaskHead,
    data: &[LabeledExample],
    epochs: usize,
    lr: f64,
) -> Result<DownstreamReport> {
    if data.is_empty() {
        return Err(Error::Empty("downstream training set"));
    }
    if head.contexts != space.k() {
        return Err(Error::Invalid(format!("head expects k = {}, space has k = {}", head.contexts, space.k())));
    }
    let mut elements = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for (i, ex) in data.iter().enumerate() {
        elements.push(mapper.map(&source.features(i, &ex.sentence)?)?.0);
        labels.push(targets(head, ex)?);
    }

    let mut merge = ParamStore::new();
    let mid = merge.add("merge", space.merge().clone());
    let mut merge_opt = Adam::new(&merge, lr);
    let mut head_opt = Adam::new(&head.params, lr);
    let mut report = DownstreamReport::default();
    for epoch in 0..epochs {
        let (mut total, mut correct, mut count) = (0.0, 0usize, 0usize);
        for (i, (c, t)) in elements.iter().zip(&labels).enumerate() {
            let mut g = Graph::new();
            let mb = merge.bind(&mut g);
            let hb = head.params.bind(&mut g);
            let cv = g.leaf(c.clone());
            let xv = g.leaf(space.centroids().clone());
            let d = distance_graph(&mut g, cv, mb.var(mid), xv)?;
            let z = head.logits_graph(&mut g, &hb, d)?;
            let loss = g.softmax_xent(z, t)?;
            let lv = g.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::NonFinite(format!("downstream loss at epoch {epoch}, example {i}")));
            }
            total += lv;
            for (row, &target) in g.value(z).iter_rows().zip(t) {
                count += 1;
                correct += (argmax(row) == target) as usize;
            }
            let grads = g.backward(loss)?;
            merge.accumulate(&grads, &mb);
            head.params.accumulate(&grads, &hb);
            merge_opt.step(&mut merge)?;
            head_opt.step(&mut head.params)?;
        }
        report.epoch_losses.push(total / data.len() as f64);
        report.epoch_accuracy.push(100.0 * correct as f64 / count as f64);
    }
    space.set_merge(merge.get(mid).clone())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;
    use crate::encoder::{ToyEncoder, ToyEncoderConfig};
    use crate::mapper::MapperConfig;
    use crate::numkernel::{grad_check, uniform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor2 {
        Tensor2::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    fn random_head(rng: &mut ChaCha8Rng, kind: HeadKind, k: usize, out: usize) -> TaskHead {
        let mut head = TaskHead::new(kind, k, out).unwrap();
        let (w, b) = (head.weight, head.bias);
        head.params.set(w, uniform(rng, k, out, 1.0)).unwrap();
        head.params.set(b, uniform(rng, 1, out, 1.0)).unwrap();
        head
    }

    #[test]
    fn distance_shape_bounds_and_self_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = uniform(&mut rng, 3, 4, 1.0);
        let space = ContextSpace::from_centroids(x.clone()).unwrap();
        let mut c = uniform(&mut rng, 2, 4, 1.0);
        c.row_mut(1).copy_from_slice(x.row(2));
        let d = context_relative_distance(&space, &WordElements(c)).unwrap();
        assert_eq!(d.0.shape(), (2, 3));
        assert!((d.0.get(1, 2) - 1.0).abs() < 1e-12);
        assert!(d.0.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn identity_merge_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = uniform(&mut rng, 5, 3, 1.0);
        let c = uniform(&mut rng, 4, 3, 1.0);
        let space = ContextSpace::from_centroids(x.clone()).unwrap();
        let d = context_relative_distance(&space, &WordElements(c.clone())).unwrap();
        let mut g = Graph::new();
        let cv = g.leaf(c);
        let xv = g.leaf(x);
        let unmerged = g.cosine(cv, xv).unwrap();
        assert_eq!(&d.0, g.value(unmerged));
    }

    #[test]
    fn zero_merged_context_is_degenerate() {
        let mut space = ContextSpace::from_centroids(t(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        space.set_merge(t(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        let err = context_relative_distance(&space, &WordElements(t(1, 2, &[1.0, 1.0]))).unwrap_err();
        assert_eq!(err, Error::Degenerate("merged context"));
    }

    #[test]
    fn zero_head_gives_uniform_tokens() {
        let head = TaskHead::new(HeadKind::Token, 4, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = DistanceFeature(uniform(&mut rng, 3, 4, 1.0));
        let p = token_classify(&head, &d).unwrap();
        assert_eq!(p.shape(), (3, 10));
        assert!(p.data().iter().all(|&v| (v - 0.1).abs() < 1e-12));
    }

    #[test]
    fn token_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let head = random_head(&mut rng, HeadKind::Token, 4, 10);
        let p = token_classify(&head, &DistanceFeature(uniform(&mut rng, 3, 4, 1.0))).unwrap();
        for r in p.iter_rows() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sequence_pooling_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let head = random_head(&mut rng, HeadKind::Sequence, 3, 2);
        let one = DistanceFeature(t(1, 3, &[0.2, -0.5, 0.9]));
        assert_eq!(one.pooled(), one.0);
        let p = sequence_classify(&head, &one).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let base = t(2, 3, &[0.1, 0.2, 0.3, -0.4, 0.5, -0.6]);
        let doubled = t(4, 3, &[0.1, 0.2, 0.3, -0.4, 0.5, -0.6, 0.1, 0.2, 0.3, -0.4, 0.5, -0.6]);
        let a = sequence_classify(&head, &DistanceFeature(base)).unwrap();
        let b = sequence_classify(&head, &DistanceFeature(doubled)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(token_classify(&head, &one).is_err());
    }

    #[test]
    fn grad_check_through_merge_and_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (d, n, k, out, kind) in [
            (3, 4, 3, 2, HeadKind::Sequence),
            (2, 3, 4, 5, HeadKind::Token),
            (4, 2, 2, 3, HeadKind::Token),
        ] {
            let c = uniform(&mut rng, d, n, 1.0);
            let x = uniform(&mut rng, k, n, 1.0);
            let mut merge = ParamStore::new();
            let mid = merge.add("merge", Tensor2::identity(k));
            merge.get_mut(mid).data_mut().iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
            let head = random_head(&mut rng, kind, k, out);
            let targets: Vec<usize> = match kind {
                HeadKind::Sequence => vec![1],
                HeadKind::Token => (0..d).map(|i| i % out).collect(),
            };
            let err = grad_check(&[merge, head.params.clone()], 1e-6, |g, b| {
                let cv = g.leaf(c.clone());
                let xv = g.leaf(x.clone());
                let dv = distance_graph(g, cv, b[0].var(mid), xv)?;
                let z = head.logits_graph(g, &b[1], dv)?;
                g.softmax_xent(z, &targets)
            })
            .unwrap();
            assert!(err < 1e-4, "({d},{n},{k},{out}) rel err {err}");
        }
    }

    fn toy_setup() -> (ToyEncoder, MapperNet, ContextSpace, Vec<LabeledExample>) {
        let enc = ToyEncoder::new(ToyEncoderConfig { vocab_size: 8, hidden: 6, seed: 1 }).unwrap();
        let mapper = MapperNet::new(MapperConfig::new(6, 4, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let space = ContextSpace::from_centroids(uniform(&mut rng, 3, 4, 1.0)).unwrap();
        let data = (0..20)
            .map(|i| {
                let c = i % 2;
                let base = 2 + 3 * c as u32;
                let ids: Vec<u32> = (0..4).map(|j| base + (i as u32 + j) % 3).collect();
                LabeledExample::class(Sentence::from_ids(&ids).unwrap(), c)
            })
            .collect();
        (enc, mapper, space, data)
    }

    #[test]
    fn zero_lr_changes_nothing() {
        let (enc, mapper, mut space, data) = toy_setup();
        let mut head = TaskHead::new(HeadKind::Sequence, 3, 2).unwrap();
        let (space0, head0) = (space.clone(), head.clone());
        let report = train_downstream(&mut space, &mapper, &enc, &mut head, &data, 2, 0.0).unwrap();
        assert_eq!(report.epoch_losses.len(), 2);
        assert_eq!(space, space0);
        assert_eq!(head.params().get(head.weight), head0.params().get(head0.weight));
        assert_eq!(head.params().get(head.bias), head0.params().get(head0.bias));
    }

    #[test]
    fn training_moves_only_merge_and_head() {
        let (enc, mapper, mut space, data) = toy_setup();
        let mapper0 = mapper.clone();
        let centroids0 = space.centroids().clone();
        let mut head = TaskHead::new(HeadKind::Sequence, 3, 2).unwrap();
        let report = train_downstream(&mut space, &mapper, &enc, &mut head, &data, 20, 0.05).unwrap();
        assert_eq!(space.centroids(), &centroids0);
        assert_eq!(mapper, mapper0);
        assert_ne!(space.merge(), &Tensor2::identity(3));
        assert!(report.epoch_losses.last().unwrap() < &report.epoch_losses[0]);
        let preds = predict(&space, &mapper, &enc, &head, &data).unwrap();
        assert_eq!(preds.len(), data.len());
        assert!(preds.iter().all(|p| p.len() == 1));
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        let (enc, mapper, mut space, data) = toy_setup();
        let mut head = TaskHead::new(HeadKind::Token, 3, 8).unwrap();
        assert!(train_downstream(&mut space, &mapper, &enc, &mut head, &data, 1, 0.1).is_err());
        let mut wrong_k = TaskHead::new(HeadKind::Sequence, 4, 2).unwrap();
        assert!(train_downstream(&mut space, &mapper, &enc, &mut wrong_k, &data, 1, 0.1).is_err());
    }
}
