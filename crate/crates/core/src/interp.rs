//! Context reversal probe for binary sentiment.
//!
//! Contexts are ranked from negative to positive affinity, rank-symmetric
//! centroids are swapped, and predictions before and after are compared.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::contextspace::ContextSpace;
use crate::corpus::LabeledExample;
use crate::encoder::FeatureSource;
use crate::error::{Error, Result};
use crate::lmhead::sentence_distance;
use crate::mapper::MapperNet;
use crate::metrics::evaluate_classification;

/// Class index treated as positive sentiment.
pub const POSITIVE: usize = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ContextRanking {
    /// Mean pooled distance of every context over positive sentences.
    pub positive: Vec<f64>,
    /// Same over negative sentences.
    pub negative: Vec<f64>,
    /// Context indices, most negative-affine first.
    pub order: Vec<usize>,
}

impl ContextRanking {
    /// Ranks by `positive - negative` ascending, ties by index.
    pub fn from_affinities(positive: Vec<f64>, negative: Vec<f64>) -> Result<Self> {
        if positive.len() != negative.len() || positive.is_empty() {
            return Err(Error::Invalid(format!(
                "affinity lengths {} and {}",
                positive.len(),
                negative.len()
            )));
        }
        if positive.iter().chain(&negative).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("context affinity".into()));
        }
        let mut order: Vec<usize> = (0..positive.len()).collect();
        order.sort_by(|&a, &b| {
            let (fa, fb) = (positive[a] - negative[a], positive[b] - negative[b]);
            fa.total_cmp(&fb).then(a.cmp(&b))
        });
        Ok(Self { positive, negative, order })
    }

    pub fn affinity(&self, context: usize) -> f64 {
        self.positive[context] - self.negative[context]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Averages each sentence's mean-pooled distance feature per class.
pub fn rank_contexts(
    space: &ContextSpace,
    mapper: &MapperNet,
    source: &dyn FeatureSource,
    data: &[LabeledExample],
) -> Result<ContextRanking> {
    let k = space.k();
    let mut sums = [vec![0.0; k], vec![0.0; k]];
    let mut counts = [0usize; 2];
    for (i, ex) in data.iter().enumerate() {
        let class = ex.class_label().ok_or(Error::Invalid(format!("example {i} has no class label")))?;
        if class > 1 {
            return Err(Error::Invalid(format!("example {i}: class {class} is not binary")));
        }
        let pooled = sentence_distance(space, mapper, &source.features(i, &ex.sentence)?)?.pooled();
        for (s, v) in sums[class].iter_mut().zip(pooled.data()) {
            *s += v;
        }
        counts[class] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::Invalid("ranking needs both positive and negative sentences".into()));
    }
    let [neg, pos] = sums;
    let mean = |v: Vec<f64>, n: usize| v.into_iter().map(|x| x / n as f64).collect::<Vec<_>>();
    ContextRanking::from_affinities(mean(pos, counts[POSITIVE]), mean(neg, counts[1 - POSITIVE]))
}

/// Swaps the centroid at rank `r` with the one at rank `k-1-r`. The merge
/// matrix is kept as is.
pub fn reverse_context_space(space: &ContextSpace, ranking: &ContextRanking) -> Result<ContextSpace> {
    let k = space.k();
    let mut seen = vec![false; k];
    if ranking.order.len() != k || !ranking.order.iter().all(|&i| i < k && !core::mem::replace(&mut seen[i], true)) {
        return Err(Error::Invalid(format!("ranking is not a permutation of 0..{k}")));
    }
    let mut out = space.clone();
    for r in 0..k / 2 {
        out.swap_centroids(ranking.order[r], ranking.order[k - 1 - r]);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReversalReport {
    /// Accuracy before reversal.
    pub oa: f64,
    /// Accuracy after reversal.
    pub ca: f64,
    /// Percent of sentences whose prediction changed.
    pub ra: f64,
}

pub fn reversal_metrics(original: &[usize], modified: &[usize], labels: &[usize]) -> Result<ReversalReport> {
    if original.len() != modified.len() {
        return Err(Error::Invalid(format!(
            "{} original and {} modified predictions",
            original.len(),
            modified.len()
        )));
    }
    let oa = evaluate_classification(original, labels)?;
    let ca = evaluate_classification(modified, labels)?;
    let flipped = original.iter().zip(modified).filter(|(a, b)| a != b).count();
    Ok(ReversalReport { oa, ca, ra: 100.0 * flipped as f64 / labels.len() as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{uniform, Tensor2};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_ranking() {
        let r = ContextRanking::from_affinities(vec![0.1, 0.5, 0.3], vec![0.5, 0.4, 0.0]).unwrap();
        assert_eq!(r.order, vec![0, 1, 2]);
        let r = ContextRanking::from_affinities(vec![0.3, 0.1, -0.4], vec![0.0; 3]).unwrap();
        assert_eq!(r.order, vec![2, 1, 0]);
    }

    #[test]
    fn ties_keep_index_order() {
        let r = ContextRanking::from_affinities(vec![0.2; 4], vec![0.2; 4]).unwrap();
        assert_eq!(r.order, vec![0, 1, 2, 3]);
    }

    fn space(k: usize, seed: u64) -> ContextSpace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ContextSpace::from_centroids(uniform(&mut rng, k, 3, 1.0)).unwrap();
        s.set_merge(uniform(&mut rng, k, k, 1.0)).unwrap();
        s
    }

    #[test]
    fn two_contexts_swap() {
        let s = space(2, 1);
        let r = ContextRanking::from_affinities(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let rev = reverse_context_space(&s, &r).unwrap();
        assert_eq!(rev.centroids().row(0), s.centroids().row(1));
        assert_eq!(rev.centroids().row(1), s.centroids().row(0));
        assert_eq!(rev.merge(), s.merge());
    }

    #[test]
    fn odd_middle_is_fixed() {
        let s = space(5, 2);
        let r = ContextRanking::from_affinities(vec![0.4, -0.2, 0.1, 0.9, -0.5], vec![0.0; 5]).unwrap();
        let rev = reverse_context_space(&s, &r).unwrap();
        let middle = r.order[2];
        assert_eq!(rev.centroids().row(middle), s.centroids().row(middle));
    }

    #[test]
    fn bad_ranking_is_rejected() {
        let s = space(3, 3);
        let mut r = ContextRanking::from_affinities(vec![0.0; 3], vec![0.0; 3]).unwrap();
        r.order = vec![0, 0, 1];
        assert!(reverse_context_space(&s, &r).is_err());
        r.order = vec![0, 1];
        assert!(reverse_context_space(&s, &r).is_err());
    }

    #[test]
    fn report_cases() {
        let labels = [0, 1, 1, 0];
        let all_flip = reversal_metrics(&[0, 1, 1, 0], &[1, 0, 0, 1], &labels).unwrap();
        assert_eq!(all_flip, ReversalReport { oa: 100.0, ca: 0.0, ra: 100.0 });
        let none = reversal_metrics(&[0, 1, 0, 0], &[0, 1, 0, 0], &labels).unwrap();
        assert_eq!(none.ra, 0.0);
        assert_eq!(none.ca, none.oa);
        assert!(reversal_metrics(&[0], &[0, 1], &[0, 1]).is_err());
    }

    proptest! {
        #[test]
        fn reversal_is_an_involution(k in 1usize..9, seed in 0u64..1000, aff in prop::collection::vec(-1.0f64..1.0, 8)) {
            let s = space(k, seed);
            let r = ContextRanking::from_affinities(aff[..k].to_vec(), vec![0.0; k]).unwrap();
            let mut sorted = r.order.clone();
            sorted.sort();
            prop_assert_eq!(sorted, (0..k).collect::<Vec<_>>());
            let twice = reverse_context_space(&reverse_context_space(&s, &r).unwrap(), &r).unwrap();
            let bits = |t: &Tensor2| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(twice.centroids()), bits(s.centroids()));
            prop_assert_eq!(bits(twice.merge()), bits(s.merge()));
        }

        #[test]
        fn full_flip_on_binary_task(labels in prop::collection::vec(0usize..2, 1..50), preds in prop::collection::vec(0usize..2, 50)) {
            let original = &preds[..labels.len()];
            let flipped: Vec<usize> = original.iter().map(|p| 1 - p).collect();
            let rep = reversal_metrics(original, &flipped, &labels).unwrap();
            prop_assert_eq!(rep.ra, 100.0);
            prop_assert!((rep.ca - (100.0 - rep.oa)).abs() < 1e-9);
        }
    }
}
