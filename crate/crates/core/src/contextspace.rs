//! Context space: k centroids abstracted from word elements by spherical
//! k-means, plus a trainable k×k merge matrix applied on top of them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numkernel::{dot, norm, Tensor2};
use crate::seed::{stage_rng, Stage};

/// Slack allowed when checking that the objective never increases.
pub const OBJECTIVE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ContextSpace {
    centroids: Tensor2,
    merge: Tensor2,
}

impl ContextSpace {
    pub fn new(centroids: Tensor2, merge: Tensor2) -> Result<Self> {
        let k = centroids.rows();
        if k == 0 || centroids.cols() == 0 {
            return Err(Error::Empty("context centroids"));
        }
        if merge.shape() != (k, k) {
            return Err(Error::Shape {
                op: "ContextSpace",
                expected: (k, k),
                found: merge.shape(),
            });
        }
        if centroids.iter_rows().any(|r| !(norm(r) > 0.0)) {
            return Err(Error::Degenerate("context centroid"));
        }
        Ok(Self { centroids, merge })
    }

    /// Space with an identity merge matrix.
    pub fn from_centroids(centroids: Tensor2) -> Result<Self> {
        let k = centroids.rows();
        Self::new(centroids, Tensor2::identity(k))
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn coords(&self) -> usize {
        self.centroids.cols()
    }

    pub fn centroids(&self) -> &Tensor2 {
        &self.centroids
    }

    pub fn merge(&self) -> &Tensor2 {
        &self.merge
    }

    pub fn set_merge(&mut self, merge: Tensor2) -> Result<()> {
        if merge.shape() != self.merge.shape() {
            return Err(Error::Shape {
                op: "set_merge",
                expected: self.merge.shape(),
                found: merge.shape(),
            });
        }
        self.merge = merge;
        Ok(())
    }

    /// Merged contexts `M_M · X`, k×n.
    pub fn merged(&self) -> Tensor2 {
        self.merge.matmul(&self.centroids).expect("k×k times k×n")
    }

    /// Exchanges two centroid rows; the merge matrix is left alone.
    pub fn swap_centroids(&mut self, a: usize, b: usize) {
        self.centroids.swap_rows(a, b);
    }
}

/// Outcome of one k-means run.
#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub space: ContextSpace,
    pub assignments: Vec<usize>,
    /// Objective after the initial assignment and after every iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl Clustering {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("at least one entry")
    }
}

fn unit_rows(elements: &Tensor2) -> Result<Tensor2> {
    let mut out = elements.clone();
    for r in 0..out.rows() {
        let n = norm(out.row(r));
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Degenerate("k-means element"));
        }
        out.row_mut(r).iter_mut().for_each(|v| *v /= n);
    }
    Ok(out)
}

/// Assigns every unit row to its most similar centroid; on ties the current
/// assignment is kept, otherwise the lowest index wins.
fn assign(units: &Tensor2, centroids: &Tensor2, current: Option<&[usize]>) -> Vec<usize> {
    (0..units.rows())
        .map(|i| {
            let x = units.row(i);
            let mut best = current.map_or(0, |c| c[i]);
            let mut best_sim = dot(x, centroids.row(best));
            for j in 0..centroids.rows() {
                let s = dot(x, centroids.row(j));
                if s > best_sim {
                    best = j;
                    best_sim = s;
                }
            }
            best
        })
        .collect()
}

fn objective(units: &Tensor2, centroids: &Tensor2, assignments: &[usize]) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &c)| 1.0 - dot(units.row(i), centroids.row(c)))
        .sum()
}

/// Normalized member means. Clusters left empty (or whose members cancel
/// out) are reseeded on the element farthest from its own centroid.
fn update(units: &Tensor2, assignments: &[usize], k: usize) -> Tensor2 {
    let n = units.cols();
    let mut sums = Tensor2::zeros(k, n);
    for (i, &c) in assignments.iter().enumerate() {
        for (s, v) in sums.row_mut(c).iter_mut().zip(units.row(i)) {
            *s += v;
        }
    }
    let mut empty = Vec::new();
    for c in 0..k {
        let len = norm(sums.row(c));
        if len > 1e-12 {
            sums.row_mut(c).iter_mut().for_each(|v| *v /= len);
        } else {
            empty.push(c);
        }
    }
    if empty.is_empty() {
        return sums;
    }
    let mut order: Vec<(f64, usize)> = (0..units.rows())
        .filter(|&i| !empty.contains(&assignments[i]))
        .map(|i| (1.0 - dot(units.row(i), sums.row(assignments[i])), i))
        .collect();
    // farthest first, lower index on ties
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut picks = order.into_iter().map(|(_, i)| i);
    for (slot, &c) in empty.iter().enumerate() {
        let i = picks.next().unwrap_or(slot % units.rows());
        sums.row_mut(c).copy_from_slice(units.row(i));
    }
    sums
}

/// Spherical k-means from explicit initial centroids.
pub fn kmeans_from(elements: &Tensor2, init: &Tensor2, max_iter: usize) -> Result<Clustering> {
    let k = init.rows();
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if elements.rows() < k {
        return Err(Error::Invalid(format!(
            "{} elements cannot form {k} clusters",
            elements.rows()
        )));
    }
    if init.cols() != elements.cols() {
        return Err(Error::Shape {
            op: "kmeans_from",
            expected: (k, elements.cols()),
            found: init.shape(),
        });
    }
    let units = unit_rows(elements)?;
    let mut centroids = unit_rows(init)?;
    let mut assignments = assign(&units, &centroids, None);
    let mut obj = objective(&units, &centroids, &assignments);
    let mut trace = vec![obj];
    let mut converged = false;
    for _ in 0..max_iter {
        let next_centroids = update(&units, &assignments, k);
        let next = assign(&units, &next_centroids, Some(&assignments));
        let next_obj = objective(&units, &next_centroids, &next);
        debug_assert!(
            next_obj <= obj + OBJECTIVE_SLACK,
            "k-means objective rose from {obj} to {next_obj}"
        );
        centroids = next_centroids;
        trace.push(next_obj);
        obj = next_obj;
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }
    Ok(Clustering {
        space: ContextSpace::from_centroids(centroids)?,
        assignments,
        objective_trace: trace,
        converged,
    })
}

/// k-means++ seeding under cosine distance.
pub fn kmeans_pp_init(elements: &Tensor2, k: usize, rng: &mut impl Rng) -> Result<Tensor2> {
    if k == 0 || elements.rows() < k {
        return Err(Error::Invalid(format!(
            "{} elements cannot seed {k} clusters",
            elements.rows()
        )));
    }
    let units = unit_rows(elements)?;
    let n = units.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n)
        .map(|i| (1.0 - dot(units.row(i), units.row(chosen[0]))).max(0.0))
        .collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in dist.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if r < w {
                        break;
                    }
                    r -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("n >= k")
        };
        chosen.push(pick);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min((1.0 - dot(units.row(i), units.row(pick))).max(0.0));
        }
    }
    let mut init = Tensor2::zeros(k, units.cols());
    for (r, &i) in chosen.iter().enumerate() {
        init.row_mut(r).copy_from_slice(units.row(i));
    }
    Ok(init)
}

/// Restarts used when none are requested explicitly.
pub const DEFAULT_RESTARTS: usize = 8;

/// Spherical k-means from `restarts` seeded k-means++ initializations,
/// keeping the run with the lowest objective (the earliest on ties). The
/// merge matrix of the returned space is the identity.
pub fn kmeans_cluster(
    elements: &Tensor2,
    k: usize,
    max_iter: usize,
    restarts: usize,
    seed: u64,
) -> Result<Clustering> {
    if restarts == 0 {
        return Err(Error::Invalid("at least one k-means run is needed".into()));
    }
    let mut rng = stage_rng(seed, Stage::Clustering);
    let mut best: Option<Clustering> = None;
    for _ in 0..restarts {
        let init = kmeans_pp_init(elements, k, &mut rng)?;
        let run = kmeans_from(elements, &init, max_iter)?;
        if best.as_ref().is_none_or(|b| run.objective() < b.objective()) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts > 0"))
}
