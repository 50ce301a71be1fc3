//! Embedding-space clustering and post-processing: flat-kernel mean-shift,
//! per-instance semantic majority voting, and mean removal.

use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanShiftConfig {
    /// Neighborhood radius in embedding space.
    pub bandwidth: f64,
    pub max_iters: usize,
    /// Convergence threshold on the per-iteration seed shift.
    pub shift_tol: f64,
    /// Converged modes closer than this merge into one cluster.
    pub merge_radius: f64,
}

impl MeanShiftConfig {
    pub fn with_bandwidth(bandwidth: f64) -> Self {
        MeanShiftConfig {
            bandwidth,
            max_iters: 300,
            shift_tol: 1e-3 * bandwidth,
            merge_radius: bandwidth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) {
            return Err(Error::Config(format!(
                "bandwidth must be > 0, got {}",
                self.bandwidth
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be ≥ 1".into()));
        }
        Ok(())
    }
}

impl Default for MeanShiftConfig {
    fn default() -> Self {
        MeanShiftConfig::with_bandwidth(0.6)
    }
}

/// A clustering of the input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// Per-point cluster id in `[0, modes.len())`.
    pub labels: Vec<usize>,
    /// Converged mode position per cluster.
    pub modes: Vec<Vec<f64>>,
}

impl ClusterResult {
    pub fn cluster_count(&self) -> usize {
        self.modes.len()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Flat-kernel mean-shift with a seed at every point.
///
/// Each seed repeatedly moves to the mean of all points within `bandwidth`
/// until the shift drops below `shift_tol` or `max_iters` is reached.
/// Converged positions are then merged: candidates are ranked by basin size
/// (the number of converged seeds within `merge_radius`, ties broken toward
/// the lower point index) and accepted greedily if they lie further than
/// `merge_radius` from every already-accepted mode. Every point joins its
/// nearest accepted mode. The algorithm draws no randomness, so results are
/// byte-for-byte reproducible.
pub fn mean_shift(emb: &Tensor, cfg: &MeanShiftConfig) -> Result<ClusterResult> {
    cfg.validate()?;
    if emb.shape().len() != 2 || emb.rows() == 0 {
        return Err(Error::Data(format!(
            "mean_shift needs a nonempty matrix, got shape {:?}",
            emb.shape()
        )));
    }
    let (n, d) = (emb.rows(), emb.cols());

    let mut converged: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut mean = vec![0.0; d];
    for p in 0..n {
        let mut pos = emb.row(p).to_vec();
        for _ in 0..cfg.max_iters {
            mean.iter_mut().for_each(|v| *v = 0.0);
            let mut count = 0usize;
            for q in 0..n {
                let row = emb.row(q);
                if dist(&pos, row) <= cfg.bandwidth {
                    for (m, &v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                    count += 1;
                }
            }
            // The seed started on a data point, so its own neighborhood is
            // never empty.
            for m in mean.iter_mut() {
                *m /= count as f64;
            }
            let shift = dist(&pos, &mean);
            pos.copy_from_slice(&mean);
            if shift < cfg.shift_tol {
                break;
            }
        }
        converged.push(pos);
    }

    // Basin size per converged seed.
    let support: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| dist(&converged[i], &converged[j]) <= cfg.merge_radius)
                .count()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| support[b].cmp(&support[a]).then(a.cmp(&b)));

    let mut modes: Vec<Vec<f64>> = Vec::new();
    for &cand in &order {
        if modes
            .iter()
            .all(|m| dist(m, &converged[cand]) > cfg.merge_radius)
        {
            modes.push(converged[cand].clone());
        }
    }

    let labels = (0..n)
        .map(|p| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (k, m) in modes.iter().enumerate() {
                let dk = dist(&converged[p], m);
                if dk < best_d {
                    best_d = dk;
                    best = k;
                }
            }
            best
        })
        .collect();
    Ok(ClusterResult { labels, modes })
}

/// Majority semantic class per instance; ties go to the smaller class id.
/// Returns the per-instance class map and the per-point semantic labels
/// rewritten so every member of an instance carries its instance's class.
pub fn semantic_mode_vote(
    inst_labels: &[usize],
    sem_preds: &[usize],
) -> Result<(BTreeMap<usize, usize>, Vec<usize>)> {
    if inst_labels.len() != sem_preds.len() {
        return Err(Error::Dimension(format!(
            "semantic_mode_vote: {} instance labels vs {} semantic predictions",
            inst_labels.len(),
            sem_preds.len()
        )));
    }
    if inst_labels.is_empty() {
        return Err(Error::Data("semantic_mode_vote: empty instance id set".into()));
    }
    let mut votes: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&inst, &sem) in inst_labels.iter().zip(sem_preds) {
        *votes.entry(inst).or_default().entry(sem).or_insert(0) += 1;
    }
    let classes: BTreeMap<usize, usize> = votes
        .into_iter()
        .map(|(inst, counts)| {
            // Highest count wins; BTreeMap iteration is ascending by class
            // id, so `>` keeps the smallest id on ties.
            let mut best_class = 0;
            let mut best_count = 0;
            for (class, count) in counts {
                if count > best_count {
                    best_count = count;
                    best_class = class;
                }
            }
            (inst, best_class)
        })
        .collect();
    let relabeled = inst_labels.iter().map(|i| classes[i]).collect();
    Ok((classes, relabeled))
}

/// Subtract each embedding dimension's mean, making all dimension means zero.
pub fn mean_removal(emb: &Tensor) -> Result<Tensor> {
    if emb.shape().len() != 2 || emb.rows() == 0 {
        return Err(Error::Data(format!(
            "mean_removal needs a nonempty matrix, got shape {:?}",
            emb.shape()
        )));
    }
    let (n, d) = (emb.rows(), emb.cols());
    let mut means = vec![0.0; d];
    for p in 0..n {
        for (j, m) in means.iter_mut().enumerate() {
            *m += emb.at(p, j);
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    let values = emb
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| v - means[i % d])
        .collect();
    Tensor::matrix(n, d, values)
}
