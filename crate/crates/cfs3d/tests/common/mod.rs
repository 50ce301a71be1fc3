//! Shared helpers for the integration suites: an adjusted-Rand-index
//! implementation and a brute-force metrics oracle.
//!
//! The oracle recomputes every score from scratch with direct counting
//! (hash-set intersections, max-count scans, qualifying-pair counts) rather
//! than the library's merge scans and greedy matching. Sums that involve
//! floating-point accumulation follow the documented determinism contract
//! (ascending ids and classes) so agreement is exact, not approximate.

use std::collections::{BTreeMap, HashSet};

/// Adjusted Rand index between two labelings via pair counting.
///
/// Degenerate contingencies (single cluster on both sides, singletons) make
/// the correction term equal the maximum index; the index is 1.0 exactly
/// when the partitions agree, so that case returns 1.0.
pub fn ari(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "ari: length mismatch");
    let choose2 = |n: usize| (n * n.saturating_sub(1) / 2) as f64;
    let mut cells: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let index: f64 = cells.values().map(|&n| choose2(n)).sum();
    let row_sum: f64 = rows.values().map(|&n| choose2(n)).sum();
    let col_sum: f64 = cols.values().map(|&n| choose2(n)).sum();
    let expected = row_sum * col_sum / choose2(a.len());
    let max_index = 0.5 * (row_sum + col_sum);
    if max_index == expected {
        return 1.0;
    }
    (index - expected) / (max_index - expected)
}

/// Oracle twin of `SemReport`, computed by per-class filtering.
pub struct OracleSem {
    pub oacc: f64,
    pub macc: f64,
    pub miou: f64,
    /// `(present, acc, iou)` per class id.
    pub per_class: Vec<(bool, f64, f64)>,
}

pub fn oracle_semantic(pred: &[usize], gt: &[usize], l_c: usize) -> OracleSem {
    let n = pred.len();
    let hits = pred.iter().zip(gt).filter(|(p, g)| p == g).count();
    let mut per_class = Vec::new();
    let mut acc_sum = 0.0;
    let mut iou_sum = 0.0;
    let mut present = 0usize;
    for c in 0..l_c {
        let gt_c = gt.iter().filter(|&&g| g == c).count();
        if gt_c == 0 {
            per_class.push((false, 0.0, 0.0));
            continue;
        }
        let pred_c = pred.iter().filter(|&&p| p == c).count();
        let tp = pred.iter().zip(gt).filter(|(&p, &g)| p == c && g == c).count();
        let acc = tp as f64 / gt_c as f64;
        let iou = tp as f64 / (gt_c + pred_c - tp) as f64;
        acc_sum += acc;
        iou_sum += iou;
        present += 1;
        per_class.push((true, acc, iou));
    }
    OracleSem {
        oacc: hits as f64 / n as f64,
        macc: acc_sum / present as f64,
        miou: iou_sum / present as f64,
        per_class,
    }
}

/// Instance id → member point set, ascending by id.
fn groups(inst: &[usize]) -> Vec<(usize, HashSet<usize>)> {
    let mut by_id: BTreeMap<usize, HashSet<usize>> = BTreeMap::new();
    for (point, &id) in inst.iter().enumerate() {
        by_id.entry(id).or_default().insert(point);
    }
    by_id.into_iter().collect()
}

/// Majority class by max count, ties to the smallest class id.
fn majority(points: &HashSet<usize>, sem: &[usize]) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &p in points {
        *counts.entry(sem[p]).or_insert(0) += 1;
    }
    let best = *counts.values().max().unwrap();
    *counts.iter().find(|(_, &c)| c == best).unwrap().0
}

fn pair_iou(a: &HashSet<usize>, b: &HashSet<usize>) -> f64 {
    let inter = a.iter().filter(|p| b.contains(p)).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Oracle twin of `coverage_metrics`.
pub fn oracle_coverage(pred_inst: &[usize], gt_inst: &[usize], gt_sem: &[usize]) -> (f64, f64) {
    let preds = groups(pred_inst);
    let mut by_class: BTreeMap<usize, Vec<HashSet<usize>>> = BTreeMap::new();
    for (_, g) in groups(gt_inst) {
        let class = majority(&g, gt_sem);
        by_class.entry(class).or_default().push(g);
    }
    let mut cov_means = Vec::new();
    let mut wcov_sums = Vec::new();
    for members in by_class.values() {
        let total: usize = members.iter().map(HashSet::len).sum();
        let mut cov_sum = 0.0;
        let mut wcov = 0.0;
        for g in members {
            let best = preds
                .iter()
                .map(|(_, p)| pair_iou(g, p))
                .fold(0.0, f64::max);
            cov_sum += best;
            wcov += (g.len() as f64 / total as f64) * best;
        }
        cov_means.push(cov_sum / members.len() as f64);
        wcov_sums.push(wcov);
    }
    let k = cov_means.len() as f64;
    (
        cov_means.iter().sum::<f64>() / k,
        wcov_sums.iter().sum::<f64>() / k,
    )
}

/// Oracle twin of `prec_rec` at IoU threshold 0.5.
///
/// Above 0.5 a predicted set overlaps more than half of a ground-truth set
/// and vice versa, so each side qualifies against at most one partner and
/// greedy matching degenerates to counting the qualifying pairs; the count
/// is what this oracle uses.
pub fn oracle_prec_rec_half(
    pred_inst: &[usize],
    gt_inst: &[usize],
    pred_sem: &[usize],
    gt_sem: &[usize],
) -> (f64, f64) {
    let mut gt_by_class: BTreeMap<usize, Vec<HashSet<usize>>> = BTreeMap::new();
    for (_, g) in groups(gt_inst) {
        gt_by_class.entry(majority(&g, gt_sem)).or_default().push(g);
    }
    let mut pred_by_class: BTreeMap<usize, Vec<HashSet<usize>>> = BTreeMap::new();
    for (_, p) in groups(pred_inst) {
        pred_by_class.entry(majority(&p, pred_sem)).or_default().push(p);
    }
    let mut precs = Vec::new();
    let mut recs = Vec::new();
    for (class, class_gts) in &gt_by_class {
        let empty = Vec::new();
        let class_preds = pred_by_class.get(class).unwrap_or(&empty);
        let mut tp = 0usize;
        for p in class_preds {
            for g in class_gts {
                if pair_iou(p, g) > 0.5 {
                    tp += 1;
                }
            }
        }
        precs.push(if class_preds.is_empty() {
            0.0
        } else {
            tp as f64 / class_preds.len() as f64
        });
        recs.push(tp as f64 / class_gts.len() as f64);
    }
    let k = precs.len() as f64;
    (
        precs.iter().sum::<f64>() / k,
        recs.iter().sum::<f64>() / k,
    )
}
