//! Segmentation quality metrics: point-level semantic scores (oAcc, mAcc,
//! mIoU) and instance-level scores (mCov, mWCov, mPrec, mRec).
//!
//! Determinism contract, shared with the brute-force test oracle: instances
//! and classes are always visited in ascending id order, class means are
//! accumulated in ascending class order, and best-IoU scans keep the first
//! maximum. This makes every reported value bit-reproducible.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Per-class semantic scores. `acc` and `iou` are meaningful only when the
/// class is `present` in the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSem {
    pub present: bool,
    pub acc: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemReport {
    pub oacc: f64,
    pub macc: f64,
    pub miou: f64,
    pub per_class: Vec<ClassSem>,
}

/// Per-class instance scores; `present` means the ground truth has at least
/// one instance of this class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassIns {
    pub present: bool,
    pub cov: f64,
    pub wcov: f64,
    pub prec: f64,
    pub rec: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InsReport {
    pub mcov: f64,
    pub mwcov: f64,
    pub mprec: f64,
    pub mrec: f64,
    pub per_class: Vec<ClassIns>,
}

fn check_same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("{what}: lengths {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::Data(format!("{what}: empty labeling")));
    }
    Ok(())
}

fn check_class_range(labels: &[usize], l_c: usize, what: &str) -> Result<()> {
    for (i, &c) in labels.iter().enumerate() {
        if c >= l_c {
            return Err(Error::Data(format!(
                "{what}: class {c} at point {i} out of range (L_C = {l_c})"
            )));
        }
    }
    Ok(())
}

/// Point-level semantic scores.
///
/// oAcc is the plain hit rate. Per-class accuracy is TP_c / GT_c and IoU is
/// TP_c / (TP_c + FP_c + FN_c); mAcc and mIoU average these over classes
/// that appear in the ground truth.
pub fn semantic_metrics(pred: &[usize], gt: &[usize], l_c: usize) -> Result<SemReport> {
    check_same_len(pred.len(), gt.len(), "semantic_metrics")?;
    check_class_range(pred, l_c, "semantic_metrics: pred")?;
    check_class_range(gt, l_c, "semantic_metrics: gt")?;

    let mut tp = vec![0usize; l_c];
    let mut gt_count = vec![0usize; l_c];
    let mut pred_count = vec![0usize; l_c];
    let mut correct = 0usize;
    for (&p, &g) in pred.iter().zip(gt) {
        gt_count[g] += 1;
        pred_count[p] += 1;
        if p == g {
            tp[g] += 1;
            correct += 1;
        }
    }

    let mut per_class = Vec::with_capacity(l_c);
    let mut acc_sum = 0.0;
    let mut iou_sum = 0.0;
    let mut present = 0usize;
    for c in 0..l_c {
        if gt_count[c] == 0 {
            per_class.push(ClassSem { present: false, acc: 0.0, iou: 0.0 });
            continue;
        }
        let acc = tp[c] as f64 / gt_count[c] as f64;
        let union = gt_count[c] + pred_count[c] - tp[c];
        let iou = tp[c] as f64 / union as f64;
        acc_sum += acc;
        iou_sum += iou;
        present += 1;
        per_class.push(ClassSem { present: true, acc, iou });
    }
    Ok(SemReport {
        oacc: correct as f64 / pred.len() as f64,
        macc: acc_sum / present as f64,
        miou: iou_sum / present as f64,
        per_class,
    })
}

/// Instance id → sorted member point indices, ascending by id.
fn instance_sets(inst: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut sets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (point, &id) in inst.iter().enumerate() {
        sets.entry(id).or_default().push(point);
    }
    sets
}

/// Majority semantic class of an instance's points; ties take the smaller id.
fn majority_class(points: &[usize], sem: &[usize]) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &p in points {
        *counts.entry(sem[p]).or_insert(0) += 1;
    }
    let mut best_class = 0;
    let mut best_count = 0;
    for (class, count) in counts {
        if count > best_count {
            best_count = count;
            best_class = class;
        }
    }
    best_class
}

/// IoU of two sorted index slices.
fn set_iou(a: &[usize], b: &[usize]) -> f64 {
    let mut inter = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

struct ClassCoverage {
    class: usize,
    cov: f64,
    wcov: f64,
}

/// Per-class coverage, ascending by class id.
fn coverage_by_class(
    pred_inst: &[usize],
    gt_inst: &[usize],
    gt_sem: &[usize],
) -> Result<Vec<ClassCoverage>> {
    check_same_len(pred_inst.len(), gt_inst.len(), "coverage_metrics")?;
    check_same_len(gt_sem.len(), gt_inst.len(), "coverage_metrics: gt_sem")?;
    let gts = instance_sets(gt_inst);
    let preds: Vec<Vec<usize>> = instance_sets(pred_inst).into_values().collect();
    if gts.is_empty() {
        return Err(Error::Data("coverage_metrics: no ground-truth instances".into()));
    }

    // Group ground-truth instances by class, ascending id within each class.
    let mut by_class: BTreeMap<usize, Vec<&Vec<usize>>> = BTreeMap::new();
    for points in gts.values() {
        by_class
            .entry(majority_class(points, gt_sem))
            .or_default()
            .push(points);
    }

    let mut out = Vec::new();
    for (class, members) in by_class {
        let total: usize = members.iter().map(|m| m.len()).sum();
        let mut cov_sum = 0.0;
        let mut wcov = 0.0;
        for g in &members {
            let mut best = 0.0;
            for p in &preds {
                let iou = set_iou(g, p);
                if iou > best {
                    best = iou;
                }
            }
            cov_sum += best;
            wcov += (g.len() as f64 / total as f64) * best;
        }
        out.push(ClassCoverage {
            class,
            cov: cov_sum / members.len() as f64,
            wcov,
        });
    }
    Ok(out)
}

/// Mean coverage and size-weighted mean coverage.
///
/// Each ground-truth instance scores its best IoU against any predicted
/// instance; scores average within the instance's semantic class (weighted
/// by point-count share for the weighted variant) and the per-class values
/// average over classes present in the ground truth.
pub fn coverage_metrics(
    pred_inst: &[usize],
    gt_inst: &[usize],
    gt_sem: &[usize],
) -> Result<(f64, f64)> {
    let per_class = coverage_by_class(pred_inst, gt_inst, gt_sem)?;
    let k = per_class.len() as f64;
    let mcov = per_class.iter().map(|c| c.cov).sum::<f64>() / k;
    let mwcov = per_class.iter().map(|c| c.wcov).sum::<f64>() / k;
    Ok((mcov, mwcov))
}

struct ClassPrecRec {
    class: usize,
    prec: f64,
    rec: f64,
}

/// Per-class precision/recall, ascending by class id; classes are those with
/// at least one ground-truth instance.
fn prec_rec_by_class(
    pred_inst: &[usize],
    gt_inst: &[usize],
    pred_sem: &[usize],
    gt_sem: &[usize],
    iou_threshold: f64,
) -> Result<Vec<ClassPrecRec>> {
    check_same_len(pred_inst.len(), gt_inst.len(), "prec_rec")?;
    check_same_len(pred_sem.len(), pred_inst.len(), "prec_rec: pred_sem")?;
    check_same_len(gt_sem.len(), gt_inst.len(), "prec_rec: gt_sem")?;
    let gts = instance_sets(gt_inst);
    let preds = instance_sets(pred_inst);
    if gts.is_empty() {
        return Err(Error::Data("prec_rec: no ground-truth instances".into()));
    }

    let mut gt_by_class: BTreeMap<usize, Vec<&Vec<usize>>> = BTreeMap::new();
    for points in gts.values() {
        gt_by_class
            .entry(majority_class(points, gt_sem))
            .or_default()
            .push(points);
    }
    let mut pred_by_class: BTreeMap<usize, Vec<&Vec<usize>>> = BTreeMap::new();
    for points in preds.values() {
        pred_by_class
            .entry(majority_class(points, pred_sem))
            .or_default()
            .push(points);
    }

    let mut out = Vec::new();
    for (class, class_gts) in gt_by_class {
        let class_preds = pred_by_class.get(&class).map(Vec::as_slice).unwrap_or(&[]);
        // Greedy one-to-one matching in descending IoU order; ties resolve
        // toward the lower prediction index, then the lower gt index.
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (pi, p) in class_preds.iter().enumerate() {
            for (gi, g) in class_gts.iter().enumerate() {
                let iou = set_iou(p, g);
                if iou > iou_threshold {
                    pairs.push((iou, pi, gi));
                }
            }
        }
        pairs.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut pred_used = vec![false; class_preds.len()];
        let mut gt_used = vec![false; class_gts.len()];
        let mut tp = 0usize;
        for (_, pi, gi) in pairs {
            if !pred_used[pi] && !gt_used[gi] {
                pred_used[pi] = true;
                gt_used[gi] = true;
                tp += 1;
            }
        }
        let prec = if class_preds.is_empty() {
            0.0
        } else {
            tp as f64 / class_preds.len() as f64
        };
        let rec = tp as f64 / class_gts.len() as f64;
        out.push(ClassPrecRec { class, prec, rec });
    }
    Ok(out)
}

/// Instance precision and recall at an IoU threshold (strict `>`), matched
/// one-to-one per class and averaged over classes present in the ground
/// truth. A present class with no predictions scores precision 0.
pub fn prec_rec(
    pred_inst: &[usize],
    gt_inst: &[usize],
    pred_sem: &[usize],
    gt_sem: &[usize],
    iou_threshold: f64,
) -> Result<(f64, f64)> {
    let per_class = prec_rec_by_class(pred_inst, gt_inst, pred_sem, gt_sem, iou_threshold)?;
    let k = per_class.len() as f64;
    let mprec = per_class.iter().map(|c| c.prec).sum::<f64>() / k;
    let mrec = per_class.iter().map(|c| c.rec).sum::<f64>() / k;
    Ok((mprec, mrec))
}

/// Full instance report with per-class breakdown (threshold 0.5 is the
/// conventional choice for mPrec/mRec).
pub fn instance_report(
    pred_inst: &[usize],
    gt_inst: &[usize],
    pred_sem: &[usize],
    gt_sem: &[usize],
    l_c: usize,
    iou_threshold: f64,
) -> Result<InsReport> {
    check_class_range(pred_sem, l_c, "instance_report: pred_sem")?;
    check_class_range(gt_sem, l_c, "instance_report: gt_sem")?;
    let cov = coverage_by_class(pred_inst, gt_inst, gt_sem)?;
    let pr = prec_rec_by_class(pred_inst, gt_inst, pred_sem, gt_sem, iou_threshold)?;

    let mut per_class: Vec<ClassIns> = (0..l_c)
        .map(|_| ClassIns { present: false, cov: 0.0, wcov: 0.0, prec: 0.0, rec: 0.0 })
        .collect();
    for c in &cov {
        per_class[c.class].present = true;
        per_class[c.class].cov = c.cov;
        per_class[c.class].wcov = c.wcov;
    }
    for c in &pr {
        per_class[c.class].prec = c.prec;
        per_class[c.class].rec = c.rec;
    }
    let k = cov.len() as f64;
    Ok(InsReport {
        mcov: cov.iter().map(|c| c.cov).sum::<f64>() / k,
        mwcov: cov.iter().map(|c| c.wcov).sum::<f64>() / k,
        mprec: pr.iter().map(|c| c.prec).sum::<f64>() / k,
        mrec: pr.iter().map(|c| c.rec).sum::<f64>() / k,
        per_class,
    })
}

/// Serialize both reports as flat `key value` lines. Summary keys come
/// first (oAcc, mAcc, mIoU, mCov, mWCov, mPrec, mRec), then one
/// `per_class.<name>.<metric>` line per metric for every class present in
/// the ground truth.
pub fn render_report(sem: &SemReport, ins: &InsReport, class_names: &[String]) -> Result<String> {
    if class_names.len() != sem.per_class.len() || class_names.len() != ins.per_class.len() {
        return Err(Error::Dimension(format!(
            "render_report: {} names for {} semantic / {} instance classes",
            class_names.len(),
            sem.per_class.len(),
            ins.per_class.len()
        )));
    }
    let mut out = String::new();
    out.push_str(&format!("oAcc {:.6}\n", sem.oacc));
    out.push_str(&format!("mAcc {:.6}\n", sem.macc));
    out.push_str(&format!("mIoU {:.6}\n", sem.miou));
    out.push_str(&format!("mCov {:.6}\n", ins.mcov));
    out.push_str(&format!("mWCov {:.6}\n", ins.mwcov));
    out.push_str(&format!("mPrec {:.6}\n", ins.mprec));
    out.push_str(&format!("mRec {:.6}\n", ins.mrec));
    for (c, name) in class_names.iter().enumerate() {
        if sem.per_class[c].present {
            out.push_str(&format!("per_class.{name}.acc {:.6}\n", sem.per_class[c].acc));
            out.push_str(&format!("per_class.{name}.iou {:.6}\n", sem.per_class[c].iou));
        }
        if ins.per_class[c].present {
            out.push_str(&format!("per_class.{name}.cov {:.6}\n", ins.per_class[c].cov));
            out.push_str(&format!("per_class.{name}.wcov {:.6}\n", ins.per_class[c].wcov));
            out.push_str(&format!("per_class.{name}.prec {:.6}\n", ins.per_class[c].prec));
            out.push_str(&format!("per_class.{name}.rec {:.6}\n", ins.per_class[c].rec));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_scores_one_everywhere() {
        let sem = vec![0, 0, 1, 1, 2];
        let inst = vec![0, 0, 1, 1, 2];
        let s = semantic_metrics(&sem, &sem, 3).unwrap();
        assert_eq!((s.oacc, s.macc, s.miou), (1.0, 1.0, 1.0));
        let (mcov, mwcov) = coverage_metrics(&inst, &inst, &sem).unwrap();
        assert_eq!((mcov, mwcov), (1.0, 1.0));
        let (mprec, mrec) = prec_rec(&inst, &inst, &sem, &sem, 0.5).unwrap();
        assert_eq!((mprec, mrec), (1.0, 1.0));
    }

    #[test]
    fn fully_swapped_class_matches_hand_counts() {
        let gt = vec![0, 0, 1, 1];
        let pred = vec![0, 0, 0, 0];
        let s = semantic_metrics(&pred, &gt, 2).unwrap();
        assert_eq!(s.oacc, 0.5);
        assert_eq!(s.per_class[1].iou, 0.0);
        assert_eq!(s.per_class[0].acc, 1.0);
        assert_eq!(s.per_class[0].iou, 0.5);
        assert_eq!(s.macc, 0.5);
        assert_eq!(s.miou, 0.25);
    }

    #[test]
    fn class_absent_from_gt_is_excluded_from_means() {
        let gt = vec![0, 0];
        let pred = vec![0, 1];
        let s = semantic_metrics(&pred, &gt, 3).unwrap();
        assert!(!s.per_class[1].present && !s.per_class[2].present);
        assert_eq!(s.macc, 0.5);
        assert_eq!(s.miou, 0.5);
    }

    #[test]
    fn out_of_range_class_is_a_data_error() {
        assert!(matches!(
            semantic_metrics(&[0, 5], &[0, 1], 2),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            semantic_metrics(&[0], &[0, 1], 2),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn partially_covered_instance_scores_its_best_iou() {
        // gt instance 0 holds points {0,1,2,3}; its best prediction covers
        // two of them plus two extras: IoU = 2 / 6. Remaining predictions
        // touch at most one point of it, diluted below 1/3.
        let gt_inst = vec![0, 0, 0, 0, 1, 1, 2, 2];
        let gt_sem = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let pred_inst = vec![0, 0, 1, 2, 0, 0, 1, 2];
        let cov = coverage_by_class(&pred_inst, &gt_inst, &gt_sem).unwrap();
        assert_eq!(cov[0].class, 0);
        assert_eq!(cov[0].cov, 2.0 / 6.0);
        assert_eq!(cov[0].wcov, 2.0 / 6.0);
    }

    #[test]
    fn merging_all_instances_of_a_class_lowers_coverage() {
        let gt_inst = vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
        let gt_sem = vec![0; 12];
        let merged = vec![0; 12];
        let (identity_cov, _) = coverage_metrics(&gt_inst, &gt_inst, &gt_sem).unwrap();
        let (merged_cov, _) = coverage_metrics(&merged, &gt_inst, &gt_sem).unwrap();
        assert_eq!(identity_cov, 1.0);
        assert_eq!(merged_cov, 1.0 / 3.0);
    }

    #[test]
    fn one_gt_instance_satisfies_only_one_prediction() {
        // Two disjoint predictions each cover half of the single gt
        // instance. At threshold 0.3 both qualify alone, but one-to-one
        // matching awards a single true positive.
        let gt_inst = vec![0; 10];
        let sem = vec![0; 10];
        let pred_inst = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let (prec, rec) = prec_rec(&pred_inst, &gt_inst, &sem, &sem, 0.3).unwrap();
        assert_eq!(prec, 0.5);
        assert_eq!(rec, 1.0);
    }

    #[test]
    fn iou_exactly_at_threshold_is_not_a_match() {
        let gt_inst = vec![0; 10];
        let sem = vec![0; 10];
        let pred_inst = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        // Each prediction has IoU exactly 0.5 with the gt instance.
        let (prec, rec) = prec_rec(&pred_inst, &gt_inst, &sem, &sem, 0.5).unwrap();
        assert_eq!(prec, 0.0);
        assert_eq!(rec, 0.0);
    }

    #[test]
    fn present_class_without_predictions_scores_zero_precision() {
        // Class 1 exists in gt; every prediction votes class 0.
        let gt_inst = vec![0, 0, 1, 1];
        let gt_sem = vec![0, 0, 1, 1];
        let pred_inst = vec![0, 0, 1, 1];
        let pred_sem = vec![0, 0, 0, 0];
        let per = prec_rec_by_class(&pred_inst, &gt_inst, &pred_sem, &gt_sem, 0.5).unwrap();
        let class1 = per.iter().find(|c| c.class == 1).unwrap();
        assert_eq!(class1.prec, 0.0);
        assert_eq!(class1.rec, 0.0);
    }

    #[test]
    fn report_carries_exactly_the_documented_keys() {
        let sem = vec![0, 0, 1, 1];
        let inst = vec![0, 0, 1, 1];
        let s = semantic_metrics(&sem, &sem, 2).unwrap();
        let i = instance_report(&inst, &inst, &sem, &sem, 2, 0.5).unwrap();
        let names = vec!["floor".to_string(), "wall".to_string()];
        let text = render_report(&s, &i, &names).unwrap();
        let keys: Vec<&str> = text.lines().map(|l| l.split(' ').next().unwrap()).collect();
        assert_eq!(
            keys,
            vec![
                "oAcc", "mAcc", "mIoU", "mCov", "mWCov", "mPrec", "mRec",
                "per_class.floor.acc", "per_class.floor.iou", "per_class.floor.cov",
                "per_class.floor.wcov", "per_class.floor.prec", "per_class.floor.rec",
                "per_class.wall.acc", "per_class.wall.iou", "per_class.wall.cov",
                "per_class.wall.wcov", "per_class.wall.prec", "per_class.wall.rec",
            ]
        );
        for line in text.lines() {
            let value: f64 = line.split(' ').nth(1).unwrap().parse().unwrap();
            assert_eq!(value, 1.0);
        }
    }

    #[test]
    fn metrics_are_invariant_under_consistent_relabeling() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_for(42, 0x3e7a, 0);
        for _ in 0..20 {
            let n = rng.random_range(8..48);
            let l_c = rng.random_range(2..5usize);
            let n_inst = rng.random_range(1..5usize);
            // Instance-consistent semantics: each instance carries one class.
            let inst_class: Vec<usize> = (0..n_inst).map(|_| rng.random_range(0..l_c)).collect();
            let gt_inst: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_inst)).collect();
            let gt_sem: Vec<usize> = gt_inst.iter().map(|&i| inst_class[i]).collect();
            // Predictions are also instance-consistent: the deterministic
            // majority tie rule (smallest class id) is only relabel-stable
            // when every instance's vote is unanimous, which matches what
            // the inference pipeline produces.
            let pred_class: Vec<usize> = (0..n_inst).map(|_| rng.random_range(0..l_c)).collect();
            let pred_inst: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_inst)).collect();
            let pred_sem: Vec<usize> = pred_inst.iter().map(|&i| pred_class[i]).collect();

            // Bijective relabelings of class ids and instance ids.
            let class_map: Vec<usize> = {
                let mut m: Vec<usize> = (0..l_c).collect();
                m.reverse();
                m
            };
            let inst_map: Vec<usize> = (0..n_inst).map(|i| (i + 3) % n_inst + 7).collect();
            let r_gt_sem: Vec<usize> = gt_sem.iter().map(|&c| class_map[c]).collect();
            let r_pred_sem: Vec<usize> = pred_sem.iter().map(|&c| class_map[c]).collect();
            let r_gt_inst: Vec<usize> = gt_inst.iter().map(|&i| inst_map[i]).collect();
            let r_pred_inst: Vec<usize> = pred_inst.iter().map(|&i| inst_map[i]).collect();

            let a = semantic_metrics(&pred_sem, &gt_sem, l_c).unwrap();
            let b = semantic_metrics(&r_pred_sem, &r_gt_sem, l_c).unwrap();
            assert!((a.oacc - b.oacc).abs() < 1e-12);
            assert!((a.macc - b.macc).abs() < 1e-12);
            assert!((a.miou - b.miou).abs() < 1e-12);

            let (cov_a, wcov_a) = coverage_metrics(&pred_inst, &gt_inst, &gt_sem).unwrap();
            let (cov_b, wcov_b) = coverage_metrics(&r_pred_inst, &r_gt_inst, &r_gt_sem).unwrap();
            assert!((cov_a - cov_b).abs() < 1e-12);
            assert!((wcov_a - wcov_b).abs() < 1e-12);

            let (p_a, r_a) = prec_rec(&pred_inst, &gt_inst, &pred_sem, &gt_sem, 0.5).unwrap();
            let (p_b, r_b) = prec_rec(&r_pred_inst, &r_gt_inst, &r_pred_sem, &r_gt_sem, 0.5).unwrap();
            assert!((p_a - p_b).abs() < 1e-12);
            assert!((r_a - r_b).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn all_metric_values_stay_in_unit_range(
            seed in 0u64..1000,
            n in 4usize..40,
            l_c in 1usize..4,
            n_inst in 1usize..5,
        ) {
            use rand::Rng;
            let mut rng = crate::seeding::rng_for(seed, 0xbd5, 0);
            let gt_sem: Vec<usize> = (0..n).map(|_| rng.random_range(0..l_c)).collect();
            let pred_sem: Vec<usize> = (0..n).map(|_| rng.random_range(0..l_c)).collect();
            let gt_inst: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_inst)).collect();
            let pred_inst: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_inst)).collect();

            let s = semantic_metrics(&pred_sem, &gt_sem, l_c).unwrap();
            for v in [s.oacc, s.macc, s.miou] {
                proptest::prop_assert!((0.0..=1.0).contains(&v));
            }
            let (mcov, mwcov) = coverage_metrics(&pred_inst, &gt_inst, &gt_sem).unwrap();
            let (mprec, mrec) = prec_rec(&pred_inst, &gt_inst, &pred_sem, &gt_sem, 0.5).unwrap();
            for v in [mcov, mwcov, mprec, mrec] {
                proptest::prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
