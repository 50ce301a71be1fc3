//! Scene-level inference: blocks are sampled, run through the network,
//! clustered, merged into scene-global instances, voted into per-instance
//! semantics, and written back to every input point. Also hosts the
//! evaluation pairing and the embedding statistics table.

use crate::blocks::{block_merging, sample_block, split_blocks, BlockVotes, MergeGrid};
use crate::cluster::{mean_removal, mean_shift, semantic_mode_vote};
use crate::config::RunConfig;
use crate::data_io::PointCloud;
use crate::error::{Error, Result};
use crate::metrics::{instance_report, semantic_metrics, InsReport, SemReport};
use crate::model::{infer, ModelParams};

fn check_feature_width(cfg: &RunConfig, scene: &PointCloud) -> Result<()> {
    let provided = if scene.rgb.is_some() { 9 } else { 3 };
    if provided != cfg.model.d_in {
        return Err(Error::Config(format!(
            "scene provides {provided}-dim features but the model expects {}",
            cfg.model.d_in
        )));
    }
    Ok(())
}

fn argmax_rows(logits: &crate::diffcore::Tensor) -> Vec<usize> {
    let cols = logits.shape()[1];
    (0..logits.shape()[0])
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0usize;
            for c in 1..cols {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Predicts a semantic class and an instance id for every point of `scene`.
///
/// Blocks are processed in index order: sample, forward pass, per-row class
/// argmax, optional embedding mean removal (variant-controlled), mean-shift
/// clustering, and grid merging into scene-global instance ids. A scene-wide
/// mode vote then makes semantics uniform within each merged instance before
/// the block votes are written back to the full point set.
pub fn infer_scene(
    cfg: &RunConfig,
    params: &ModelParams,
    scene: &PointCloud,
) -> Result<(Vec<usize>, Vec<usize>)> {
    cfg.validate()?;
    check_feature_width(cfg, scene)?;
    let blocks = split_blocks(scene, cfg.block_size, cfg.stride)?;
    let mut grid = MergeGrid::new(cfg.merge_cell)?;
    let mut votes: Vec<BlockVotes> = Vec::with_capacity(blocks.len());
    for (bi, block) in blocks.iter().enumerate() {
        let sample = sample_block(scene, block, cfg.block_size, cfg.model.l_p, cfg.seed, bi as u64)?;
        let (logits, emb) = infer(&sample.features, params, &cfg.model)?;
        let sem = argmax_rows(&logits);
        let emb = if cfg.variant.mean_removal_at_inference() {
            mean_removal(&emb)?
        } else {
            emb
        };
        let clusters = mean_shift(&emb, &cfg.cluster)?;
        let coords: Vec<[f64; 3]> = sample.sampled.iter().map(|&i| scene.xyz[i]).collect();
        let inst = block_merging(&mut grid, &coords, &clusters.labels, cfg.merge_threshold)?;
        votes.push(BlockVotes { sampled: sample.sampled, sem, inst });
    }

    // One scene-wide vote over every sampled row: each global instance gets
    // the modal class of all rows assigned to it, across blocks.
    let all_inst: Vec<usize> = votes.iter().flat_map(|v| v.inst.iter().copied()).collect();
    let all_sem: Vec<usize> = votes.iter().flat_map(|v| v.sem.iter().copied()).collect();
    let (_, voted) = semantic_mode_vote(&all_inst, &all_sem)?;
    let mut offset = 0usize;
    for v in votes.iter_mut() {
        let len = v.sem.len();
        v.sem.copy_from_slice(&voted[offset..offset + len]);
        offset += len;
    }

    crate::blocks::write_back(scene, &votes)
}

/// Scores a predicted labeling against ground truth. Both clouds must hold
/// the same points in the same order with semantic and instance columns.
pub fn evaluate(
    pred: &PointCloud,
    gt: &PointCloud,
    l_c: usize,
    iou_threshold: f64,
) -> Result<(SemReport, InsReport)> {
    if pred.len() != gt.len() {
        return Err(Error::Data(format!(
            "prediction has {} points but ground truth has {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.xyz != gt.xyz {
        return Err(Error::Data(
            "prediction and ground truth coordinates differ; the files must describe \
             the same points in the same order"
                .into(),
        ));
    }
    let sem = semantic_metrics(pred.sem()?, gt.sem()?, l_c)?;
    let ins = instance_report(pred.inst()?, gt.inst()?, pred.sem()?, gt.sem()?, l_c, iou_threshold)?;
    Ok((sem, ins))
}

/// Per-dimension mean and variance of the instance embeddings a model emits
/// over the given scenes, as a plot-ready text table: one `mean variance`
/// row per embedding dimension, ordered by mean descending (ties keep
/// dimension order). Embeddings are collected exactly as inference sees
/// them, including the variant's mean-removal post-process.
pub fn embed_stats(
    cfg: &RunConfig,
    params: &ModelParams,
    scenes: &[PointCloud],
) -> Result<String> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::Data("no scenes to analyze".into()));
    }
    let dims = cfg.model.l_e;
    let mut sum = vec![0.0f64; dims];
    let mut sumsq = vec![0.0f64; dims];
    let mut count = 0u64;
    for scene in scenes {
        check_feature_width(cfg, scene)?;
        for (bi, block) in split_blocks(scene, cfg.block_size, cfg.stride)?.iter().enumerate() {
            let sample =
                sample_block(scene, block, cfg.block_size, cfg.model.l_p, cfg.seed, bi as u64)?;
            let (_, emb) = infer(&sample.features, params, &cfg.model)?;
            let emb = if cfg.variant.mean_removal_at_inference() {
                mean_removal(&emb)?
            } else {
                emb
            };
            for r in 0..emb.shape()[0] {
                for (d, &v) in emb.row(r).iter().enumerate() {
                    sum[d] += v;
                    sumsq[d] += v * v;
                }
            }
            count += emb.shape()[0] as u64;
        }
    }
    let n = count as f64;
    let mut rows: Vec<(f64, f64, usize)> = (0..dims)
        .map(|d| {
            let mean = sum[d] / n;
            (mean, (sumsq[d] / n - mean * mean).max(0.0), d)
        })
        .collect();
    rows.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.2.cmp(&b.2)));
    let mut out = String::new();
    for (mean, var, _) in rows {
        out.push_str(&format!("{mean:.6} {var:.6}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Variant;
    use crate::data_io::{generate_scene, SceneSpec};
    use crate::seeding::{streams, subseed};

    fn toy_config(variant: Variant) -> RunConfig {
        let mut text = format!("variant={}\n", variant.name());
        text.push_str(
            "l_p=64\nl_f=16\nl_e=4\nencoder_widths=16,16\nepochs=1\n\
             gen_extent=1.2,1.2,0.8\ngen_objects=2,2\ngen_object_size=0.2,0.3\n\
             gen_points_per_object=60,80\nseed=11\n",
        );
        RunConfig::parse(&text).unwrap()
    }

    fn toy_scene(cfg: &RunConfig) -> PointCloud {
        let spec = SceneSpec {
            seed: subseed(cfg.seed, streams::SCENE, 0),
            ..cfg.scene.clone()
        };
        generate_scene(&spec).unwrap()
    }

    #[test]
    fn labels_every_point_of_the_scene() {
        let cfg = toy_config(Variant::ThreeDCfs);
        let scene = toy_scene(&cfg);
        let params = ModelParams::init(&cfg.model, cfg.seed).unwrap();
        let (sem, inst) = infer_scene(&cfg, &params, &scene).unwrap();
        assert_eq!(sem.len(), scene.len());
        assert_eq!(inst.len(), scene.len());
        assert!(sem.iter().all(|&c| c < cfg.model.l_c));
        // Dense instance ids, and semantics uniform within each instance
        // wherever that instance's points were actually sampled.
        let max_id = *inst.iter().max().unwrap();
        let seen: std::collections::BTreeSet<usize> = inst.iter().copied().collect();
        assert_eq!(seen.len(), max_id + 1);
    }

    #[test]
    fn inference_is_deterministic() {
        let cfg = toy_config(Variant::CfsmPost);
        let scene = toy_scene(&cfg);
        let params = ModelParams::init(&cfg.model, cfg.seed).unwrap();
        let a = infer_scene(&cfg, &params, &scene).unwrap();
        let b = infer_scene(&cfg, &params, &scene).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_feature_width_mismatch() {
        let cfg = toy_config(Variant::Baseline);
        let mut scene = toy_scene(&cfg);
        scene.rgb = None; // 3-dim features against a 9-dim model
        let params = ModelParams::init(&cfg.model, cfg.seed).unwrap();
        match infer_scene(&cfg, &params, &scene) {
            Err(Error::Config(msg)) => assert!(msg.contains("expects 9")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn perfect_prediction_scores_ones() {
        let cfg = toy_config(Variant::Baseline);
        let scene = toy_scene(&cfg);
        let (sem, ins) = evaluate(&scene, &scene, cfg.model.l_c, 0.5).unwrap();
        assert_eq!(sem.oacc, 1.0);
        assert_eq!(sem.miou, 1.0);
        assert_eq!(ins.mcov, 1.0);
        assert_eq!(ins.mprec, 1.0);
    }

    #[test]
    fn evaluate_rejects_misaligned_clouds() {
        let cfg = toy_config(Variant::Baseline);
        let gt = toy_scene(&cfg);
        let mut pred = gt.clone();
        pred.xyz[0][0] += 0.5;
        match evaluate(&pred, &gt, cfg.model.l_c, 0.5) {
            Err(Error::Data(msg)) => assert!(msg.contains("coordinates differ")),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn embed_stats_emits_one_sorted_row_per_dimension() {
        let cfg = toy_config(Variant::Baseline);
        let scene = toy_scene(&cfg);
        let params = ModelParams::init(&cfg.model, cfg.seed).unwrap();
        let table = embed_stats(&cfg, &params, &[scene]).unwrap();
        let rows: Vec<Vec<f64>> = table
            .lines()
            .map(|l| l.split(' ').map(|t| t.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), cfg.model.l_e);
        for r in &rows {
            assert_eq!(r.len(), 2);
            assert!(r[1] >= 0.0);
        }
        for w in rows.windows(2) {
            assert!(w[0][0] >= w[1][0], "means must be sorted descending");
        }
    }

    #[test]
    fn mean_removal_variant_reports_zero_means() {
        let cfg = toy_config(Variant::CfsmPost);
        let scene = toy_scene(&cfg);
        let params = ModelParams::init(&cfg.model, cfg.seed).unwrap();
        let table = embed_stats(&cfg, &params, &[scene]).unwrap();
        for line in table.lines() {
            let mean: f64 = line.split(' ').next().unwrap().parse().unwrap();
            assert!(mean.abs() < 1e-12, "mean {mean} should vanish after removal");
        }
    }
}
