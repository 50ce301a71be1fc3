//! Seeded training loop: blocks visited in shuffled order, gradients
//! averaged per batch, Adam with a halving learning-rate staircase, one log
//! line and one checkpoint per epoch.

use crate::blocks::{sample_block, split_blocks, Block};
use crate::config::RunConfig;
use crate::data_io::{Checkpoint, PointCloud};
use crate::diffcore::{Adam, AdamConfig, AdamEntry, Tape};
use crate::error::{Error, Result};
use crate::losses::total_loss;
use crate::model::{forward, ModelParams};
use crate::seeding::{rng_for, streams};
use rand::seq::SliceRandom;

/// Everything produced at the end of one epoch. The checkpoint carries the
/// full optimizer state, so training can resume from it bitwise.
#[derive(Debug, Clone)]
pub struct EpochSummary {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Log line: mean loss terms over this epoch's blocks.
    pub line: String,
    pub checkpoint: Checkpoint,
}

struct TrainBlock {
    scene: usize,
    block: Block,
    /// Stable id used to derive the per-(epoch, block) sampling stream.
    index: u64,
}

fn collect_blocks(cfg: &RunConfig, scenes: &[PointCloud]) -> Result<Vec<TrainBlock>> {
    let mut out = Vec::new();
    for (si, scene) in scenes.iter().enumerate() {
        scene.validate(cfg.model.l_c)?;
        scene.sem()?;
        scene.inst()?;
        let expected = if scene.rgb.is_some() { 9 } else { 3 };
        if expected != cfg.model.d_in {
            return Err(Error::Config(format!(
                "scene {si} provides {expected}-dim features but the model expects {}",
                cfg.model.d_in
            )));
        }
        for block in split_blocks(scene, cfg.block_size, cfg.stride)? {
            let index = out.len() as u64;
            out.push(TrainBlock { scene: si, block, index });
        }
    }
    Ok(out)
}

fn make_checkpoint(cfg: &RunConfig, params: &ModelParams, adam: &Adam) -> Checkpoint {
    let (m, v) = adam.moments();
    Checkpoint {
        config_text: cfg.serialize(),
        params: params
            .entries()
            .into_iter()
            .map(|(name, t)| (name, t.clone()))
            .collect(),
        step: adam.step_count(),
        moments: Some(m.iter().cloned().zip(v.iter().cloned()).collect()),
    }
}

/// Trains on the given scenes, invoking `on_epoch` after every epoch with
/// the log line and a resumable checkpoint, and returns the final
/// checkpoint. With `resume`, continues a run saved by this same function
/// under an identical configuration; the continued run is bitwise identical
/// to the uninterrupted one.
pub fn train(
    cfg: &RunConfig,
    scenes: &[PointCloud],
    resume: Option<&Checkpoint>,
    mut on_epoch: impl FnMut(&EpochSummary) -> Result<()>,
) -> Result<Checkpoint> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::Data("no training scenes".into()));
    }
    let blocks = collect_blocks(cfg, scenes)?;
    let n_blocks = blocks.len();
    let steps_per_epoch = n_blocks.div_ceil(cfg.batch_size) as u64;

    let (mut params, mut adam, start_epoch) = match resume {
        None => {
            let params = ModelParams::init(&cfg.model, cfg.seed)?;
            let adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
            (params, adam, 0usize)
        }
        Some(ckpt) => {
            let saved = RunConfig::parse(&ckpt.config_text)?;
            if saved != *cfg {
                return Err(Error::Config(
                    "resume checkpoint was trained under a different configuration".into(),
                ));
            }
            let params = ModelParams::from_named(&cfg.model, &ckpt.params)?;
            if ckpt.step % steps_per_epoch != 0 {
                return Err(Error::Config(format!(
                    "checkpoint step {} is not an epoch boundary ({} steps per epoch)",
                    ckpt.step, steps_per_epoch
                )));
            }
            let moments = ckpt.moments.as_ref().ok_or_else(|| {
                Error::Config("resume checkpoint lacks optimizer state".into())
            })?;
            let (m, v): (Vec<Vec<f64>>, Vec<Vec<f64>>) = moments.iter().cloned().unzip();
            let adam = Adam::restore(AdamConfig { lr: cfg.lr, ..AdamConfig::default() }, ckpt.step, m, v);
            (params, adam, (ckpt.step / steps_per_epoch) as usize)
        }
    };

    let entry_count = params.entries().len();
    let mut last = make_checkpoint(cfg, &params, &adam);
    for epoch in start_epoch..cfg.epochs {
        let mut order: Vec<usize> = (0..n_blocks).collect();
        order.shuffle(&mut rng_for(cfg.seed, streams::SHUFFLE, epoch as u64));

        let mut sums = [0.0f64; 6]; // semantic, var, dist, reg, emed, total
        for chunk in order.chunks(cfg.batch_size) {
            let mut grad_acc: Vec<Vec<f64>> = Vec::with_capacity(entry_count);
            for batch_pos in 0..chunk.len() {
                let tb = &blocks[chunk[batch_pos]];
                let scene = &scenes[tb.scene];
                let sample = sample_block(
                    scene,
                    &tb.block,
                    cfg.block_size,
                    cfg.model.l_p,
                    cfg.seed,
                    (epoch as u64) * (n_blocks as u64) + tb.index,
                )?;
                let sem_labels: Vec<usize> =
                    sample.sampled.iter().map(|&i| scene.sem().unwrap()[i]).collect();
                let inst_labels: Vec<usize> =
                    sample.sampled.iter().map(|&i| scene.inst().unwrap()[i]).collect();

                let mut tape = Tape::new();
                let pts = tape.constant(sample.features);
                let ids = params.push(&mut tape, true);
                let (logits, emb) = forward(&mut tape, pts, &ids, &cfg.model)?;
                let (total, report) =
                    total_loss(&mut tape, logits, emb, &sem_labels, &inst_labels, &cfg.weights)?;
                tape.backward(total)?;

                for (k, (_, id)) in ids.entries().iter().enumerate() {
                    let g = tape.grad(*id);
                    if batch_pos == 0 {
                        grad_acc.push(g.to_vec());
                    } else {
                        for (a, &v) in grad_acc[k].iter_mut().zip(g) {
                            *a += v;
                        }
                    }
                }
                for (s, v) in sums.iter_mut().zip([
                    report.semantic,
                    report.ins_var,
                    report.ins_dist,
                    report.ins_reg,
                    report.emed,
                    report.total,
                ]) {
                    *s += v;
                }
            }
            if chunk.len() > 1 {
                let scale = 1.0 / chunk.len() as f64;
                for g in grad_acc.iter_mut() {
                    for v in g.iter_mut() {
                        *v *= scale;
                    }
                }
            }

            let halvings = (adam.step_count() / cfg.decay_steps as u64) as i32;
            adam.set_lr(cfg.lr * 0.5f64.powi(halvings));
            let mut slots = params.entries_mut();
            let mut entries: Vec<AdamEntry> = slots
                .iter_mut()
                .zip(&grad_acc)
                .map(|((name, tensor), grad)| AdamEntry {
                    name,
                    value: tensor.values_mut(),
                    grad,
                })
                .collect();
            adam.step(&mut entries)?;
        }

        let n = n_blocks as f64;
        let line = format!(
            "epoch {} semantic {:.6} ins_var {:.6} ins_dist {:.6} ins_reg {:.6} emed {:.6} total {:.6}",
            epoch + 1,
            sums[0] / n,
            sums[1] / n,
            sums[2] / n,
            sums[3] / n,
            sums[4] / n,
            sums[5] / n,
        );
        last = make_checkpoint(cfg, &params, &adam);
        on_epoch(&EpochSummary { epoch: epoch + 1, line, checkpoint: last.clone() })?;
    }
    Ok(last)
}
