//! Scene decomposition into overlapping ground-plane blocks, fixed-size
//! block sampling, and the merge stage that reconciles per-block instance
//! labels into scene-global ids.

use crate::data_io::PointCloud;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::seeding::{rng_for, streams};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Geometric slack for block membership and coverage at the room boundary.
const EDGE_EPS: f64 = 1e-9;

/// One XY tile of a scene: which scene points fall inside it and where its
/// minimum corner lies.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub indices: Vec<usize>,
    pub origin: [f64; 2],
}

/// A fixed-size draw from one block, ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSample {
    /// `l_p x d_in` feature matrix (d_in = 9 with colors, 3 without).
    pub features: Tensor,
    /// Scene point index behind each sampled row.
    pub sampled: Vec<usize>,
}

fn axis_block_count(extent: f64, block_size: f64, stride: f64) -> usize {
    if extent <= block_size {
        1
    } else {
        ((extent - block_size) / stride - EDGE_EPS).ceil() as usize + 1
    }
}

/// Tiles the scene's XY bounding rectangle with `block_size`-sized blocks at
/// the given stride and collects each block's points (membership is a closed
/// interval on both edges, so boundary points can join several blocks).
/// Blocks that catch no points are skipped, and every scene point lands in
/// at least one emitted block.
pub fn split_blocks(scene: &PointCloud, block_size: f64, stride: f64) -> Result<Vec<Block>> {
    if !(block_size > 0.0) {
        return Err(Error::Config(format!("block size must be > 0, got {block_size}")));
    }
    if !(stride > 0.0) || stride > block_size {
        return Err(Error::Config(format!(
            "stride must satisfy 0 < stride ≤ block size, got {stride} vs {block_size}"
        )));
    }
    if scene.is_empty() {
        return Err(Error::Data("cannot split an empty scene".into()));
    }
    let (lo, hi) = scene.bounds();
    let nx = axis_block_count(hi[0] - lo[0], block_size, stride);
    let ny = axis_block_count(hi[1] - lo[1], block_size, stride);

    let mut blocks = Vec::new();
    for ix in 0..nx {
        for iy in 0..ny {
            let origin = [lo[0] + ix as f64 * stride, lo[1] + iy as f64 * stride];
            let indices: Vec<usize> = scene
                .xyz
                .iter()
                .enumerate()
                .filter(|(_, p)| {
                    p[0] >= origin[0] - EDGE_EPS
                        && p[0] <= origin[0] + block_size + EDGE_EPS
                        && p[1] >= origin[1] - EDGE_EPS
                        && p[1] <= origin[1] + block_size + EDGE_EPS
                })
                .map(|(i, _)| i)
                .collect();
            if !indices.is_empty() {
                blocks.push(Block { indices, origin });
            }
        }
    }
    Ok(blocks)
}

fn normalized(v: f64, min: f64, extent: f64) -> f64 {
    if extent > 0.0 {
        (v - min) / extent
    } else {
        0.0
    }
}

/// Draws exactly `l_p` rows from a block: a seeded partial shuffle without
/// replacement when the block has enough points, independent draws with
/// replacement otherwise. Features per row are the block-centered XY, the
/// floor-relative Z, the color, and the scene-normalized position (the last
/// six only when colors exist).
pub fn sample_block(
    scene: &PointCloud,
    block: &Block,
    block_size: f64,
    l_p: usize,
    base_seed: u64,
    block_index: u64,
) -> Result<BlockSample> {
    if l_p == 0 {
        return Err(Error::Config("block sample size must be ≥ 1".into()));
    }
    if block.indices.is_empty() {
        return Err(Error::Data("cannot sample an empty block".into()));
    }
    let mut rng = rng_for(base_seed, streams::SAMPLE, block_index);
    let count = block.indices.len();
    let sampled: Vec<usize> = if count >= l_p {
        let mut pool: Vec<usize> = block.indices.clone();
        for i in 0..l_p {
            let j = rng.random_range(i..count);
            pool.swap(i, j);
        }
        pool.truncate(l_p);
        pool
    } else {
        (0..l_p)
            .map(|_| block.indices[rng.random_range(0..count)])
            .collect()
    };

    let (lo, hi) = scene.bounds();
    let extent = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let center = [
        block.origin[0] + 0.5 * block_size,
        block.origin[1] + 0.5 * block_size,
    ];
    let d_in = if scene.rgb.is_some() { 9 } else { 3 };
    let mut values = Vec::with_capacity(l_p * d_in);
    for &idx in &sampled {
        let [x, y, z] = scene.xyz[idx];
        values.extend([x - center[0], y - center[1], z - lo[2]]);
        if let Some(rgb) = &scene.rgb {
            values.extend(rgb[idx]);
            values.extend([
                normalized(x, lo[0], extent[0]),
                normalized(y, lo[1], extent[1]),
                normalized(z, lo[2], extent[2]),
            ]);
        }
    }
    Ok(BlockSample {
        features: Tensor::matrix(l_p, d_in, values)?,
        sampled,
    })
}

/// Sparse voxel map carrying scene-global instance ids across blocks.
#[derive(Debug, Clone)]
pub struct MergeGrid {
    cell_size: f64,
    cells: BTreeMap<(i64, i64, i64), usize>,
    next_id: usize,
}

impl MergeGrid {
    pub fn new(cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) {
            return Err(Error::Config(format!("merge cell size must be > 0, got {cell_size}")));
        }
        Ok(MergeGrid {
            cell_size,
            cells: BTreeMap::new(),
            next_id: 0,
        })
    }

    /// Number of global ids allocated so far; ids are dense in `[0, this)`.
    pub fn id_count(&self) -> usize {
        self.next_id
    }

    fn cell_of(&self, p: [f64; 3]) -> (i64, i64, i64) {
        (
            (p[0] / self.cell_size).floor() as i64,
            (p[1] / self.cell_size).floor() as i64,
            (p[2] / self.cell_size).floor() as i64,
        )
    }
}

/// Folds one block's local instance labels into the grid, returning a
/// scene-global id per row.
///
/// Each local instance claims the voxel cells under its points. If one
/// existing global id already covers strictly more than `overlap_threshold`
/// of those cells, the instance adopts it; otherwise it gets a fresh id.
/// Either way the instance then writes its id into all its cells. Local
/// instances are processed in ascending id order and frequency ties adopt
/// the smaller global id, so merging is deterministic; re-merging the same
/// block is a no-op.
pub fn block_merging(
    grid: &mut MergeGrid,
    coords: &[[f64; 3]],
    local_inst: &[usize],
    overlap_threshold: f64,
) -> Result<Vec<usize>> {
    if coords.len() != local_inst.len() {
        return Err(Error::Dimension(format!(
            "{} coordinates for {} instance labels",
            coords.len(),
            local_inst.len()
        )));
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (row, &id) in local_inst.iter().enumerate() {
        members.entry(id).or_default().push(row);
    }

    let mut global_of_local: BTreeMap<usize, usize> = BTreeMap::new();
    for (&local, rows) in &members {
        let cells: BTreeSet<(i64, i64, i64)> =
            rows.iter().map(|&r| grid.cell_of(coords[r])).collect();
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for cell in &cells {
            if let Some(&id) = grid.cells.get(cell) {
                *votes.entry(id).or_insert(0) += 1;
            }
        }
        let mut best: Option<(usize, usize)> = None; // (id, count)
        for (id, count) in votes {
            if best.map_or(true, |(_, c)| count > c) {
                best = Some((id, count));
            }
        }
        let global = match best {
            Some((id, count)) if count as f64 > overlap_threshold * cells.len() as f64 => id,
            _ => {
                let id = grid.next_id;
                grid.next_id += 1;
                id
            }
        };
        for cell in cells {
            grid.cells.insert(cell, global);
        }
        global_of_local.insert(local, global);
    }
    Ok(local_inst.iter().map(|l| global_of_local[l]).collect())
}

/// One block's final predictions, keyed by the scene indices it sampled.
#[derive(Debug, Clone)]
pub struct BlockVotes {
    pub sampled: Vec<usize>,
    pub sem: Vec<usize>,
    pub inst: Vec<usize>,
}

/// Combines per-block predictions into one label pair per scene point.
///
/// Semantic labels take the majority over all blocks that sampled the point
/// (ties to the lower class id); instance ids come from the last block that
/// sampled it. Points never sampled copy both labels from the nearest
/// sampled point. Instance ids are finally renumbered densely in order of
/// first appearance.
pub fn write_back(scene: &PointCloud, votes: &[BlockVotes]) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = scene.len();
    let mut sem_votes: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); n];
    let mut inst: Vec<Option<usize>> = vec![None; n];
    for block in votes {
        if block.sampled.len() != block.sem.len() || block.sampled.len() != block.inst.len() {
            return Err(Error::Dimension(format!(
                "block votes disagree: {} indices, {} sem, {} inst",
                block.sampled.len(),
                block.sem.len(),
                block.inst.len()
            )));
        }
        for ((&p, &s), &i) in block.sampled.iter().zip(&block.sem).zip(&block.inst) {
            if p >= n {
                return Err(Error::Data(format!("sampled index {p} outside scene of {n} points")));
            }
            *sem_votes[p].entry(s).or_insert(0) += 1;
            inst[p] = Some(i);
        }
    }

    let labeled: Vec<usize> = (0..n).filter(|&p| inst[p].is_some()).collect();
    if labeled.is_empty() {
        return Err(Error::Data("write_back: no sampled points".into()));
    }
    let mut sem_out = vec![0usize; n];
    let mut inst_out = vec![0usize; n];
    for &p in &labeled {
        let mut best_class = 0;
        let mut best_count = 0;
        for (&class, &count) in &sem_votes[p] {
            if count > best_count {
                best_count = count;
                best_class = class;
            }
        }
        sem_out[p] = best_class;
        inst_out[p] = inst[p].expect("labeled");
    }
    for p in 0..n {
        if inst[p].is_none() {
            let mut nearest = labeled[0];
            let mut nearest_d = f64::INFINITY;
            for &q in &labeled {
                let d: f64 = (0..3)
                    .map(|a| (scene.xyz[p][a] - scene.xyz[q][a]).powi(2))
                    .sum();
                if d < nearest_d {
                    nearest_d = d;
                    nearest = q;
                }
            }
            sem_out[p] = sem_out[nearest];
            inst_out[p] = inst_out[nearest];
        }
    }

    // Dense, first-appearance instance numbering.
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    for id in inst_out.iter_mut() {
        let next = remap.len();
        *id = *remap.entry(*id).or_insert(next);
    }
    Ok((sem_out, inst_out))
}
